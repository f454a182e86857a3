"""First-digit and mantissa forensics for reported count series.

The leading-digit law P(d) = log10(1 + 1/d) holds for data spanning
several orders of magnitude, which cumulative counts of a growing
epidemic do. Conformance is scored four ways: a chi-square statistic
against the nine-digit law, a Kolmogorov-Smirnov distance on the digit
CDF, the mean absolute deviation of the digit proportions, and per-digit
z-scores. The mantissa (fractional part of log10) is uniform on [0, 1)
under the law, so its mean sits near 0.5; a depressed mean flags counts
that cling to low leading digits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats

from .dataset import CaseSeries, Period, slice_period
from .errors import EmptyAfterFilter, EmptySlice, NonPositive, SkippedBelowThreshold

logger = logging.getLogger(__name__)

DIGITS = np.arange(1, 10)
_PMF = np.log10(1.0 + 1.0 / DIGITS)
_PMF.setflags(write=False)

#: chi-square critical value at alpha=0.05 with 8 degrees of freedom
CHI2_CRITICAL_005 = float(stats.chi2.ppf(0.95, 8))

#: asymptotic KS coefficient for alpha=0.05 (threshold is 1.36 / sqrt(n))
KS_COEFFICIENT_005 = 1.36

#: mean-absolute-deviation bands: close / acceptable / marginal edges
MAD_BANDS = (0.006, 0.012, 0.015)


class MadBand(str, Enum):
    CLOSE = "close"
    ACCEPTABLE = "acceptable"
    MARGINAL = "marginal"
    NONCONFORMING = "nonconforming"


class Classification(str, Enum):
    CONFORMING = "conforming"
    FLATTENING_SUSPECTED = "flattening_suspected"
    UNDERREPORTING_SUSPECTED = "underreporting_suspected"
    INCONCLUSIVE = "inconclusive"


def benford_pmf() -> np.ndarray:
    """Expected proportion of each leading digit 1..9."""
    return _PMF.copy()


def _significands(values: np.ndarray) -> np.ndarray:
    """Scale positive values into [1, 10) by powers of ten.

    floor(log10(x)) can come out one off at decade boundaries because of
    rounding, so the result is nudged back into range; this also makes
    exact powers of ten land exactly on 1.0.
    """
    x = np.asarray(values, dtype=float)
    exponent = np.floor(np.log10(x))
    s = x / np.power(10.0, exponent)
    s = np.where(s >= 10.0, s / 10.0, s)
    s = np.where(s < 1.0, s * 10.0, s)
    return s


def first_digit(value) -> int:
    """Leading significant digit of a positive number.

    The digit is scale free: 123.0 and 0.016 lead with 1. Zero,
    negatives, NaN and infinities raise NonPositive.
    """
    x = float(value)
    if not np.isfinite(x) or x <= 0.0:
        raise NonPositive(f"first digit undefined for {value!r}")
    return int(_significands(np.array([x]))[0])


@dataclass(frozen=True)
class DigitHistogram:
    """Counts of leading digits 1..9 over n usable values."""

    counts: np.ndarray
    n: int
    skipped: int = 0

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (9,):
            raise ValueError("counts must have nine entries")
        if counts.sum() != self.n:
            raise ValueError("counts must sum to n")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def proportions(self) -> np.ndarray:
        return self.counts / self.n


def _usable(values) -> tuple[np.ndarray, int]:
    x = np.asarray(values, dtype=float).ravel()
    mask = np.isfinite(x) & (x > 0.0)
    kept = x[mask]
    if kept.size == 0:
        raise EmptyAfterFilter("no positive finite values to analyze")
    return kept, int(x.size - kept.size)


def digit_histogram(values) -> DigitHistogram:
    """Tally leading digits, skipping zeros, negatives and non-finite
    entries (the skip count is kept on the histogram)."""
    kept, skipped = _usable(values)
    digits = _significands(kept).astype(np.int64)
    counts = np.bincount(digits, minlength=10)[1:10]
    return DigitHistogram(counts=counts, n=int(kept.size), skipped=skipped)


def chi_square(hist: DigitHistogram, alpha: float = 0.05):
    """Pearson chi-square of the digit counts against the law.

    Returns (statistic, passed) where passed compares against the
    critical value at the given alpha with 8 degrees of freedom. A
    warning is logged when any expected count falls below 5, where the
    asymptotic distribution is shaky.
    """
    expected = hist.n * _PMF
    if (expected < 5.0).any():
        logger.warning("chi-square expected counts below 5 at n=%d", hist.n)
    statistic = float(((hist.counts - expected) ** 2 / expected).sum())
    critical = float(stats.chi2.ppf(1.0 - alpha, 8))
    return statistic, statistic < critical


def ks_statistic(hist: DigitHistogram):
    """Kolmogorov-Smirnov distance between the observed and expected
    digit CDFs, with the asymptotic pass threshold 1.36 / sqrt(n)."""
    observed = np.cumsum(hist.proportions)
    expected = np.cumsum(_PMF)
    statistic = float(np.abs(observed - expected).max())
    return statistic, bool(statistic < KS_COEFFICIENT_005 / np.sqrt(hist.n))


def mad(hist: DigitHistogram, bands=MAD_BANDS):
    """Mean absolute deviation of digit proportions from the law,
    labelled with its conformance band."""
    value = float(np.abs(hist.proportions - _PMF).mean())
    close, acceptable, marginal = bands
    if value < close:
        band = MadBand.CLOSE
    elif value < acceptable:
        band = MadBand.ACCEPTABLE
    elif value < marginal:
        band = MadBand.MARGINAL
    else:
        band = MadBand.NONCONFORMING
    return value, band


def z_scores(hist: DigitHistogram) -> np.ndarray:
    """Per-digit z-score of the observed proportion with a continuity
    correction of 1/(2n); deviations inside the correction score zero."""
    prop = hist.proportions
    deviation = np.abs(prop - _PMF) - 1.0 / (2.0 * hist.n)
    deviation = np.clip(deviation, 0.0, None)
    return deviation / np.sqrt(_PMF * (1.0 - _PMF) / hist.n)


def mantissa_stats(values):
    """Mean fractional part of log10 over the usable values.

    Returns (mean, count). Exact powers of ten contribute exactly zero.
    """
    kept, _ = _usable(values)
    mantissas = np.log10(_significands(kept))
    return float(mantissas.mean()), int(kept.size)


@dataclass(frozen=True)
class BenfordReport:
    """All digit diagnostics for one period of one series."""

    period: Period
    n: int
    skipped: int
    counts: np.ndarray
    chi2: float
    chi2_pass: bool
    ks: float
    ks_pass: bool
    mad: float
    mad_band: MadBand
    z: np.ndarray
    mantissa_mean: float

    @property
    def passed(self) -> bool:
        """Both distribution tests pass."""
        return self.chi2_pass and self.ks_pass

    def as_dict(self) -> dict:
        return {
            "period": str(self.period),
            "n": self.n,
            "skipped": self.skipped,
            "counts": [int(c) for c in self.counts],
            "chi2": self.chi2,
            "chi2_pass": self.chi2_pass,
            "ks": self.ks,
            "ks_pass": self.ks_pass,
            "mad": self.mad,
            "mad_band": self.mad_band.value,
            "z": [float(v) for v in self.z],
            "mantissa_mean": self.mantissa_mean,
        }


def analyze_values(values, period: Period, alpha: float = 0.05) -> BenfordReport:
    """Run every digit diagnostic over one batch of values."""
    hist = digit_histogram(values)
    chi2, chi2_ok = chi_square(hist, alpha=alpha)
    ks, ks_ok = ks_statistic(hist)
    mad_value, band = mad(hist)
    mantissa_mean, _ = mantissa_stats(values)
    return BenfordReport(
        period=period, n=hist.n, skipped=hist.skipped, counts=hist.counts,
        chi2=chi2, chi2_pass=chi2_ok, ks=ks, ks_pass=ks_ok,
        mad=mad_value, mad_band=band, z=z_scores(hist),
        mantissa_mean=mantissa_mean,
    )


@dataclass(frozen=True)
class AuditVerdict:
    """Outcome of auditing one county across nested reporting periods."""

    county: str
    periods: tuple[Period, ...]
    reports: tuple
    classification: Classification
    rationale: str

    def as_dict(self) -> dict:
        return {
            "county": self.county,
            "classification": self.classification.value,
            "rationale": self.rationale,
            "periods": [
                r.as_dict() if r is not None else {"period": str(p),
                                                   "error": "no usable values"}
                for p, r in zip(self.periods, self.reports)
            ],
        }


def _classify(reports) -> tuple[Classification, str]:
    """Ordered decision rule over per-period reports.

    1. every period passes both tests: conforming
    2. earliest passes, latest fails, latest mantissa mean >= 0.5:
       flattening suspected (counts stalled near high digits)
    3. latest mantissa mean < 0.5, or earliest fails while latest
       passes: underreporting suspected
    4. anything else: inconclusive
    """
    earliest = reports[0]
    latest = reports[-1]
    if earliest is None or latest is None:
        return (Classification.INCONCLUSIVE,
                "first or last period has no usable report")
    if all(r is not None and r.passed for r in reports):
        return (Classification.CONFORMING,
                "all periods pass chi-square and KS")
    if earliest.passed and not latest.passed and latest.mantissa_mean >= 0.5:
        return (Classification.FLATTENING_SUSPECTED,
                f"earliest period passes, latest fails with mantissa mean "
                f"{latest.mantissa_mean:.3f} >= 0.5")
    if latest.mantissa_mean < 0.5:
        return (Classification.UNDERREPORTING_SUSPECTED,
                f"latest period mantissa mean {latest.mantissa_mean:.3f} "
                f"< 0.5")
    if not earliest.passed and latest.passed:
        return (Classification.UNDERREPORTING_SUSPECTED,
                "earliest period fails while the latest passes")
    return (Classification.INCONCLUSIVE,
            "mixed test results fit no single pattern")


def audit(series: CaseSeries, periods, min_total: int = 5000,
          signal: str = "cumulative", alpha: float = 0.05) -> AuditVerdict:
    """Audit one county's reported counts over nested periods.

    The default signal is the cumulative daily total, whose repeated
    values are intentional: a stalled cumulative count is exactly the
    signature being hunted. Set signal="daily" to audit the daily
    increments instead. Series whose overall cumulative total is at or
    below min_total raise SkippedBelowThreshold, since digit tests are
    uninformative on small counts.
    """
    if signal not in ("cumulative", "daily"):
        raise ValueError(f"unknown signal {signal!r}")
    if series.total_cases <= min_total:
        raise SkippedBelowThreshold(
            f"{series.county.normalized}: total {series.total_cases} "
            f"<= {min_total}")
    ordered = tuple(sorted(periods, key=lambda p: (p.start, p.end)))
    if not ordered:
        raise ValueError("need at least one period")
    reports = []
    for period in ordered:
        try:
            window = slice_period(series, period)
            values = (window.cumulative_cases if signal == "cumulative"
                      else window.new_cases)
            reports.append(analyze_values(values, period, alpha=alpha))
        except (EmptySlice, EmptyAfterFilter) as exc:
            logger.warning("%s: period %s skipped (%s)",
                           series.county.normalized, period, exc)
            reports.append(None)
    classification, rationale = _classify(reports)
    return AuditVerdict(
        county=series.county.normalized,
        periods=ordered,
        reports=tuple(reports),
        classification=classification,
        rationale=rationale,
    )

"""Seasonal ARIMA modeling: differencing, identification diagnostics,
conditional-sum-of-squares estimation, AIC ranking, forecasting, and a
seeded simulator that doubles as the test oracle.

Model convention
----------------
For orders (p,d,q)(P,D,Q) with season length s, the series y follows

    ar(L) sar(L^s) (1-L)^d (1-L^s)^D y_t = ma(L) sma(L^s) e_t

where ar(L) = 1 - ar_1 L - ... - ar_p L^p and likewise sar in powers of
L^s, while ma(L) = 1 + ma_1 L + ... + ma_q L^q and likewise sma (both MA
polynomials use the plus convention). The innovations e_t are iid
Gaussian. Estimation maximizes the conditional Gaussian likelihood:
residuals come from the ARMA recursion with zero pre-sample residuals,
the first p + P*s differenced observations serve as conditioning values
only, and the innovation variance is profiled out, so the criterion is
the sum of squared one-step errors. When d = D = 0 the fitter centers
the series by its mean and restores it in forecasts.
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.stats import norm

from .errors import (
    AllFitsFailed,
    DegenerateSeries,
    EpisignalError,
    HorizonZero,
    NonInvertibleParams,
    NumericalBreakdown,
    TooShort,
    ZeroVariance,
)
from .optimize import nelder_mead

logger = logging.getLogger(__name__)

_SPEC_RE = re.compile(
    r"^\((\d+),(\d+),(\d+)\)\((\d+),(\d+),(\d+)\)\[(\d+)\]$"
)


@dataclass(frozen=True)
class SarimaSpec:
    """Model orders (p,d,q)(P,D,Q) with season length s."""

    p: int
    d: int
    q: int
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 1

    def __post_init__(self):
        for name in ("p", "d", "q", "P", "D", "Q"):
            if getattr(self, name) < 0:
                raise ValueError(f"order {name} must be nonnegative")
        if self.s < 1:
            raise ValueError("season length must be at least 1")
        if (self.P or self.D or self.Q) and self.s < 2:
            raise ValueError("seasonal orders need a season length >= 2")

    @classmethod
    def parse(cls, text: str) -> "SarimaSpec":
        """Parse '(p,d,q)(P,D,Q)[s]'."""
        match = _SPEC_RE.match(text.strip())
        if match is None:
            raise ValueError(f"bad spec string {text!r}, "
                             f"expected '(p,d,q)(P,D,Q)[s]'")
        p, d, q, P, D, Q, s = (int(g) for g in match.groups())
        return cls(p, d, q, P, D, Q, s)

    def __str__(self) -> str:
        return (f"({self.p},{self.d},{self.q})"
                f"({self.P},{self.D},{self.Q})[{self.s}]")

    def as_tuple(self) -> tuple:
        return (self.p, self.d, self.q, self.P, self.D, self.Q, self.s)

    @property
    def n_params(self) -> int:
        """Count of ARMA coefficients."""
        return self.p + self.q + self.P + self.Q

    @property
    def k_aic(self) -> int:
        """Parameter count charged by AIC (coefficients plus variance)."""
        return self.n_params + 1

    @property
    def n_condition(self) -> int:
        """Differenced observations used as conditioning values."""
        return self.p + self.P * self.s

    @property
    def n_diff(self) -> int:
        """Observations consumed by differencing."""
        return self.d + self.D * self.s


@dataclass(frozen=True)
class SarimaParams:
    """Coefficients and innovation variance for a SarimaSpec."""

    ar: tuple = ()
    ma: tuple = ()
    seasonal_ar: tuple = ()
    seasonal_ma: tuple = ()
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "ar", tuple(float(v) for v in self.ar))
        object.__setattr__(self, "ma", tuple(float(v) for v in self.ma))
        object.__setattr__(self, "seasonal_ar",
                           tuple(float(v) for v in self.seasonal_ar))
        object.__setattr__(self, "seasonal_ma",
                           tuple(float(v) for v in self.seasonal_ma))
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")

    def as_dict(self) -> dict:
        return {
            "ar": list(self.ar),
            "ma": list(self.ma),
            "seasonal_ar": list(self.seasonal_ar),
            "seasonal_ma": list(self.seasonal_ma),
            "sigma2": self.sigma2,
        }


def difference(y, d: int, D: int, s: int = 1) -> np.ndarray:
    """Apply d regular then D seasonal differences.

    Output length is len(y) - d - D*s; anything shorter raises TooShort.
    """
    w = np.asarray(y, dtype=float)
    if w.ndim != 1:
        raise ValueError("series must be 1-d")
    if d < 0 or D < 0 or s < 1:
        raise ValueError("bad differencing orders")
    needed = d + D * s
    if w.size <= needed:
        raise TooShort(f"length {w.size} cannot absorb {needed} differences")
    for _ in range(d):
        w = np.diff(w)
    for _ in range(D):
        w = w[s:] - w[:-s]
    return w


def acf(y, max_lag: int) -> np.ndarray:
    """Sample autocorrelations r_0..r_max_lag (biased denominator)."""
    x = np.asarray(y, dtype=float)
    if max_lag < 1:
        raise ValueError("max_lag must be at least 1")
    if x.size < max_lag + 2:
        raise TooShort(f"need at least {max_lag + 2} points for "
                       f"max_lag={max_lag}")
    dev = x - x.mean()
    denom = float(dev @ dev)
    if denom == 0.0:
        raise ZeroVariance("autocorrelation undefined for constant series")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(dev[:-k] @ dev[k:]) / denom
    return out


def pacf(y, max_lag: int) -> np.ndarray:
    """Partial autocorrelations at lags 1..max_lag via the
    Durbin-Levinson recursion on the sample ACF."""
    r = acf(y, max_lag)
    out = np.empty(max_lag)
    coeffs = np.zeros(0)
    variance = 1.0
    for k in range(1, max_lag + 1):
        if variance <= 0.0:
            raise NumericalBreakdown(
                f"prediction variance vanished at lag {k}")
        numerator = r[k] - (coeffs * r[k - 1:0:-1]).sum()
        a = numerator / variance
        out[k - 1] = a
        coeffs = np.concatenate([coeffs - a * coeffs[::-1], [a]])
        variance *= 1.0 - a * a
    return out


# --- lag polynomial plumbing -------------------------------------------------

def _ar_poly(ar, seasonal_ar, s: int) -> np.ndarray:
    """Coefficients of ar(L) * sar(L^s), minus convention, constant first."""
    base = np.concatenate([[1.0], -np.asarray(ar, dtype=float)])
    seasonal = np.zeros(len(seasonal_ar) * s + 1)
    seasonal[0] = 1.0
    for j, value in enumerate(seasonal_ar, start=1):
        seasonal[j * s] = -value
    return np.convolve(base, seasonal)


def _ma_poly(ma, seasonal_ma, s: int) -> np.ndarray:
    """Coefficients of ma(L) * sma(L^s), plus convention, constant first."""
    base = np.concatenate([[1.0], np.asarray(ma, dtype=float)])
    seasonal = np.zeros(len(seasonal_ma) * s + 1)
    seasonal[0] = 1.0
    for j, value in enumerate(seasonal_ma, start=1):
        seasonal[j * s] = value
    return np.convolve(base, seasonal)


def _min_root_modulus(poly: np.ndarray) -> float:
    """Smallest root modulus of a lag polynomial (constant term first)."""
    trimmed = np.trim_zeros(poly, "b")
    if trimmed.size <= 1:
        return np.inf
    roots = np.roots(trimmed[::-1])
    return float(np.abs(roots).min()) if roots.size else np.inf


def _validate_params(spec: SarimaSpec, params: SarimaParams) -> None:
    lengths = (len(params.ar), len(params.ma),
               len(params.seasonal_ar), len(params.seasonal_ma))
    if lengths != (spec.p, spec.q, spec.P, spec.Q):
        raise ValueError(f"parameter lengths {lengths} do not match "
                         f"spec {spec}")
    ar_root = _min_root_modulus(_ar_poly(params.ar, params.seasonal_ar,
                                         spec.s))
    if ar_root <= 1.0:
        raise NonInvertibleParams(
            f"AR polynomial root modulus {ar_root:.6f} inside unit circle")
    ma_root = _min_root_modulus(_ma_poly(params.ma, params.seasonal_ma,
                                         spec.s))
    if ma_root <= 1.0:
        raise NonInvertibleParams(
            f"MA polynomial root modulus {ma_root:.6f} inside unit circle")


def _residuals(spec: SarimaSpec, params: SarimaParams, w: np.ndarray,
               n_condition: int) -> np.ndarray:
    """One-step errors of the differenced series under the ARMA recursion
    with zero pre-sample residuals, skipping the first n_condition
    observations (which must be at least p + P*s)."""
    if n_condition < spec.n_condition:
        raise ValueError("n_condition below the model's own AR depth")
    if w.size - n_condition < 1:
        raise TooShort(f"no residuals left after conditioning on "
                       f"{n_condition} of {w.size} observations")
    a_poly = _ar_poly(params.ar, params.seasonal_ar, spec.s)
    # z_t = w_t - sum_i a_i w_{t-i}, valid from the conditioning point on
    z = np.convolve(w, a_poly)[n_condition:w.size]
    m_poly = _ma_poly(params.ma, params.seasonal_ma, spec.s)
    if m_poly.size > 1:
        return lfilter([1.0], m_poly, z)
    return z


def _gaussian_loglik(residuals: np.ndarray) -> float:
    n = residuals.size
    sigma2 = float(residuals @ residuals) / n
    if sigma2 <= 0.0:
        return -np.inf
    return -0.5 * n * (np.log(2.0 * np.pi * sigma2) + 1.0)


def css_loglik(spec: SarimaSpec, params: SarimaParams, y,
               n_condition: int | None = None) -> float:
    """Profiled conditional log likelihood of y under spec and params.

    The series is differenced, residuals are formed with zero pre-sample
    errors after skipping n_condition observations (default p + P*s),
    and the variance is set to the mean squared residual. No mean is
    subtracted here; center beforehand if that is wanted.
    """
    _validate_params(spec, params)
    w = difference(y, spec.d, spec.D, spec.s)
    r = spec.n_condition if n_condition is None else n_condition
    return _gaussian_loglik(_residuals(spec, params, w, r))


# --- estimation -------------------------------------------------------------

def _pacf_to_coeffs(pac: np.ndarray) -> np.ndarray:
    """Map partial autocorrelations in (-1,1) to the coefficients of a
    polynomial 1 - c_1 L - ... - c_k L^k with all roots outside the unit
    circle (Durbin-Levinson run forwards)."""
    coeffs = np.zeros(0)
    for a in pac:
        coeffs = np.concatenate([coeffs - a * coeffs[::-1], [a]])
    return coeffs


def _unconstrained_to_params(x: np.ndarray, spec: SarimaSpec,
                             sigma2: float = 1.0) -> SarimaParams:
    """Map a free vector to stationary/invertible coefficients.

    Each coordinate is squashed to a partial autocorrelation by
    x / sqrt(1 + x^2), then expanded into polynomial coefficients; MA
    blocks are negated so the plus-convention polynomial is invertible.
    """
    pac = x / np.sqrt(1.0 + x * x)
    blocks = []
    offset = 0
    for size in (spec.p, spec.q, spec.P, spec.Q):
        blocks.append(pac[offset:offset + size])
        offset += size
    ar = _pacf_to_coeffs(blocks[0])
    ma = -_pacf_to_coeffs(blocks[1])
    seasonal_ar = _pacf_to_coeffs(blocks[2])
    seasonal_ma = -_pacf_to_coeffs(blocks[3])
    return SarimaParams(ar=tuple(ar), ma=tuple(ma),
                        seasonal_ar=tuple(seasonal_ar),
                        seasonal_ma=tuple(seasonal_ma), sigma2=sigma2)


def _multistart_points(dim: int, seed: int, starts: int,
                       scale: float = 0.6) -> np.ndarray:
    """Deterministic start set: the origin plus seeded Gaussian points."""
    rng = np.random.default_rng(seed)
    points = rng.normal(0.0, scale, size=(starts, dim))
    points[0] = 0.0
    return points


@dataclass(frozen=True)
class FittedSarima:
    """A fitted model: spec, coefficients, fit diagnostics."""

    spec: SarimaSpec
    params: SarimaParams
    loglik: float
    aic: float
    residuals: np.ndarray
    converged: bool
    mean: float
    n_condition: int

    def __post_init__(self):
        residuals = np.array(self.residuals, dtype=float)
        residuals.setflags(write=False)
        object.__setattr__(self, "residuals", residuals)

    def as_dict(self) -> dict:
        return {
            "spec": str(self.spec),
            "params": self.params.as_dict(),
            "loglik": self.loglik,
            "aic": self.aic,
            "converged": self.converged,
            "mean": self.mean,
            "n_condition": self.n_condition,
            "n_residuals": int(self.residuals.size),
        }


def fit(spec: SarimaSpec, y, seed: int, n_condition: int | None = None,
        starts: int = 5, max_iter: int = 2000,
        diameter_tol: float = 1e-8) -> FittedSarima:
    """Estimate a model by conditional sum of squares.

    The coefficient space is searched through the partial-autocorrelation
    reparameterization, so every iterate is stationary and invertible.
    Five seeded multi-starts (the origin plus Gaussian draws) guard
    against local optima; the best final value wins, first on ties.
    n_condition can be raised above the model's own p + P*s so that
    likelihoods are comparable across a grid of specs.
    """
    y = np.asarray(y, dtype=float)
    w = difference(y, spec.d, spec.D, spec.s)
    mean = float(w.mean()) if spec.d == 0 and spec.D == 0 else 0.0
    w = w - mean
    r = spec.n_condition if n_condition is None else int(n_condition)
    if w.size - r < spec.n_params + 1:
        raise TooShort(
            f"{w.size} differenced observations cannot support spec "
            f"{spec} with {r} conditioning values")
    if np.ptp(w) == 0.0:
        if spec.n_params > 0 or w[0] == 0.0:
            raise DegenerateSeries(
                "differenced series is constant; nothing to estimate")

    if spec.n_params == 0:
        residuals = w[r:]
        loglik = _gaussian_loglik(residuals)
        if not np.isfinite(loglik):
            raise DegenerateSeries("residual variance is zero")
        params = SarimaParams(
            sigma2=float(residuals @ residuals) / residuals.size)
        return FittedSarima(spec=spec, params=params, loglik=loglik,
                            aic=2.0 * spec.k_aic - 2.0 * loglik,
                            residuals=residuals, converged=True,
                            mean=mean, n_condition=r)

    def objective(x):
        candidate = _unconstrained_to_params(x, spec)
        return -_gaussian_loglik(_residuals(spec, candidate, w, r))

    best = None
    for x0 in _multistart_points(spec.n_params, seed, starts):
        result = nelder_mead(objective, x0, max_iter=max_iter,
                             diameter_tol=diameter_tol)
        if best is None or result.fun < best.fun:
            best = result
    if not np.isfinite(best.fun):
        raise DegenerateSeries("likelihood is degenerate at every start")

    residuals = _residuals(spec, _unconstrained_to_params(best.x, spec),
                           w, r)
    sigma2 = float(residuals @ residuals) / residuals.size
    params = _unconstrained_to_params(best.x, spec, sigma2=sigma2)
    loglik = -best.fun
    return FittedSarima(spec=spec, params=params, loglik=loglik,
                        aic=2.0 * spec.k_aic - 2.0 * loglik,
                        residuals=residuals, converged=best.converged,
                        mean=mean, n_condition=r)


def grid_search(y, p_max: int = 2, q_max: int = 2, P_max: int = 2,
                Q_max: int = 2, d: int = 0, D: int = 0, s: int = 1,
                seed: int = 0) -> list[FittedSarima]:
    """Fit every spec in the order grid and rank by AIC.

    All cells share the conditioning depth of the largest AR orders in
    the grid (p_max + P_max*s) so their likelihoods cover the same
    observations and the AIC comparison is fair. Cells that fail to fit
    are logged and skipped; ties break toward fewer parameters, then
    lexicographic orders. Raises AllFitsFailed if nothing fits.
    """
    shared_condition = p_max + P_max * s
    results: list[FittedSarima] = []
    failures: list[str] = []
    for p, q, P, Q in itertools.product(range(p_max + 1), range(q_max + 1),
                                        range(P_max + 1), range(Q_max + 1)):
        spec = SarimaSpec(p, d, q, P, D, Q, s)
        try:
            results.append(fit(spec, y, seed=seed,
                               n_condition=shared_condition))
        except EpisignalError as exc:
            logger.warning("grid cell %s failed: %s", spec, exc)
            failures.append(f"{spec}: {exc}")
    if not results:
        raise AllFitsFailed("; ".join(failures))
    results.sort(key=lambda f: (f.aic, f.spec.n_params, f.spec.as_tuple()))
    return results


# --- forecasting ------------------------------------------------------------

@dataclass(frozen=True)
class Forecast:
    """Point forecasts with symmetric Gaussian intervals."""

    horizon: int
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    variance: np.ndarray
    level: float

    def __post_init__(self):
        for name in ("point", "lower", "upper", "variance"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _psi_weights(spec: SarimaSpec, params: SarimaParams,
                 count: int) -> np.ndarray:
    """First `count` impulse-response weights of the full model,
    differencing included."""
    a_poly = _ar_poly(params.ar, params.seasonal_ar, spec.s)
    for _ in range(spec.d):
        a_poly = np.convolve(a_poly, [1.0, -1.0])
    seasonal_diff = np.zeros(spec.s + 1)
    seasonal_diff[0] = 1.0
    seasonal_diff[-1] = -1.0
    for _ in range(spec.D):
        a_poly = np.convolve(a_poly, seasonal_diff)
    a_coeffs = -a_poly[1:]
    m_poly = _ma_poly(params.ma, params.seasonal_ma, spec.s)
    psi = np.zeros(count)
    if count == 0:
        return psi
    psi[0] = 1.0
    for j in range(1, count):
        value = m_poly[j] if j < m_poly.size else 0.0
        depth = min(j, a_coeffs.size)
        for i in range(1, depth + 1):
            value += a_coeffs[i - 1] * psi[j - i]
        psi[j] = value
    return psi


def forecast(fitted: FittedSarima, y, horizon: int,
             level: float = 0.95) -> Forecast:
    """Forecast `horizon` steps past the end of y.

    Future innovations are set to zero in the ARMA recursion on the
    differenced scale, the differences are then integrated back, and
    interval half-widths come from the impulse-response variance
    sum(psi_j^2) * sigma2 with Gaussian quantiles.
    """
    if horizon < 1:
        raise HorizonZero(f"horizon must be >= 1, got {horizon}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be inside (0, 1)")
    spec = fitted.spec
    params = fitted.params
    y = np.asarray(y, dtype=float)

    regular_chain = [y]
    for _ in range(spec.d):
        regular_chain.append(np.diff(regular_chain[-1]))
    seasonal_chain = [regular_chain[-1]]
    for _ in range(spec.D):
        prev = seasonal_chain[-1]
        seasonal_chain.append(prev[spec.s:] - prev[:-spec.s])
    w = seasonal_chain[-1] - fitted.mean

    r = fitted.n_condition
    history = w.size
    errors = np.zeros(history)
    errors[r:] = _residuals(spec, params, w, r)
    a_poly = _ar_poly(params.ar, params.seasonal_ar, spec.s)
    a_coeffs = -a_poly[1:]
    m_coeffs = _ma_poly(params.ma, params.seasonal_ma, spec.s)[1:]

    values = list(w)
    for step in range(1, horizon + 1):
        t = history - 1 + step
        prediction = 0.0
        for i in range(1, a_coeffs.size + 1):
            if t - i >= 0:
                prediction += a_coeffs[i - 1] * values[t - i]
        for u in range(1, m_coeffs.size + 1):
            back = t - u
            if 0 <= back < history:
                prediction += m_coeffs[u - 1] * errors[back]
        values.append(prediction)
    level_values = np.asarray(values[history:]) + fitted.mean

    # integrate back: seasonal sums first, then regular sums
    for known in reversed(seasonal_chain[:-1]):
        merged = list(known)
        for value in level_values:
            merged.append(value + merged[-spec.s])
        level_values = np.asarray(merged[len(known):])
    for known in reversed(regular_chain[:-1]):
        last = known[-1]
        integrated = []
        for value in level_values:
            last = value + last
            integrated.append(last)
        level_values = np.asarray(integrated)

    psi = _psi_weights(spec, params, horizon)
    variance = params.sigma2 * np.cumsum(psi * psi)
    half = norm.ppf(0.5 + level / 2.0) * np.sqrt(variance)
    return Forecast(horizon=horizon, point=level_values,
                    lower=level_values - half, upper=level_values + half,
                    variance=variance, level=level)


def simulate(spec: SarimaSpec, params: SarimaParams, n: int, seed: int,
             burn_in: int = 200) -> np.ndarray:
    """Draw a seeded sample path of length n from the model.

    The stationary ARMA core is generated with a warm-up of burn_in
    draws that are discarded, then seasonal and regular sums invert the
    differencing (zero initial conditions).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    _validate_params(spec, params)
    rng = np.random.default_rng(seed)
    shocks = rng.normal(0.0, np.sqrt(params.sigma2), size=burn_in + n)
    a_poly = _ar_poly(params.ar, params.seasonal_ar, spec.s)
    m_poly = _ma_poly(params.ma, params.seasonal_ma, spec.s)
    core = lfilter(m_poly, a_poly, shocks)[burn_in:]
    x = core
    if spec.D:
        integrator = np.zeros(spec.s + 1)
        integrator[0] = 1.0
        integrator[-1] = -1.0
        for _ in range(spec.D):
            x = lfilter([1.0], integrator, x)
    for _ in range(spec.d):
        x = np.cumsum(x)
    return x

"""Shared fixtures: planted blob matrices and a synthetic 30-county corpus.

The corpus plants three sociodemographic blobs (rural / town / urban), one
redundant column that correlation pruning should drop, one constant column,
five counties whose case totals sit below the audit threshold, one county
present only in the profiles file, and one present only in the cases file.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

BLOB_CENTERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def make_blobs(seed: int, n_per: int = 30, sigma: float = 0.01,
               centers: np.ndarray = BLOB_CENTERS):
    """Well-separated planar Gaussian blobs plus their generating labels."""
    rng = np.random.default_rng(seed)
    pts = np.vstack([
        c + rng.normal(0.0, sigma, size=(n_per, centers.shape[1]))
        for c in centers
    ])
    labels = np.repeat(np.arange(centers.shape[0]), n_per)
    return pts, labels


def growth_series(start: float = 100.0, rate: float = 1.10,
                  days: int = 120) -> np.ndarray:
    """Cumulative exponential-growth curve c_t = start * rate**t."""
    return start * rate ** np.arange(days, dtype=float)


# --- synthetic 30-county corpus -------------------------------------------

_GROUP_FEATURES = {
    # (mean, sd) per column: pop_density, median_age, pct_urban, hospital_beds
    0: ((55.0, 5.0), (43.0, 1.2), (34.0, 3.0), (85.0, 8.0)),
    1: ((420.0, 20.0), (36.0, 1.0), (62.0, 3.0), (320.0, 25.0)),
    2: ((2050.0, 90.0), (30.5, 0.8), (91.0, 2.0), (1480.0, 70.0)),
}

_GROUP_NAMES = {
    0: ["Água Clara", "Pedra Lisa", "Campo Sereno", "Vale do Ipê",
        "Alto Mirim", "Santa Luzia do Campo", "Boa Vista Rural",
        "Serra Azul", "Lagoa Funda", "Quiet Ridge"],
    1: ["São Bruno", "PORTO ALTO", "Ribeirão Verde", "Vila Operária",
        "Monte Claro", "Cidade Nova", "Três Pontes", "Jardim Aurora",
        "Rio Manso", "Estação Velha"],
    2: ["Metropolina", "Grande Horizonte", "São Pedro da Serra",
        "Nova Lisboa", "Porto das Flores", "Alta Vista", "Campos Gerais",
        "Baía Verde", "Santa Efigênia", "Rocha Forte"],
}

# Daily intensity scale per county; totals land near 955 * base, so bases
# at or below 5 stay under the 5000-case audit threshold.
_GROUP_BASES = {
    0: [1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, None],  # None: no cases
    1: [8.0, 9.0, 10.0, 11.0, 12.0, 8.5, 9.5, 10.5, 11.5, 12.5],
    2: [20.0, 22.0, 24.0, 26.0, 28.0, 21.0, 23.0, 25.0, 27.0, 29.0],
}

PROFILES_ONLY = "Quiet Ridge"
CASES_ONLY = "Vila Nova Sul"
GAPPY_COUNTY = "São Bruno"          # one missing day, one negative day
CORPUS_START = date(2020, 3, 1)
CORPUS_DAYS = 150
BELOW_THRESHOLD = {"Água Clara", "Pedra Lisa", "Campo Sereno",
                   "Vale do Ipê", "Alto Mirim"}


@dataclass
class Corpus:
    profiles_path: Path
    cases_path: Path
    group_of: dict[str, int]
    case_counties: list[str] = field(default_factory=list)
    profile_counties: list[str] = field(default_factory=list)


def _daily_counts(rng: np.random.Generator, base: float) -> np.ndarray:
    t = np.arange(CORPUS_DAYS, dtype=float)
    intensity = base * np.exp(0.02 * t) * (1.0 + 0.3 * np.sin(2 * np.pi * t / 7))
    return rng.poisson(np.clip(intensity, 0.05, None))


def build_corpus(root: Path, seed: int = 20260814) -> Corpus:
    rng = np.random.default_rng(seed)
    profiles_path = root / "profiles.csv"
    cases_path = root / "cases.csv"

    group_of: dict[str, int] = {}
    profile_rows = []
    for group, names in _GROUP_NAMES.items():
        specs = _GROUP_FEATURES[group]
        for name in names:
            feats = [rng.normal(mu, sd) for mu, sd in specs]
            households = 3.1 * feats[0] + rng.normal(0.0, 1.0)
            profile_rows.append([name] + [f"{v:.3f}" for v in feats]
                                + [f"{households:.3f}", "2.0"])
            group_of[name] = group
    with profiles_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["county", "pop_density", "median_age", "pct_urban",
                         "hospital_beds", "households", "reporting_lag"])
        writer.writerows(profile_rows)

    case_counties = []
    with cases_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "county", "new_cases", "new_deaths"])
        for group, names in _GROUP_NAMES.items():
            for name, base in zip(names, _GROUP_BASES[group]):
                if base is None:
                    continue
                case_counties.append(name)
                counts = _daily_counts(rng, base)
                deaths = rng.binomial(counts, 0.03)
                for t in range(CORPUS_DAYS):
                    if name == GAPPY_COUNTY and t == 40:
                        continue  # reporting gap: loader fills with zero
                    new = int(counts[t])
                    if name == GAPPY_COUNTY and t == 80:
                        new = -3  # revision: loader clamps and records it
                    day = CORPUS_START + timedelta(days=t)
                    writer.writerow([day.isoformat(), name, new,
                                     int(deaths[t])])
        case_counties.append(CASES_ONLY)
        extra = _daily_counts(rng, 8.0)
        extra_deaths = rng.binomial(extra, 0.03)
        for t in range(CORPUS_DAYS):
            day = CORPUS_START + timedelta(days=t)
            writer.writerow([day.isoformat(), CASES_ONLY, int(extra[t]),
                             int(extra_deaths[t])])

    group_of[CASES_ONLY] = 1
    return Corpus(
        profiles_path=profiles_path,
        cases_path=cases_path,
        group_of=group_of,
        case_counties=case_counties,
        profile_counties=[r[0] for r in profile_rows],
    )


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> Corpus:
    return build_corpus(tmp_path_factory.mktemp("corpus"))


# --- shared Monte Carlo recovery studies -----------------------------------

@dataclass(frozen=True)
class RecoveryStudy:
    """One simulate-then-fit study: the generating model, the hundred
    simulated series, their fits, and the wall time the fits took."""

    spec: object
    truth: object
    series: tuple
    fits: tuple
    elapsed: float


@pytest.fixture(scope="session")
def sarima_recovery() -> dict[str, RecoveryStudy]:
    """Hundred-replicate recovery studies for the three reference models.

    Shared session-wide because both the estimation tests and the
    acceptance gates (parameter recovery, first-order optimality) read
    from the same fits.
    """
    from episignal.sarima import SarimaParams, SarimaSpec, fit, simulate

    plans = {
        "ar": (SarimaSpec(1, 0, 0), SarimaParams(ar=(0.7,)), 500, 3000),
        "ma": (SarimaSpec(0, 0, 1), SarimaParams(ma=(0.5,)), 500, 4000),
        "airline": (SarimaSpec(0, 1, 1, 0, 1, 1, 7),
                    SarimaParams(ma=(0.4,), seasonal_ma=(0.3,)), 350, 5000),
    }
    studies = {}
    for label, (spec, truth, n, seed_base) in plans.items():
        start = time.perf_counter()
        series = [simulate(spec, truth, n, seed=seed_base + rep)
                  for rep in range(100)]
        fits = [fit(spec, y, seed=rep) for rep, y in enumerate(series)]
        elapsed = time.perf_counter() - start
        studies[label] = RecoveryStudy(spec=spec, truth=truth,
                                       series=tuple(series), fits=tuple(fits),
                                       elapsed=elapsed)
    return studies


def loglik_finite_differences(fitted, y) -> list[float]:
    """Central finite differences of the conditional log likelihood at a
    fit's optimum, one per ARMA coefficient.

    The series is recentred exactly as the fitter saw it (fitted.mean is
    zero whenever differencing applied), and the fit's own conditioning
    depth is reused so the differentiated function is the optimized one.
    """
    from episignal.sarima import SarimaParams, css_loglik

    target = np.asarray(y, dtype=float) - fitted.mean
    base = fitted.params.as_dict()
    gradients = []
    for block in ("ar", "ma", "seasonal_ar", "seasonal_ma"):
        for i, value in enumerate(base[block]):
            h = 1e-5 * (1.0 + abs(value))
            sides = []
            for sign in (1.0, -1.0):
                moved = {k: list(v) if isinstance(v, list) else v
                         for k, v in base.items()}
                moved[block][i] = value + sign * h
                sides.append(css_loglik(fitted.spec, SarimaParams(**moved),
                                        target, fitted.n_condition))
            gradients.append((sides[0] - sides[1]) / (2.0 * h))
    return gradients

"""End-to-end orchestration: cluster county profiles, audit reported
counts, look up per-cluster model orders, fit, evaluate on a holdout
window, and forecast.

Every run writes one directory per stage (clusters/, audits/, models/,
forecasts/) plus a top-level manifest.json recording the resolved
configuration, the seed, and package versions. All output is sorted by
normalized county name and all numbers are serialized with repr
round-tripping, so identical configurations produce byte-identical
files.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import timedelta
from enum import Enum
from pathlib import Path

import numpy as np

from . import benford, cluster, dataset, sarima
from .errors import (
    ConfigError,
    EpisignalError,
    HoldoutTooLarge,
    MissingCluster,
    SkippedBelowThreshold,
)

logger = logging.getLogger(__name__)

__version__ = "0.1.0"

#: model orders keyed by cluster id, weekly season
_DEFAULT_TABLE = {
    0: "(1,1,1)(1,1,1)[7]",
    1: "(1,1,1)(0,1,1)[7]",
    2: "(0,1,1)(0,1,1)[7]",
    3: "(1,1,1)(1,1,1)[7]",
    4: "(0,1,1)(0,1,1)[7]",
    5: "(0,1,1)(0,1,1)[7]",
    6: "(1,1,1)(0,0,0)[7]",
    7: "(1,1,1)(1,1,1)[7]",
    8: "(0,1,1)(0,1,1)[7]",
}

#: orders used for a capital-style county when the override is active
CAPITAL_SPEC = "(1,1,1)(0,1,1)[7]"


@dataclass(frozen=True)
class ClusterParamTable:
    """Model orders to use for each cluster id."""

    entries: dict

    def lookup(self, cluster_id: int) -> sarima.SarimaSpec:
        try:
            return self.entries[cluster_id]
        except KeyError:
            raise MissingCluster(
                f"no parameter table entry for cluster {cluster_id}"
            ) from None

    def as_dict(self) -> dict:
        return {str(k): str(v) for k, v in sorted(self.entries.items())}

    @classmethod
    def from_file(cls, path) -> "ClusterParamTable":
        """Load a JSON object mapping cluster id to spec string."""
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict) or not raw:
            raise ConfigError(f"{path}: expected a nonempty JSON object")
        entries = {}
        for key, value in raw.items():
            try:
                entries[int(key)] = sarima.SarimaSpec.parse(value)
            except ValueError as exc:
                raise ConfigError(f"{path}: bad entry {key!r}: {exc}") from None
        return cls(entries=entries)


def default_param_table() -> ClusterParamTable:
    """The nine built-in cluster-to-orders rows (weekly season)."""
    return ClusterParamTable(entries={
        cid: sarima.SarimaSpec.parse(text)
        for cid, text in _DEFAULT_TABLE.items()
    })


@dataclass(frozen=True)
class HoldoutMetrics:
    """Forecast accuracy over a trailing window held out of the fit."""

    holdout: int
    mae: float
    rmse: float
    mape: float | None
    mape_skipped: int

    def as_dict(self) -> dict:
        return {
            "holdout": self.holdout,
            "mae": self.mae,
            "rmse": self.rmse,
            "mape": self.mape,
            "mape_skipped": self.mape_skipped,
        }


def holdout_evaluate(fitted: sarima.FittedSarima, y, holdout: int,
                     seed: int = 0) -> HoldoutMetrics:
    """Refit on y without its last `holdout` points, forecast them, and
    score the forecasts against the held-out actuals.

    MAPE is a percentage and skips zero actuals, reporting how many were
    skipped; it is None when every actual is zero.
    """
    y = np.asarray(y, dtype=float)
    if holdout < 1:
        raise ValueError("holdout must be at least 1")
    if holdout >= y.size - 10:
        raise HoldoutTooLarge(
            f"holdout {holdout} leaves under 10 points from {y.size}")
    train = y[:-holdout]
    refit = sarima.fit(fitted.spec, train, seed=seed)
    predicted = sarima.forecast(refit, train, holdout).point
    actual = y[-holdout:]
    err = predicted - actual
    nonzero = actual != 0.0
    mape = None
    if nonzero.any():
        mape = float(np.mean(np.abs(err[nonzero] / actual[nonzero])) * 100.0)
    return HoldoutMetrics(
        holdout=holdout,
        mae=float(np.mean(np.abs(err))),
        rmse=float(np.sqrt(np.mean(err ** 2))),
        mape=mape,
        mape_skipped=int((~nonzero).sum()),
    )


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs, resolvable from a flat
    key = value config file plus command-line overrides."""

    profiles: str
    cases: str
    out: str
    name_col: str = "county"
    k: int | str = "auto"
    seed: int = 0
    periods: tuple = ()
    min_total: int = 5000
    horizon: int = 20
    holdout: int = 20
    level: float = 0.95
    s: int = 7
    threshold: float = 0.9
    k_min: int = 1
    k_max: int = 10
    restarts: int = 10
    signal: str = "cumulative"
    param_table: str | None = None
    capital_override: str | None = None
    capital_spec: str = CAPITAL_SPEC

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.k != "auto":
            try:
                object.__setattr__(self, "k", int(self.k))
            except (TypeError, ValueError):
                raise ConfigError(f"k must be an integer or 'auto', "
                                  f"got {self.k!r}") from None
        if self.signal not in ("cumulative", "daily"):
            raise ConfigError(f"signal must be cumulative or daily, "
                              f"got {self.signal!r}")


_INT_KEYS = {"seed", "min_total", "horizon", "holdout", "s",
             "k_min", "k_max", "restarts"}
_FLOAT_KEYS = {"level", "threshold"}
_CONFIG_KEYS = {
    "profiles", "cases", "out", "name_col", "k", "periods", "signal",
    "param_table", "capital_override", "capital_spec",
} | _INT_KEYS | _FLOAT_KEYS


def parse_config_file(path) -> dict:
    """Read a flat `key = value` file; blank lines and # comments are
    ignored. Unknown keys raise ConfigError."""
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in text.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            mapping[key] = value
    return mapping


def build_config(mapping: dict, overrides: dict | None = None) -> RunConfig:
    """Turn string key-value pairs into a RunConfig.

    overrides (from CLI flags) win over the file; the EPISIGNAL_SEED
    environment variable supplies the seed when neither does.
    """
    merged = dict(mapping)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value
    if "seed" not in merged and os.environ.get("EPISIGNAL_SEED"):
        merged["seed"] = os.environ["EPISIGNAL_SEED"]
    for key in ("profiles", "cases", "out"):
        if key not in merged:
            raise ConfigError(f"config is missing required key {key!r}")

    kwargs: dict = {}
    for key, value in merged.items():
        if isinstance(value, str):
            value = value.strip()
        try:
            if key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key == "periods":
                if isinstance(value, str):
                    tokens = [t for t in value.split(",") if t.strip()]
                    kwargs[key] = tuple(dataset.Period.parse(t.strip())
                                        for t in tokens)
                else:
                    kwargs[key] = tuple(value)
            else:
                kwargs[key] = value
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    return RunConfig(**kwargs)


@dataclass
class RunResult:
    """Exit status plus what the run produced."""

    exit_code: int
    out_dir: Path
    manifest: dict = field(default_factory=dict)


def _plain(obj):
    """Recursively convert to plain JSON-serializable types."""
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj]
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _slug(normalized: str) -> str:
    return normalized.replace(" ", "_")


def _quality(audit_entry: dict | None) -> str:
    if audit_entry is None or audit_entry.get("status") != "audited":
        return "unaudited"
    classification = audit_entry["classification"]
    if classification == benford.Classification.CONFORMING.value:
        return "conforming"
    if classification == benford.Classification.INCONCLUSIVE.value:
        return "inconclusive"
    return "suspect"


def run_pipeline(cfg: RunConfig) -> RunResult:
    """Run every stage and report an exit status.

    Per-county failures are recorded and do not stop the run; the exit
    code is nonzero only when a whole stage fails (unreadable inputs,
    clustering failure, or every single county erroring out).
    """
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    for label, path in (("profiles", cfg.profiles), ("cases", cfg.cases)):
        if not Path(path).is_file():
            logger.error("%s file %s is not readable", label, path)
            return RunResult(exit_code=2, out_dir=out_dir)
    try:
        table = (ClusterParamTable.from_file(cfg.param_table)
                 if cfg.param_table else default_param_table())
        capital_spec = sarima.SarimaSpec.parse(cfg.capital_spec)
        capital = (dataset.normalize_name(cfg.capital_override).normalized
                   if cfg.capital_override else None)
    except (EpisignalError, ValueError, OSError) as exc:
        logger.error("configuration invalid: %s", exc)
        return RunResult(exit_code=2, out_dir=out_dir)

    # --- ingest ------------------------------------------------------
    try:
        profiles = dataset.load_profiles(
            cfg.profiles, dataset.ProfileSchema(name_col=cfg.name_col))
        cases = dataset.load_case_series(cfg.cases)
        pruned, dropped = dataset.prune_correlated(profiles, cfg.threshold)
        scaled = dataset.minmax_scale(pruned)
    except EpisignalError as exc:
        logger.error("ingest stage failed: %s", exc)
        return RunResult(exit_code=2, out_dir=out_dir)

    # --- cluster -----------------------------------------------------
    clusters_dir = out_dir / "clusters"
    clusters_dir.mkdir(exist_ok=True)
    try:
        n = scaled.n_counties
        curve = None
        if cfg.k == "auto":
            curve = cluster.elbow_scan(scaled, cfg.k_min,
                                       min(cfg.k_max, n),
                                       seed=cfg.seed, restarts=cfg.restarts)
            chosen_k = cluster.knee_detect(curve)
        else:
            chosen_k = int(cfg.k)
        model, assignment = cluster.kmeans_fit(scaled, chosen_k,
                                               seed=cfg.seed,
                                               restarts=cfg.restarts)
        silhouette_score = (cluster.silhouette(scaled, assignment)
                            if chosen_k >= 2 else None)
        summaries = cluster.cluster_summary(profiles, cases, assignment)
    except EpisignalError as exc:
        logger.error("cluster stage failed: %s", exc)
        return RunResult(exit_code=2, out_dir=out_dir)

    assignment_by_county = {
        key.normalized: int(label)
        for key, label in zip(scaled.county_keys, assignment.labels)
    }
    with open(clusters_dir / "assignments.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["county", "cluster"])
        for name in sorted(assignment_by_county):
            writer.writerow([name, assignment_by_county[name]])
    with open(clusters_dir / "centroids.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster", *scaled.feature_names])
        for cid, row in enumerate(model.centroids):
            writer.writerow([cid, *[repr(float(v)) for v in row]])
    if curve is not None:
        with open(clusters_dir / "elbow.csv", "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "sse"])
            for k, sse in zip(curve.k_values, curve.sse):
                writer.writerow([k, repr(float(sse))])
    _write_json(clusters_dir / "summary.json", {
        "k": chosen_k,
        "auto": cfg.k == "auto",
        "seed": cfg.seed,
        "inertia": model.inertia,
        "silhouette": silhouette_score,
        "dropped_features": dropped,
        "clusters": [
            {
                "cluster": s.cluster,
                "size": s.size,
                "counties": list(s.counties),
                "feature_means": s.feature_means,
                "mean_total_cases": s.mean_total_cases,
                "mean_total_deaths": s.mean_total_deaths,
                "missing_series": list(s.missing_series),
            }
            for s in summaries
        ],
    })

    # --- audits ------------------------------------------------------
    audits_dir = out_dir / "audits"
    audits_dir.mkdir(exist_ok=True)
    audit_entries: dict[str, dict | None] = {}
    for name in sorted(cases):
        if not cfg.periods:
            audit_entries[name] = None
            continue
        try:
            verdict = benford.audit(cases[name], cfg.periods,
                                    min_total=cfg.min_total,
                                    signal=cfg.signal)
            entry = {"status": "audited", **verdict.as_dict()}
        except SkippedBelowThreshold as exc:
            entry = {"status": "skipped_below_threshold",
                     "county": name, "detail": str(exc)}
        audit_entries[name] = entry
        _write_json(audits_dir / f"{_slug(name)}.json", entry)

    # --- per-county models and forecasts ------------------------------
    models_dir = out_dir / "models"
    forecasts_dir = out_dir / "forecasts"
    models_dir.mkdir(exist_ok=True)
    forecasts_dir.mkdir(exist_ok=True)

    county_status: dict[str, dict] = {}
    specs_used: set[str] = set()
    n_forecast = 0
    for name in sorted(cases):
        series = cases[name]
        cluster_id = assignment_by_county.get(name)
        if cluster_id is None:
            county_status[name] = {
                "status": "skipped",
                "reason": "county not present in the profile file",
            }
            continue
        quality = _quality(audit_entries.get(name))
        try:
            if capital is not None and name == capital:
                spec = capital_spec
            else:
                spec = table.lookup(cluster_id)
            y = series.new_cases.astype(float)
            fitted = sarima.fit(spec, y, seed=cfg.seed)
            try:
                metrics = holdout_evaluate(fitted, y, cfg.holdout,
                                           seed=cfg.seed)
                metrics_entry = metrics.as_dict()
            except HoldoutTooLarge as exc:
                logger.warning("%s: %s", name, exc)
                metrics_entry = {"error": str(exc)}
            horizon_forecast = sarima.forecast(fitted, y, cfg.horizon,
                                               level=cfg.level)
        except EpisignalError as exc:
            county_status[name] = {
                "status": "error",
                "reason": f"{type(exc).__name__}: {exc}",
                "cluster": cluster_id,
            }
            continue

        specs_used.add(str(spec))
        _write_json(models_dir / f"{_slug(name)}.json", {
            "county": name,
            "cluster": cluster_id,
            **fitted.as_dict(),
            "holdout": metrics_entry,
            "data_quality": quality,
        })
        last_day = series.dates[-1]
        with open(forecasts_dir / f"{_slug(name)}.csv", "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "point", "lower", "upper"])
            for step in range(cfg.horizon):
                writer.writerow([
                    (last_day + timedelta(days=step + 1)).isoformat(),
                    repr(float(horizon_forecast.point[step])),
                    repr(float(horizon_forecast.lower[step])),
                    repr(float(horizon_forecast.upper[step])),
                ])
        county_status[name] = {
            "status": "forecast",
            "cluster": cluster_id,
            "spec": str(spec),
            "data_quality": quality,
        }
        n_forecast += 1

    n_error = sum(1 for v in county_status.values()
                  if v["status"] == "error")
    n_skipped = sum(1 for v in county_status.values()
                    if v["status"] == "skipped")
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "config": {
            "profiles": cfg.profiles,
            "cases": cfg.cases,
            "out": cfg.out,
            "name_col": cfg.name_col,
            "k": cfg.k,
            "periods": [str(p) for p in cfg.periods],
            "min_total": cfg.min_total,
            "horizon": cfg.horizon,
            "holdout": cfg.holdout,
            "level": cfg.level,
            "s": cfg.s,
            "threshold": cfg.threshold,
            "k_min": cfg.k_min,
            "k_max": cfg.k_max,
            "restarts": cfg.restarts,
            "signal": cfg.signal,
            "param_table": cfg.param_table,
            "capital_override": cfg.capital_override,
            "capital_spec": cfg.capital_spec,
        },
        "chosen_k": chosen_k,
        "silhouette": silhouette_score,
        "param_table": table.as_dict(),
        "specs_used": sorted(specs_used),
        "counts": {
            "forecast": n_forecast,
            "skipped": n_skipped,
            "error": n_error,
            "counties": len(county_status),
        },
        "counties": county_status,
        "load_warnings": [w.as_dict() for w in cases.warnings],
    }
    _write_json(out_dir / "manifest.json", manifest)

    if county_status and n_forecast == 0:
        logger.error("model stage produced no forecasts")
        return RunResult(exit_code=1, out_dir=out_dir, manifest=manifest)
    return RunResult(exit_code=0, out_dir=out_dir, manifest=manifest)

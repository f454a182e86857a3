"""Command-line entry point with one subcommand per capability.

    episignal cluster   --profiles counties.csv --k auto --seed 0 --out dir
    episignal benford   --cases cases.csv --periods a..b,c..d --out dir
    episignal fit       --cases cases.csv --county NAME --spec "(1,1,1)(0,1,1)[7]" --out dir
    episignal forecast  --cases cases.csv --county NAME --spec ... --horizon 20 --out dir
    episignal pipeline  --config run.cfg [--seed 7 --out dir ...]

Periods use the syntax YYYY-MM-DD..YYYY-MM-DD and seeds fall back to the
EPISIGNAL_SEED environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from datetime import timedelta
from pathlib import Path

from . import benford, cluster, dataset, pipeline, sarima
from .errors import EpisignalError, SkippedBelowThreshold

logger = logging.getLogger(__name__)


def _env_seed(value: int | None) -> int:
    if value is not None:
        return value
    raw = os.environ.get("EPISIGNAL_SEED")
    return int(raw) if raw else 0


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(pipeline._plain(obj), indent=2,
                               sort_keys=True) + "\n", encoding="utf-8")


def _load_series(args):
    cases = dataset.load_case_series(args.cases)
    key = dataset.normalize_name(args.county).normalized
    series = cases.get(key)
    if series is None:
        raise EpisignalError(
            f"county {args.county!r} (key {key!r}) not in {args.cases}")
    return series


def _fit_from_args(args):
    spec = sarima.SarimaSpec.parse(args.spec)
    series = _load_series(args)
    y = series.new_cases.astype(float)
    return spec, series, sarima.fit(spec, y, seed=_env_seed(args.seed))


def _write_model_files(out: Path, series, fitted) -> None:
    _write_json(out / "model.json", {
        "county": series.county.normalized,
        **fitted.as_dict(),
    })
    # residual t belongs to the observation consumed at that recursion step
    offset = fitted.spec.n_diff + fitted.n_condition
    with open(out / "residuals.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "residual"])
        for i, value in enumerate(fitted.residuals):
            writer.writerow([series.dates[offset + i].isoformat(),
                             repr(float(value))])


def _cmd_cluster(args) -> int:
    seed = _env_seed(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profiles = dataset.load_profiles(
        args.profiles, dataset.ProfileSchema(name_col=args.name_col))
    pruned, dropped = dataset.prune_correlated(profiles, args.threshold)
    scaled = dataset.minmax_scale(pruned)
    n = scaled.n_counties

    curve = None
    if args.k == "auto":
        curve = cluster.elbow_scan(scaled, args.k_min,
                                   min(args.k_max, n), seed=seed,
                                   restarts=args.restarts)
        k = cluster.knee_detect(curve)
    else:
        k = int(args.k)
    model, assignment = cluster.kmeans_fit(scaled, k, seed=seed,
                                           restarts=args.restarts)
    score = cluster.silhouette(scaled, assignment) if k >= 2 else None
    cases = (dataset.load_case_series(args.cases) if args.cases else {})
    summaries = cluster.cluster_summary(profiles, cases, assignment)

    by_county = {
        key.normalized: int(label)
        for key, label in zip(scaled.county_keys, assignment.labels)
    }
    with open(out / "assignments.csv", "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["county", "cluster"])
        for name in sorted(by_county):
            writer.writerow([name, by_county[name]])
    with open(out / "centroids.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster", *scaled.feature_names])
        for cid, row in enumerate(model.centroids):
            writer.writerow([cid, *[repr(float(v)) for v in row]])
    if curve is not None:
        with open(out / "elbow.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "sse"])
            for kk, sse in zip(curve.k_values, curve.sse):
                writer.writerow([kk, repr(float(sse))])
    _write_json(out / "summary.json", {
        "k": k,
        "auto": args.k == "auto",
        "seed": seed,
        "inertia": model.inertia,
        "iterations": model.iterations,
        "silhouette": score,
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
    print(f"clustered {n} counties into k={k} "
          f"(silhouette {score if score is None else round(score, 4)})")
    return 0


def _cmd_benford(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    periods = [dataset.Period.parse(tok.strip())
               for tok in args.periods.split(",") if tok.strip()]
    if not periods:
        raise EpisignalError("no periods given")
    cases = dataset.load_case_series(args.cases)

    report: dict[str, dict] = {}
    hist_rows: list[tuple] = []
    for name in sorted(cases):
        try:
            verdict = benford.audit(cases[name], periods,
                                    min_total=args.min_total,
                                    signal=args.signal)
        except SkippedBelowThreshold as exc:
            report[name] = {"status": "skipped_below_threshold",
                            "detail": str(exc)}
            continue
        report[name] = {"status": "audited", **verdict.as_dict()}
        for period, rep in zip(verdict.periods, verdict.reports):
            if rep is None:
                continue
            for digit, count in zip(range(1, 10), rep.counts):
                hist_rows.append((name, str(period), digit, int(count)))

    _write_json(out / "benford_report.json", report)
    with open(out / "digit_hist.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["county", "period", "digit", "count"])
        writer.writerows(hist_rows)
    audited = sum(1 for v in report.values() if v["status"] == "audited")
    print(f"audited {audited} of {len(report)} counties "
          f"over {len(periods)} periods")
    return 0


def _cmd_fit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec, series, fitted = _fit_from_args(args)
    _write_model_files(out, series, fitted)
    print(f"fit {spec} to {series.county.normalized}: "
          f"loglik {fitted.loglik:.3f}, aic {fitted.aic:.3f}")
    return 0


def _cmd_forecast(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec, series, fitted = _fit_from_args(args)
    result = sarima.forecast(fitted, series.new_cases.astype(float),
                             args.horizon, level=args.level)
    _write_model_files(out, series, fitted)
    last_day = series.dates[-1]
    with open(out / "forecast.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "point", "lower", "upper"])
        for step in range(args.horizon):
            writer.writerow([
                (last_day + timedelta(days=step + 1)).isoformat(),
                repr(float(result.point[step])),
                repr(float(result.lower[step])),
                repr(float(result.upper[step])),
            ])
    print(f"forecast {args.horizon} days for {series.county.normalized} "
          f"with {spec}")
    return 0


def _cmd_pipeline(args) -> int:
    mapping = pipeline.parse_config_file(args.config) if args.config else {}
    overrides = {
        key: getattr(args, key)
        for key in pipeline._CONFIG_KEYS
        if getattr(args, key, None) is not None
    }
    cfg = pipeline.build_config(mapping, overrides)
    result = pipeline.run_pipeline(cfg)
    counts = result.manifest.get("counts", {})
    print(f"pipeline exit {result.exit_code}: "
          f"{counts.get('forecast', 0)} forecast, "
          f"{counts.get('skipped', 0)} skipped, "
          f"{counts.get('error', 0)} errored -> {result.out_dir}")
    return result.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="episignal",
        description="Cluster county profiles, audit counts against the "
                    "first-digit law, and forecast with seasonal ARIMA.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cluster = sub.add_parser("cluster", help="cluster county profiles")
    p_cluster.add_argument("--profiles", required=True)
    p_cluster.add_argument("--name-col", default="county")
    p_cluster.add_argument("--k", default="auto",
                           help="cluster count or 'auto' (elbow knee)")
    p_cluster.add_argument("--k-min", type=int, default=1)
    p_cluster.add_argument("--k-max", type=int, default=10)
    p_cluster.add_argument("--seed", type=int, default=None)
    p_cluster.add_argument("--restarts", type=int, default=10)
    p_cluster.add_argument("--threshold", type=float, default=0.9,
                           help="correlation pruning threshold")
    p_cluster.add_argument("--cases", default=None,
                           help="optional case csv for summary statistics")
    p_cluster.add_argument("--out", required=True)
    p_cluster.set_defaults(func=_cmd_cluster)

    p_benford = sub.add_parser("benford", help="first-digit audits")
    p_benford.add_argument("--cases", required=True)
    p_benford.add_argument("--periods", required=True,
                           help="comma-separated YYYY-MM-DD..YYYY-MM-DD")
    p_benford.add_argument("--min-total", type=int, default=5000)
    p_benford.add_argument("--signal", default="cumulative",
                           choices=["cumulative", "daily"])
    p_benford.add_argument("--out", required=True)
    p_benford.set_defaults(func=_cmd_benford)

    for name, helptext in (("fit", "fit one county"),
                           ("forecast", "fit and forecast one county")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--cases", required=True)
        p.add_argument("--county", required=True)
        p.add_argument("--spec", required=True,
                       help='model orders "(p,d,q)(P,D,Q)[s]"')
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True)
        if name == "forecast":
            p.add_argument("--horizon", type=int, default=20)
            p.add_argument("--level", type=float, default=0.95)
            p.set_defaults(func=_cmd_forecast)
        else:
            p.set_defaults(func=_cmd_fit)

    p_pipe = sub.add_parser("pipeline", help="full end-to-end run")
    p_pipe.add_argument("--config", default=None,
                        help="flat key = value configuration file")
    p_pipe.add_argument("--profiles")
    p_pipe.add_argument("--cases")
    p_pipe.add_argument("--out")
    p_pipe.add_argument("--name-col", dest="name_col")
    p_pipe.add_argument("--k")
    p_pipe.add_argument("--k-min", dest="k_min")
    p_pipe.add_argument("--k-max", dest="k_max")
    p_pipe.add_argument("--seed")
    p_pipe.add_argument("--restarts")
    p_pipe.add_argument("--threshold")
    p_pipe.add_argument("--periods")
    p_pipe.add_argument("--min-total", dest="min_total")
    p_pipe.add_argument("--horizon")
    p_pipe.add_argument("--holdout")
    p_pipe.add_argument("--level")
    p_pipe.add_argument("--s")
    p_pipe.add_argument("--signal")
    p_pipe.add_argument("--param-table", dest="param_table")
    p_pipe.add_argument("--capital-override", dest="capital_override")
    p_pipe.add_argument("--capital-spec", dest="capital_spec")
    p_pipe.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EpisignalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

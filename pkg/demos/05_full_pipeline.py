"""
End-to-end run: ingest, cluster, audit, forecast
================================================

The pipeline ties the library together: load county profiles and daily
case counts, cluster the profiles, audit each county's digits, pick a
model spec per cluster from the parameter table, and write forecasts plus
a manifest.  Everything is seeded, so re-running a config reproduces the
outputs byte for byte.
"""
import csv
import json
import math
import tempfile
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from episignal.dataset import Period
from episignal.pipeline import RunConfig, default_param_table, run_pipeline

workdir = Path(tempfile.mkdtemp(prefix="episignal_demo_"))
rng = np.random.default_rng(3)

# --- a toy input corpus: six counties in two profile groups -------------
profiles = workdir / "profiles.csv"
with open(profiles, "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow(["county", "pop_density", "median_age", "pct_urban"])
    for i in range(3):
        writer.writerow([f"Riverside {i}", 60 + i, 42.0 - 0.1 * i, 35 + i])
    for i in range(3):
        writer.writerow([f"Metro {i}", 2000 + 30 * i, 31.0 + 0.1 * i,
                         90 + i])

cases = workdir / "cases.csv"
start = date(2021, 2, 1)
with open(cases, "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow(["date", "county", "new_cases", "new_deaths"])
    for row, base in enumerate([20, 22, 24, 80, 85, 90]):
        name = (f"Riverside {row}" if row < 3 else f"Metro {row - 3}")
        for day in range(120):
            wave = 1.0 + 0.3 * math.sin(2 * math.pi * day / 7)
            lam = base * wave * math.exp(0.01 * day)
            writer.writerow([(start + timedelta(days=day)).isoformat(),
                             name, int(rng.poisson(lam)), 0])

# --- the run configuration ----------------------------------------------
# The same settings could live in a "key = value" config file and be
# launched as `episignal pipeline --config run.conf`.
cfg = RunConfig(
    profiles=str(profiles),
    cases=str(cases),
    out=str(workdir / "out"),
    k=2,
    seed=0,
    horizon=7,
    holdout=14,
    min_total=1000,
    periods=(Period.parse("2021-02-01..2021-03-31"),
             Period.parse("2021-04-01..2021-05-31")),
)

print("cluster -> model spec table:")
for cluster_id, spec in sorted(default_param_table().as_dict().items()):
    print(f"  cluster {cluster_id}: {spec}")

result = run_pipeline(cfg)
print(f"\npipeline exit code: {result.exit_code}")

manifest = json.loads((result.out_dir / "manifest.json").read_text())
print(f"counts: {manifest['counts']}")
print(f"chosen k: {manifest['chosen_k']}, "
      f"silhouette: {manifest['silhouette']:.3f}")

print("\nper-county outcomes:")
for county, entry in sorted(manifest["counties"].items()):
    if entry["status"] == "forecast":
        print(f"  {county}: cluster {entry['cluster']}, "
              f"spec {entry['spec']}, audit {entry['data_quality']}")
    else:
        print(f"  {county}: {entry['status']} ({entry['reason']})")

one = next(iter(sorted((result.out_dir / "forecasts").glob("*.csv"))))
print(f"\nfirst forecast file ({one.name}):")
print(one.read_text().strip())

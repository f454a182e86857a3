"""Tests for the end-to-end pipeline: parameter tables, holdout scoring,
configuration handling, and the full run over the synthetic corpus."""
from __future__ import annotations

import csv
import json
from datetime import date, timedelta

import numpy as np
import pytest

from conftest import BELOW_THRESHOLD, CASES_ONLY, CORPUS_DAYS, CORPUS_START
from episignal.dataset import Period, normalize_name
from episignal.errors import ConfigError, HoldoutTooLarge, MissingCluster
from episignal.pipeline import (
    ClusterParamTable,
    RunConfig,
    build_config,
    default_param_table,
    holdout_evaluate,
    parse_config_file,
    run_pipeline,
)
from episignal.sarima import SarimaParams, SarimaSpec, fit, simulate


# --- parameter table ---------------------------------------------------------

class TestClusterParamTable:
    def test_default_table_shape(self):
        table = default_param_table()
        assert sorted(table.entries) == list(range(9))
        for spec in table.entries.values():
            assert isinstance(spec, SarimaSpec)
            assert spec.s == 7
            assert spec.d == spec.D == 1 or spec.as_tuple()[3:6] == (0, 0, 0)

    def test_lookup(self):
        table = default_param_table()
        assert table.lookup(2) == SarimaSpec(0, 1, 1, 0, 1, 1, 7)
        with pytest.raises(MissingCluster):
            table.lookup(9)

    def test_as_dict_is_sorted_and_stringly(self):
        table = ClusterParamTable(entries={
            1: SarimaSpec(0, 1, 1, 0, 1, 1, 7),
            0: SarimaSpec(1, 1, 1, 0, 1, 1, 7),
        })
        assert table.as_dict() == {
            "0": "(1,1,1)(0,1,1)[7]",
            "1": "(0,1,1)(0,1,1)[7]",
        }

    def test_from_file_round_trip(self, tmp_path):
        path = tmp_path / "table.json"
        path.write_text(json.dumps({"0": "(1,0,0)(0,0,0)[7]",
                                    "3": "(0,1,1)(0,1,1)[7]"}))
        table = ClusterParamTable.from_file(path)
        assert table.lookup(0) == SarimaSpec(1, 0, 0, 0, 0, 0, 7)
        assert table.lookup(3) == SarimaSpec(0, 1, 1, 0, 1, 1, 7)

    @pytest.mark.parametrize("payload", [
        "[]", "{}", '{"0": "nonsense"}', '{"x": "(1,0,0)(0,0,0)[7]"}',
    ])
    def test_from_file_rejects_bad_contents(self, tmp_path, payload):
        path = tmp_path / "table.json"
        path.write_text(payload)
        with pytest.raises(ConfigError):
            ClusterParamTable.from_file(path)


# --- holdout scoring -----------------------------------------------------------

class TestHoldoutEvaluate:
    def test_matches_hand_computed_metrics(self):
        rng = np.random.default_rng(9)
        y = rng.normal(loc=50.0, size=60)
        y[-6:] = [52.0, 0.0, 47.0, 55.0, 0.0, 49.0]
        fitted = fit(SarimaSpec(0, 0, 0), y, seed=0)
        metrics = holdout_evaluate(fitted, y, 6, seed=0)

        # the empty model forecasts the training mean at every step
        predicted = y[:-6].mean()
        err = predicted - y[-6:]
        nonzero = y[-6:] != 0.0
        assert metrics.holdout == 6
        assert metrics.mae == pytest.approx(np.mean(np.abs(err)), abs=1e-9)
        assert metrics.rmse == pytest.approx(np.sqrt(np.mean(err ** 2)),
                                             abs=1e-9)
        expected_mape = np.mean(
            np.abs(err[nonzero] / y[-6:][nonzero])) * 100.0
        assert metrics.mape == pytest.approx(expected_mape, abs=1e-9)
        assert metrics.mape_skipped == 2

    def test_all_zero_actuals_disable_mape(self):
        rng = np.random.default_rng(10)
        y = np.concatenate([rng.normal(loc=5.0, size=40), np.zeros(4)])
        fitted = fit(SarimaSpec(0, 0, 0), y, seed=0)
        metrics = holdout_evaluate(fitted, y, 4, seed=0)
        assert metrics.mape is None
        assert metrics.mape_skipped == 4

    def test_window_validation(self):
        y = np.random.default_rng(1).normal(size=40)
        fitted = fit(SarimaSpec(0, 0, 0), y, seed=0)
        with pytest.raises(ValueError):
            holdout_evaluate(fitted, y, 0)
        with pytest.raises(HoldoutTooLarge):
            holdout_evaluate(fitted, y, 30)

    def test_as_dict_round_trips_through_json(self):
        y = simulate(SarimaSpec(0, 0, 1), SarimaParams(ma=(0.4,)), 80,
                     seed=3) + 100.0
        fitted = fit(SarimaSpec(0, 0, 1), y, seed=0)
        entry = holdout_evaluate(fitted, y, 10, seed=0).as_dict()
        assert set(entry) == {"holdout", "mae", "rmse", "mape",
                              "mape_skipped"}
        assert json.loads(json.dumps(entry)) == entry


# --- configuration --------------------------------------------------------------

class TestParseConfigFile:
    def test_reads_flat_keys_with_comments(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text(
            "# pipeline settings\n"
            "profiles = profiles.csv\n"
            "cases = cases.csv   # daily counts\n"
            "\n"
            "out = out_dir\n"
            "k = 3\n")
        assert parse_config_file(path) == {
            "profiles": "profiles.csv",
            "cases": "cases.csv",
            "out": "out_dir",
            "k": "3",
        }

    def test_unknown_key_reports_line(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("profiles = a\nbogus = 1\n")
        with pytest.raises(ConfigError, match="2"):
            parse_config_file(path)

    def test_missing_equals_sign(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("profiles a\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)


class TestBuildConfig:
    BASE = {"profiles": "p.csv", "cases": "c.csv", "out": "o"}

    def test_defaults_applied(self):
        cfg = build_config(dict(self.BASE))
        assert cfg.k == "auto"
        assert cfg.seed == 0
        assert cfg.horizon == 20
        assert cfg.min_total == 5000
        assert cfg.signal == "cumulative"
        assert cfg.periods == ()

    def test_type_coercion_and_periods(self):
        cfg = build_config({
            **self.BASE,
            "seed": "42",
            "level": "0.9",
            "k": "4",
            "periods": "2020-03-01..2020-04-30, 2020-05-01..2020-06-30",
        })
        assert cfg.seed == 42
        assert cfg.level == 0.9
        assert cfg.k == 4
        assert cfg.periods == (
            Period(date(2020, 3, 1), date(2020, 4, 30)),
            Period(date(2020, 5, 1), date(2020, 6, 30)),
        )

    def test_overrides_win_and_none_is_ignored(self):
        cfg = build_config({**self.BASE, "horizon": "10"},
                           overrides={"horizon": "15", "seed": None})
        assert cfg.horizon == 15
        assert cfg.seed == 0

    def test_unknown_override_rejected(self):
        with pytest.raises(ConfigError):
            build_config(dict(self.BASE), overrides={"bogus": "1"})

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="cases"):
            build_config({"profiles": "p.csv", "out": "o"})

    def test_bad_int_value(self):
        with pytest.raises(ConfigError):
            build_config({**self.BASE, "seed": "soon"})

    def test_seed_falls_back_to_environment(self, monkeypatch):
        monkeypatch.setenv("EPISIGNAL_SEED", "77")
        assert build_config(dict(self.BASE)).seed == 77
        # an explicit seed still wins
        assert build_config({**self.BASE, "seed": "5"}).seed == 5

    def test_run_config_validation(self):
        with pytest.raises(ConfigError):
            RunConfig(profiles="p", cases="c", out="o", horizon=0)
        with pytest.raises(ConfigError):
            RunConfig(profiles="p", cases="c", out="o", k="many")
        with pytest.raises(ConfigError):
            RunConfig(profiles="p", cases="c", out="o", signal="weekly")
        assert RunConfig(profiles="p", cases="c", out="o", k="5").k == 5


# --- full pipeline over the synthetic corpus ------------------------------------

CAPITAL_FOR_TEST = "São Bruno"
CAPITAL_SPEC_FOR_TEST = "(1,0,0)(0,0,0)[7]"


@pytest.fixture(scope="module")
def pipeline_run(corpus, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("pipeline_out")
    cfg = RunConfig(
        profiles=str(corpus.profiles_path),
        cases=str(corpus.cases_path),
        out=str(out_dir),
        periods=(Period.parse("2020-03-01..2020-05-14"),
                 Period.parse("2020-05-15..2020-07-28")),
        k="auto",
        seed=0,
        horizon=10,
        holdout=14,
        capital_override=CAPITAL_FOR_TEST,
        capital_spec=CAPITAL_SPEC_FOR_TEST,
    )
    return cfg, run_pipeline(cfg)


class TestRunPipeline:
    def test_run_succeeds(self, pipeline_run):
        _, result = pipeline_run
        assert result.exit_code == 0

    def test_manifest_written_and_matches_result(self, pipeline_run):
        _, result = pipeline_run
        on_disk = json.loads((result.out_dir / "manifest.json").read_text())
        assert on_disk == json.loads(json.dumps(result.manifest))

    def test_county_counts(self, pipeline_run):
        _, result = pipeline_run
        counts = result.manifest["counts"]
        assert counts["counties"] == 30
        assert counts["skipped"] == 1
        assert counts["error"] == 0
        assert counts["forecast"] == 29

    def test_cases_only_county_is_skipped(self, pipeline_run):
        _, result = pipeline_run
        entry = result.manifest["counties"][
            normalize_name(CASES_ONLY).normalized]
        assert entry["status"] == "skipped"
        assert "profile" in entry["reason"]

    def test_profiles_only_county_absent_from_models(self, pipeline_run):
        _, result = pipeline_run
        assert "quiet ridge" not in result.manifest["counties"]
        assert not (result.out_dir / "models" / "quiet_ridge.json").exists()

    def test_clustering_recovers_three_groups(self, pipeline_run, corpus):
        _, result = pipeline_run
        assert result.manifest["chosen_k"] == 3
        assert result.manifest["silhouette"] > 0.5
        with open(result.out_dir / "clusters" / "assignments.csv",
                  encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 30
        assert [r["county"] for r in rows] == sorted(r["county"]
                                                     for r in rows)
        # cluster labels must agree with the planted groups up to renaming
        group_of = {normalize_name(raw).normalized: group
                    for raw, group in corpus.group_of.items()}
        planted = {}
        for row in rows:
            group = group_of[row["county"]]
            planted.setdefault(group, set()).add(row["cluster"])
        assert all(len(v) == 1 for v in planted.values())
        assert len({v.pop() for v in planted.values()}) == 3

    def test_cluster_artifacts_written(self, pipeline_run):
        _, result = pipeline_run
        clusters = result.out_dir / "clusters"
        summary = json.loads((clusters / "summary.json").read_text())
        assert summary["k"] == 3
        assert summary["auto"] is True
        assert sum(c["size"] for c in summary["clusters"]) == 30
        assert "reporting_lag" in summary["dropped_features"]
        with open(clusters / "centroids.csv", encoding="utf-8") as fh:
            assert len(list(csv.reader(fh))) == 1 + 3
        with open(clusters / "elbow.csv", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["k"]) for r in rows] == list(range(1, 11))
        sse = [float(r["sse"]) for r in rows]
        assert all(a >= b - 1e-9 for a, b in zip(sse, sse[1:]))

    def test_below_threshold_counties_skip_the_audit(self, pipeline_run):
        _, result = pipeline_run
        audits = result.out_dir / "audits"
        expected = {normalize_name(n).normalized.replace(" ", "_")
                    for n in BELOW_THRESHOLD}
        skipped = set()
        for path in audits.iterdir():
            entry = json.loads(path.read_text())
            if entry["status"] == "skipped_below_threshold":
                skipped.add(path.stem)
            else:
                assert entry["status"] == "audited"
                assert entry["classification"] in {
                    "conforming", "flattening_suspected",
                    "underreporting_suspected", "inconclusive"}
        assert skipped == expected
        assert len(list(audits.iterdir())) == 30

    def test_capital_override_changes_one_spec(self, pipeline_run):
        _, result = pipeline_run
        capital = normalize_name(CAPITAL_FOR_TEST).normalized
        counties = result.manifest["counties"]
        assert counties[capital]["spec"] == CAPITAL_SPEC_FOR_TEST
        table_specs = set(default_param_table().as_dict().values())
        for name, entry in counties.items():
            if entry["status"] == "forecast" and name != capital:
                assert entry["spec"] in table_specs

    def test_load_warnings_surface_in_manifest(self, pipeline_run):
        _, result = pipeline_run
        warnings = result.manifest["load_warnings"]
        assert {"county": "sao bruno", "date": "2020-05-20",
                "kind": "negative_new_cases",
                "detail": "clamped -3 to 0"} in warnings

    def test_model_files_carry_quality_and_fit_fields(self, pipeline_run):
        _, result = pipeline_run
        models = result.out_dir / "models"
        model_files = list(models.iterdir())
        assert len(model_files) == 29
        entry = json.loads((models / "sao_bruno.json").read_text())
        assert entry["county"] == "sao bruno"
        assert entry["data_quality"] in {"conforming", "inconclusive",
                                         "suspect", "unaudited"}
        assert {"spec", "params", "loglik", "aic", "converged",
                "holdout"} <= set(entry)
        below = normalize_name(next(iter(BELOW_THRESHOLD))).normalized
        below_entry = json.loads(
            (models / f"{below.replace(' ', '_')}.json").read_text())
        assert below_entry["data_quality"] == "unaudited"

    def test_forecast_files_continue_the_calendar(self, pipeline_run):
        _, result = pipeline_run
        forecasts = result.out_dir / "forecasts"
        files = sorted(forecasts.iterdir())
        assert len(files) == 29
        with open(files[0], encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 10
        start = CORPUS_START.toordinal() + CORPUS_DAYS
        for step, row in enumerate(rows):
            assert date.fromisoformat(row["date"]).toordinal() == start + step
            assert (float(row["lower"]) <= float(row["point"])
                    <= float(row["upper"]))


# --- failure paths ----------------------------------------------------------------

def _write_micro_corpus(root, days=12, n_counties=3):
    profiles = root / "profiles.csv"
    with open(profiles, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["county", "alpha", "beta"])
        for i in range(n_counties):
            writer.writerow([f"County {i}", 1.0 + i, 10.0 - i])
    cases = root / "cases.csv"
    with open(cases, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "county", "new_cases", "new_deaths"])
        for i in range(n_counties):
            for day in range(days):
                writer.writerow([
                    (date(2020, 1, 1) + timedelta(days=day)).isoformat(),
                    f"County {i}", 1 + (day + i) % 3, 0,
                ])
    return profiles, cases


class TestFailurePaths:
    def test_missing_input_file(self, tmp_path):
        cfg = RunConfig(profiles=str(tmp_path / "absent.csv"),
                        cases=str(tmp_path / "also_absent.csv"),
                        out=str(tmp_path / "out"))
        assert run_pipeline(cfg).exit_code == 2

    def test_invalid_param_table_file(self, tmp_path):
        profiles, cases = _write_micro_corpus(tmp_path)
        table = tmp_path / "table.json"
        table.write_text("not json at all")
        cfg = RunConfig(profiles=str(profiles), cases=str(cases),
                        out=str(tmp_path / "out"),
                        param_table=str(table))
        assert run_pipeline(cfg).exit_code == 2

    def test_invalid_capital_spec(self, tmp_path):
        profiles, cases = _write_micro_corpus(tmp_path)
        cfg = RunConfig(profiles=str(profiles), cases=str(cases),
                        out=str(tmp_path / "out"),
                        capital_spec="(bad)")
        assert run_pipeline(cfg).exit_code == 2

    def test_unparseable_cases_file(self, tmp_path):
        profiles, _ = _write_micro_corpus(tmp_path)
        cfg = RunConfig(profiles=str(profiles), cases=str(profiles),
                        out=str(tmp_path / "out"))
        assert run_pipeline(cfg).exit_code == 2

    def test_k_larger_than_corpus(self, tmp_path):
        profiles, cases = _write_micro_corpus(tmp_path)
        cfg = RunConfig(profiles=str(profiles), cases=str(cases),
                        out=str(tmp_path / "out"), k=9)
        assert run_pipeline(cfg).exit_code == 2

    def test_series_too_short_for_every_model(self, tmp_path):
        profiles, cases = _write_micro_corpus(tmp_path, days=12)
        cfg = RunConfig(profiles=str(profiles), cases=str(cases),
                        out=str(tmp_path / "out"), k=2, holdout=2)
        result = run_pipeline(cfg)
        assert result.exit_code == 1
        counts = result.manifest["counts"]
        assert counts["forecast"] == 0
        assert counts["error"] == 3
        for entry in result.manifest["counties"].values():
            assert entry["status"] == "error"
            assert "TooShort" in entry["reason"]
        # audits were configured off, so none were written
        assert list((result.out_dir / "audits").iterdir()) == []

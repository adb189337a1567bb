"""
Tests for job configuration, job execution and the Flask CLI commands.

Run with: pytest tests/test_commands.py -v
"""

import json

import numpy as np
import pytest


SMALL_GRIDS = """\
A_P_HORIZON=96
A_P_GRANULARITY=4
PDF_BOUND=1.0
SIGMA_GRID=24,48,96,192
GRAIN_HORIZON=64
GRAIN_GRID=1,2,4,8,16
RETURN_DT=20
"""


class TestJobConfig:
    """Flat KEY=value job files."""

    def test_unknown_key_is_an_error(self, tmp_path):
        from app.errors import ConfigError
        from app.services.job_service import load_job_config

        path = tmp_path / "job.cfg"
        path.write_text("RUNS=10\nRUN_COUNT=5\n", encoding="utf-8")
        with pytest.raises(ConfigError) as excinfo:
            load_job_config(path)
        assert excinfo.value.context["key"] == "RUN_COUNT"

    def test_lists_and_matrices(self, tmp_path):
        from app.services.job_service import load_job_config

        path = tmp_path / "job.cfg"
        path.write_text(
            "SV_TAUS=20,80\nREGIME_MATRIX=0.9,0.1;0.2,0.8\nSIGMA_GRID=24,48,96\nOUTPUT_FORMAT=JSON\n",
            encoding="utf-8",
        )
        values = load_job_config(path)
        assert values["SV_TAUS"] == (20.0, 80.0)
        assert values["REGIME_MATRIX"] == ((0.9, 0.1), (0.2, 0.8))
        assert values["SIGMA_GRID"].horizons == (24, 48, 96)
        assert values["OUTPUT_FORMAT"] == "json"

    def test_invalid_value_names_the_key(self, tmp_path):
        from app.errors import ConfigError
        from app.services.job_service import load_job_config

        path = tmp_path / "job.cfg"
        path.write_text("RUNS=many\n", encoding="utf-8")
        with pytest.raises(ConfigError) as excinfo:
            load_job_config(path)
        assert excinfo.value.context["key"] == "RUNS"

    def test_precedence(self, tmp_path):
        from app.services.job_service import build_config

        path = tmp_path / "job.cfg"
        path.write_text("MASTER_SEED=6\nPROCESSES=garch11\n", encoding="utf-8")
        env = {"TRI_MASTER_SEED": 5, "TRI_WORKERS": 3}

        assert build_config("ensemble", env, path, out=tmp_path, seed=7).master_seed == 7
        assert build_config("ensemble", env, path, out=tmp_path).master_seed == 6
        from_env = build_config("ensemble", env, None, out=tmp_path, processes=("garch11",))
        assert from_env.master_seed == 5
        assert from_env.workers == 3

    def test_all_processes(self, tmp_path):
        from app.services.job_service import build_config
        from app.services.process_zoo import PROCESS_NAMES

        config = build_config("ensemble", {}, None, out=tmp_path, processes=("all",))
        assert config.processes == PROCESS_NAMES

    def test_exactly_one_source(self, tmp_path):
        from app.errors import ConfigError
        from app.services.job_service import build_config

        with pytest.raises(ConfigError):
            build_config("analyze", {}, None, out=tmp_path, input="x.csv", processes=("garch11",))

    def test_family_overrides(self, tmp_path):
        from app.services.job_service import build_config

        path = tmp_path / "job.cfg"
        path.write_text("GARCH_ALPHA=0.05\nGARCH_BETA=0.9\nGARCH_TARGET_VOL=0.2\n", encoding="utf-8")
        config = build_config("simulate", {}, path, out=tmp_path / "p.csv", processes=("garch11",))
        spec = config.spec_for("garch11")
        assert spec.alpha == 0.05
        assert spec.stationary_variance * 175_200 == pytest.approx(0.04)
        assert spec.label == "GARCH(1,1)"


class TestRunJob:
    """Artifacts, failure reports and determinism."""

    def test_analyze_writes_statistics_and_curves(self, tmp_path, garch_csv, small_cfg):
        from app.services.job_service import build_config, run_job

        out = tmp_path / "out"
        result = run_job(build_config("analyze", {}, small_cfg, input=garch_csv, out=out))
        assert result.ok, result.message
        names = {p.name for p in result.artifacts}
        assert names == {
            "statistics.json",
            "statistics.csv",
            "dsigma_density.csv",
            "dsigma_asymmetry.csv",
            "sigma_cut.csv",
            "graining_cut.csv",
        }
        payload = json.loads((out / "statistics.json").read_text(encoding="utf-8"))
        assert set(payload["statistics"]) == {"A_p", "A_sigma_tot", "A_sigma_cut", "A_gr_cut", "return_asym"}
        assert payload["config"]["request"]["a_p_horizon"] == 96
        assert "workers" not in payload["config"]
        assert sorted(p.name for p in out.iterdir()) == sorted(names)

    def test_constant_series_fails_with_zero_variance(self, tmp_path, small_cfg):
        from app.services.job_service import EXIT_OK, build_config, run_job

        csv = tmp_path / "flat.csv"
        csv.write_text("".join(f"{i},0.0\n" for i in range(2_000)), encoding="utf-8")
        out = tmp_path / "out"
        result = run_job(build_config("analyze", {}, small_cfg, input=csv, out=out))
        assert not result.ok
        assert result.exit_code != EXIT_OK
        report = json.loads((out / "error.json").read_text(encoding="utf-8"))
        assert "ZeroVariance" in report["error_chain"]
        assert report["context"]["statistic"] == "A_p"
        assert [p.name for p in out.iterdir()] == ["error.json"]

    def test_ensemble_is_byte_identical_across_runs_and_workers(self, tmp_path, ensemble_cfg):
        from app.services.job_service import build_config, run_job

        first = run_job(build_config("ensemble", {}, ensemble_cfg, out=tmp_path / "a", workers=1))
        second = run_job(build_config("ensemble", {}, ensemble_cfg, out=tmp_path / "b", workers=2))
        assert first.ok and second.ok
        a = (tmp_path / "a" / "summary.json").read_bytes()
        b = (tmp_path / "b" / "summary.json").read_bytes()
        assert a == b

    def test_ensemble_tables(self, tmp_path, ensemble_cfg):
        from app.services.job_service import build_config, run_job

        out = tmp_path / "out"
        result = run_job(build_config("ensemble", {}, ensemble_cfg, out=out))
        assert result.ok, result.message
        lines = (out / "table_A_gr_cut.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "name,mean,stdDev,p-value"
        assert lines[1].startswith('"GARCH(1,1)",')
        histogram = (out / "A_sigma_cut_histogram.csv").read_text(encoding="utf-8").splitlines()
        assert histogram[0] == "process,bin_left,bin_right,count"
        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        row = summary["ensembles"][0]
        assert row["run_count"] == 3
        assert len(row["statistics"]["A_p"]["samples"]) == 3

    def test_analyze_places_statistics_in_a_null_ensemble(self, tmp_path, garch_csv, small_cfg, ensemble_cfg):
        from app.services.job_service import build_config, run_job
        from app.services.mc_harness import empirical_percentile

        assert run_job(build_config("ensemble", {}, ensemble_cfg, out=tmp_path / "null")).ok
        null_summary = tmp_path / "null" / "summary.json"
        out = tmp_path / "out"
        result = run_job(build_config("analyze", {}, small_cfg, input=garch_csv, out=out, null_summary=null_summary))
        assert result.ok, result.message
        payload = json.loads((out / "statistics.json").read_text(encoding="utf-8"))
        samples = json.loads(null_summary.read_text(encoding="utf-8"))["ensembles"][0]["statistics"]
        row = payload["percentiles"]["garch11"]
        assert set(row) == set(payload["statistics"])
        for stat, pct in row.items():
            assert pct == empirical_percentile(payload["statistics"][stat], samples[stat]["samples"])
            assert 0.0 <= pct <= 1.0
        assert payload["config"]["null_summary"] == "summary.json"
        header = (out / "percentiles.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == "process,statistic,observed,percentile"

    def test_null_summary_must_share_a_statistic(self, tmp_path, garch_csv, small_cfg):
        from app.services.job_service import EXIT_CONFIG, build_config, run_job

        null_summary = tmp_path / "other.json"
        null_summary.write_text(
            json.dumps({"ensembles": [{"process": "x", "statistics": {"kurtosis": {"samples": [1.0, 2.0]}}}]}),
            encoding="utf-8",
        )
        result = run_job(build_config(
            "analyze", {}, small_cfg, input=garch_csv, out=tmp_path / "out", null_summary=null_summary
        ))
        assert result.exit_code == EXIT_CONFIG
        assert result.error["error"] == "ConfigError"

    def test_malformed_null_summary(self, tmp_path, garch_csv, small_cfg):
        from app.services.job_service import EXIT_FAILED, build_config, run_job

        null_summary = tmp_path / "broken.json"
        null_summary.write_text('{"runs": 3}', encoding="utf-8")
        result = run_job(build_config(
            "analyze", {}, small_cfg, input=garch_csv, out=tmp_path / "out", null_summary=null_summary
        ))
        assert result.exit_code == EXIT_FAILED
        assert "ParseError" in result.error["error_chain"]

    def test_null_summary_is_only_for_analyze(self, tmp_path, ensemble_cfg):
        from app.errors import ConfigError
        from app.services.job_service import build_config

        with pytest.raises(ConfigError):
            build_config("ensemble", {}, ensemble_cfg, out=tmp_path / "out", null_summary=tmp_path / "s.json")

    def test_configuration_errors_do_not_run(self, tmp_path):
        from app.services.job_service import EXIT_CONFIG, execute

        result = execute("ensemble", {}, None, out=tmp_path / "out")
        assert not result.ok
        assert result.exit_code == EXIT_CONFIG
        assert result.error["error"] == "ConfigError"


class TestSelftest:
    """Exact identities on a short simulated path."""

    def test_all_checks_pass(self):
        from app.services.job_service import run_selftest

        checks = run_selftest(seed=3)
        assert [name for name, _, _ in checks][0] == "shift_identity"
        assert all(ok for _, ok, _ in checks), checks


class TestCli:
    """Flask CLI commands."""

    def test_version(self, cli_runner):
        from config import VERSION

        result = cli_runner.invoke(args=["version"])
        assert result.exit_code == 0
        assert result.output.strip() == VERSION

    def test_simulate_writes_loadable_csv(self, cli_runner, tmp_path):
        from app.services.series_io import load_series_csv

        out = tmp_path / "path.csv"
        result = cli_runner.invoke(
            args=["simulate", "--process", "heston", "--seed", "4", "--ticks", "1000", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert len(load_series_csv(out)) == 1_000

    def test_analyze_reports_failures(self, cli_runner, tmp_path):
        result = cli_runner.invoke(
            args=["analyze", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "out")]
        )
        assert result.exit_code == 1
        assert "ERROR" in result.output
        assert (tmp_path / "out" / "error.json").exists()

    def test_ensemble_requires_a_process(self, cli_runner, tmp_path):
        result = cli_runner.invoke(args=["ensemble", "--out", str(tmp_path / "out")])
        assert result.exit_code == 2

    def test_selftest_command(self, cli_runner):
        result = cli_runner.invoke(args=["selftest"])
        assert result.exit_code == 0, result.output
        assert "Selftest superado" in result.output


@pytest.fixture
def app():
    from app import create_app

    return create_app("testing")


@pytest.fixture
def cli_runner(app):
    return app.test_cli_runner()


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_GRIDS, encoding="utf-8")
    return path


@pytest.fixture
def ensemble_cfg(tmp_path):
    path = tmp_path / "ensemble.cfg"
    path.write_text(
        SMALL_GRIDS + "PROCESSES=garch11\nRUNS=3\nN_TICKS=4096\nBURN_IN=200\nMASTER_SEED=11\nHISTOGRAM_BINS=5\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def garch_csv(tmp_path):
    from app.services.process_zoo import Garch11, SimConfig, simulate
    from app.services.series_io import save_series_csv

    series = simulate(Garch11.from_target_vol(0.05, 0.9), SimConfig(n_ticks=4_096, burn_in=200, seed=2))
    assert np.all(np.isfinite(series.values))
    return save_series_csv(series, tmp_path / "garch.csv")

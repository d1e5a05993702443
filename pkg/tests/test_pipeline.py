"""End-to-end tests of the batch pipeline, reweighting, reports and the CLI."""

import json

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from imprecise_copula import io
from imprecise_copula.bayes_inference import InferenceConfig, McmcConfig
from imprecise_copula.cli import build_parser, main
from imprecise_copula.config import load_run_config
from imprecise_copula.errors import InputError, StageError
from imprecise_copula.hierarchy import BlockEnsembles
from imprecise_copula.pipeline import (
    CONVERGENCE_COLUMNS,
    convergence_study,
    convergence_summary,
    frank_recovery_table,
    recovery_summary,
    reweight_only,
    run_pipeline,
    stage,
    summarize_run,
)
from imprecise_copula.propagation import WeightedRun

SMALL = {
    "marginal_families": {"x1": ["Gaussian"], "x2": ["Gaussian"]},
    "copula_families": ["Gaussian", "Frank"],
    "inference": {
        "n_prior_samples": 300,
        "mcmc": {"chain_length": 400, "burn_in": 100, "thinning": 5},
    },
    "ensemble": {"n_td": 3, "n_tc": 2},
    "propagation": {"n_samples": 200, "grid_points": 15},
    "performance": {"name": "linear"},
    "truth": {"preset": "frank_demo", "n": 150, "seed": 4},
    "seed": 7,
}

DETERMINISTIC_FILES = (
    io.MODEL_PROBS_FILE,
    io.COPULA_PROBS_FILE,
    io.ENSEMBLE_FILE,
    io.RUN_SAMPLES_FILE,
    io.CDF_BAND_FILE,
)


def small_config(output_dir, **overrides):
    return load_run_config(overrides={**SMALL, "output_dir": str(output_dir), **overrides})


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    output_dir = tmp_path_factory.mktemp("run")
    return run_pipeline(small_config(output_dir))


class TestRunPipeline:
    def test_writes_artifacts(self, finished_run):
        names = {p.name for p in finished_run.output_dir.iterdir()}
        assert set(DETERMINISTIC_FILES) | {io.RUN_METADATA_FILE, io.MANIFEST_FILE} <= names
        assert any(n.startswith("posterior_x1_") for n in names)

    def test_counts(self, finished_run):
        assert finished_run.n_evaluations == 200
        assert finished_run.run.n == 200
        assert len(finished_run.band.candidates) == 3
        assert finished_run.ensembles.n_td == 3

    def test_manifest(self, finished_run):
        manifest = io.read_json(finished_run.output_dir / io.MANIFEST_FILE)
        assert manifest["n_evaluations"] == 200
        assert manifest["seeds"]["root"] == 7
        assert manifest["hashes"]["ensemble"] == finished_run.ensembles.ensemble_hash()
        assert set(manifest["hashes"]["files"]) == set(manifest["files"]) - {io.MANIFEST_FILE}

    def test_identical_configs_give_identical_files(self, finished_run, tmp_path):
        again = run_pipeline(small_config(tmp_path))
        for name in DETERMINISTIC_FILES:
            first = (finished_run.output_dir / name).read_bytes()
            assert first == (again.output_dir / name).read_bytes(), name

    def test_band_is_a_cdf_envelope(self, finished_run):
        band = finished_run.band
        assert np.all(band.lower <= band.upper)
        assert np.all(np.diff(band.lower) >= -1e-12)
        assert band.upper[-1] == pytest.approx(1.0)

    def test_inference_only(self, tmp_path):
        result = run_pipeline(small_config(tmp_path), propagate_outputs=False)
        assert result.run is None and result.n_evaluations == 0
        assert not (tmp_path / io.RUN_SAMPLES_FILE).exists()
        assert (tmp_path / io.ENSEMBLE_FILE).exists()

    def test_independence_mode(self, tmp_path):
        result = run_pipeline(small_config(tmp_path, **{"dependence.mode": "independence"}))
        assert result.ensembles.n_tc == 1
        assert len(result.band.candidates) == 3

    def test_data_file(self, tmp_path):
        data = tmp_path / "data.csv"
        values = np.random.default_rng(0).normal(size=(40, 2))
        io.write_csv(pd.DataFrame(values, columns=["x1", "x2"]), data)
        cfg = small_config(tmp_path / "out", data_path=str(data))
        result = run_pipeline(cfg, propagate_outputs=False)
        assert result.ensembles.variables == ["x1", "x2"]

    def test_missing_column_is_a_data_stage_error(self, tmp_path):
        data = tmp_path / "data.csv"
        data.write_text("x1,y\n1,2\n2,3\n3,5\n", encoding="utf-8")
        with pytest.raises(StageError) as info:
            run_pipeline(small_config(tmp_path / "out", data_path=str(data)))
        assert info.value.stage == "data"


class TestReweighting:
    def test_same_ensemble_reproduces_band(self, finished_run, tmp_path):
        out = finished_run.output_dir
        band = reweight_only(
            out, out / io.ENSEMBLE_FILE, tmp_path, grid_points=15, level="pair"
        )
        assert_allclose(band.cdfs, finished_run.band.cdfs, atol=1e-12)
        assert (tmp_path / io.CDF_BAND_FILE).exists()

    def test_joint_level_covers_every_copula_draw(self, finished_run, tmp_path):
        out = finished_run.output_dir
        joint = reweight_only(out, out / io.ENSEMBLE_FILE, tmp_path, grid_points=15)
        assert len(joint.candidates) == 6
        assert np.all(joint.lower <= joint.upper)

    def test_stored_run_untouched(self, finished_run, tmp_path):
        path = finished_run.output_dir / io.RUN_SAMPLES_FILE
        before = path.read_bytes()
        out = finished_run.output_dir
        reweight_only(out, out / io.ENSEMBLE_FILE, tmp_path)
        assert path.read_bytes() == before

    def test_support_violation(self, tmp_path, toy_ensemble):
        rng = np.random.default_rng(1)
        samples = rng.gamma(2.0, size=(20, 2))
        run = WeightedRun(
            samples=samples,
            outputs=samples.sum(axis=1),
            log_q=np.zeros(20),
            columns=("x1", "x2"),
            seed=0,
            ensemble_hash="",
            support=((0.0, np.inf), (0.0, np.inf)),
            n_evaluations=20,
        )
        io.write_run(run, tmp_path)
        io.write_ensemble(BlockEnsembles((toy_ensemble,)), tmp_path / io.ENSEMBLE_FILE)
        with pytest.raises(StageError, match="support") as info:
            reweight_only(tmp_path, tmp_path / io.ENSEMBLE_FILE)
        assert info.value.stage == "reweighting"


class TestReports:
    def test_summarize(self, finished_run):
        summary = summarize_run(finished_run.output_dir)
        assert summary["run"]["n_samples"] == 200
        assert summary["band"]["grid_points"] == 15
        assert set(summary["model_probs"]["target"]) == {"x1", "x2"}

    def test_empty_directory(self, tmp_path):
        with pytest.raises(StageError) as info:
            summarize_run(tmp_path)
        assert info.value.stage == "report"

    def test_stage_wraps_library_errors(self):
        with pytest.raises(StageError, match=r"\[cdf_band\] bad grid") as info:
            with stage("cdf_band"):
                raise InputError("bad grid")
        assert info.value.context == {"error": "InputError"}


class TestStudies:
    def test_frank_recovery_table(self):
        cfg = InferenceConfig(
            n_prior_samples=200, mcmc=McmcConfig(chain_length=300, burn_in=100, thinning=2)
        )
        table = frank_recovery_table((20, 200), seeds=2, families=("Gaussian", "Frank"), cfg=cfg)
        assert len(table) == 4
        assert_allclose(table[["p_Gaussian", "p_Frank"]].sum(axis=1), 1.0)
        summary = recovery_summary(table)
        assert summary["n"].tolist() == [20, 200]
        assert "seed" not in summary.columns

    @pytest.mark.slow
    def test_frank_probability_grows_with_data(self):
        summary = recovery_summary(frank_recovery_table((10, 100, 1000), seeds=5))
        p_frank = summary["p_Frank"].to_numpy()
        assert np.all(np.diff(p_frank) > 0.0)
        assert p_frank[-1] > 0.5

    def test_convergence_summary_takes_median_over_seeds(self):
        table = pd.DataFrame(
            {
                "mode": ["copula"] * 3 + ["independence"] * 3,
                "n": [20] * 6,
                "seed": [0, 1, 2] * 2,
                "mean_width": [0.3, 0.1, 0.2, 0.5, 0.6, 0.4],
                "coverage": [1.0, 0.5, 1.0, 0.0, 0.0, 1.0],
                "median_spread": [0.2, 0.2, 0.1, 0.3, 0.3, 0.3],
            },
            columns=CONVERGENCE_COLUMNS,
        )
        summary = convergence_summary(table)
        assert summary["mode"].tolist() == ["copula", "independence"]
        assert_allclose(summary["mean_width"], [0.2, 0.5])
        assert_allclose(summary["coverage"], [1.0, 0.0])
        assert "seed" not in summary.columns

    @pytest.mark.slow
    def test_convergence_study(self, tmp_path):
        cfg = small_config(tmp_path)
        table = convergence_study(
            cfg, [30, 300], ["copula", "independence"], seeds=2, n_reference=5000
        )
        assert list(table.columns) == CONVERGENCE_COLUMNS
        assert len(table) == 8
        assert sorted(set(table["seed"])) == [7, 8]
        assert table["coverage"].between(0.0, 1.0).all()
        assert (table["median_spread"] >= 0.0).all()
        assert len(convergence_summary(table)) == 4

    @pytest.mark.slow
    def test_band_narrows_with_data(self, tmp_path):
        cfg = small_config(
            tmp_path,
            **{
                "inference.n_prior_samples": 2000,
                "inference.mcmc.chain_length": 1500,
                "inference.mcmc.burn_in": 300,
                "ensemble.n_td": 20,
                "ensemble.n_tc": 10,
                "propagation.n_samples": 20_000,
                "propagation.grid_points": 50,
            },
        )
        table = convergence_study(cfg, [20, 500, 5000], ["copula"], seeds=3, n_reference=200_000)
        summary = convergence_summary(table)
        assert np.all(np.diff(summary["mean_width"]) < 0.0)
        assert summary["median_spread"].iloc[-1] < 0.05


class TestCli:
    def test_parser_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["propagate", "--n-td", "5", "--dependence-mode", "independence"])
        assert (args.command, args.n_td, args.dependence_mode) == ("propagate", 5, "independence")
        with pytest.raises(SystemExit):
            parser.parse_args(["reweight"])
        args = parser.parse_args(["convergence", "--seeds", "3", "--seed", "2"])
        assert (args.seeds, args.seed, args.n_values) == (3, 2, [20, 50, 500, 5000])

    def test_simulate(self, tmp_path, capsys):
        output = tmp_path / "data.csv"
        argv = ["simulate", "--preset", "frank_unit", "--n", "25", "--seed", "3", "-o", str(output)]
        code = main(argv)
        assert code == 0
        assert len(io.ingest_csv(output)) == 25
        assert "Synthetic data" in capsys.readouterr().out

    def test_infer_with_config_file(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps(SMALL), encoding="utf-8")
        code = main(["infer", "--config", str(config), "--output-dir", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / io.MODEL_PROBS_FILE).exists()

    def test_error_exit_code(self, tmp_path, capsys):
        code = main(["report", "--run-dir", str(tmp_path)])
        assert code == 1
        assert "Error:" in capsys.readouterr().err

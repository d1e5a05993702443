"""Command-line interface for imprecise copula inference and propagation."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from . import io
from .bayes_inference import InferenceConfig, McmcConfig
from .config import RunConfig, TruthConfig, load_run_config
from .errors import ImpreciseCopulaError
from .hierarchy import DEPENDENCE_MODES
from .logging_utils import setup_logging
from .pipeline import (
    convergence_study,
    convergence_summary,
    frank_recovery_table,
    recovery_summary,
    reweight_only,
    run_pipeline,
    summarize_run,
)
from .simulation import PRESETS, simulate_truth

LOGGER = logging.getLogger(__name__)

# CLI flag -> dotted RunConfig key
OVERRIDE_KEYS = {
    "seed": "seed",
    "data": "data_path",
    "output_dir": "output_dir",
    "n_td": "ensemble.n_td",
    "n_tc": "ensemble.n_tc",
    "n_samples": "propagation.n_samples",
    "dependence_mode": "dependence.mode",
    "rho": "dependence.rho",
    "n_jobs": "inference.n_jobs",
}


class ImpreciseCopulaApp:
    """Runs one subcommand and prints a framed summary."""

    def __init__(self, args: argparse.Namespace):
        self.args = args

    @staticmethod
    def banner(title: str, rows: Sequence[Sequence[Any]] = ()):
        print("=" * 80)
        print(title)
        print("=" * 80)
        for key, value in rows:
            print(f"{key}: {value}")
        if rows:
            print("=" * 80)

    def overrides(self) -> Dict[str, Any]:
        return {
            dotted: getattr(self.args, flag)
            for flag, dotted in OVERRIDE_KEYS.items()
            if getattr(self.args, flag, None) is not None
        }

    def load_config(self) -> RunConfig:
        return load_run_config(getattr(self.args, "config", None), self.overrides())

    def run(self) -> int:
        handler = getattr(self, "cmd_" + self.args.command.replace("-", "_"))
        return handler()

    def cmd_simulate(self) -> int:
        truth = TruthConfig(preset=self.args.preset, theta=self.args.theta)
        seed = 0 if self.args.seed is None else self.args.seed
        frame = simulate_truth(truth, self.args.n, seed)
        io.write_csv(frame, self.args.output)
        self.banner(
            "Synthetic data",
            [
                ("Preset", truth.preset),
                ("Rows", len(frame)),
                ("Columns", ", ".join(frame.columns)),
                ("Seed", seed),
                ("Output", self.args.output),
            ],
        )
        return 0

    def _run_header(self, cfg: RunConfig, title: str):
        self.banner(
            title,
            [
                ("Data", cfg.data_path or f"simulated ({(cfg.truth or TruthConfig()).preset})"),
                ("Pairs", ", ".join("/".join(p) for p in cfg.blocks.pairs) or "-"),
                ("Independent", ", ".join(cfg.blocks.singles) or "-"),
                ("Copula candidates", ", ".join(cfg.copula_families)),
                ("Dependence mode", cfg.dependence.mode),
                ("N_td x N_tc", f"{cfg.ensemble.n_td} x {cfg.ensemble.n_tc}"),
                ("Seed", cfg.seed),
                ("Output", cfg.output_dir),
            ],
        )

    def cmd_infer(self) -> int:
        cfg = self.load_config()
        self._run_header(cfg, "Multimodel inference")
        result = run_pipeline(cfg, propagate_outputs=False)
        print(io.model_probability_frame(result.ensembles.marginal_posteriors).to_string())
        if result.ensembles.pairs:
            print(io.copula_probability_frame(result.ensembles).to_string())
        print(f"\nWrote {len(result.files)} files to {result.output_dir}")
        return 0

    def cmd_propagate(self) -> int:
        cfg = self.load_config()
        self._run_header(cfg, "Inference and one-pass propagation")
        result = run_pipeline(cfg)
        self.banner(
            "Propagation summary",
            [
                ("Samples from q*", result.run.n),
                ("Performance evaluations", result.n_evaluations),
                ("Band candidates", len(result.band.candidates)),
                ("Band mean width", f"{result.band.mean_width:.4f}"),
                ("Files", len(result.files)),
            ],
        )
        return 0

    def cmd_reweight(self) -> int:
        band = reweight_only(
            self.args.run_dir,
            self.args.ensemble,
            self.args.output_dir,
            grid_points=self.args.grid_points,
            level=self.args.level,
            normalized=not self.args.unnormalized,
            weighting=self.args.weighting,
        )
        self.banner(
            "Reweighted band",
            [
                ("Run", self.args.run_dir),
                ("Ensemble", self.args.ensemble),
                ("Candidates", len(band.candidates)),
                ("Mean width", f"{band.mean_width:.4f}"),
                ("Performance evaluations", 0),
            ],
        )
        return 0

    def cmd_report(self) -> int:
        summary = summarize_run(self.args.run_dir)
        self.banner(f"Run report: {summary['run_dir']}")
        for key in ("model_probs", "copula_probs"):
            if key in summary:
                print(f"\n{key}:")
                print(summary[key].to_string(index=False))
        if "run" in summary:
            run = summary["run"]
            print(f"\nsamples: {run['n_samples']}  evaluations: {run['n_evaluations']}")
            print(f"ensemble hash: {run['ensemble_hash']}")
        if "band" in summary:
            band = summary["band"]
            print(
                f"band: {band['grid_points']} grid points, mean width {band['mean_width']:.4f}, "
                f"max width {band['max_width']:.4f}"
            )
        return 0

    def cmd_frank_study(self) -> int:
        cfg = InferenceConfig(
            n_prior_samples=self.args.n_prior_samples,
            mcmc=McmcConfig(chain_length=self.args.chain_length, burn_in=self.args.burn_in),
            n_jobs=self.args.n_jobs or 1,
        )
        self.banner(
            "Frank copula recovery",
            [
                ("Data sizes", " ".join(str(n) for n in self.args.n_values)),
                ("Seeds", self.args.seeds),
                ("theta", self.args.theta),
            ],
        )
        table = frank_recovery_table(
            self.args.n_values, self.args.seeds, theta=self.args.theta, cfg=cfg
        )
        summary = recovery_summary(table)
        print(summary.to_string(index=False))
        if self.args.output:
            io.write_csv(table, self.args.output)
            print(f"\nPer-seed table written to {self.args.output}")
        return 0

    def cmd_convergence(self) -> int:
        cfg = self.load_config()
        self._run_header(cfg, "Band convergence study")
        table = convergence_study(cfg, self.args.n_values, self.args.modes, self.args.seeds)
        print(convergence_summary(table).to_string(index=False))
        if self.args.output:
            io.write_csv(table, self.args.output)
            print(f"\nPer-seed table written to {self.args.output}")
        return 0


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: INFO)",
    )
    common.add_argument("--log-file", type=Path, default=None, help="Also log to this file")
    common.add_argument("--seed", type=int, default=None, help="Root seed")
    common.add_argument("--n-td", type=int, default=None, help="Marginal pairs per block")
    common.add_argument("--n-tc", type=int, default=None, help="Copula draws per marginal pair")
    common.add_argument("--n-samples", type=int, default=None, help="Samples drawn from q*")
    common.add_argument(
        "--dependence-mode",
        choices=list(DEPENDENCE_MODES),
        default=None,
        help="copula (inferred), independence, or gaussian_rho (fixed Gaussian copula)",
    )
    common.add_argument("--rho", type=float, default=None, help="Correlation for gaussian_rho")
    common.add_argument("--n-jobs", type=int, default=None, help="Worker threads for inference")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imprecise-copula",
        description="Multimodel copula inference with one-pass importance-sampling propagation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Frank-dependent synthetic data
  imprecise-copula simulate --preset frank_demo --n 1000 --seed 1 -o data.csv

  # Inference only (model probabilities, posterior chains, ensemble.json)
  imprecise-copula infer --config run.json --data data.csv --output-dir runs/demo

  # Full run with a smaller ensemble
  imprecise-copula propagate --config run.json --n-td 100 --n-tc 50

  # New band from a stored run without re-evaluating the model
  imprecise-copula reweight --run-dir runs/demo --ensemble runs/more-data/ensemble.json

  # Copula recovery versus data size
  imprecise-copula frank-study --n-values 10 100 1000 --seeds 10
        """,
    )
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[common], help="Generate synthetic data")
    simulate.add_argument("--preset", choices=sorted(PRESETS), default="frank_demo")
    simulate.add_argument("--n", type=int, default=1000, help="Rows (default: 1000)")
    simulate.add_argument("--theta", type=float, default=None, help="Frank parameter")
    simulate.add_argument("-o", "--output", type=Path, required=True, help="CSV to write")

    for name, text in (
        ("infer", "Marginal and copula inference; writes the ensemble"),
        ("propagate", "Full pipeline: inference, q*, propagation and CDF band"),
    ):
        command = sub.add_parser(name, parents=[common], help=text)
        command.add_argument("--config", type=Path, default=None, help="Run config JSON")
        command.add_argument("--data", type=str, default=None, help="Input CSV")
        command.add_argument("--output-dir", type=str, default=None, help="Output directory")

    reweight = sub.add_parser(
        "reweight", parents=[common], help="Band from a stored run and an ensemble"
    )
    reweight.add_argument("--run-dir", type=Path, required=True)
    reweight.add_argument("--ensemble", type=Path, required=True)
    reweight.add_argument("--output-dir", type=Path, default=None)
    reweight.add_argument("--grid-points", type=int, default=50)
    reweight.add_argument("--level", choices=["joint", "pair"], default="joint")
    reweight.add_argument("--weighting", choices=["uniform", "posterior"], default="uniform")
    reweight.add_argument(
        "--unnormalized", action="store_true", help="Divide weights by n instead of their sum"
    )

    report = sub.add_parser("report", parents=[common], help="Summarize a run directory")
    report.add_argument("--run-dir", type=Path, required=True)

    study = sub.add_parser(
        "frank-study", parents=[common], help="Copula recovery versus data size"
    )
    study.add_argument("--n-values", type=int, nargs="+", default=[10, 100, 1000])
    study.add_argument("--seeds", type=int, default=10, help="Number of seeds per size")
    study.add_argument("--theta", type=float, default=3.0)
    study.add_argument("--n-prior-samples", type=int, default=10_000)
    study.add_argument("--chain-length", type=int, default=5000)
    study.add_argument("--burn-in", type=int, default=1000)
    study.add_argument("-o", "--output", type=Path, default=None, help="Per-seed CSV")

    convergence = sub.add_parser(
        "convergence", parents=[common], help="Band width versus data size per dependence mode"
    )
    convergence.add_argument("--config", type=Path, default=None)
    convergence.add_argument("--n-values", type=int, nargs="+", default=[20, 50, 500, 5000])
    convergence.add_argument("--modes", nargs="+", choices=list(DEPENDENCE_MODES), default=None)
    convergence.add_argument("--seeds", type=int, default=5, help="Seeds per data size")
    convergence.add_argument("-o", "--output", type=Path, default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for CLI."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_file)
    pd.set_option("display.width", 120)

    try:
        return ImpreciseCopulaApp(args).run()
    except ImpreciseCopulaError as e:
        LOGGER.error("%s", e, extra={"stage": getattr(e, "stage", None)})
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\nInterrupted.", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())

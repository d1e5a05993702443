"""Demo: Frank-dependent data, a small candidate ensemble and its CDF band."""

import argparse
import sys
from pathlib import Path

import numpy as np

# Add src to path for running demo
sys.path.insert(0, str(Path(__file__).parent / "src"))

from imprecise_copula import (  # noqa: E402
    InferenceConfig,
    McmcConfig,
    cdf_band,
    infer_block_ensembles,
    optimal_product_density,
    propagate,
)
from imprecise_copula.bayes_inference import CopulaCandidate, MarginalCandidate  # noqa: E402
from imprecise_copula.config import TruthConfig  # noqa: E402
from imprecise_copula.errors import ImpreciseCopulaError  # noqa: E402
from imprecise_copula.models import CountingFunction, get_performance_function  # noqa: E402
from imprecise_copula.simulation import simulate_truth  # noqa: E402


def print_model_table(ensembles):
    """Marginal and averaged copula model probabilities."""
    print("\n" + "=" * 80)
    print("Model probabilities")
    print("=" * 80)
    for name, posterior in ensembles.marginal_posteriors.items():
        print(f"{name}:")
        for score in posterior.scores:
            flag = "" if score.retained else "  (dropped)"
            print(f"  {score.name:>12} {score.probability:8.4f}{flag}")
    for pair in ensembles.pairs:
        totals = {}
        for entry in pair.entries:
            for model, p in zip(entry.copulas.model_names, entry.copulas.model_probs):
                totals[model] = totals.get(model, 0.0) + p / pair.n_td
        print(f"copula {'/'.join(pair.variables)} (mean over marginal pairs):")
        for model, p in sorted(totals.items(), key=lambda item: -item[1]):
            print(f"  {model:>12} {p:8.4f}")
    print("=" * 80)


def visualize_band(band, width=60, rows=12):
    """ASCII plot of the lower and upper CDF envelopes."""
    print("\n" + "=" * 80)
    print("CDF band (- lower, + upper, # both)")
    print("=" * 80)
    columns = np.linspace(0, len(band.grid) - 1, width).round().astype(int)
    canvas = [[" "] * width for _ in range(rows)]
    for j, index in enumerate(columns):
        lo = int(round(band.lower[index] * (rows - 1)))
        hi = int(round(band.upper[index] * (rows - 1)))
        for level in range(lo, hi + 1):
            canvas[rows - 1 - level][j] = ":"
        canvas[rows - 1 - lo][j] = "-"
        canvas[rows - 1 - hi][j] = "#" if hi == lo else "+"
    for line in canvas:
        print("|" + "".join(line))
    print("+" + "-" * width)
    print(f" {band.grid[0]:.3f}{'':>{width - 16}}{band.grid[-1]:.3f}")
    print("=" * 80)


def main():
    """Run the Frank demo."""
    parser = argparse.ArgumentParser(
        description="Frank copula demo: inference, q* propagation and CDF band",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Default small run
  python demo_frank.py

  # More data and a larger ensemble
  python demo_frank.py --n 500 --n-td 50 --n-tc 20

  # Quadratic performance function
  python demo_frank.py --function quadratic
        """,
    )
    parser.add_argument("--n", type=int, default=200, help="Data size (default: 200)")
    parser.add_argument("--theta", type=float, default=3.0, help="Frank parameter (default: 3)")
    parser.add_argument("--n-td", type=int, default=20, help="Marginal pairs (default: 20)")
    parser.add_argument("--n-tc", type=int, default=10, help="Copula draws (default: 10)")
    parser.add_argument("--samples", type=int, default=2000, help="Samples from q*")
    parser.add_argument("--function", choices=["linear", "quadratic"], default="linear")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print("=" * 80)
    print("Imprecise Copula Demo - Frank dependence")
    print("=" * 80)
    print(f"Data: {args.n} draws, Frank(theta={args.theta}) on standard normal marginals")
    print(f"Ensemble: {args.n_td} marginal pairs x {args.n_tc} copula draws")
    print(f"Performance function: {args.function}")

    try:
        data = simulate_truth(TruthConfig("frank_demo", theta=args.theta), args.n, args.seed)
        cfg = InferenceConfig(
            n_prior_samples=2000, mcmc=McmcConfig(chain_length=2000, burn_in=500, thinning=2)
        )
        print("\nInferring marginals and conditional copulas...")
        ensembles = infer_block_ensembles(
            {c: data[c].to_numpy() for c in data.columns},
            pairs=[("x1", "x2")],
            singles=[],
            marginal_candidates={
                c: [MarginalCandidate("Gaussian"), MarginalCandidate("Lognormal")]
                for c in ("x1", "x2")
            },
            copula_candidates=[
                CopulaCandidate(f) for f in ("Gaussian", "Clayton", "Gumbel", "Frank")
            ],
            cfg=cfg,
            n_td=args.n_td,
            n_tc=args.n_tc,
            seed=args.seed,
        )
        print_model_table(ensembles)

        print("\nSampling q* and evaluating the performance function once...")
        q = optimal_product_density(ensembles)
        g = CountingFunction(get_performance_function(args.function).bind(q.columns))
        run = propagate(q, g, args.samples, args.seed, ensembles.ensemble_hash())
        grid = np.linspace(np.quantile(run.outputs, 0.01), np.quantile(run.outputs, 0.99), 80)
        band = cdf_band(run, q, grid, level="pair")
        visualize_band(band)

        # Summary
        print("\n" + "=" * 80)
        print("Summary")
        print("=" * 80)
        print(f"Candidate densities: {q.n_td * q.n_tc}")
        print(f"Performance evaluations: {g.evaluations}")
        print(f"Band mean width: {band.mean_width:.4f}")
        print("=" * 80)

    except ImpreciseCopulaError as e:
        print(f"\nError: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()

"""
Batch orchestration: inference, ensemble, optimal density, one-pass propagation and
CDF bands, with every artifact written to the run's output directory.

Stages run sequentially; any library error raised inside a stage is re-raised as a
``StageError`` carrying the stage name.
"""

import hashlib
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterator, Optional, Sequence, Union

import numpy as np
import pandas as pd

from . import io
from .bayes_inference import CopulaCandidate, InferenceConfig, infer_models
from .config import RunConfig, TruthConfig
from .copula_core import CopulaFamily
from .errors import ImpreciseCopulaError, InputError, StageError
from .hierarchy import BlockEnsembles, CopulaInferenceCache, infer_block_ensembles
from .models import CountingFunction, SubprocessModel, get_performance_function
from .propagation import (
    CdfBand,
    LookupTableDensity,
    MixtureDensity,
    WeightedRun,
    cdf_band,
    check_support,
    optimal_product_density,
    propagate,
)
from .simulation import simulate_truth

LOGGER = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = ["mode", "n", "seed", "mean_width", "coverage", "median_spread"]

PathLike = Union[str, Path]


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Log entry into a stage and tag any library failure with its name."""
    LOGGER.info("Starting stage %s", name, extra={"stage": name})
    try:
        yield
    except StageError:
        raise
    except ImpreciseCopulaError as e:
        raise StageError(name, str(e), {"error": type(e).__name__}) from e


@dataclass
class PipelineResult:
    """Everything one pipeline run produced, plus the files it wrote."""

    output_dir: Path
    ensembles: BlockEnsembles
    run: Optional[WeightedRun] = None
    band: Optional[CdfBand] = None
    n_evaluations: int = 0
    files: Dict[str, str] = field(default_factory=dict)


def _child_seeds(seed: int) -> Dict[str, int]:
    names = ("inference", "propagation")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: int(c.generate_state(1)[0]) for n, c in zip(names, children)}


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_data(cfg: RunConfig) -> pd.DataFrame:
    """Data named by the config, or simulated from its truth model when no file is given."""
    if cfg.data_path is not None:
        frame = io.ingest_csv(cfg.data_path)
    else:
        frame = simulate_truth(cfg.truth or TruthConfig())
    missing = [v for v in cfg.variables if v not in frame.columns]
    if missing:
        raise InputError(f"data has no columns {missing}; found {list(frame.columns)}")
    return frame


def build_performance(cfg: RunConfig, columns: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Performance function of the config, bound to the ensemble's column order."""
    perf = cfg.performance
    if perf.command is not None:
        return SubprocessModel(perf.command, perf.timeout)
    return get_performance_function(perf.name, **dict(perf.params)).bind(columns)


def output_grid(outputs: np.ndarray, points: int) -> np.ndarray:
    """Evenly spaced grid over the range of the stored outputs."""
    outputs = np.asarray(outputs, dtype=float)
    lo, hi = float(np.min(outputs)), float(np.max(outputs))
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, points)


def infer_stage(
    cfg: RunConfig,
    data: pd.DataFrame,
    seed: Optional[int] = None,
    cache: Optional[CopulaInferenceCache] = None,
) -> BlockEnsembles:
    """Marginal inference, marginal draws and conditional copula inference per block."""
    with stage("inference"):
        return infer_block_ensembles(
            {v: data[v].to_numpy(dtype=float) for v in cfg.variables},
            cfg.blocks.pairs,
            cfg.blocks.singles,
            cfg.marginal_candidates(),
            cfg.copula_candidates(),
            cfg.inference,
            n_td=cfg.ensemble.n_td,
            n_tc=cfg.ensemble.n_tc,
            marginal_priors={v: cfg.priors.marginal_priors(v) for v in cfg.variables},
            copula_priors=cfg.priors.copula_priors(),
            dependence_mode=cfg.dependence.mode,
            rho=cfg.dependence.rho,
            method=cfg.ensemble.sampling,
            model_selection=cfg.ensemble.model_selection,
            seed=cfg.seed if seed is None else seed,
            cache=cache,
        )


def write_inference(ensembles: BlockEnsembles, output_dir: Path) -> Dict[str, str]:
    """Model probability tables, posterior chains and the ensemble JSON."""
    written = {}
    io.write_csv(
        io.model_probability_frame(ensembles.marginal_posteriors),
        output_dir / io.MODEL_PROBS_FILE,
    )
    written[io.MODEL_PROBS_FILE] = "marginal model probabilities"
    if ensembles.pairs:
        io.write_csv(io.copula_probability_frame(ensembles), output_dir / io.COPULA_PROBS_FILE)
        written[io.COPULA_PROBS_FILE] = "copula model probabilities"
    written.update(io.write_posterior_samples(ensembles.marginal_posteriors, output_dir))
    io.write_ensemble(ensembles, output_dir / io.ENSEMBLE_FILE)
    written[io.ENSEMBLE_FILE] = "ensemble"
    return written


def _log_q_evaluator(cfg: RunConfig, q: MixtureDensity, ensembles: BlockEnsembles, seed: int):
    grid = cfg.propagation.lookup_grid
    if not grid:
        return None
    if len(ensembles.pairs) != 1 or ensembles.singles:
        LOGGER.warning(
            "Lookup tables cover a single pair block only; evaluating q* exactly",
            extra={"stage": "propagation"},
        )
        return None
    block = q.blocks[0]
    table = LookupTableDensity.from_samples(block, block.sample(4 * grid, seed), n_points=grid)
    LOGGER.info("Built %dx%d lookup table for q*", grid, grid, extra={"stage": "propagation"})
    return table


def _write_manifest(
    cfg: RunConfig,
    output_dir: Path,
    seeds: Dict[str, int],
    hashes: Dict[str, str],
    files: Dict[str, str],
    extra: Optional[Dict[str, object]] = None,
):
    file_hashes = {name: _file_hash(output_dir / name) for name in sorted(files)}
    manifest = io.build_manifest(
        cfg.to_dict(),
        cfg.config_hash(),
        seeds,
        {**hashes, "files": file_hashes},
        list(files),
        extra,
    )
    io.write_json(manifest, output_dir / io.MANIFEST_FILE)


def run_pipeline(
    cfg: RunConfig, data: Optional[pd.DataFrame] = None, propagate_outputs: bool = True
) -> PipelineResult:
    """
    Run inference and, unless ``propagate_outputs`` is false, the one-pass propagation.

    Writes ``model_probs.csv``, ``copula_probs.csv``, ``posterior_<var>_<model>.csv``,
    ``ensemble.json``, ``run_samples.csv`` with ``run_metadata.json``, ``cdf_band.csv``
    and ``manifest.json`` into ``cfg.output_dir``. Identical configs produce
    byte-identical files.

    Raises:
        StageError: Naming the stage that failed
    """
    output_dir = Path(cfg.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    seeds = {"root": cfg.seed, **_child_seeds(cfg.seed)}

    with stage("data"):
        data = load_data(cfg) if data is None else data

    ensembles = infer_stage(cfg, data, seeds["inference"])
    with stage("write_inference"):
        files = write_inference(ensembles, output_dir)
    hashes = {"ensemble": ensembles.ensemble_hash()}
    result = PipelineResult(output_dir, ensembles, files=files)

    if propagate_outputs:
        with stage("optimal_density"):
            q = optimal_product_density(ensembles, cfg.propagation.weighting)
            table = _log_q_evaluator(cfg, q, ensembles, seeds["propagation"])
        with stage("propagation"):
            g = CountingFunction(build_performance(cfg, q.columns))
            run = propagate(
                q,
                g,
                cfg.propagation.n_samples,
                seeds["propagation"],
                ensemble_hash=hashes["ensemble"],
                log_q_density=table,
            )
            io.write_run(run, output_dir)
        files[io.RUN_SAMPLES_FILE] = "weighted run"
        files[io.RUN_METADATA_FILE] = "weighted run metadata"
        with stage("cdf_band"):
            band = cdf_band(
                run,
                q,
                output_grid(run.outputs, cfg.propagation.grid_points),
                level=cfg.propagation.band_level,
                normalized=cfg.propagation.normalized,
            )
            io.write_cdf_band(band, output_dir / io.CDF_BAND_FILE)
        files[io.CDF_BAND_FILE] = "cdf band"
        result.run, result.band, result.n_evaluations = run, band, g.evaluations

    with stage("manifest"):
        _write_manifest(
            cfg,
            output_dir,
            seeds,
            hashes,
            files,
            {"n_evaluations": result.n_evaluations, "dependence_mode": cfg.dependence.mode},
        )
    files[io.MANIFEST_FILE] = "manifest"
    LOGGER.info(
        "Run finished: %d files in %s", len(files), output_dir, extra={"stage": "pipeline"}
    )
    return result


# ---------------------------------------------------------------------------
# Reweighting without new evaluations
# ---------------------------------------------------------------------------


def reweight(
    run: WeightedRun,
    ensembles: BlockEnsembles,
    grid_points: int = 50,
    level: str = "joint",
    normalized: bool = True,
    weighting: str = "uniform",
) -> CdfBand:
    """
    Band of a (possibly new) ensemble from a stored run; the performance function is
    never called.

    Raises:
        InputError: If the ensemble's variables differ from the run's columns
        SupportError: If the ensemble reaches outside the run's support
    """
    q = optimal_product_density(ensembles, weighting)
    if tuple(q.columns) != tuple(run.columns):
        raise InputError(
            f"ensemble variables {list(q.columns)} do not match run columns {list(run.columns)}"
        )
    check_support(run, q)
    if ensembles.ensemble_hash() != run.ensemble_hash:
        LOGGER.info(
            "Reweighting against a different ensemble than the run was drawn from",
            extra={"stage": "reweighting"},
        )
    return cdf_band(run, q, output_grid(run.outputs, grid_points), level, normalized)


def reweight_only(
    run_dir: PathLike,
    ensemble_path: PathLike,
    output_dir: Optional[PathLike] = None,
    grid_points: int = 50,
    level: str = "joint",
    normalized: bool = True,
    weighting: str = "uniform",
) -> CdfBand:
    """
    Read a stored run and an ensemble file, write the new ``cdf_band.csv``.

    Raises:
        StageError: From the ``reweighting`` stage on support or input failures
    """
    output_dir = Path(output_dir or run_dir)
    with stage("reweighting"):
        run = io.read_run(run_dir)
        ensembles = io.read_ensemble(ensemble_path)
        band = reweight(run, ensembles, grid_points, level, normalized, weighting)
        io.write_cdf_band(band, output_dir / io.CDF_BAND_FILE)
    LOGGER.info(
        "Reweighted %d stored samples over %d candidates with 0 new evaluations",
        run.n,
        len(band.candidates),
        extra={"stage": "reweighting"},
    )
    return band


def summarize_run(run_dir: PathLike) -> Dict[str, object]:
    """Stored probabilities, run counts and band summary of a run directory."""
    run_dir = Path(run_dir)
    summary: Dict[str, object] = {"run_dir": str(run_dir)}
    with stage("report"):
        if (run_dir / io.MODEL_PROBS_FILE).exists():
            summary["model_probs"] = pd.read_csv(run_dir / io.MODEL_PROBS_FILE)
        if (run_dir / io.COPULA_PROBS_FILE).exists():
            summary["copula_probs"] = pd.read_csv(run_dir / io.COPULA_PROBS_FILE)
        if (run_dir / io.RUN_METADATA_FILE).exists():
            summary["run"] = io.read_json(run_dir / io.RUN_METADATA_FILE)
        if (run_dir / io.CDF_BAND_FILE).exists():
            band = io.ingest_csv(run_dir / io.CDF_BAND_FILE)
            summary["band"] = {
                "grid_points": len(band),
                "mean_width": float(band["width"].mean()),
                "max_width": float(band["width"].max()),
            }
        if len(summary) == 1:
            raise InputError(f"{run_dir} holds no run artifacts")
    return summary


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------


def frank_recovery_table(
    n_values: Sequence[int] = (10, 100, 1000),
    seeds: Union[int, Sequence[int]] = 10,
    families: Sequence[str] = ("Gaussian", "StudentT", "Clayton", "Gumbel", "Frank"),
    theta: float = 3.0,
    cfg: Optional[InferenceConfig] = None,
) -> pd.DataFrame:
    """
    Copula model recovery on Frank data of increasing size.

    Data are Frank draws on the unit square, so the pseudo-observations are the data.
    One row per (n, seed) with the posterior probability of every family and the
    central 95% posterior interval of the Frank parameter (NaN when Frank is dropped).
    """
    cfg = cfg or InferenceConfig()
    seed_list = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    candidates = [CopulaCandidate(CopulaFamily(f)) for f in families]
    rows = []
    for n in n_values:
        for s in seed_list:
            u = simulate_truth(TruthConfig("frank_unit", theta=theta), n, s).to_numpy()
            with stage("frank_study"):
                posterior = infer_models(candidates, u, cfg, seed=s)
            row: Dict[str, float] = {"n": int(n), "seed": int(s)}
            row.update({f"p_{score.name}": score.probability for score in posterior.scores})
            lo = hi = float("nan")
            if "Frank" in posterior.names:
                chain = posterior.param_samples[posterior.names.index("Frank")][:, 0]
                lo, hi = (float(v) for v in np.quantile(chain, [0.025, 0.975]))
            row["frank_theta_lo"], row["frank_theta_hi"] = lo, hi
            rows.append(row)
            LOGGER.info(
                "n=%d seed=%d: P(Frank)=%.3f",
                n,
                s,
                row.get("p_Frank", float("nan")),
                extra={"stage": "frank_study"},
            )
    return pd.DataFrame(rows)


def recovery_summary(table: pd.DataFrame) -> pd.DataFrame:
    """Median over seeds per data size."""
    return table.drop(columns="seed").groupby("n", sort=True).median().reset_index()


def convergence_study(
    cfg: RunConfig,
    n_values: Sequence[int],
    modes: Optional[Sequence[str]] = None,
    seeds: Union[int, Sequence[int]] = 5,
    n_reference: int = 1_000_000,
) -> pd.DataFrame:
    """
    Band width versus data size, per dependence mode and seed, against the truth model.

    Each (mode, n, seed) simulates ``n`` data from ``cfg.truth`` with seed ``cfg.seed + s``,
    runs the full inference and propagation, and measures the band on a grid shared by
    every run. The truth CDF comes from ``n_reference`` direct evaluations of the
    performance function on truth samples drawn from a stream no data set uses.

    Args:
        cfg: Run configuration; ``cfg.seed`` is the base seed
        n_values: Data sizes
        modes: Dependence modes (default: the configured one)
        seeds: Number of seed offsets, or the offsets themselves
        n_reference: Direct Monte Carlo samples for the truth CDF

    Returns:
        One row per (mode, n, seed): mean band width, the fraction of grid points where
        the band contains the truth CDF, and the band spread at the truth median
    """
    truth = cfg.truth or TruthConfig()
    offsets = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    modes = list(modes or [cfg.dependence.mode])
    reference = simulate_truth(truth, n_reference, cfg.seed + max(offsets) + 1)
    columns = cfg.variables
    g_ref = build_performance(cfg, columns)(reference[columns].to_numpy(dtype=float))
    lo, hi = np.quantile(g_ref, [0.001, 0.999])
    grid = np.linspace(lo, hi, cfg.propagation.grid_points)
    order = np.sort(g_ref)
    truth_cdf = np.searchsorted(order, grid, side="right") / len(order)
    median = np.array([np.median(g_ref)])

    rows = []
    for mode in modes:
        for n in n_values:
            for s in offsets:
                seed = cfg.seed + s
                data = simulate_truth(truth, n, seed)
                run_cfg = replace(cfg, dependence=replace(cfg.dependence, mode=mode))
                ensembles = infer_stage(run_cfg, data, seed)
                with stage("propagation"):
                    q = optimal_product_density(ensembles, cfg.propagation.weighting)
                    run = propagate(
                        q,
                        build_performance(run_cfg, q.columns),
                        cfg.propagation.n_samples,
                        seed,
                        ensembles.ensemble_hash(),
                    )
                    band = cdf_band(
                        run, q, grid, cfg.propagation.band_level, cfg.propagation.normalized
                    )
                    at_median = cdf_band(
                        run, q, median, cfg.propagation.band_level, cfg.propagation.normalized
                    )
                rows.append(
                    {
                        "mode": mode,
                        "n": int(n),
                        "seed": int(seed),
                        "mean_width": band.mean_width,
                        "coverage": float(np.mean(band.contains(truth_cdf))),
                        "median_spread": float(at_median.width[0]),
                    }
                )
                LOGGER.info(
                    "mode=%s n=%d seed=%d mean width %.4f",
                    mode,
                    n,
                    seed,
                    band.mean_width,
                    extra={"stage": "convergence_study"},
                )
    return pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS)


def convergence_summary(table: pd.DataFrame) -> pd.DataFrame:
    """Median over seeds per (mode, n)."""
    return table.drop(columns="seed").groupby(["mode", "n"], sort=False).median().reset_index()

"""CSV and JSON artifacts: data ingestion, run files, bands and the manifest."""

import json
import logging
import platform
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
import scipy

from .bayes_inference import ModelPosterior
from .errors import InputError
from .hierarchy import BlockEnsembles
from .propagation import CdfBand, WeightedRun

LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"

MODEL_PROBS_FILE = "model_probs.csv"
COPULA_PROBS_FILE = "copula_probs.csv"
ENSEMBLE_FILE = "ensemble.json"
RUN_SAMPLES_FILE = "run_samples.csv"
RUN_METADATA_FILE = "run_metadata.json"
CDF_BAND_FILE = "cdf_band.csv"
MANIFEST_FILE = "manifest.json"


def ingest_csv(path: PathLike) -> pd.DataFrame:
    """
    Read a UTF-8 CSV with a header row and a numeric body.

    Returns:
        DataFrame of float columns named by the header

    Raises:
        InputError: On parse failures, ragged rows, empty files or non-finite cells,
            naming the file row (header is row 1) and column
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, encoding="utf-8")
    except FileNotFoundError as e:
        raise InputError(f"data file not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"cannot parse {path}: {e}") from e

    if frame.empty:
        raise InputError(f"{path} has a header but no data rows")
    unnamed = [c for c in frame.columns if str(c).startswith("Unnamed:")]
    if unnamed:
        raise InputError(f"{path}: every column needs a header name")

    values = {}
    for column in frame.columns:
        numeric = pd.to_numeric(frame[column], errors="coerce")
        bad = ~np.isfinite(numeric.to_numpy(dtype=float))
        if bad.any():
            index = int(np.argmax(bad))
            raise InputError(
                f"{path}: row {index + 2}, column {column!r}: "
                f"non-numeric or missing value {frame[column].iloc[index]!r}"
            )
        values[column] = numeric.to_numpy(dtype=float)
    LOGGER.info("Loaded %d rows x %d columns from %s", len(frame), len(values), path)
    return pd.DataFrame(values)


def write_csv(frame: pd.DataFrame, path: PathLike):
    """Write a frame with round-trip float formatting."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_json(payload: Mapping[str, Any], path: PathLike):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path: PathLike) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read {path}: {e}") from e


# ---------------------------------------------------------------------------
# Inference artifacts
# ---------------------------------------------------------------------------


def model_probability_frame(posteriors: Mapping[str, ModelPosterior]) -> pd.DataFrame:
    """One row per (target, candidate) with log-evidence, probability and retention."""
    rows = []
    for target, posterior in posteriors.items():
        for score in posterior.scores:
            rows.append(
                {
                    "target": target,
                    "model": score.name,
                    "log_evidence": score.log_evidence,
                    "prior_probability": score.prior_probability,
                    "probability": score.probability,
                    "retained": score.retained,
                }
            )
    return pd.DataFrame(
        rows,
        columns=["target", "model", "log_evidence", "prior_probability", "probability", "retained"],
    )


def copula_probability_frame(ensembles: BlockEnsembles) -> pd.DataFrame:
    """
    Copula model probabilities of every pair block, summarized over its marginal pairs.

    A family dropped for some pairs counts as probability 0 there.
    """
    rows = []
    for ensemble in ensembles.pairs:
        target = "|".join(ensemble.variables)
        per_entry = [
            dict(zip(e.copulas.model_names, e.copulas.model_probs)) for e in ensemble.entries
        ]
        names = sorted({name for probs in per_entry for name in probs})
        for name in names:
            values = np.array([probs.get(name, 0.0) for probs in per_entry])
            rows.append(
                {
                    "target": target,
                    "model": name,
                    "mean_probability": float(values.mean()),
                    "min_probability": float(values.min()),
                    "max_probability": float(values.max()),
                }
            )
    return pd.DataFrame(
        rows,
        columns=["target", "model", "mean_probability", "min_probability", "max_probability"],
    )


def write_posterior_samples(
    posteriors: Mapping[str, ModelPosterior], output_dir: PathLike
) -> Dict[str, str]:
    """
    Write ``posterior_<target>_<model>.csv`` per retained model.

    Returns:
        Mapping of file name to the target/model it holds
    """
    written = {}
    for target, posterior in posteriors.items():
        for candidate, samples, log_post in zip(
            posterior.candidates, posterior.param_samples, posterior.log_posteriors
        ):
            names = list(getattr(getattr(candidate, "family", None), "param_names", ()))
            if len(names) != samples.shape[1]:
                names = [f"theta{j + 1}" for j in range(samples.shape[1])]
            frame = pd.DataFrame(samples, columns=names)
            frame["log_posterior"] = log_post
            file_name = f"posterior_{_safe(target)}_{_safe(candidate.name)}.csv"
            write_csv(frame, Path(output_dir) / file_name)
            written[file_name] = f"{target}/{candidate.name}"
    return written


def _safe(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "-" for ch in str(text))


def write_ensemble(ensembles: BlockEnsembles, path: PathLike):
    write_json(ensembles.to_dict(), path)


def read_ensemble(path: PathLike) -> BlockEnsembles:
    try:
        return BlockEnsembles.from_dict(read_json(path))
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"{path} is not a valid ensemble file: {e}") from e


# ---------------------------------------------------------------------------
# Weighted run and band
# ---------------------------------------------------------------------------


def write_run(run: WeightedRun, output_dir: PathLike):
    """Samples, outputs and log q* as CSV plus seed/count/hash metadata as JSON."""
    frame = pd.DataFrame(run.samples, columns=list(run.columns))
    frame["g"] = run.outputs
    frame["log_q"] = run.log_q
    write_csv(frame, Path(output_dir) / RUN_SAMPLES_FILE)
    write_json(
        {
            "columns": list(run.columns),
            "seed": run.seed,
            "n_samples": run.n,
            "n_evaluations": run.n_evaluations,
            "ensemble_hash": run.ensemble_hash,
            "support": [list(b) for b in run.support],
        },
        Path(output_dir) / RUN_METADATA_FILE,
    )


def read_run(run_dir: PathLike) -> WeightedRun:
    """Load a stored run for reweighting."""
    run_dir = Path(run_dir)
    meta = read_json(run_dir / RUN_METADATA_FILE)
    frame = ingest_csv(run_dir / RUN_SAMPLES_FILE)
    columns = tuple(meta["columns"])
    missing = [c for c in (*columns, "g", "log_q") if c not in frame.columns]
    if missing:
        raise InputError(f"{run_dir / RUN_SAMPLES_FILE} lacks columns {missing}")
    return WeightedRun(
        samples=frame[list(columns)].to_numpy(dtype=float),
        outputs=frame["g"].to_numpy(dtype=float),
        log_q=frame["log_q"].to_numpy(dtype=float),
        columns=columns,
        seed=meta.get("seed"),
        ensemble_hash=meta.get("ensemble_hash", ""),
        support=tuple(tuple(float(v) for v in b) for b in meta["support"]),
        n_evaluations=int(meta.get("n_evaluations", len(frame))),
    )


def cdf_band_frame(band: CdfBand, quantiles: Sequence[float] = (0.05, 0.5, 0.95)) -> pd.DataFrame:
    """Grid, envelope, pointwise quantiles and mean width of a band."""
    frame = pd.DataFrame({"grid": band.grid, "lower": band.lower, "upper": band.upper})
    for q in quantiles:
        frame[f"q{int(round(q * 100)):02d}"] = band.quantile(q)
    frame["width"] = band.width
    return frame


def write_cdf_band(band: CdfBand, path: PathLike, members: bool = False):
    """
    Write the band summary; ``members`` also writes one column per candidate CDF to
    ``<stem>_members.csv``.
    """
    write_csv(cdf_band_frame(band), path)
    if members:
        labels = ["c" + "_".join(str(i) for i in c) for c in band.candidates]
        frame = pd.DataFrame(band.cdfs.T, columns=labels)
        frame.insert(0, "grid", band.grid)
        path = Path(path)
        write_csv(frame, path.with_name(f"{path.stem}_members.csv"))


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def build_manifest(
    config: Mapping[str, Any],
    config_hash: str,
    seeds: Mapping[str, Any],
    hashes: Mapping[str, str],
    files: Sequence[str],
    extra: Optional[Mapping[str, Any]] = None,
) -> Dict[str, Any]:
    """Manifest recording seeds, versions and hashes; contains no timestamps."""
    from . import __version__

    manifest = {
        "package": "imprecise-copula",
        "version": __version__,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
        "config": dict(config),
        "config_hash": config_hash,
        "seeds": dict(seeds),
        "hashes": dict(hashes),
        "files": sorted(files),
    }
    if extra:
        manifest.update(extra)
    return manifest

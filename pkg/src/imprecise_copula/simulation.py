"""
Synthetic data generators for the known-truth studies.

Every preset draws from ``numpy.random.default_rng(seed)`` (PCG64), so a seed fixes
the generated matrix on every platform.
"""

import logging
from typing import Callable, Dict, Optional

import numpy as np
import pandas as pd

from .config import TruthConfig
from .copula_core import CopulaFamily, CopulaSpec, copula_sample
from .errors import InputError
from .marginal_core import MarginalFamily, MarginalSpec, marginal_quantile
from .models import CONSTITUENT_COV, CONSTITUENT_MEANS, CONSTITUENT_ORDER

LOGGER = logging.getLogger(__name__)

FRANK_DEMO_THETA = 3.0
COMPOSITE_THETA = -10.0

# (E_m, nu_m) and (E_1f, nu_12f) are Frank-dependent, V_f is independent
COMPOSITE_PAIRS = (("E_m", "nu_m"), ("E_1f", "nu_12f"))
COMPOSITE_SINGLES = ("V_f",)


def _normal(mean: float, std: float) -> MarginalSpec:
    return MarginalSpec(MarginalFamily.GAUSSIAN, (mean, std))


def frank_unit_square(n: int, rng: np.random.Generator, theta: float) -> pd.DataFrame:
    """Frank copula draws on the unit square."""
    u = copula_sample(CopulaSpec(CopulaFamily.FRANK, (theta,)), n, rng)
    return pd.DataFrame({"x1": u[:, 0], "x2": u[:, 1]})


def frank_demo(n: int, rng: np.random.Generator, theta: float) -> pd.DataFrame:
    """Frank dependence between two standard normal variables."""
    u = copula_sample(CopulaSpec(CopulaFamily.FRANK, (theta,)), n, rng)
    standard = _normal(0.0, 1.0)
    return pd.DataFrame(
        {"x1": marginal_quantile(standard, u[:, 0]), "x2": marginal_quantile(standard, u[:, 1])}
    )


def composite_constituents(n: int, rng: np.random.Generator, theta: float) -> pd.DataFrame:
    """
    Constituent properties of a fiber composite.

    Normal marginals at the constituent means with a common coefficient of variation;
    Frank dependence inside each matrix and fiber pair.
    """
    copula = CopulaSpec(CopulaFamily.FRANK, (theta,))
    columns: Dict[str, np.ndarray] = {}
    for a, b in COMPOSITE_PAIRS:
        u = copula_sample(copula, n, rng)
        for name, col in ((a, u[:, 0]), (b, u[:, 1])):
            mean = CONSTITUENT_MEANS[name]
            columns[name] = marginal_quantile(_normal(mean, CONSTITUENT_COV * mean), col)
    for name in COMPOSITE_SINGLES:
        mean = CONSTITUENT_MEANS[name]
        columns[name] = mean + CONSTITUENT_COV * mean * rng.standard_normal(n)
    return pd.DataFrame({name: columns[name] for name in CONSTITUENT_ORDER})


PRESETS: Dict[str, Callable[[int, np.random.Generator, float], pd.DataFrame]] = {
    "frank_demo": frank_demo,
    "frank_unit": frank_unit_square,
    "composite": composite_constituents,
}

DEFAULT_THETAS = {
    "frank_demo": FRANK_DEMO_THETA,
    "frank_unit": FRANK_DEMO_THETA,
    "composite": COMPOSITE_THETA,
}


def simulate_truth(
    truth: TruthConfig, n: Optional[int] = None, seed: Optional[int] = None
) -> pd.DataFrame:
    """
    Generate data from a known truth model.

    Args:
        truth: Preset name, default size, seed and optional Frank parameter
        n: Sample size (overrides ``truth.n``)
        seed: Seed (overrides ``truth.seed``)

    Returns:
        DataFrame with one column per variable

    Raises:
        InputError: For an unknown preset or a non-positive size
    """
    try:
        generator = PRESETS[truth.preset]
    except KeyError:
        raise InputError(
            f"unknown truth preset {truth.preset!r}; choose from {sorted(PRESETS)}"
        ) from None
    n = truth.n if n is None else int(n)
    if n < 1:
        raise InputError(f"sample size must be positive, got {n}")
    seed = truth.seed if seed is None else seed
    theta = DEFAULT_THETAS[truth.preset] if truth.theta is None else float(truth.theta)
    LOGGER.info(
        "Simulating %d rows from %s (theta=%g, seed=%s)",
        n,
        truth.preset,
        theta,
        seed,
        extra={"stage": "simulate"},
    )
    return generator(n, np.random.default_rng(seed), theta)

"""Shared fixtures: seeded generators, Frank pseudo-observations and small ensembles."""

import numpy as np
import pytest

from imprecise_copula.bayes_inference import (
    CopulaCandidate,
    InferenceConfig,
    MarginalCandidate,
    McmcConfig,
)
from imprecise_copula.copula_core import CopulaFamily, CopulaSpec, copula_sample
from imprecise_copula.hierarchy import (
    ConditionalCopulaSet,
    CopulaDraw,
    EnsembleEntry,
    JointEnsemble,
    MarginalDraw,
)
from imprecise_copula.marginal_core import MarginalFamily, MarginalSpec


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def frank3_u():
    """1000 Frank(3) pairs on the unit square."""
    return copula_sample(CopulaSpec(CopulaFamily.FRANK, (3.0,)), 1000, 7)


@pytest.fixture
def fast_inference():
    """Reduced evidence and chain sizes for quick tests."""
    return InferenceConfig(
        n_prior_samples=2000,
        mcmc=McmcConfig(chain_length=1500, burn_in=300, thinning=3),
    )


@pytest.fixture
def copula_candidates():
    return [
        CopulaCandidate(f)
        for f in (CopulaFamily.GAUSSIAN, CopulaFamily.CLAYTON, CopulaFamily.FRANK)
    ]


@pytest.fixture
def marginal_candidates():
    return [MarginalCandidate(MarginalFamily.GAUSSIAN), MarginalCandidate(MarginalFamily.GAMMA)]


def gaussian(mean=0.0, std=1.0):
    return MarginalSpec(MarginalFamily.GAUSSIAN, (mean, std))


def make_ensemble(entries, variables=("x1", "x2")):
    """Joint ensemble from ``[((m1, m2), [copula, ...]), ...]``."""
    built = []
    for (first, second), copulas in entries:
        names = []
        for c in copulas:
            if c.family.value not in names:
                names.append(c.family.value)
        draws = tuple(
            CopulaDraw(c, names.index(c.family.value), k) for k, c in enumerate(copulas)
        )
        probs = tuple(1.0 / len(names) for _ in names)
        built.append(
            EnsembleEntry(
                (MarginalDraw(first, 0, 0), MarginalDraw(second, 0, 0)),
                ConditionalCopulaSet(draws, tuple(names), probs),
            )
        )
    return JointEnsemble(tuple(variables), tuple(built))


@pytest.fixture
def toy_ensemble():
    """Two marginal pairs with two copula draws each."""
    return make_ensemble(
        [
            (
                (gaussian(0.0, 1.0), gaussian(0.0, 1.0)),
                [CopulaSpec("Frank", (3.0,)), CopulaSpec("Clayton", (1.0,))],
            ),
            (
                (gaussian(0.5, 1.2), gaussian(-0.3, 0.8)),
                [CopulaSpec("Gaussian", (0.4,)), CopulaSpec("Frank", (-2.0,))],
            ),
        ]
    )

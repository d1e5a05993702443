"""
One-pass propagation through the optimal importance-sampling mixture.

The mixture q* averages every candidate joint density of an ensemble. Samples are
drawn from q* once, the performance function is evaluated once per sample, and any
candidate's statistics follow by reweighting with w = p / q*.
"""

import logging
from abc import ABC, abstractmethod
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import logsumexp

from .copula_core import CopulaSpec, copula_log_pdf, copula_sample
from .errors import InputError, SupportError
from .hierarchy import BlockEnsembles, ConditionalCopulaSet, JointEnsemble, SingleEnsemble
from .marginal_core import (
    EPS,
    marginal_cdf,
    marginal_logpdf,
    marginal_quantile,
    marginal_sample,
    support,
)

LOGGER = logging.getLogger(__name__)

DEGENERACY_THRESHOLD = 10.0
WEIGHTINGS = ("uniform", "posterior")

Candidate = Tuple[int, ...]
LogPdf = Callable[[np.ndarray], np.ndarray]


def expected_conditional_copula(copulas: ConditionalCopulaSet, u) -> np.ndarray:
    """
    Averaged copula density (1/N_tc) sum_k c_k(u) over the draws of one marginal pair.

    Args:
        copulas: Conditional copula draws
        u: Interior unit pair(s), trailing dimension 2

    Returns:
        Positive density values
    """
    u = np.asarray(u, dtype=float)
    logs = np.stack([copula_log_pdf(spec, u, clamp=True) for spec in copulas.specs])
    return np.exp(logsumexp(logs, axis=0) - np.log(copulas.n_tc))


def effective_sample_size(weights) -> float:
    """Kish effective sample size (sum w)^2 / sum w^2."""
    w = np.asarray(weights, dtype=float)
    total_sq = float(np.sum(w * w))
    if total_sq == 0.0:
        return 0.0
    return float(np.sum(w)) ** 2 / total_sq


def _as_points(x, dim: int) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = (x.ndim == 1 and dim > 1) or x.ndim == 0
    x = x.reshape(-1, dim) if x.ndim < 2 else x
    if x.shape[1] != dim:
        raise InputError(f"points need {dim} coordinates, got shape {x.shape}")
    return x, single


def _check_level(level: str):
    if level not in ("joint", "pair"):
        raise InputError(f"unknown candidate level {level!r}; use 'joint' or 'pair'")


def _unit_weights(n: int) -> np.ndarray:
    return np.full(n, -np.log(n))


def _posterior_log_weights(model_indices: Sequence[int], probs: Sequence[float]) -> np.ndarray:
    """Log weights pi_m / count_m, renormalized; equal weights when ``probs`` is empty."""
    if not probs:
        return _unit_weights(len(model_indices))
    counts = defaultdict(int)
    for m in model_indices:
        counts[m] += 1
    raw = np.array([probs[m] / counts[m] for m in model_indices])
    return np.log(raw) - np.log(raw.sum())


# ---------------------------------------------------------------------------
# Mixture densities
# ---------------------------------------------------------------------------


class MixtureDensity(ABC):
    """
    Finite mixture over N_td entries, each averaging N_tc copula draws.

    A candidate is addressed by ``(l, k)``: entry l with copula draw k. A pair-level
    component is addressed by ``(l,)`` and uses the averaged copula of entry l.
    """

    dim: int = 0
    n_td: int = 0
    n_tc: int = 1
    columns: Tuple[str, ...] = ()

    @abstractmethod
    def log_pdf(self, x) -> np.ndarray:
        """Log mixture density."""

    @abstractmethod
    def candidate_log_pdf(self, candidate: Candidate, x) -> np.ndarray:
        """Log density of candidate ``(l, k)`` (or averaged component ``(l,)``)."""

    @abstractmethod
    def iter_candidate_log_pdfs(
        self, x, level: str = "joint"
    ) -> Iterator[Tuple[Candidate, np.ndarray]]:
        """Yield ``(candidate, log_pdf)`` for every candidate of the level."""

    @abstractmethod
    def sample(self, n: int, seed=None) -> np.ndarray:
        """Exact mixture samples, shape (n, dim)."""

    @abstractmethod
    def support(self) -> List[Tuple[float, float]]:
        """Per-coordinate support interval of the mixture."""

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.log_pdf(x))

    def candidates(self, level: str = "joint") -> List[Candidate]:
        _check_level(level)
        if level == "joint":
            return [(l, k) for l in range(self.n_td) for k in range(self.n_tc)]
        return [(l,) for l in range(self.n_td)]


class _BlockMixture(MixtureDensity):
    """Mixture over the entries of one block (a dependent pair or a single variable)."""

    def __init__(self, dim: int, log_entry_weights: np.ndarray, copula_log_weights: List):
        self.dim = dim
        self.n_td = len(log_entry_weights)
        self.log_entry_weights = np.asarray(log_entry_weights, dtype=float)
        self.copula_log_weights = [np.asarray(w, dtype=float) for w in copula_log_weights]
        self.n_tc = len(self.copula_log_weights[0])

    # Parts shared by all candidates of one entry

    @abstractmethod
    def _entry_base(self, l: int, x: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Sum of marginal log-densities and the unit-square image of ``x``."""

    @abstractmethod
    def _unique_copulas(self, l: int) -> List[Tuple[Optional[CopulaSpec], float, List[int]]]:
        """Distinct copulas of entry l as ``(spec, log total weight, draw indices)``."""

    @abstractmethod
    def _draw_copula(self, l: int, k: int) -> Optional[CopulaSpec]:
        """Copula of draw k in entry l (``None`` for single-variable blocks)."""

    @abstractmethod
    def _sample_entry(self, l: int, k: int, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` exact samples from candidate (l, k)."""

    @staticmethod
    def _log_copula(spec: Optional[CopulaSpec], u: Optional[np.ndarray], n: int) -> np.ndarray:
        if spec is None:
            return np.zeros(n)
        return copula_log_pdf(spec, u, clamp=True)

    def _component(self, l: int, base: np.ndarray, u: Optional[np.ndarray]) -> np.ndarray:
        unique = self._unique_copulas(l)
        if len(unique) == 1:
            return base + unique[0][1] + self._log_copula(unique[0][0], u, len(base))
        terms = np.stack([lw + self._log_copula(spec, u, len(base)) for spec, lw, _ in unique])
        return base + logsumexp(terms, axis=0)

    def component_log_pdf(self, l: int, x) -> np.ndarray:
        """Log density of entry l with its averaged copula."""
        x, single = _as_points(x, self.dim)
        base, u = self._entry_base(l, x)
        out = self._component(l, base, u)
        return out[0] if single else out

    def log_pdf(self, x) -> np.ndarray:
        x, single = _as_points(x, self.dim)
        terms = np.empty((self.n_td, len(x)))
        for l in range(self.n_td):
            base, u = self._entry_base(l, x)
            terms[l] = self.log_entry_weights[l] + self._component(l, base, u)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = logsumexp(terms, axis=0)
        return out[0] if single else out

    def candidate_log_pdf(self, candidate: Candidate, x) -> np.ndarray:
        x, single = _as_points(x, self.dim)
        base, u = self._entry_base(candidate[0], x)
        if len(candidate) == 1:
            out = self._component(candidate[0], base, u)
        else:
            out = base + self._log_copula(self._draw_copula(*candidate), u, len(base))
        return out[0] if single else out

    def iter_candidate_log_pdfs(self, x, level: str = "joint"):
        x, _ = _as_points(x, self.dim)
        _check_level(level)
        for l in range(self.n_td):
            base, u = self._entry_base(l, x)
            if level == "pair":
                yield (l,), self._component(l, base, u)
                continue
            for spec, _, draws in self._unique_copulas(l):
                value = base + self._log_copula(spec, u, len(base))
                for k in draws:
                    yield (l, k), value

    def sample(self, n: int, seed=None) -> np.ndarray:
        if n < 1:
            raise InputError(f"sample size must be >= 1, got {n}")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        entry_probs = np.exp(self.log_entry_weights)
        entries = rng.choice(self.n_td, size=n, p=entry_probs / entry_probs.sum())
        draws = np.empty(n, dtype=int)
        for l in np.unique(entries):
            mask = entries == l
            probs = np.exp(self.copula_log_weights[l])
            draws[mask] = rng.choice(len(probs), size=int(mask.sum()), p=probs / probs.sum())
        out = np.empty((n, self.dim))
        groups = defaultdict(list)
        for i, key in enumerate(zip(entries.tolist(), draws.tolist())):
            groups[key].append(i)
        for key in sorted(groups):
            index = np.asarray(groups[key])
            out[index] = self._sample_entry(key[0], key[1], len(index), rng)
        return out


class OptimalDensity(_BlockMixture):
    """
    Optimal sampling mixture of a bivariate joint ensemble.

    q*(x) = sum_l w_l f1^l(x1) f2^l(x2) c^l(F1^l(x1), F2^l(x2)), where c^l averages the
    copula draws of entry l. ``uniform`` weighting uses w_l = 1/N_td (model
    probabilities enter through draw frequencies); ``posterior`` weighting reweights
    each entry and draw by its model probability over its draw count, for ensembles
    built with uniform model selection.
    """

    def __init__(self, ensemble: JointEnsemble, weighting: str = "uniform"):
        if weighting not in WEIGHTINGS:
            raise InputError(f"unknown weighting {weighting!r}; use one of {WEIGHTINGS}")
        self.ensemble = ensemble
        self.weighting = weighting
        if weighting == "uniform":
            entry_weights = _unit_weights(ensemble.n_td)
            copula_weights = [_unit_weights(ensemble.n_tc)] * ensemble.n_td
        else:
            probs1, probs2 = ensemble.marginal_probs
            joint = [
                (e.pair[0].model_index, e.pair[1].model_index) for e in ensemble.entries
            ]
            combos = {combo: i for i, combo in enumerate(sorted(set(joint)))}
            combo_probs = [
                (probs1[a] if probs1 else 1.0) * (probs2[b] if probs2 else 1.0) for a, b in combos
            ]
            entry_weights = _posterior_log_weights(
                [combos[j] for j in joint], combo_probs
            )
            copula_weights = [
                _posterior_log_weights(
                    [d.model_index for d in e.copulas.draws], e.copulas.model_probs
                )
                for e in ensemble.entries
            ]
        super().__init__(2, entry_weights, copula_weights)
        self.columns = tuple(ensemble.variables)
        self._unique = [self._group(l) for l in range(ensemble.n_td)]

    def _group(self, l: int):
        grouped: Dict[CopulaSpec, List[int]] = defaultdict(list)
        for k, spec in enumerate(self.ensemble.entries[l].copulas.specs):
            grouped[spec].append(k)
        weights = self.copula_log_weights[l]
        return [(spec, float(logsumexp(weights[ks])), ks) for spec, ks in grouped.items()]

    def _entry_base(self, l, x):
        first, second = self.ensemble.entries[l].marginal_specs
        base = marginal_logpdf(first, x[:, 0]) + marginal_logpdf(second, x[:, 1])
        u = np.column_stack([marginal_cdf(first, x[:, 0]), marginal_cdf(second, x[:, 1])])
        return base, u

    def _unique_copulas(self, l):
        return self._unique[l]

    def _draw_copula(self, l, k):
        return self.ensemble.entries[l].copulas.draws[k].spec

    def _sample_entry(self, l, k, n, rng):
        first, second = self.ensemble.entries[l].marginal_specs
        u = np.clip(copula_sample(self._draw_copula(l, k), n, rng), EPS, 1.0 - EPS)
        return np.column_stack(
            [marginal_quantile(first, u[:, 0]), marginal_quantile(second, u[:, 1])]
        )

    def support(self):
        bounds = []
        for j in range(2):
            supports = [support(e.marginal_specs[j]) for e in self.ensemble.entries]
            bounds.append((min(s[0] for s in supports), max(s[1] for s in supports)))
        return bounds


class MarginalMixtureDensity(_BlockMixture):
    """Mixture (1/N_td) sum_l f^l(x) for a variable modeled independently."""

    def __init__(self, ensemble: SingleEnsemble, weighting: str = "uniform"):
        if weighting not in WEIGHTINGS:
            raise InputError(f"unknown weighting {weighting!r}; use one of {WEIGHTINGS}")
        self.ensemble = ensemble
        if weighting == "uniform":
            entry_weights = _unit_weights(ensemble.n_td)
        else:
            entry_weights = _posterior_log_weights(
                [d.model_index for d in ensemble.draws], ensemble.probs
            )
        super().__init__(1, entry_weights, [np.zeros(1)] * ensemble.n_td)
        self.columns = (ensemble.variable,)

    def _entry_base(self, l, x):
        return marginal_logpdf(self.ensemble.draws[l].spec, x[:, 0]), None

    def _unique_copulas(self, l):
        return [(None, 0.0, [0])]

    def _draw_copula(self, l, k):
        return None

    def _sample_entry(self, l, k, n, rng):
        return marginal_sample(self.ensemble.draws[l].spec, n, rng)[:, None]

    def support(self):
        supports = [support(d.spec) for d in self.ensemble.draws]
        return [(min(s[0] for s in supports), max(s[1] for s in supports))]


class ProductDensity(MixtureDensity):
    """
    Product of independent block mixtures over a partitioned input vector.

    Candidate (l, k) combines entry l of every block with copula draw k of every pair
    block, so its importance weight is the product of the block weights.

    Candidates are aligned across blocks, not crossed: block b never pairs its entry l
    with entry l' != l of another block. The product therefore addresses N_td x N_tc
    joints, not the (N_td N_tc)^B cross product of B blocks, and the band spans only
    those aligned joints.
    """

    def __init__(self, blocks: Sequence[_BlockMixture], columns: Sequence[str] = ()):
        if not blocks:
            raise InputError("a product density needs at least one block")
        sizes = {b.n_td for b in blocks}
        if len(sizes) != 1:
            raise InputError(f"all blocks must share N_td, got {sorted(sizes)}")
        self.blocks = list(blocks)
        self.n_td = self.blocks[0].n_td
        self.n_tc = max(b.n_tc for b in self.blocks)
        if any(b.n_tc not in (1, self.n_tc) for b in self.blocks):
            raise InputError("pair blocks must share N_tc")
        self.dim = sum(b.dim for b in self.blocks)
        self.columns = tuple(columns) if columns else tuple(f"x{j + 1}" for j in range(self.dim))
        offsets = np.cumsum([0] + [b.dim for b in self.blocks])
        self.slices = [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]

    @staticmethod
    def _block_candidate(block: _BlockMixture, candidate: Candidate) -> Candidate:
        if len(candidate) == 2 and block.n_tc == 1:
            return (candidate[0], 0)
        return candidate

    def log_pdf(self, x) -> np.ndarray:
        x, single = _as_points(x, self.dim)
        out = sum(b.log_pdf(x[:, s]) for b, s in zip(self.blocks, self.slices))
        return out[0] if single else out

    def candidate_log_pdf(self, candidate, x) -> np.ndarray:
        x, single = _as_points(x, self.dim)
        out = sum(
            b.candidate_log_pdf(self._block_candidate(b, candidate), x[:, s])
            for b, s in zip(self.blocks, self.slices)
        )
        return out[0] if single else out

    def iter_candidate_log_pdfs(self, x, level: str = "joint"):
        x, _ = _as_points(x, self.dim)
        _check_level(level)
        for l in range(self.n_td):
            parts = [b._entry_base(l, x[:, s]) for b, s in zip(self.blocks, self.slices)]
            if level == "pair":
                yield (l,), sum(
                    b._component(l, base, u) for b, (base, u) in zip(self.blocks, parts)
                )
                continue
            base_total = sum(base for base, _ in parts)
            cached: Dict[Tuple[int, CopulaSpec], np.ndarray] = {}
            for k in range(self.n_tc):
                value = base_total.copy()
                for j, (block, (_, u)) in enumerate(zip(self.blocks, parts)):
                    spec = block._draw_copula(l, k if block.n_tc > 1 else 0)
                    if spec is None:
                        continue
                    key = (j, spec)
                    if key not in cached:
                        cached[key] = block._log_copula(spec, u, len(x))
                    value = value + cached[key]
                yield (l, k), value

    def sample(self, n: int, seed=None) -> np.ndarray:
        if n < 1:
            raise InputError(f"sample size must be >= 1, got {n}")
        children = np.random.SeedSequence(seed).spawn(len(self.blocks))
        return np.column_stack(
            [b.sample(n, np.random.default_rng(c)) for b, c in zip(self.blocks, children)]
        )

    def support(self):
        bounds = []
        for block in self.blocks:
            bounds.extend(block.support())
        return bounds


class LookupTableDensity:
    """
    Tabulated log q* of a bivariate mixture on a rectilinear grid.

    Inside the grid, log q* is interpolated bilinearly; outside it the exact mixture
    is evaluated. All other attributes delegate to the wrapped density.
    """

    def __init__(self, density: OptimalDensity, axes: Tuple[np.ndarray, np.ndarray]):
        if density.dim != 2:
            raise InputError("lookup tables are built for bivariate mixtures only")
        self.density = density
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        if any(a.ndim != 1 or len(a) < 2 or np.any(np.diff(a) <= 0) for a in self.axes):
            raise InputError("lookup axes must be strictly increasing with at least 2 points")
        mesh = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1).reshape(-1, 2)
        table = density.log_pdf(mesh).reshape(len(self.axes[0]), len(self.axes[1]))
        if not np.all(np.isfinite(table)):
            raise SupportError("lookup grid extends outside the mixture support")
        self._interp = RegularGridInterpolator(self.axes, table, method="linear")

    @classmethod
    def from_samples(cls, density: OptimalDensity, samples, n_points: int = 200, pad: float = 0.0):
        """Grid spanning the sample range (optionally padded) with ``n_points`` per axis."""
        samples = np.asarray(samples, dtype=float)
        lo, hi = samples.min(axis=0), samples.max(axis=0)
        span = hi - lo
        axes = tuple(
            np.linspace(lo[j] - pad * span[j], hi[j] + pad * span[j], n_points) for j in range(2)
        )
        return cls(density, axes)

    def __getattr__(self, name):
        return getattr(self.density, name)

    def log_pdf(self, x) -> np.ndarray:
        x, single = _as_points(x, 2)
        inside = np.ones(len(x), dtype=bool)
        for j, axis in enumerate(self.axes):
            inside &= (x[:, j] >= axis[0]) & (x[:, j] <= axis[-1])
        out = np.empty(len(x))
        out[inside] = self._interp(x[inside])
        if np.any(~inside):
            out[~inside] = self.density.log_pdf(x[~inside])
        return out[0] if single else out

    def validate(self, points) -> float:
        """Maximum relative error of the tabulated density against exact evaluation."""
        exact = self.density.log_pdf(points)
        approx = self.log_pdf(points)
        return float(np.max(np.abs(np.expm1(approx - exact))))


def optimal_density(ensemble: JointEnsemble, weighting: str = "uniform") -> OptimalDensity:
    """
    Optimal sampling mixture q* of a joint ensemble.

    Raises:
        InputError: On an empty ensemble
    """
    if ensemble is None or ensemble.n_td == 0:
        raise InputError("the optimal density needs a nonempty ensemble")
    return OptimalDensity(ensemble, weighting)


def optimal_product_density(blocks: BlockEnsembles, weighting: str = "uniform") -> ProductDensity:
    """Product mixture over the pair and single-variable blocks of a block ensemble."""
    parts: List[_BlockMixture] = [OptimalDensity(p, weighting) for p in blocks.pairs]
    parts.extend(MarginalMixtureDensity(s, weighting) for s in blocks.singles)
    return ProductDensity(parts, blocks.variables)


def sample_optimal(q: MixtureDensity, n: int, seed=None) -> np.ndarray:
    """
    Exact samples from the mixture: entry l by its weight, copula draw k by its
    weight inside the entry, then the conditional method and marginal quantiles.
    """
    return q.sample(n, seed)


# ---------------------------------------------------------------------------
# Importance weights and estimators
# ---------------------------------------------------------------------------


def log_importance_weights(
    q: MixtureDensity,
    candidate: Union[Candidate, LogPdf],
    samples,
    log_q: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Log importance weights log p(x_i) - log q*(x_i).

    Args:
        q: Sampling mixture
        candidate: In-mixture candidate index ``(l, k)``/``(l,)`` or an external log-pdf
        samples: Points drawn from ``q``
        log_q: Precomputed log q*(x_i)

    Raises:
        SupportError: If the candidate has mass where the mixture has none
    """
    samples = np.asarray(samples, dtype=float)
    if callable(candidate):
        log_p = np.asarray(candidate(samples), dtype=float)
    else:
        log_p = q.candidate_log_pdf(tuple(candidate), samples)
    if log_q is None:
        log_q = q.log_pdf(samples)
    return _log_ratio(log_p, log_q)


def _log_ratio(log_p: np.ndarray, log_q: np.ndarray) -> np.ndarray:
    uncovered = np.isfinite(log_p) & ~np.isfinite(log_q)
    if np.any(uncovered):
        raise SupportError(
            f"candidate density is positive at {int(uncovered.sum())} points where the "
            "sampling mixture vanishes; importance weights would be infinite"
        )
    with np.errstate(invalid="ignore"):
        return np.where(np.isfinite(log_p), log_p - log_q, -np.inf)


def importance_weights(q: MixtureDensity, candidate, samples, log_q=None) -> np.ndarray:
    """Importance weights w_i = p(x_i) / q*(x_i)."""
    return np.exp(log_importance_weights(q, candidate, samples, log_q))


@dataclass(frozen=True)
class WeightedRun:
    """
    Samples from q*, their performance-function outputs and log q* values.

    The run is the only place the performance function is evaluated; every
    candidate's weights are derived from it on demand.
    """

    samples: np.ndarray
    outputs: np.ndarray
    log_q: np.ndarray
    columns: Tuple[str, ...]
    seed: Optional[int]
    ensemble_hash: str
    support: Tuple[Tuple[float, float], ...]
    n_evaluations: int

    def __post_init__(self):
        n = len(self.samples)
        if len(self.outputs) != n or len(self.log_q) != n:
            raise InputError("samples, outputs and log q* must have equal length")
        if len(self.columns) != np.asarray(self.samples).shape[1]:
            raise InputError("one column name per sample coordinate is required")

    @property
    def n(self) -> int:
        return len(self.samples)

    def log_weights(self, density: MixtureDensity, candidate) -> np.ndarray:
        if callable(candidate):
            log_p = np.asarray(candidate(self.samples), dtype=float)
        else:
            log_p = density.candidate_log_pdf(tuple(candidate), self.samples)
        return _log_ratio(log_p, self.log_q)

    def weights(self, density: MixtureDensity, candidate) -> np.ndarray:
        return np.exp(self.log_weights(density, candidate))


def propagate(
    q: MixtureDensity,
    performance: Callable[[np.ndarray], np.ndarray],
    n: int,
    seed: Optional[int] = None,
    ensemble_hash: str = "",
    log_q_density: Optional[object] = None,
) -> WeightedRun:
    """
    Draw ``n`` samples from q*, evaluate the performance function once per sample,
    and record log q* for later reweighting.

    Args:
        q: Sampling mixture
        performance: Vectorized g over an (n, d) array
        n: Sample count
        seed: Sampling seed
        ensemble_hash: Hash of the ensemble q* was built from
        log_q_density: Optional faster evaluator of log q* (a lookup table)
    """
    samples = sample_optimal(q, n, seed)
    outputs = np.asarray(performance(samples), dtype=float).reshape(-1)
    if outputs.shape != (n,):
        raise InputError(f"performance function returned {outputs.shape}, expected ({n},)")
    log_q = (log_q_density or q).log_pdf(samples)
    LOGGER.info(
        "Propagated %d samples through the performance function",
        n,
        extra={"stage": "propagation"},
    )
    return WeightedRun(
        samples=samples,
        outputs=outputs,
        log_q=np.asarray(log_q, dtype=float),
        columns=tuple(q.columns) or tuple(f"x{j + 1}" for j in range(q.dim)),
        seed=seed,
        ensemble_hash=ensemble_hash,
        support=tuple(tuple(float(v) for v in b) for b in q.support()),
        n_evaluations=n,
    )


def check_support(run: WeightedRun, q: MixtureDensity):
    """
    Refuse reweighting when a mixture reaches outside the stored run's support.

    Raises:
        SupportError: Naming the offending coordinate and intervals
    """
    new_support = q.support()
    if len(new_support) != len(run.support):
        raise SupportError(
            f"run has {len(run.support)} coordinates, new ensemble has {len(new_support)}"
        )
    for name, (lo, hi), (run_lo, run_hi) in zip(run.columns, new_support, run.support):
        if lo < run_lo or hi > run_hi:
            raise SupportError(
                f"support of {name} widens from [{run_lo}, {run_hi}] to [{lo}, {hi}]; "
                "stored samples cannot represent the new candidates"
            )


@dataclass(frozen=True)
class Estimate:
    """Importance-sampling estimate with its standard error and weight diagnostics."""

    value: float
    std_error: float
    n_eff: float
    mean_weight: float
    degenerate: bool


def reweighted_expectation(
    run: WeightedRun,
    density: MixtureDensity,
    candidate,
    values: Optional[np.ndarray] = None,
) -> Estimate:
    """
    Estimate E_p[g] = (1/n) sum_i g(x_i) w_i for one candidate.

    Args:
        run: Stored samples and outputs
        density: Mixture the candidate is addressed in (or any mixture when the
            candidate is an external log-pdf)
        candidate: Candidate index or external log-pdf
        values: Quantity to average instead of the stored outputs
    """
    g = run.outputs if values is None else np.asarray(values, dtype=float)
    w = run.weights(density, candidate)
    terms = g * w
    n = len(terms)
    n_eff = effective_sample_size(w)
    degenerate = n_eff < DEGENERACY_THRESHOLD
    if degenerate:
        LOGGER.warning(
            "Importance weights are degenerate (n_eff=%.1f)",
            n_eff,
            extra={"stage": "reweighting", "candidate": str(candidate)},
        )
    return Estimate(
        value=float(np.mean(terms)),
        std_error=float(np.std(terms, ddof=1) / np.sqrt(n)) if n > 1 else float("nan"),
        n_eff=n_eff,
        mean_weight=float(np.mean(w)),
        degenerate=degenerate,
    )


def weighted_ecdf(values, weights, grid, normalized: bool = True) -> np.ndarray:
    """
    Weighted empirical CDF of ``values`` on ``grid``.

    Self-normalized (divide by sum w) by default; ``normalized=False`` divides by n.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    cumulative = np.concatenate([[0.0], np.cumsum(weights[order])])
    positions = np.searchsorted(values[order], np.asarray(grid, dtype=float), side="right")
    total = cumulative[-1] if normalized else float(len(values))
    if total <= 0.0:
        return np.zeros(len(positions))
    return cumulative[positions] / total


@dataclass(frozen=True)
class CdfBand:
    """Per-candidate weighted ECDFs of the performance output on a common grid."""

    grid: np.ndarray
    cdfs: np.ndarray
    candidates: Tuple[Candidate, ...]
    normalized: bool = True

    @property
    def lower(self) -> np.ndarray:
        return self.cdfs.min(axis=0)

    @property
    def upper(self) -> np.ndarray:
        return self.cdfs.max(axis=0)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def mean_width(self) -> float:
        return float(np.mean(self.width))

    def quantile(self, q: float) -> np.ndarray:
        """Pointwise quantile across candidates."""
        return np.quantile(self.cdfs, q, axis=0)

    def contains(self, cdf, tol: float = 0.0) -> np.ndarray:
        """Pointwise test whether ``cdf`` lies inside the envelope."""
        cdf = np.asarray(cdf, dtype=float)
        return (cdf >= self.lower - tol) & (cdf <= self.upper + tol)


def cdf_band(
    run: WeightedRun,
    density: MixtureDensity,
    grid,
    level: str = "joint",
    normalized: bool = True,
) -> CdfBand:
    """
    Ensemble of weighted ECDFs of the stored outputs, one per candidate.

    Args:
        run: Stored samples and outputs
        density: Mixture whose candidates are reweighted (may differ from the one the
            run was drawn from, as long as its support is covered)
        grid: Sorted evaluation grid
        level: ``joint`` for every (l, k) candidate, ``pair`` for the N_td components
            with their averaged copulas
        normalized: Self-normalize the weights per candidate
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) < 0):
        raise InputError("the CDF grid must be a sorted 1-D array")
    order = np.argsort(run.outputs, kind="stable")
    sorted_outputs = run.outputs[order]
    positions = np.searchsorted(sorted_outputs, grid, side="right")

    labels = []
    rows = []
    for candidate, log_p in density.iter_candidate_log_pdfs(run.samples, level):
        w = np.exp(_log_ratio(log_p, run.log_q))[order]
        cumulative = np.concatenate([[0.0], np.cumsum(w)])
        total = cumulative[-1] if normalized else float(run.n)
        rows.append(cumulative[positions] / total if total > 0.0 else np.zeros(len(grid)))
        labels.append(candidate)
    LOGGER.info(
        "CDF band over %d candidates", len(labels), extra={"stage": "cdf_band", "level": level}
    )
    return CdfBand(grid=grid, cdfs=np.vstack(rows), candidates=tuple(labels), normalized=normalized)

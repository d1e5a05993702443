"""
Hierarchical multimodel procedure.

Marginal inference per variable, a finite ensemble of marginal-parameter pairs drawn
from the marginal posteriors, copula inference conditioned on each pair, and the
assembled ensemble of candidate joint densities.
"""

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from .bayes_inference import Candidate, InferenceConfig, ModelPosterior, PriorSpec, infer_models
from .copula_core import CopulaFamily, CopulaSpec, copula_log_pdf
from .errors import InputError
from .marginal_core import MarginalSpec, marginal_cdf, marginal_logpdf, pseudo_observations

LOGGER = logging.getLogger(__name__)

QUANTIZATION = 1e-6

DEPENDENCE_MODES = ("copula", "independence", "gaussian_rho")


# ---------------------------------------------------------------------------
# Provenance-carrying draws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalDraw:
    """Concrete marginal spec with the (model, chain state) it was drawn from."""

    spec: MarginalSpec
    model_index: int
    chain_index: int

    def to_dict(self) -> Dict[str, Any]:
        return {**self.spec.to_dict(), "model": self.model_index, "chain": self.chain_index}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MarginalDraw":
        return cls(MarginalSpec.from_dict(data), int(data["model"]), int(data["chain"]))


@dataclass(frozen=True)
class CopulaDraw:
    """Concrete copula spec with the (model, chain state) it was drawn from."""

    spec: CopulaSpec
    model_index: int
    chain_index: int

    def to_dict(self) -> Dict[str, Any]:
        return {**self.spec.to_dict(), "model": self.model_index, "chain": self.chain_index}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CopulaDraw":
        return cls(CopulaSpec.from_dict(data), int(data["model"]), int(data["chain"]))


def _draw_indices(
    probs: np.ndarray,
    chain_lengths: Sequence[int],
    n: int,
    rng: np.random.Generator,
    method: str = "random",
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Model and chain-state indices for ``n`` draws.

    ``random`` picks the model by its probability and the state uniformly with
    replacement. ``lhs`` stratifies one uniform coordinate over [0, 1): it selects
    the model through the cumulative probabilities and the chain state through its
    relative position inside the model's interval.
    """
    probs = np.asarray(probs, dtype=float)
    lengths = np.asarray(chain_lengths, dtype=int)
    if method == "random":
        models = rng.choice(len(probs), size=n, p=probs)
        chains = np.floor(rng.random(n) * lengths[models]).astype(int)
    elif method == "lhs":
        strata = qmc.LatinHypercube(d=1, seed=rng).random(n)[:, 0]
        edges = np.concatenate([[0.0], np.cumsum(probs)])
        edges[-1] = 1.0
        models = np.clip(np.searchsorted(edges, strata, side="right") - 1, 0, len(probs) - 1)
        relative = (strata - edges[models]) / np.maximum(probs[models], 1e-300)
        chains = np.floor(np.clip(relative, 0.0, 1.0 - 1e-12) * lengths[models]).astype(int)
    else:
        raise InputError(f"unknown sampling method {method!r}; use 'random' or 'lhs'")
    return models, np.minimum(chains, lengths[models] - 1)


def _selection_probs(posterior: ModelPosterior, model_selection: str) -> np.ndarray:
    if model_selection == "posterior":
        return posterior.model_probs
    if model_selection == "uniform":
        return np.full(len(posterior.candidates), 1.0 / len(posterior.candidates))
    raise InputError(f"unknown model selection {model_selection!r}; use 'posterior' or 'uniform'")


# ---------------------------------------------------------------------------
# Marginal posteriors and pair draws
# ---------------------------------------------------------------------------


def infer_marginals(
    data_column,
    candidates: Sequence[Candidate],
    cfg: InferenceConfig,
    priors: Optional[Mapping[str, PriorSpec]] = None,
    seed: int = 0,
) -> ModelPosterior:
    """
    Marginal multimodel inference for one variable.

    Raises:
        InputError: If fewer than three data are given
    """
    data = np.asarray(data_column, dtype=float).ravel()
    if data.size < 3:
        raise InputError(f"marginal inference needs at least 3 data, got {data.size}")
    if not np.all(np.isfinite(data)):
        raise InputError("marginal data must be finite")
    return infer_models(candidates, data, cfg, priors=priors, seed=seed)


@dataclass(frozen=True)
class MarginalEnsemble:
    """N_td marginal-parameter pairs drawn from two marginal posteriors."""

    posteriors: Tuple[ModelPosterior, ModelPosterior]
    pairs: Tuple[Tuple[MarginalDraw, MarginalDraw], ...]

    @property
    def n_td(self) -> int:
        return len(self.pairs)


def draw_marginals(
    posterior: ModelPosterior,
    n_td: int,
    seed: Any = None,
    method: str = "random",
    model_selection: str = "posterior",
) -> Tuple[MarginalDraw, ...]:
    """Draw ``n_td`` concrete marginal specs from one marginal posterior."""
    if n_td < 1:
        raise InputError(f"N_td must be >= 1, got {n_td}")
    rng = np.random.default_rng(seed)
    probs = _selection_probs(posterior, model_selection)
    lengths = [len(s) for s in posterior.param_samples]
    models, chains = _draw_indices(probs, lengths, n_td, rng, method)
    return tuple(
        MarginalDraw(posterior.spec(int(m), int(c)), int(m), int(c)) for m, c in zip(models, chains)
    )


def draw_marginal_pairs(
    post1: ModelPosterior,
    post2: ModelPosterior,
    n_td: int,
    seed: Optional[int] = None,
    method: str = "random",
    model_selection: str = "posterior",
) -> MarginalEnsemble:
    """
    Draw ``n_td`` independent marginal pairs.

    For each pair and each variable a model family is selected by its posterior
    probability (or uniformly) and a parameter vector is resampled from the stored
    MCMC chain of that family.

    Args:
        post1: Marginal posterior of the first variable
        post2: Marginal posterior of the second variable
        n_td: Number of pairs
        seed: Root seed; the two variables receive independent child streams
        method: ``random`` or ``lhs``
        model_selection: ``posterior`` or ``uniform``
    """
    if n_td < 1:
        raise InputError(f"N_td must be >= 1, got {n_td}")
    s1, s2 = np.random.SeedSequence(seed).spawn(2)
    first = draw_marginals(post1, n_td, s1, method, model_selection)
    second = draw_marginals(post2, n_td, s2, method, model_selection)
    return MarginalEnsemble(posteriors=(post1, post2), pairs=tuple(zip(first, second)))


# ---------------------------------------------------------------------------
# Conditional copulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalCopulaSet:
    """
    Copula draws conditioned on one marginal pair.

    ``model_names`` and ``model_probs`` describe the retained copula families; the
    full posterior is kept in memory only (it is not serialized).
    """

    draws: Tuple[CopulaDraw, ...]
    model_names: Tuple[str, ...]
    model_probs: Tuple[float, ...]
    posterior: Optional[ModelPosterior] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.draws:
            raise InputError("a conditional copula set needs at least one draw")
        for draw in self.draws:
            if draw.spec.family.value != self.model_names[draw.model_index]:
                raise InputError(f"copula draw {draw.spec} does not match its model index")

    @property
    def n_tc(self) -> int:
        return len(self.draws)

    @property
    def specs(self) -> List[CopulaSpec]:
        return [d.spec for d in self.draws]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "models": list(self.model_names),
            "model_probs": list(self.model_probs),
            "draws": [d.to_dict() for d in self.draws],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ConditionalCopulaSet":
        return cls(
            draws=tuple(CopulaDraw.from_dict(d) for d in data["draws"]),
            model_names=tuple(data["models"]),
            model_probs=tuple(float(p) for p in data["model_probs"]),
        )

    @classmethod
    def fixed(cls, spec: CopulaSpec) -> "ConditionalCopulaSet":
        """Single-copula set used by the non-inferred dependence modes."""
        return cls((CopulaDraw(spec, 0, 0),), (spec.family.value,), (1.0,))


def pseudo_observation_key(u: np.ndarray, candidate_names: Sequence[str] = ()) -> str:
    """SHA-256 of the pseudo-observations quantized to a 1e-6 grid."""
    quantized = np.round(np.asarray(u, dtype=float) / QUANTIZATION).astype(np.int64)
    digest = hashlib.sha256(np.ascontiguousarray(quantized).tobytes())
    digest.update("|".join(candidate_names).encode("utf-8"))
    return digest.hexdigest()


class CopulaInferenceCache:
    """
    Thread-safe memo of copula posteriors keyed by quantized pseudo-observations.

    Copula evidence depends on a marginal pair only through its pseudo-observations,
    so pairs that map the data to the same grid share one inference.
    """

    def __init__(self):
        self._store: Dict[str, ModelPosterior] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._store)

    def __contains__(self, key: str) -> bool:
        with self._lock:
            return key in self._store

    def get(self, key: str) -> Optional[ModelPosterior]:
        with self._lock:
            value = self._store.get(key)
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
            return value

    def put(self, key: str, posterior: ModelPosterior):
        with self._lock:
            self._store.setdefault(key, posterior)

    def get_or_compute(self, key: str, compute: Callable[[], ModelPosterior]) -> ModelPosterior:
        cached = self.get(key)
        if cached is not None:
            return cached
        posterior = compute()
        self.put(key, posterior)
        return self._store[key]


def _key_seed(root_seed: int, key: str) -> int:
    state = np.random.SeedSequence([int(root_seed), int(key[:15], 16)]).generate_state(1)
    return int(state[0])


def draw_copulas(
    posterior: ModelPosterior,
    n_tc: int,
    seed: Any = None,
    method: str = "random",
) -> ConditionalCopulaSet:
    """Draw ``n_tc`` concrete copula specs from a copula posterior."""
    if n_tc < 1:
        raise InputError(f"N_tc must be >= 1, got {n_tc}")
    rng = np.random.default_rng(seed)
    lengths = [max(len(s), 1) for s in posterior.param_samples]
    models, chains = _draw_indices(posterior.model_probs, lengths, n_tc, rng, method)
    draws = tuple(
        CopulaDraw(posterior.spec(int(m), int(c)), int(m), int(c)) for m, c in zip(models, chains)
    )
    return ConditionalCopulaSet(
        draws=draws,
        model_names=tuple(posterior.names),
        model_probs=tuple(float(p) for p in posterior.model_probs),
        posterior=posterior,
    )


def infer_copula_conditional(
    pair: Tuple[MarginalSpec, MarginalSpec],
    data,
    copula_candidates: Sequence[Candidate],
    cfg: InferenceConfig,
    n_tc: int,
    priors: Optional[Mapping[str, PriorSpec]] = None,
    seed: int = 0,
    draw_seed: Optional[int] = None,
    cache: Optional[CopulaInferenceCache] = None,
) -> ConditionalCopulaSet:
    """
    Copula multimodel inference conditioned on one marginal pair.

    The data are standardized through the pair's CDFs; evidence, model probabilities
    and MCMC chains follow from :func:`infer_models`. The inference seed is derived
    from ``seed`` and the pseudo-observation key, so identical pseudo-observations
    give identical posteriors whether or not they hit the cache.

    Raises:
        NoViableModelError: If no copula family is plausible
    """
    u = pseudo_observations(pair, data)
    names = [c.name for c in copula_candidates]
    key = pseudo_observation_key(u, names)

    def compute():
        return infer_models(
            copula_candidates, u, cfg, priors=priors, seed=_key_seed(seed, key)
        )

    posterior = cache.get_or_compute(key, compute) if cache is not None else compute()
    return draw_copulas(posterior, n_tc, seed=draw_seed)


# ---------------------------------------------------------------------------
# Joint densities
# ---------------------------------------------------------------------------


def joint_log_pdf(pair: Tuple[MarginalSpec, MarginalSpec], copula: CopulaSpec, x) -> np.ndarray:
    """
    Log joint density log c(F1(x1), F2(x2)) + log f1(x1) + log f2(x2).

    Args:
        pair: Marginal specs of the two variables
        copula: Copula spec
        x: Points of shape (2,) or (n, 2)

    Returns:
        Log-densities, ``-inf`` outside the marginal supports
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    log_f = marginal_logpdf(pair[0], x[:, 0]) + marginal_logpdf(pair[1], x[:, 1])
    inside = np.isfinite(log_f)
    out = np.full(len(x), -np.inf)
    if np.any(inside):
        u = np.column_stack(
            [marginal_cdf(pair[0], x[inside, 0]), marginal_cdf(pair[1], x[inside, 1])]
        )
        out[inside] = log_f[inside] + copula_log_pdf(copula, u, clamp=True)
    return out[0] if single else out


@dataclass(frozen=True)
class EnsembleEntry:
    """One marginal pair together with its conditional copula draws."""

    pair: Tuple[MarginalDraw, MarginalDraw]
    copulas: ConditionalCopulaSet

    @property
    def marginal_specs(self) -> Tuple[MarginalSpec, MarginalSpec]:
        return (self.pair[0].spec, self.pair[1].spec)

    def to_dict(self) -> Dict[str, Any]:
        return {"marginals": [d.to_dict() for d in self.pair], "copulas": self.copulas.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EnsembleEntry":
        first, second = (MarginalDraw.from_dict(d) for d in data["marginals"])
        return cls((first, second), ConditionalCopulaSet.from_dict(data["copulas"]))


@dataclass(frozen=True)
class JointEnsemble:
    """
    N_td x N_tc candidate bivariate joint densities with full provenance.

    ``marginal_models`` and ``marginal_probs`` list the retained marginal families
    and their probabilities per variable; the ``model_index`` of every marginal draw
    points into them.
    """

    variables: Tuple[str, str]
    entries: Tuple[EnsembleEntry, ...]
    marginal_models: Tuple[Tuple[str, ...], Tuple[str, ...]] = ((), ())
    marginal_probs: Tuple[Tuple[float, ...], Tuple[float, ...]] = ((), ())
    dependence_mode: str = "copula"

    def __post_init__(self):
        if not self.entries:
            raise InputError("a joint ensemble needs at least one entry")
        sizes = {e.copulas.n_tc for e in self.entries}
        if len(sizes) != 1:
            raise InputError(f"every entry must carry the same number of copula draws, got {sizes}")

    @property
    def n_td(self) -> int:
        return len(self.entries)

    @property
    def n_tc(self) -> int:
        return self.entries[0].copulas.n_tc

    @property
    def size(self) -> int:
        return self.n_td * self.n_tc

    def candidate(self, l: int, k: int) -> Tuple[MarginalSpec, MarginalSpec, CopulaSpec]:
        """Marginal pair and copula of candidate (l, k)."""
        entry = self.entries[l]
        first, second = entry.marginal_specs
        return first, second, entry.copulas.draws[k].spec

    def candidate_log_pdf(self, l: int, k: int, x) -> np.ndarray:
        first, second, copula = self.candidate(l, k)
        return joint_log_pdf((first, second), copula, x)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variables": list(self.variables),
            "dependence_mode": self.dependence_mode,
            "n_td": self.n_td,
            "n_tc": self.n_tc,
            "marginal_models": [list(m) for m in self.marginal_models],
            "marginal_probs": [list(p) for p in self.marginal_probs],
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "JointEnsemble":
        ensemble = cls(
            variables=tuple(data["variables"]),
            entries=tuple(EnsembleEntry.from_dict(e) for e in data["entries"]),
            marginal_models=tuple(tuple(m) for m in data.get("marginal_models", ((), ()))),
            marginal_probs=tuple(
                tuple(float(p) for p in probs) for probs in data.get("marginal_probs", ((), ()))
            ),
            dependence_mode=data.get("dependence_mode", "copula"),
        )
        if ensemble.n_td != data.get("n_td", ensemble.n_td):
            raise InputError("serialized ensemble entry count does not match n_td")
        return ensemble

    def ensemble_hash(self) -> str:
        return _hash_payload(self.to_dict())


def assemble_ensemble(
    marginals: MarginalEnsemble,
    copula_sets: Sequence[ConditionalCopulaSet],
    variables: Tuple[str, str] = ("x1", "x2"),
    dependence_mode: str = "copula",
) -> JointEnsemble:
    """
    Combine the marginal pairs with their conditional copula sets.

    Raises:
        InputError: On a pair/copula-set count mismatch or unequal N_tc
    """
    if len(copula_sets) != marginals.n_td:
        raise InputError(
            f"{len(copula_sets)} copula sets given for {marginals.n_td} marginal pairs"
        )
    entries = tuple(EnsembleEntry(pair, cs) for pair, cs in zip(marginals.pairs, copula_sets))
    return JointEnsemble(
        variables=tuple(variables),
        entries=entries,
        marginal_models=tuple(tuple(p.names) for p in marginals.posteriors),
        marginal_probs=tuple(tuple(float(v) for v in p.model_probs) for p in marginals.posteriors),
        dependence_mode=dependence_mode,
    )


def infer_pair_ensemble(
    data,
    marginals: MarginalEnsemble,
    copula_candidates: Sequence[Candidate],
    cfg: InferenceConfig,
    n_tc: int,
    variables: Tuple[str, str] = ("x1", "x2"),
    priors: Optional[Mapping[str, PriorSpec]] = None,
    dependence_mode: str = "copula",
    rho: float = 0.8,
    seed: int = 0,
    method: str = "random",
    cache: Optional[CopulaInferenceCache] = None,
) -> JointEnsemble:
    """
    Conditional copula sets for every marginal pair, then the assembled ensemble.

    In ``copula`` mode the distinct pseudo-observation keys are inferred once each
    (in a thread pool of ``cfg.n_jobs`` workers) before the per-pair draws. The
    ``independence`` and ``gaussian_rho`` modes attach one fixed copula to every
    pair and skip copula inference.
    """
    if dependence_mode not in DEPENDENCE_MODES:
        raise InputError(f"unknown dependence mode {dependence_mode!r}")
    if dependence_mode == "independence":
        fixed = ConditionalCopulaSet.fixed(CopulaSpec(CopulaFamily.INDEPENDENCE, ()))
        return assemble_ensemble(marginals, [fixed] * marginals.n_td, variables, dependence_mode)
    if dependence_mode == "gaussian_rho":
        fixed = ConditionalCopulaSet.fixed(CopulaSpec(CopulaFamily.GAUSSIAN, (rho,)))
        return assemble_ensemble(marginals, [fixed] * marginals.n_td, variables, dependence_mode)

    data = np.asarray(data, dtype=float)
    cache = cache if cache is not None else CopulaInferenceCache()
    names = [c.name for c in copula_candidates]
    keyed = []
    for first, second in marginals.pairs:
        u = pseudo_observations((first.spec, second.spec), data)
        keyed.append((pseudo_observation_key(u, names), u))

    pending = {}
    for key, u in keyed:
        if key not in pending and key not in cache:
            pending[key] = u
    LOGGER.info(
        "Copula inference for %d marginal pairs (%d distinct, %d cached)",
        marginals.n_td,
        len(pending),
        len({k for k, _ in keyed}) - len(pending),
        extra={"stage": "copula_inference", "pair": "/".join(variables)},
    )

    def run(key):
        posterior = infer_models(
            copula_candidates, pending[key], cfg, priors=priors, seed=_key_seed(seed, key)
        )
        cache.put(key, posterior)

    with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
        list(pool.map(run, sorted(pending)))

    draw_seeds = np.random.SeedSequence(seed).spawn(marginals.n_td)
    sets = [
        draw_copulas(cache.get(key), n_tc, seed=draw_seeds[l], method=method)
        for l, (key, _) in enumerate(keyed)
    ]
    return assemble_ensemble(marginals, sets, variables, dependence_mode)


# ---------------------------------------------------------------------------
# Block structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingleEnsemble:
    """N_td draws for a variable modeled independently of all others."""

    variable: str
    draws: Tuple[MarginalDraw, ...]
    models: Tuple[str, ...] = ()
    probs: Tuple[float, ...] = ()

    @property
    def n_td(self) -> int:
        return len(self.draws)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variable": self.variable,
            "models": list(self.models),
            "model_probs": list(self.probs),
            "draws": [d.to_dict() for d in self.draws],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SingleEnsemble":
        return cls(
            variable=data["variable"],
            draws=tuple(MarginalDraw.from_dict(d) for d in data["draws"]),
            models=tuple(data.get("models", ())),
            probs=tuple(float(p) for p in data.get("model_probs", ())),
        )


@dataclass(frozen=True)
class BlockEnsembles:
    """
    Ensembles for a declared block structure: dependent pairs and independent singles.

    All blocks share N_td; candidate (l, k) of the full input vector combines entry l
    of every block with copula draw k of every pair block.
    """

    pairs: Tuple[JointEnsemble, ...]
    singles: Tuple[SingleEnsemble, ...] = ()
    marginal_posteriors: Mapping[str, ModelPosterior] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self):
        sizes = {p.n_td for p in self.pairs} | {s.n_td for s in self.singles}
        if len(sizes) != 1:
            raise InputError(f"all blocks must share N_td, got {sorted(sizes)}")
        if len({p.n_tc for p in self.pairs}) > 1:
            raise InputError("all pair blocks must share N_tc")

    @property
    def variables(self) -> List[str]:
        names: List[str] = []
        for p in self.pairs:
            names.extend(p.variables)
        names.extend(s.variable for s in self.singles)
        return names

    @property
    def n_td(self) -> int:
        return (self.pairs[0] if self.pairs else self.singles[0]).n_td

    @property
    def n_tc(self) -> int:
        return self.pairs[0].n_tc if self.pairs else 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variables": self.variables,
            "pairs": [p.to_dict() for p in self.pairs],
            "singles": [s.to_dict() for s in self.singles],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BlockEnsembles":
        return cls(
            pairs=tuple(JointEnsemble.from_dict(p) for p in data.get("pairs", ())),
            singles=tuple(SingleEnsemble.from_dict(s) for s in data.get("singles", ())),
        )

    def ensemble_hash(self) -> str:
        return _hash_payload(self.to_dict())


def infer_block_ensembles(
    data: Mapping[str, np.ndarray],
    pairs: Sequence[Tuple[str, str]],
    singles: Sequence[str],
    marginal_candidates: Mapping[str, Sequence[Candidate]],
    copula_candidates: Sequence[Candidate],
    cfg: InferenceConfig,
    n_td: int = 1000,
    n_tc: int = 500,
    marginal_priors: Optional[Mapping[str, Mapping[str, PriorSpec]]] = None,
    copula_priors: Optional[Mapping[str, PriorSpec]] = None,
    dependence_mode: str = "copula",
    rho: float = 0.8,
    method: str = "random",
    model_selection: str = "posterior",
    seed: int = 0,
    cache: Optional[CopulaInferenceCache] = None,
) -> BlockEnsembles:
    """
    Run the hierarchical procedure over a declared block structure.

    Every variable gets its own marginal inference; each dependent pair then gets a
    joint ensemble and each independent variable a single-variable ensemble, all of
    size ``n_td``.

    Args:
        data: Column arrays keyed by variable name
        pairs: Dependent variable pairs
        singles: Variables modeled independently
        marginal_candidates: Candidate marginal families per variable
        copula_candidates: Candidate copula families shared by every pair
        cfg: Inference settings
        n_td: Number of marginal draws per block
        n_tc: Number of copula draws per marginal pair
        marginal_priors: Optional prior overrides per variable and family name
        copula_priors: Optional copula prior overrides per family name
        dependence_mode: ``copula``, ``independence`` or ``gaussian_rho``
        rho: Correlation of the ``gaussian_rho`` mode
        method: ``random`` or ``lhs`` draws
        model_selection: ``posterior`` or ``uniform`` model choice in the draws
        seed: Root seed
        cache: Shared copula inference cache
    """
    marginal_priors = marginal_priors or {}
    variables = [v for p in pairs for v in p] + list(singles)
    if len(set(variables)) != len(variables):
        raise InputError(f"every variable must appear in exactly one block: {variables}")
    missing = [v for v in variables if v not in data]
    if missing:
        raise InputError(f"no data for variables {missing}")

    root = np.random.SeedSequence(seed)
    inference_seeds = root.spawn(len(variables))
    posteriors: Dict[str, ModelPosterior] = {}
    for name, child in zip(variables, inference_seeds):
        LOGGER.info("Marginal inference for %s", name, extra={"stage": "marginal_inference"})
        posteriors[name] = infer_marginals(
            data[name],
            marginal_candidates[name],
            cfg,
            priors=marginal_priors.get(name),
            seed=int(child.generate_state(1)[0]),
        )

    block_seeds = root.spawn(len(pairs) + len(singles))
    pair_ensembles = []
    for (a, b), child in zip(pairs, block_seeds[: len(pairs)]):
        draw_seed, copula_seed = (int(s) for s in child.generate_state(2))
        marginal_pairs = draw_marginal_pairs(
            posteriors[a], posteriors[b], n_td, draw_seed, method, model_selection
        )
        pair_data = np.column_stack([data[a], data[b]])
        pair_ensembles.append(
            infer_pair_ensemble(
                pair_data,
                marginal_pairs,
                copula_candidates,
                cfg,
                n_tc,
                variables=(a, b),
                priors=copula_priors,
                dependence_mode=dependence_mode,
                rho=rho,
                seed=copula_seed,
                method=method,
                cache=cache,
            )
        )

    single_ensembles = []
    for name, child in zip(singles, block_seeds[len(pairs):]):
        post = posteriors[name]
        single_ensembles.append(
            SingleEnsemble(
                variable=name,
                draws=draw_marginals(post, n_td, child, method, model_selection),
                models=tuple(post.names),
                probs=tuple(float(p) for p in post.model_probs),
            )
        )

    return BlockEnsembles(tuple(pair_ensembles), tuple(single_ensembles), posteriors)


def _hash_payload(payload: Mapping[str, Any]) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()

"""Bayesian multimodel inference over marginal and copula candidates.

Evidence is estimated by plain Monte Carlo integration over a bounded uniform
prior, posterior model probabilities follow from Bayes' rule over the candidate
set, and parameter posteriors are sampled with an adaptive random-walk
Metropolis-Hastings chain whose proposal scale is frozen after burn-in.
"""

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .copula_core import (
    CopulaFamily,
    CopulaSpec,
    copula_log_likelihood,
    empirical_kendall_tau,
    tau_to_param,
)
from .errors import ConvergenceError, DomainError, InputError, NoViableModelError
from .marginal_core import MarginalFamily, MarginalSpec, marginal_log_likelihood, moment_init

LOGGER = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorSpec:
    """
    Independent bounded-uniform prior over a parameter vector.

    ``excluded`` lists ``(param_index, lower, upper)`` open intervals removed from
    the box (used to keep the Frank prior away from theta = 0).
    """

    bounds: Tuple[Tuple[float, float], ...]
    excluded: Tuple[Tuple[int, float, float], ...] = ()

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        excluded = tuple((int(i), float(lo), float(hi)) for i, lo, hi in self.excluded)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "excluded", excluded)
        for lo, hi in bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise DomainError(f"prior bounds must be finite with lower < upper, got {(lo, hi)}")
        for index, lo, hi in excluded:
            b_lo, b_hi = bounds[index]
            if not b_lo <= lo < hi <= b_hi:
                raise DomainError(f"excluded interval {(lo, hi)} must lie inside {(b_lo, b_hi)}")

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    @property
    def widths(self) -> np.ndarray:
        widths = np.array([hi - lo for lo, hi in self.bounds], dtype=float)
        for index, lo, hi in self.excluded:
            widths[index] -= hi - lo
        return widths

    def log_density(self, theta: np.ndarray) -> float:
        """Log prior density; -inf outside the support."""
        if not self.contains(theta):
            return -np.inf
        return float(-np.sum(np.log(self.widths)))

    def contains(self, theta: np.ndarray) -> bool:
        theta = np.asarray(theta, dtype=float)
        for value, (lo, hi) in zip(theta, self.bounds):
            if not lo <= value <= hi:
                return False
        for index, lo, hi in self.excluded:
            if lo < theta[index] < hi:
                return False
        return True

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` parameter vectors, shape (n, dimension)."""
        draws = np.empty((n, self.dimension))
        for i, (lo, hi) in enumerate(self.bounds):
            gaps = [(g_lo, g_hi) for j, g_lo, g_hi in self.excluded if j == i]
            values = lo + rng.random(n) * self.widths[i]
            for g_lo, g_hi in sorted(gaps):
                values = np.where(values > g_lo, values + (g_hi - g_lo), values)
            draws[:, i] = values
        return draws

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bounds": [list(b) for b in self.bounds],
            "excluded": [list(e) for e in self.excluded],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PriorSpec":
        return cls(
            tuple(tuple(b) for b in data["bounds"]),
            tuple(tuple(e) for e in data.get("excluded", ())),
        )


# ---------------------------------------------------------------------------
# Candidates
# ---------------------------------------------------------------------------


class Candidate(ABC):
    """A parametric model family that can be scored against data."""

    name: str = ""
    n_params: int = 0

    @abstractmethod
    def log_likelihood(self, theta: np.ndarray, data: np.ndarray) -> float:
        """Log-likelihood of the data at parameter vector ``theta``."""

    @abstractmethod
    def build(self, theta: Sequence[float]):
        """Concrete spec for parameter vector ``theta``."""

    @abstractmethod
    def default_prior(self, data: np.ndarray) -> PriorSpec:
        """Noninformative bounded-uniform prior used when the config names none."""

    def initial_point(self, data: np.ndarray, prior: PriorSpec) -> np.ndarray:
        """Starting point of the MCMC chain (prior box centre unless overridden)."""
        return np.array([0.5 * (lo + hi) for lo, hi in prior.bounds])

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.name})"


class MarginalCandidate(Candidate):
    """Marginal family scored on a single data column."""

    def __init__(self, family: MarginalFamily, prior_width: float = 3.0, prior_factor: float = 3.0):
        """
        Args:
            family: Marginal family
            prior_width: Half-width, in sample standard deviations, of location-like priors
            prior_factor: Multiplicative half-range of scale/shape priors
        """
        self.family = MarginalFamily(family)
        self.name = self.family.value
        self.n_params = 2
        self.prior_width = prior_width
        self.prior_factor = prior_factor

    def log_likelihood(self, theta, data) -> float:
        try:
            spec = MarginalSpec(self.family, tuple(theta))
        except DomainError:
            return -np.inf
        return marginal_log_likelihood(spec, data)

    def build(self, theta) -> MarginalSpec:
        return MarginalSpec(self.family, tuple(theta))

    def default_prior(self, data) -> PriorSpec:
        data = np.asarray(data, dtype=float)
        start = moment_init(self.family, data).spec.params
        w, f = self.prior_width, self.prior_factor
        if self.family is MarginalFamily.GAUSSIAN:
            mean, std = start
            return PriorSpec(((mean - w * std, mean + w * std), (std / f, std * f)))
        if self.family is MarginalFamily.LOGNORMAL:
            log_mean, log_std = start
            return PriorSpec(
                ((log_mean - w * log_std, log_mean + w * log_std), (log_std / f, log_std * f))
            )
        shape, scale = start
        if self.family is MarginalFamily.GAMMA:
            return PriorSpec(((shape / f, shape * f), (scale / f, scale * f)))
        std = float(np.std(data, ddof=1)) if data.size > 1 else 0.0
        return PriorSpec(
            ((shape / f, shape * f), (max(scale - w * std, scale / f), scale + max(w * std, scale)))
        )

    def initial_point(self, data, prior) -> np.ndarray:
        start = np.asarray(moment_init(self.family, data).spec.params)
        return _clip_into(start, prior)


DEFAULT_COPULA_PRIORS: Dict[CopulaFamily, PriorSpec] = {
    CopulaFamily.INDEPENDENCE: PriorSpec(()),
    CopulaFamily.GAUSSIAN: PriorSpec(((-0.999, 0.999),)),
    CopulaFamily.STUDENT_T: PriorSpec(((-0.999, 0.999), (2.001, 30.0))),
    CopulaFamily.CLAYTON: PriorSpec(((1e-3, 20.0),)),
    CopulaFamily.FRANK: PriorSpec(((-30.0, 30.0),), excluded=((0, -1e-3, 1e-3),)),
    CopulaFamily.GUMBEL: PriorSpec(((1.0, 20.0),)),
}


class CopulaCandidate(Candidate):
    """Copula family scored on pseudo-observations."""

    def __init__(self, family: CopulaFamily):
        self.family = CopulaFamily(family)
        self.name = self.family.value
        self.n_params = self.family.arity

    def log_likelihood(self, theta, data) -> float:
        try:
            spec = CopulaSpec(self.family, tuple(theta))
        except DomainError:
            return -np.inf
        value = copula_log_likelihood(spec, data)
        return value if np.isfinite(value) else -np.inf

    def build(self, theta) -> CopulaSpec:
        return CopulaSpec(self.family, tuple(theta))

    def default_prior(self, data) -> PriorSpec:
        return DEFAULT_COPULA_PRIORS[self.family]

    def initial_point(self, data, prior) -> np.ndarray:
        if self.n_params == 0:
            return np.empty(0)
        tau = empirical_kendall_tau(data)
        try:
            start = np.asarray(tau_to_param(self.family, float(np.clip(tau, -0.95, 0.95))))
        except DomainError:
            start = np.array([lo + 0.01 * (hi - lo) for lo, hi in prior.bounds])
        return _clip_into(start, prior)


def _clip_into(theta: np.ndarray, prior: PriorSpec) -> np.ndarray:
    theta = np.array(theta, dtype=float)
    for i, (lo, hi) in enumerate(prior.bounds):
        margin = 1e-6 * (hi - lo)
        theta[i] = np.clip(theta[i], lo + margin, hi - margin)
    for index, lo, hi in prior.excluded:
        if lo < theta[index] < hi:
            theta[index] = hi if theta[index] >= 0.5 * (lo + hi) else lo
    return theta


# ---------------------------------------------------------------------------
# Evidence and model probabilities
# ---------------------------------------------------------------------------


def log_evidence(
    candidate: Candidate,
    prior: PriorSpec,
    data,
    n_prior_samples: int = 10_000,
    seed: Optional[int] = None,
) -> float:
    """
    Monte Carlo estimate of the log marginal likelihood.

    log[(1/S) sum_s p(d | theta_s)] with theta_s drawn from the prior, summed in
    log space with a max shift.

    Args:
        candidate: Model family
        prior: Parameter prior
        data: Data passed to the candidate likelihood
        n_prior_samples: Number of prior draws S (>= 100)
        seed: Seed of the prior-draw generator

    Returns:
        The log-evidence, ``-inf`` when every draw has zero likelihood
    """
    if n_prior_samples < 100:
        raise InputError(f"evidence needs at least 100 prior samples, got {n_prior_samples}")
    rng = np.random.default_rng(seed)
    draws = prior.sample(n_prior_samples, rng)
    log_liks = np.array([candidate.log_likelihood(theta, data) for theta in draws])
    if not np.any(np.isfinite(log_liks)):
        LOGGER.warning(
            "All prior draws have zero likelihood; evidence is -inf",
            extra={"stage": "evidence", "candidate": candidate.name},
        )
        return -np.inf
    return float(logsumexp(log_liks) - np.log(n_prior_samples))


def posterior_model_probabilities(
    log_evidences: Sequence[float], prior_model_probs: Optional[Sequence[float]] = None
) -> np.ndarray:
    """
    Posterior model probabilities pi_j proportional to evidence_j * prior_j.

    Raises:
        InputError: On mismatched lengths or an unnormalized model prior
        NoViableModelError: If every evidence is -inf
    """
    log_ev = np.asarray(log_evidences, dtype=float)
    if prior_model_probs is None:
        prior = np.full(log_ev.shape, 1.0 / len(log_ev))
    else:
        prior = np.asarray(prior_model_probs, dtype=float)
    if prior.shape != log_ev.shape or log_ev.size == 0:
        raise InputError("log-evidences and model priors must be non-empty and of equal length")
    if abs(prior.sum() - 1.0) > 1e-9 or np.any(prior < 0.0):
        raise InputError("model prior probabilities must be nonnegative and sum to 1")

    with np.errstate(divide="ignore"):
        weighted = log_ev + np.log(prior)
    if not np.any(np.isfinite(weighted)):
        raise NoViableModelError("no candidate model has positive evidence")
    probs = np.exp(weighted - np.max(weighted[np.isfinite(weighted)]))
    return probs / probs.sum()


# ---------------------------------------------------------------------------
# Metropolis-Hastings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class McmcConfig:
    """Settings of the adaptive random-walk Metropolis-Hastings sampler."""

    chain_length: int = 5000
    burn_in: int = 1000
    thinning: int = 5
    proposal_scale: Optional[Tuple[float, ...]] = None
    target_acceptance: float = 0.35
    seed: int = 0

    def __post_init__(self):
        if self.chain_length < 1 or self.burn_in < 0 or self.thinning < 1:
            raise InputError("chain_length and thinning must be positive, burn_in nonnegative")
        if self.burn_in >= self.chain_length:
            raise InputError("burn_in must be smaller than chain_length")
        if not 0.0 < self.target_acceptance < 1.0:
            raise InputError("target_acceptance must lie in (0, 1)")
        if self.proposal_scale is not None:
            scale = tuple(float(s) for s in self.proposal_scale)
            if any(s <= 0.0 for s in scale):
                raise InputError("proposal scales must be positive")
            object.__setattr__(self, "proposal_scale", scale)


@dataclass(frozen=True)
class McmcResult:
    """Post burn-in, thinned chain together with its diagnostics."""

    samples: np.ndarray
    log_posteriors: np.ndarray
    acceptance_rate: float
    burn_in_acceptance: float
    proposal_scale: np.ndarray


def mcmc_posterior(
    candidate: Candidate,
    prior: PriorSpec,
    data,
    cfg: McmcConfig,
    initial: Optional[np.ndarray] = None,
) -> McmcResult:
    """
    Sample p(theta | d, M) proportional to likelihood * prior.

    Proposals outside the prior support are rejected. During burn-in the global
    proposal scale follows a Robbins-Monro recursion toward ``target_acceptance``;
    it is frozen afterwards so the retained chain is a proper Markov chain.

    Raises:
        ConvergenceError: If no proposal is accepted after burn-in
    """
    rng = np.random.default_rng(cfg.seed)
    dim = prior.dimension
    n_keep = len(range(cfg.burn_in, cfg.chain_length, cfg.thinning))

    if dim == 0:
        log_post = candidate.log_likelihood(np.empty(0), data)
        return McmcResult(
            samples=np.empty((n_keep, 0)),
            log_posteriors=np.full(n_keep, log_post),
            acceptance_rate=1.0,
            burn_in_acceptance=1.0,
            proposal_scale=np.empty(0),
        )

    def log_target(theta):
        lp = prior.log_density(theta)
        if not np.isfinite(lp):
            return -np.inf
        return candidate.log_likelihood(theta, data) + lp

    current = initial if initial is not None else candidate.initial_point(data, prior)
    current = np.asarray(current, dtype=float)
    current_lp = log_target(current)
    attempts = 0
    while not np.isfinite(current_lp):
        attempts += 1
        if attempts > 1000:
            raise ConvergenceError(
                "could not find a starting point with finite posterior density",
                {"candidate": candidate.name},
            )
        current = prior.sample(1, rng)[0]
        current_lp = log_target(current)

    if cfg.proposal_scale is not None:
        base_scale = np.asarray(cfg.proposal_scale, dtype=float)
        if base_scale.shape != (dim,):
            raise InputError(f"proposal_scale needs {dim} entries for {candidate.name}")
    else:
        base_scale = 0.1 * prior.widths
    log_factor = 0.0

    samples = np.empty((n_keep, dim))
    log_posts = np.empty(n_keep)
    accepted_burn = accepted_main = 0
    kept = 0

    for step in range(cfg.chain_length):
        proposal = current + np.exp(log_factor) * base_scale * rng.standard_normal(dim)
        proposal_lp = log_target(proposal)
        log_u = np.log(rng.random())
        accept = np.isfinite(proposal_lp) and log_u < proposal_lp - current_lp
        if accept:
            current, current_lp = proposal, proposal_lp

        if step < cfg.burn_in:
            accepted_burn += int(accept)
            gain = 1.0 / (step + 1.0) ** 0.6
            log_factor += gain * (float(accept) - cfg.target_acceptance)
        else:
            accepted_main += int(accept)
            if (step - cfg.burn_in) % cfg.thinning == 0:
                samples[kept] = current
                log_posts[kept] = current_lp
                kept += 1

    n_main = cfg.chain_length - cfg.burn_in
    if accepted_main == 0:
        raise ConvergenceError(
            "no proposal accepted after burn-in",
            {"candidate": candidate.name, "iterations": n_main, "scale": float(np.exp(log_factor))},
        )

    result = McmcResult(
        samples=samples,
        log_posteriors=log_posts,
        acceptance_rate=accepted_main / n_main,
        burn_in_acceptance=accepted_burn / cfg.burn_in if cfg.burn_in else float("nan"),
        proposal_scale=np.exp(log_factor) * base_scale,
    )
    LOGGER.debug(
        "MCMC finished: acceptance %.3f, %d kept states",
        result.acceptance_rate,
        kept,
        extra={"stage": "mcmc", "candidate": candidate.name},
    )
    return result


def map_estimate(param_samples, log_posterior_values) -> np.ndarray:
    """
    Chain state with the largest log-posterior (first occurrence on ties).

    Under the uniform prior this is the in-chain maximum-likelihood estimate.
    """
    samples = np.asarray(param_samples, dtype=float)
    values = np.asarray(log_posterior_values, dtype=float)
    if len(samples) == 0:
        raise InputError("MAP estimate needs a nonempty chain")
    return samples[int(np.argmax(values))].copy()


# ---------------------------------------------------------------------------
# Multimodel composition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InferenceConfig:
    """Settings shared by marginal and copula multimodel inference."""

    n_prior_samples: int = 10_000
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    plausibility_threshold: float = 1e-3
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_prior_samples < 100:
            raise InputError("n_prior_samples must be >= 100")
        if not 0.0 <= self.plausibility_threshold < 1.0:
            raise InputError("plausibility_threshold must lie in [0, 1)")
        if self.n_jobs < 1:
            raise InputError("n_jobs must be >= 1")


@dataclass(frozen=True)
class ModelScore:
    """One row of the model-probability table."""

    name: str
    log_evidence: float
    prior_probability: float
    probability: float
    retained: bool


@dataclass(frozen=True)
class ModelPosterior:
    """
    Retained candidates with renormalized posterior model probabilities.

    ``scores`` keeps every evaluated candidate, dropped ones included, for reporting.
    """

    candidates: Tuple[Candidate, ...]
    model_probs: np.ndarray
    log_evidences: np.ndarray
    param_samples: Tuple[np.ndarray, ...]
    log_posteriors: Tuple[np.ndarray, ...]
    map_estimates: Tuple[np.ndarray, ...]
    acceptance_rates: Tuple[float, ...]
    scores: Tuple[ModelScore, ...] = ()

    def __post_init__(self):
        probs = np.asarray(self.model_probs, dtype=float)
        if len(self.candidates) == 0:
            raise NoViableModelError("a model posterior needs at least one retained candidate")
        if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs < 0.0):
            raise InputError("retained model probabilities must be nonnegative and sum to 1")
        if any(len(s) == 0 for s in self.param_samples):
            raise InputError("every retained model needs posterior samples")
        object.__setattr__(self, "model_probs", probs)

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.candidates]

    def spec(self, model_index: int, chain_index: int):
        """Concrete spec for one stored chain state."""
        return self.candidates[model_index].build(self.param_samples[model_index][chain_index])


def _seeds(seed: int, count: int) -> List[Tuple[int, int]]:
    children = np.random.SeedSequence(seed).spawn(count)
    out = []
    for child in children:
        a, b = child.generate_state(2)
        out.append((int(a), int(b)))
    return out


def infer_models(
    candidates: Sequence[Candidate],
    data,
    cfg: InferenceConfig,
    priors: Optional[Mapping[str, PriorSpec]] = None,
    prior_model_probs: Optional[Sequence[float]] = None,
    seed: int = 0,
) -> ModelPosterior:
    """
    Full multimodel inference: evidences, model probabilities, plausibility filter,
    then MCMC for every retained candidate.

    Args:
        candidates: Candidate model families
        data: Data passed to every candidate likelihood
        cfg: Evidence, MCMC and plausibility settings
        priors: Optional per-candidate prior overrides keyed by candidate name
        prior_model_probs: Prior model probabilities (uniform by default)
        seed: Root seed; each candidate receives independent child seeds

    Returns:
        ModelPosterior over the retained candidates
    """
    if not candidates:
        raise InputError("at least one candidate model is required")
    priors = dict(priors or {})
    resolved = [priors.get(c.name) or c.default_prior(data) for c in candidates]
    seeds = _seeds(seed, len(candidates))

    def evidence(j):
        return log_evidence(candidates[j], resolved[j], data, cfg.n_prior_samples, seeds[j][0])

    with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
        log_ev = np.array(list(pool.map(evidence, range(len(candidates)))))

    prior_probs = (
        np.full(len(candidates), 1.0 / len(candidates))
        if prior_model_probs is None
        else np.asarray(prior_model_probs, dtype=float)
    )
    probs = posterior_model_probabilities(log_ev, prior_probs)
    retained = [j for j, p in enumerate(probs) if p >= cfg.plausibility_threshold and p > 0.0]
    if not retained:
        raise NoViableModelError("no candidate passes the plausibility threshold")

    def chain(j):
        mcmc_cfg = McmcConfig(
            chain_length=cfg.mcmc.chain_length,
            burn_in=cfg.mcmc.burn_in,
            thinning=cfg.mcmc.thinning,
            proposal_scale=cfg.mcmc.proposal_scale,
            target_acceptance=cfg.mcmc.target_acceptance,
            seed=seeds[j][1],
        )
        return mcmc_posterior(candidates[j], resolved[j], data, mcmc_cfg)

    with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
        chains = list(pool.map(chain, retained))

    kept_probs = probs[retained] / probs[retained].sum()
    scores = tuple(
        ModelScore(
            name=c.name,
            log_evidence=float(log_ev[j]),
            prior_probability=float(prior_probs[j]),
            probability=float(probs[j]),
            retained=j in retained,
        )
        for j, c in enumerate(candidates)
    )
    LOGGER.info(
        "Model probabilities: %s",
        ", ".join(f"{s.name}={s.probability:.3f}" for s in scores),
        extra={"stage": "inference"},
    )
    return ModelPosterior(
        candidates=tuple(candidates[j] for j in retained),
        model_probs=kept_probs,
        log_evidences=log_ev[retained],
        param_samples=tuple(c.samples for c in chains),
        log_posteriors=tuple(c.log_posteriors for c in chains),
        map_estimates=tuple(map_estimate(c.samples, c.log_posteriors) for c in chains),
        acceptance_rates=tuple(c.acceptance_rate for c in chains),
        scores=scores,
    )

"""Parametric marginal families and pseudo-observation construction.

Parameterizations (fixed, also documented in the run-config schema):

- Gaussian:  (mean, std)                 std > 0, support R
- Gamma:     (shape k, scale lambda)     both > 0, support (0, inf)
- Lognormal: (log-mean, log-std)         log-std > 0, support (0, inf)
- Weibull:   (shape k, scale lambda)     both > 0, support (0, inf)
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special, stats

from .errors import DomainError, InputError

LOGGER = logging.getLogger(__name__)

EPS = 1e-12

SeedLike = Union[int, np.random.Generator, None]


class MarginalFamily(str, Enum):
    """Supported marginal distribution families."""

    GAUSSIAN = "Gaussian"
    GAMMA = "Gamma"
    LOGNORMAL = "Lognormal"
    WEIBULL = "Weibull"

    @property
    def arity(self) -> int:
        return 2

    @property
    def param_names(self) -> Tuple[str, str]:
        return _PARAM_NAMES[self]

    @property
    def positive_support(self) -> bool:
        return self is not MarginalFamily.GAUSSIAN


_PARAM_NAMES = {
    MarginalFamily.GAUSSIAN: ("mean", "std"),
    MarginalFamily.GAMMA: ("shape", "scale"),
    MarginalFamily.LOGNORMAL: ("log_mean", "log_std"),
    MarginalFamily.WEIBULL: ("shape", "scale"),
}


@dataclass(frozen=True)
class MarginalSpec:
    """A marginal family together with a concrete parameter 2-vector."""

    family: MarginalFamily
    params: Tuple[float, float]

    def __post_init__(self):
        family = MarginalFamily(self.family)
        params = tuple(float(p) for p in np.atleast_1d(np.asarray(self.params, dtype=float)))
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)
        if len(params) != 2:
            raise DomainError(f"{family.value} marginal expects 2 parameters, got {len(params)}")
        if not all(np.isfinite(params)):
            raise DomainError(f"{family.value} marginal parameters must be finite: {params}")
        if family is MarginalFamily.GAUSSIAN or family is MarginalFamily.LOGNORMAL:
            if params[1] <= 0.0:
                raise DomainError(f"{family.value} marginal requires a positive spread parameter")
        elif params[0] <= 0.0 or params[1] <= 0.0:
            raise DomainError(f"{family.value} marginal requires positive shape and scale")

    def __repr__(self) -> str:
        return f"MarginalSpec({self.family.value}, {list(self.params)})"

    def scipy_args(self):
        """``(distribution, shape_args, loc, scale)`` for unfrozen ``scipy.stats`` calls."""
        a, b = self.params
        if self.family is MarginalFamily.GAUSSIAN:
            return stats.norm, (), a, b
        if self.family is MarginalFamily.GAMMA:
            return stats.gamma, (a,), 0.0, b
        if self.family is MarginalFamily.LOGNORMAL:
            return stats.lognorm, (b,), 0.0, float(np.exp(a))
        return stats.weibull_min, (a,), 0.0, b

    def distribution(self):
        """Frozen ``scipy.stats`` distribution for this spec."""
        dist, shape, loc, scale = self.scipy_args()
        return dist(*shape, loc=loc, scale=scale)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family.value, "params": list(self.params)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MarginalSpec":
        return cls(MarginalFamily(data["family"]), tuple(data["params"]))


@dataclass(frozen=True)
class MomentInit:
    """Method-of-moments starting point; ``fallback`` marks the data-range heuristic."""

    spec: MarginalSpec
    fallback: bool = False


def support(spec: MarginalSpec) -> Tuple[float, float]:
    """Closed support interval of the marginal."""
    return (0.0, np.inf) if spec.family.positive_support else (-np.inf, np.inf)


def marginal_logpdf(spec: MarginalSpec, x) -> np.ndarray:
    """Log-density; -inf outside the support."""
    dist, shape, loc, scale = spec.scipy_args()
    return dist.logpdf(np.asarray(x, dtype=float), *shape, loc=loc, scale=scale)


def marginal_pdf(spec: MarginalSpec, x) -> np.ndarray:
    """Density; 0 outside the support."""
    dist, shape, loc, scale = spec.scipy_args()
    return dist.pdf(np.asarray(x, dtype=float), *shape, loc=loc, scale=scale)


def marginal_cdf(spec: MarginalSpec, x) -> np.ndarray:
    """CDF; 0 below the support."""
    dist, shape, loc, scale = spec.scipy_args()
    return dist.cdf(np.asarray(x, dtype=float), *shape, loc=loc, scale=scale)


def marginal_quantile(spec: MarginalSpec, p) -> np.ndarray:
    """
    Quantile function.

    Raises:
        DomainError: If any probability lies outside [0, 1]
    """
    p = np.asarray(p, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)) or np.any(np.isnan(p)):
        raise DomainError("quantile probabilities must lie in [0, 1]")
    dist, shape, loc, scale = spec.scipy_args()
    return dist.ppf(p, *shape, loc=loc, scale=scale)


def marginal_sample(spec: MarginalSpec, n: int, seed: SeedLike = None) -> np.ndarray:
    """Draw ``n`` values by inverse-CDF sampling from a seeded generator."""
    if n < 1:
        raise InputError(f"sample size must be >= 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return marginal_quantile(spec, np.clip(rng.random(n), EPS, 1.0 - EPS))


def marginal_log_likelihood(spec: MarginalSpec, data: Sequence[float]) -> float:
    """
    Sum of log-densities over the data.

    Returns:
        The log-likelihood, or ``-inf`` when any datum lies outside the support

    Raises:
        InputError: If the data is empty
    """
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise InputError("log-likelihood needs at least one datum")
    return float(np.sum(marginal_logpdf(spec, data)))


def pseudo_observations(spec_pair: Tuple[MarginalSpec, MarginalSpec], data) -> np.ndarray:
    """
    Map paired data onto the unit square through the marginal CDFs.

    Args:
        spec_pair: Marginal specs for the first and second column
        data: Array of shape (n, 2)

    Returns:
        Array of shape (n, 2) clamped to [1e-12, 1 - 1e-12]
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or len(data) == 0:
        raise InputError(f"pseudo-observations need a non-empty (n, 2) array, got {data.shape}")
    u = np.column_stack(
        [marginal_cdf(spec_pair[0], data[:, 0]), marginal_cdf(spec_pair[1], data[:, 1])]
    )
    return np.clip(u, EPS, 1.0 - EPS)


def _weibull_shape(cv: float) -> float:
    def excess(k):
        return np.exp(special.gammaln(1.0 + 2.0 / k) - 2.0 * special.gammaln(1.0 + 1.0 / k)) - 1.0

    target = cv * cv
    lo, hi = 0.05, 500.0
    if target >= excess(lo):
        return lo
    if target <= excess(hi):
        return hi
    return float(optimize.brentq(lambda k: excess(k) - target, lo, hi, xtol=1e-10))


def _heuristic_spread(values: np.ndarray) -> float:
    return float(max(np.ptp(values) / 4.0, 0.1 * abs(np.mean(values)), 1e-6))


def moment_init(family: MarginalFamily, data: Sequence[float]) -> MomentInit:
    """
    Method-of-moments parameters used to start MCMC chains and centre default priors.

    Infeasible moments (zero variance, nonpositive data for a positive-support family)
    fall back to a data-range heuristic and set ``fallback``.

    Raises:
        InputError: If fewer than two data are given
    """
    family = MarginalFamily(family)
    data = np.asarray(data, dtype=float)
    if data.size < 2:
        raise InputError("moment initialization needs at least two data")

    mean = float(np.mean(data))
    std = float(np.std(data, ddof=1))
    feasible = np.isfinite(std) and std > 0.0
    if family.positive_support:
        feasible = feasible and bool(np.all(data > 0.0))

    if family is MarginalFamily.GAUSSIAN:
        params = (mean, std) if feasible else (mean, _heuristic_spread(data))
    elif family is MarginalFamily.LOGNORMAL:
        if feasible:
            logs = np.log(data)
            log_std = float(np.std(logs, ddof=1))
            feasible = log_std > 0.0
            params = (float(np.mean(logs)), log_std) if feasible else (float(np.mean(logs)), 0.1)
        else:
            params = (float(np.log(max(abs(mean), 1e-6))), 0.1)
    else:
        positive_mean = max(abs(mean), 1e-6)
        cv = std / positive_mean if feasible else _heuristic_spread(data) / positive_mean
        if family is MarginalFamily.GAMMA:
            shape = 1.0 / (cv * cv)
            params = (shape, positive_mean / shape)
        else:
            shape = _weibull_shape(cv)
            params = (shape, positive_mean / float(np.exp(special.gammaln(1.0 + 1.0 / shape))))

    if not feasible:
        LOGGER.warning(
            "Moment initialization fell back to the data-range heuristic",
            extra={"stage": "moment_init", "family": family.value},
        )
    return MomentInit(MarginalSpec(family, params), fallback=not feasible)

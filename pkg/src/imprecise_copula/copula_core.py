"""Closed-form bivariate copula families and empirical dependence diagnostics.

Every family exposes its CDF, log-density, conditional h-function
h(u|v) = dC(u, v)/dv and its inverse, Kendall's tau and the inverse tau map.
All functions are vectorized over the unit-square coordinates; parameters are
carried by an immutable :class:`CopulaSpec`.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, NamedTuple, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import BoundaryError, DegenerateInputError, DomainError, InputError, NumericError
from .special import debye1, student_t_cdf, student_t_ppf

EPS = 1e-12
H_INVERSE_TOL = 1e-10
H_INVERSE_MAX_ITER = 200

SeedLike = Union[int, np.random.Generator, None]


class CopulaFamily(str, Enum):
    """Supported bivariate copula families."""

    INDEPENDENCE = "Independence"
    GAUSSIAN = "Gaussian"
    STUDENT_T = "StudentT"
    CLAYTON = "Clayton"
    FRANK = "Frank"
    GUMBEL = "Gumbel"

    @property
    def arity(self) -> int:
        return _ARITY[self]

    @property
    def param_names(self) -> Tuple[str, ...]:
        return _PARAM_NAMES[self]


_ARITY = {
    CopulaFamily.INDEPENDENCE: 0,
    CopulaFamily.GAUSSIAN: 1,
    CopulaFamily.STUDENT_T: 2,
    CopulaFamily.CLAYTON: 1,
    CopulaFamily.FRANK: 1,
    CopulaFamily.GUMBEL: 1,
}

_PARAM_NAMES = {
    CopulaFamily.INDEPENDENCE: (),
    CopulaFamily.GAUSSIAN: ("rho",),
    CopulaFamily.STUDENT_T: ("rho", "nu"),
    CopulaFamily.CLAYTON: ("theta",),
    CopulaFamily.FRANK: ("theta",),
    CopulaFamily.GUMBEL: ("theta",),
}


class UnitPair(NamedTuple):
    """A point of the unit square."""

    u1: float
    u2: float


@dataclass(frozen=True)
class CopulaSpec:
    """A copula family together with a concrete parameter vector."""

    family: CopulaFamily
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        family = CopulaFamily(self.family)
        params = tuple(float(p) for p in np.atleast_1d(np.asarray(self.params, dtype=float)))
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)
        _validate(family, params)

    def __repr__(self) -> str:
        return f"CopulaSpec({self.family.value}, {list(self.params)})"

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family.value, "params": list(self.params)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CopulaSpec":
        return cls(CopulaFamily(data["family"]), tuple(data.get("params", ())))


def _validate(family: CopulaFamily, params: Tuple[float, ...]):
    if len(params) != family.arity:
        raise DomainError(
            f"{family.value} copula expects {family.arity} parameter(s), got {len(params)}"
        )
    if not all(np.isfinite(params)):
        raise DomainError(f"{family.value} copula parameters must be finite: {params}")
    if family in (CopulaFamily.GAUSSIAN, CopulaFamily.STUDENT_T):
        if not -1.0 < params[0] < 1.0:
            raise DomainError(f"{family.value} copula requires rho in (-1, 1), got {params[0]}")
        if family is CopulaFamily.STUDENT_T and not params[1] > 2.0:
            raise DomainError(f"StudentT copula requires nu > 2, got {params[1]}")
    elif family is CopulaFamily.CLAYTON and not params[0] > 0.0:
        raise DomainError(f"Clayton copula requires theta > 0, got {params[0]}")
    elif family is CopulaFamily.FRANK and params[0] == 0.0:
        raise DomainError("Frank copula requires theta != 0")
    elif family is CopulaFamily.GUMBEL and not params[0] >= 1.0:
        raise DomainError(f"Gumbel copula requires theta >= 1, got {params[0]}")


def _clip(u) -> np.ndarray:
    return np.clip(np.asarray(u, dtype=float), EPS, 1.0 - EPS)


def _split_pairs(u) -> Tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(u, dtype=float)
    if arr.shape[-1:] != (2,):
        raise InputError(f"unit pairs must have a trailing dimension of 2, got shape {arr.shape}")
    return arr[..., 0], arr[..., 1]


# ---------------------------------------------------------------------------
# Family implementations
# ---------------------------------------------------------------------------


class _Independence:
    @staticmethod
    def cdf(params, u, v):
        return u * v

    @staticmethod
    def log_pdf(params, u, v):
        return np.zeros(np.broadcast(u, v).shape)

    @staticmethod
    def h(params, u, v):
        return np.broadcast_to(u, np.broadcast(u, v).shape).astype(float)

    @staticmethod
    def h_inverse(params, p, v):
        return np.broadcast_to(p, np.broadcast(p, v).shape).astype(float)

    @staticmethod
    def tau(params):
        return 0.0


def _owen_term(h, k, rho, s):
    # T(h, (k - rho h) / (h s)); at h = 0 the one-sided limit is sign(k) / 4
    safe = np.where(h == 0.0, 1.0, h)
    value = special.owens_t(h, (k - rho * h) / (safe * s))
    return np.where(h == 0.0, 0.25 * np.sign(k), value)


class _Gaussian:
    @staticmethod
    def cdf(params, u, v):
        # bivariate normal CDF through Owen's T function
        rho = params[0]
        h, k = special.ndtri(u), special.ndtri(v)
        s = np.sqrt(1.0 - rho * rho)
        beta = np.where((h * k > 0.0) | ((h * k == 0.0) & (h + k >= 0.0)), 0.0, 0.5)
        value = (
            0.5 * (special.ndtr(h) + special.ndtr(k))
            - _owen_term(h, k, rho, s)
            - _owen_term(k, h, rho, s)
            - beta
        )
        origin = 0.25 + np.arcsin(rho) / (2.0 * np.pi)
        return np.where((h == 0.0) & (k == 0.0), origin, value)

    @staticmethod
    def log_pdf(params, u, v):
        rho = params[0]
        x, y = special.ndtri(u), special.ndtri(v)
        one_minus = 1.0 - rho * rho
        return -0.5 * np.log(one_minus) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (
            2.0 * one_minus
        )

    @staticmethod
    def h(params, u, v):
        rho = params[0]
        x, y = special.ndtri(u), special.ndtri(v)
        return special.ndtr((x - rho * y) / np.sqrt(1.0 - rho * rho))

    @staticmethod
    def h_inverse(params, p, v):
        rho = params[0]
        y = special.ndtri(v)
        return special.ndtr(special.ndtri(p) * np.sqrt(1.0 - rho * rho) + rho * y)

    @staticmethod
    def tau(params):
        return 2.0 / np.pi * np.arcsin(params[0])

    @staticmethod
    def sample(params, n, rng):
        rho = params[0]
        z1 = rng.standard_normal(n)
        z2 = rho * z1 + np.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
        return special.ndtr(z1), special.ndtr(z2)


class _StudentT:
    @staticmethod
    def log_pdf(params, u, v):
        rho, nu = params
        x, y = student_t_ppf(u, nu), student_t_ppf(v, nu)
        one_minus = 1.0 - rho * rho
        quad = (x * x + y * y - 2.0 * rho * x * y) / (nu * one_minus)
        log_norm = (
            special.gammaln(0.5 * (nu + 2.0))
            + special.gammaln(0.5 * nu)
            - 2.0 * special.gammaln(0.5 * (nu + 1.0))
            - 0.5 * np.log(one_minus)
        )
        return (
            log_norm
            - 0.5 * (nu + 2.0) * np.log1p(quad)
            + 0.5 * (nu + 1.0) * (np.log1p(x * x / nu) + np.log1p(y * y / nu))
        )

    @staticmethod
    def h(params, u, v):
        rho, nu = params
        x, y = student_t_ppf(u, nu), student_t_ppf(v, nu)
        scale = np.sqrt((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0))
        return student_t_cdf((x - rho * y) / scale, nu + 1.0)

    @staticmethod
    def h_inverse(params, p, v):
        rho, nu = params
        y = student_t_ppf(v, nu)
        scale = np.sqrt((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0))
        return student_t_cdf(student_t_ppf(p, nu + 1.0) * scale + rho * y, nu)

    @staticmethod
    def tau(params):
        return 2.0 / np.pi * np.arcsin(params[0])

    @staticmethod
    def sample(params, n, rng):
        rho, nu = params
        z1 = rng.standard_normal(n)
        z2 = rho * z1 + np.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
        w = np.sqrt(rng.chisquare(nu, n) / nu)
        return student_t_cdf(z1 / w, nu), student_t_cdf(z2 / w, nu)


def _clayton_log_a(theta, u, v):
    # log(u^-theta + v^-theta - 1), stable for small and large exponents
    a = -theta * np.log(u)
    b = -theta * np.log(v)
    m = np.maximum(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        large = m + np.log(np.exp(a - m) + np.exp(b - m) - np.exp(-m))
        small = np.log1p(np.expm1(a) + np.expm1(b))
    return np.where(m > 1.0, large, small)


class _Clayton:
    @staticmethod
    def cdf(params, u, v):
        theta = params[0]
        return np.exp(-_clayton_log_a(theta, u, v) / theta)

    @staticmethod
    def log_pdf(params, u, v):
        theta = params[0]
        return (
            np.log1p(theta)
            - (1.0 + theta) * (np.log(u) + np.log(v))
            - (2.0 + 1.0 / theta) * _clayton_log_a(theta, u, v)
        )

    @staticmethod
    def h(params, u, v):
        theta = params[0]
        log_a = _clayton_log_a(theta, u, v)
        return np.exp(-(theta + 1.0) * np.log(v) - (1.0 + 1.0 / theta) * log_a)

    @staticmethod
    def h_inverse(params, p, v):
        theta = params[0]
        b = -theta * np.log(v)
        s = -theta / (1.0 + theta) * np.log(p) + b
        with np.errstate(over="ignore"):
            log_u = -np.log1p(np.exp(b) * np.expm1(s - b)) / theta
        return np.exp(log_u)

    @staticmethod
    def tau(params):
        theta = params[0]
        return theta / (theta + 2.0)


class _Frank:
    @staticmethod
    def cdf(params, u, v):
        theta = params[0]
        return -np.log1p(np.expm1(-theta * u) * np.expm1(-theta * v) / np.expm1(-theta)) / theta

    @staticmethod
    def log_pdf(params, u, v):
        theta = params[0]
        denom = -np.expm1(-theta) - np.expm1(-theta * u) * np.expm1(-theta * v)
        return np.log(theta * -np.expm1(-theta)) - theta * (u + v) - 2.0 * np.log(np.abs(denom))

    @staticmethod
    def h(params, u, v):
        theta = params[0]
        a = np.expm1(-theta * u)
        value = a * np.exp(-theta * v) / (np.expm1(-theta) + a * np.expm1(-theta * v))
        return np.clip(value, 0.0, 1.0)

    @staticmethod
    def h_inverse(params, p, v):
        theta = params[0]
        ev = np.exp(-theta * v)
        a = p * np.expm1(-theta) / (ev - p * (ev - 1.0))
        return np.clip(-np.log1p(a) / theta, 0.0, 1.0)

    @staticmethod
    def tau(params):
        theta = params[0]
        if abs(theta) < 1e-4:
            return theta / 9.0 - theta**3 / 900.0
        return 1.0 - 4.0 / theta + 4.0 * debye1(theta) / theta


class _Gumbel:
    @staticmethod
    def _parts(theta, u, v):
        x, y = -np.log(u), -np.log(v)
        log_a = np.logaddexp(theta * np.log(x), theta * np.log(y))
        return x, y, log_a, np.exp(log_a / theta)

    @staticmethod
    def cdf(params, u, v):
        _, _, _, w = _Gumbel._parts(params[0], u, v)
        return np.exp(-w)

    @staticmethod
    def log_pdf(params, u, v):
        theta = params[0]
        x, y, log_a, w = _Gumbel._parts(theta, u, v)
        return (
            -w
            + x
            + y
            + (theta - 1.0) * (np.log(x) + np.log(y))
            + (-2.0 + 2.0 / theta) * log_a
            + np.log1p((theta - 1.0) / w)
        )

    @staticmethod
    def h(params, u, v):
        theta = params[0]
        _, y, log_a, w = _Gumbel._parts(theta, u, v)
        log_h = -w + y + (theta - 1.0) * np.log(y) + (1.0 / theta - 1.0) * log_a
        return np.clip(np.exp(log_h), 0.0, 1.0)

    @staticmethod
    def h_inverse(params, p, v):
        return _safeguarded_newton(
            lambda u: _Gumbel.h(params, u, v),
            lambda u: np.exp(_Gumbel.log_pdf(params, u, v)),
            p,
        )

    @staticmethod
    def tau(params):
        return 1.0 - 1.0 / params[0]


_FAMILIES = {
    CopulaFamily.INDEPENDENCE: _Independence,
    CopulaFamily.GAUSSIAN: _Gaussian,
    CopulaFamily.STUDENT_T: _StudentT,
    CopulaFamily.CLAYTON: _Clayton,
    CopulaFamily.FRANK: _Frank,
    CopulaFamily.GUMBEL: _Gumbel,
}


def _safeguarded_newton(h, dh, p) -> np.ndarray:
    """Solve h(u) = p for u in (0, 1) with Newton steps kept inside a bisection bracket."""
    p = np.asarray(p, dtype=float)
    lo = np.full(p.shape, EPS)
    hi = np.full(p.shape, 1.0 - EPS)
    u = np.clip(p, EPS, 1.0 - EPS)
    done = np.zeros(p.shape, dtype=bool)

    for iteration in range(H_INVERSE_MAX_ITER):
        resid = h(u) - p
        done = (np.abs(resid) < H_INVERSE_TOL) | (hi - lo < 1e-15)
        if np.all(done):
            return u
        hi = np.where(resid > 0.0, u, hi)
        lo = np.where(resid < 0.0, u, lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            candidate = u - resid / dh(u)
        outside = ~np.isfinite(candidate) | (candidate <= lo) | (candidate >= hi)
        candidate = np.where(outside, 0.5 * (lo + hi), candidate)
        u = np.where(done, u, candidate)

    resid = np.abs(h(u) - p)
    raise NumericError(
        "h-function inversion did not converge",
        {
            "iterations": H_INVERSE_MAX_ITER,
            "unconverged": int(np.sum(~done)),
            "max_residual": float(np.max(resid)),
        },
    )


def _h_integral_cdf(family: CopulaFamily, params, u, v) -> np.ndarray:
    # C(u, v) = int_0^v h(u | t) dt for families without an elementary CDF
    impl = _FAMILIES[family]

    def one(ui, vi):
        value, _ = integrate.quad(
            lambda t: float(impl.h(params, ui, np.clip(t, EPS, 1.0 - EPS))),
            0.0,
            vi,
            epsabs=1e-13,
            epsrel=1e-11,
            limit=200,
        )
        return value

    return np.vectorize(one, otypes=[float])(u, v)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def copula_cdf(spec: CopulaSpec, u) -> np.ndarray:
    """
    Evaluate the copula CDF C(u1, u2).

    Args:
        spec: Copula family and parameters
        u: Unit pair(s) with a trailing dimension of 2

    Returns:
        C(u1, u2), bounded by the Frechet limits
    """
    u1, u2 = _split_pairs(u)
    if np.any((u1 < 0) | (u1 > 1) | (u2 < 0) | (u2 > 1)):
        raise DomainError("copula_cdf requires points in the unit square")

    interior = (u1 > 0) & (u1 < 1) & (u2 > 0) & (u2 < 1)
    a, b = _clip(u1), _clip(u2)
    impl = _FAMILIES[spec.family]
    if hasattr(impl, "cdf"):
        value = impl.cdf(spec.params, a, b)
    else:
        value = _h_integral_cdf(spec.family, spec.params, a, b)

    lower = np.maximum(u1 + u2 - 1.0, 0.0)
    upper = np.minimum(u1, u2)
    value = np.clip(value, lower, upper)
    # exact margins: C(u, 0) = 0, C(u, 1) = u
    boundary = np.where((u1 == 0) | (u2 == 0), 0.0, np.where(u1 == 1, u2, u1))
    return np.where(interior, value, boundary)


def copula_log_pdf(spec: CopulaSpec, u, clamp: bool = False) -> np.ndarray:
    """
    Log copula density log c(u1, u2).

    Args:
        spec: Copula family and parameters
        u: Unit pair(s) strictly inside the unit square
        clamp: Clamp coordinates to [1e-12, 1 - 1e-12] instead of rejecting boundary points

    Returns:
        Log-density values
    """
    u1, u2 = _split_pairs(u)
    if not clamp and np.any((u1 <= 0) | (u1 >= 1) | (u2 <= 0) | (u2 >= 1)):
        raise BoundaryError("copula density is only defined on the open unit square")
    return _FAMILIES[spec.family].log_pdf(spec.params, _clip(u1), _clip(u2))


def copula_log_likelihood(spec: CopulaSpec, u) -> float:
    """Sum of copula log-densities over pseudo-observations."""
    return float(np.sum(copula_log_pdf(spec, u, clamp=True)))


def h_function(spec: CopulaSpec, u, v) -> np.ndarray:
    """
    Conditional CDF h(u | v) = dC(u, v)/dv.

    All supported families are exchangeable, so conditioning on the first argument
    is ``h_function(spec, v, u)``.
    """
    return _FAMILIES[spec.family].h(spec.params, _clip(u), _clip(v))


def h_inverse(spec: CopulaSpec, p, v) -> np.ndarray:
    """
    Inverse of :func:`h_function` in its first argument.

    Closed form for every family except Gumbel, which uses safeguarded Newton
    iterations (bisection fallback, 200-iteration cap, tolerance 1e-10).

    Raises:
        NumericError: If the numeric inversion does not converge
    """
    return _FAMILIES[spec.family].h_inverse(spec.params, _clip(p), _clip(v))


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def copula_sample(spec: CopulaSpec, n: int, rng_seed: SeedLike = None) -> np.ndarray:
    """
    Draw ``n`` pairs from the copula.

    Elliptical families are sampled directly and mapped through their marginal CDF;
    Archimedean families use the conditional method u1 = h^-1(p | u2).

    Args:
        spec: Copula family and parameters
        n: Number of pairs
        rng_seed: Integer seed or an existing generator

    Returns:
        Array of shape (n, 2) inside the open unit square
    """
    if n < 1:
        raise InputError(f"sample size must be >= 1, got {n}")
    rng = _rng(rng_seed)
    impl = _FAMILIES[spec.family]
    if hasattr(impl, "sample"):
        u1, u2 = impl.sample(spec.params, n, rng)
    else:
        draws = rng.random((n, 2))
        u2 = draws[:, 0]
        u1 = impl.h_inverse(spec.params, _clip(draws[:, 1]), _clip(u2))
    return np.column_stack([_clip(u1), _clip(u2)])


def kendall_tau(spec: CopulaSpec) -> float:
    """Closed-form Kendall's tau of the copula."""
    return float(_FAMILIES[spec.family].tau(spec.params))


def tail_dependence(spec: CopulaSpec) -> Tuple[float, float]:
    """
    Lower and upper tail dependence coefficients.

    Returns:
        Tuple ``(lambda_lower, lambda_upper)``
    """
    family, params = spec.family, spec.params
    if family is CopulaFamily.STUDENT_T:
        rho, nu = params
        value = 2.0 * float(
            student_t_cdf(-np.sqrt(nu + 1.0) * np.sqrt((1.0 - rho) / (1.0 + rho)), nu + 1.0)
        )
        return value, value
    if family is CopulaFamily.CLAYTON:
        return 2.0 ** (-1.0 / params[0]), 0.0
    if family is CopulaFamily.GUMBEL:
        return 0.0, 2.0 - 2.0 ** (1.0 / params[0])
    return 0.0, 0.0


def _frank_theta(tau: float) -> float:
    target = abs(tau)
    hi = 1.0
    while _Frank.tau((hi,)) < target:
        hi *= 2.0
        if hi > 1e7:
            raise DomainError(f"Frank copula cannot attain tau={tau}")
    theta = optimize.brentq(
        lambda t: _Frank.tau((t,)) - target, 1e-10, hi, xtol=1e-14, rtol=8.9e-16, maxiter=500
    )
    return float(np.copysign(theta, tau))


def tau_to_param(family: CopulaFamily, tau: float, nu: float = 4.0) -> Tuple[float, ...]:
    """
    Parameter vector with the requested Kendall's tau.

    Args:
        family: Copula family
        tau: Target Kendall's tau
        nu: Degrees of freedom for the StudentT family (tau does not identify it)

    Returns:
        Parameter tuple for :class:`CopulaSpec`

    Raises:
        DomainError: If tau is not attainable by the family
    """
    family = CopulaFamily(family)
    if not -1.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (-1, 1), got {tau}")
    if family is CopulaFamily.INDEPENDENCE:
        if tau != 0.0:
            raise DomainError("Independence copula only attains tau = 0")
        return ()
    if family in (CopulaFamily.GAUSSIAN, CopulaFamily.STUDENT_T):
        rho = float(np.sin(0.5 * np.pi * tau))
        return (rho,) if family is CopulaFamily.GAUSSIAN else (rho, float(nu))
    if family is CopulaFamily.CLAYTON:
        if tau <= 0.0:
            raise DomainError(f"Clayton copula (theta > 0) requires tau > 0, got {tau}")
        return (2.0 * tau / (1.0 - tau),)
    if family is CopulaFamily.GUMBEL:
        if tau < 0.0:
            raise DomainError(f"Gumbel copula requires tau >= 0, got {tau}")
        return (1.0 / (1.0 - tau),)
    if tau == 0.0:
        raise DomainError("Frank copula cannot attain tau = 0 (theta = 0 is excluded)")
    return (_frank_theta(tau),)


def _as_pairs(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InputError(f"expected a sequence of pairs, got shape {arr.shape}")
    return arr


def _brute_force_tau(x: np.ndarray, y: np.ndarray, chunk: int = 2048) -> float:
    n = len(x)
    total = 0.0
    for start in range(0, n, chunk):
        xs, ys = x[start : start + chunk, None], y[start : start + chunk, None]
        total += float(np.sum(np.sign(xs - x[None, :]) * np.sign(ys - y[None, :])))
    # every unordered pair was counted twice
    return total / (n * (n - 1))


def empirical_kendall_tau(data: Sequence[Sequence[float]]) -> float:
    """
    Sample Kendall's tau: (concordant - discordant) / C(n, 2).

    Without ties this equals scipy's tau-b, which is computed in O(n log n);
    tied samples fall back to the exact pair count.

    Raises:
        InputError: If fewer than two pairs are given
    """
    arr = _as_pairs(data)
    if len(arr) < 2:
        raise InputError("Kendall's tau needs at least two pairs")
    x, y = arr[:, 0], arr[:, 1]
    if len(np.unique(x)) == len(x) and len(np.unique(y)) == len(y):
        return float(stats.kendalltau(x, y)[0])
    return _brute_force_tau(x, y)


def empirical_pearson_rho(data: Sequence[Sequence[float]]) -> float:
    """
    Sample Pearson correlation coefficient.

    Raises:
        InputError: If fewer than two pairs are given
        DegenerateInputError: If either column has zero variance
    """
    arr = _as_pairs(data)
    if len(arr) < 2:
        raise InputError("Pearson's rho needs at least two pairs")
    centered = arr - arr.mean(axis=0)
    sx, sy = np.sqrt(np.sum(centered**2, axis=0))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInputError("Pearson's rho is undefined for a zero-variance column")
    return float(np.clip(np.sum(centered[:, 0] * centered[:, 1]) / (sx * sy), -1.0, 1.0))


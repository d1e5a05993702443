"""
C-vine and D-vine pair-copula constructions with a fixed structure.

Edge ordering follows the natural variable order:

- C-vine: tree t (0-based) is a star rooted at variable t; edge i couples the root
  with variable t + 1 + i, conditioned on variables 0..t-1.
- D-vine: tree t is a path; edge e couples variables e and e + t + 1, conditioned
  on the variables strictly between them.

Every supported pair-copula family is exchangeable, so h(a | b) = h_function(C, a, b)
regardless of which side of the edge a sits on.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .copula_core import EPS, CopulaFamily, CopulaSpec, copula_log_pdf, h_function, h_inverse
from .errors import InputError
from .marginal_core import MarginalSpec, marginal_cdf, marginal_logpdf, marginal_quantile


class VineKind(str, Enum):
    CVINE = "CVine"
    DVINE = "DVine"


@dataclass(frozen=True)
class VineSpec:
    """
    Vine structure with its pair-copulas and marginals.

    ``pair_copulas[t][i]`` is edge i of tree t; tree t has d - 1 - t edges.
    """

    kind: VineKind
    pair_copulas: Tuple[Tuple[CopulaSpec, ...], ...]
    marginals: Tuple[MarginalSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", VineKind(self.kind))
        object.__setattr__(self, "pair_copulas", tuple(tuple(t) for t in self.pair_copulas))
        object.__setattr__(self, "marginals", tuple(self.marginals))
        d = len(self.marginals)
        if d < 2:
            raise InputError(f"a vine needs dimension >= 2, got {d}")
        if len(self.pair_copulas) != d - 1:
            raise InputError(
                f"a {d}-dimensional vine has {d - 1} trees, got {len(self.pair_copulas)}"
            )
        for t, tree in enumerate(self.pair_copulas):
            if len(tree) != d - 1 - t:
                raise InputError(f"tree {t} needs {d - 1 - t} pair-copulas, got {len(tree)}")

    @property
    def dimension(self) -> int:
        return len(self.marginals)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "dimension": self.dimension,
            "pair_copulas": [[c.to_dict() for c in tree] for tree in self.pair_copulas],
            "marginals": [m.to_dict() for m in self.marginals],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "VineSpec":
        spec = cls(
            kind=VineKind(data["kind"]),
            pair_copulas=tuple(
                tuple(CopulaSpec.from_dict(c) for c in tree) for tree in data["pair_copulas"]
            ),
            marginals=tuple(MarginalSpec.from_dict(m) for m in data["marginals"]),
        )
        if spec.dimension != data.get("dimension", spec.dimension):
            raise InputError("vine dimension does not match its marginal list")
        return spec


def _as_points(spec: VineSpec, x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != spec.dimension:
        raise InputError(f"points need {spec.dimension} coordinates, got shape {x.shape}")
    return x, single


def _pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.column_stack([a, b])


def _cvine_log_copulas(spec: VineSpec, u: List[np.ndarray]) -> np.ndarray:
    d = spec.dimension
    w = list(u)
    total = np.zeros(len(u[0]))
    for t in range(d - 1):
        root = w[t]
        updated = list(w)
        for i, copula in enumerate(spec.pair_copulas[t]):
            m = t + 1 + i
            total += copula_log_pdf(copula, _pair(root, w[m]), clamp=True)
            if t < d - 2:
                updated[m] = h_function(copula, w[m], root)
        w = updated
    return total


def _dvine_log_copulas(spec: VineSpec, u: List[np.ndarray]) -> np.ndarray:
    d = spec.dimension
    first = [u[e] for e in range(d - 1)]
    second = [u[e + 1] for e in range(d - 1)]
    total = np.zeros(len(u[0]))
    for t in range(d - 1):
        tree = spec.pair_copulas[t]
        for e, copula in enumerate(tree):
            total += copula_log_pdf(copula, _pair(first[e], second[e]), clamp=True)
        if t == d - 2:
            break
        first, second = (
            [h_function(tree[e], first[e], second[e]) for e in range(len(tree) - 1)],
            [h_function(tree[e + 1], second[e + 1], first[e + 1]) for e in range(len(tree) - 1)],
        )
    return total


def vine_log_pdf(spec: VineSpec, x) -> np.ndarray:
    """
    Log joint density of a vine: marginal log-densities plus pair-copula log-densities.

    Conditional CDF arguments come from recursive h-functions, each computed once per
    evaluation.

    Args:
        spec: Vine structure, pair-copulas and marginals
        x: Point of shape (d,) or points of shape (n, d)

    Returns:
        Log-densities, ``-inf`` outside the marginal supports
    """
    x, single = _as_points(spec, x)
    log_f = sum(marginal_logpdf(m, x[:, j]) for j, m in enumerate(spec.marginals))
    out = np.full(len(x), -np.inf)
    inside = np.isfinite(log_f)
    if np.any(inside):
        u = [
            np.clip(marginal_cdf(m, x[inside, j]), EPS, 1.0 - EPS)
            for j, m in enumerate(spec.marginals)
        ]
        if spec.kind is VineKind.CVINE:
            log_c = _cvine_log_copulas(spec, u)
        else:
            log_c = _dvine_log_copulas(spec, u)
        out[inside] = log_f[inside] + log_c
    return out[0] if single else out


def _cvine_uniforms(spec: VineSpec, p: np.ndarray) -> np.ndarray:
    d = spec.dimension
    # w[t][m]: conditional CDF of variable m given variables 0..t-1
    w: Dict[Tuple[int, int], np.ndarray] = {(0, 0): p[:, 0]}
    u = np.empty_like(p)
    u[:, 0] = p[:, 0]
    for i in range(1, d):
        value = p[:, i]
        w[(i, i)] = value
        for t in range(i - 1, -1, -1):
            value = h_inverse(spec.pair_copulas[t][i - t - 1], value, w[(t, t)])
            w[(t, i)] = value
        u[:, i] = value
    return u


def _dvine_uniforms(spec: VineSpec, p: np.ndarray) -> np.ndarray:
    d = spec.dimension
    pcs = spec.pair_copulas
    # first[(t, e)] = F(x_e | x_{e+1..e+t}); second[(t, e)] = F(x_{e+t+1} | x_{e+1..e+t})
    first: Dict[Tuple[int, int], np.ndarray] = {}
    second: Dict[Tuple[int, int], np.ndarray] = {}
    u = np.empty_like(p)
    u[:, 0] = p[:, 0]
    for i in range(1, d):
        first[(0, i - 1)] = u[:, i - 1]
        for t in range(1, i):
            e = i - t - 1
            first[(t, e)] = h_function(pcs[t - 1][e], first[(t - 1, e)], second[(t - 1, e)])
        value = p[:, i]
        for t in range(i - 1, -1, -1):
            e = i - t - 1
            value = h_inverse(pcs[t][e], value, first[(t, e)])
            second[(t, e)] = value
        u[:, i] = value
    return u


def vine_sample(spec: VineSpec, n: int, seed=None) -> np.ndarray:
    """
    Sequential conditional sampling through inverse h-functions.

    Args:
        spec: Vine to sample
        n: Number of points
        seed: Integer seed or an existing generator

    Returns:
        Array of shape (n, d)
    """
    if n < 1:
        raise InputError(f"sample size must be >= 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = np.clip(rng.random((n, spec.dimension)), EPS, 1.0 - EPS)
    if spec.kind is VineKind.CVINE:
        u = _cvine_uniforms(spec, p)
    else:
        u = _dvine_uniforms(spec, p)
    u = np.clip(u, EPS, 1.0 - EPS)
    return np.column_stack([marginal_quantile(m, u[:, j]) for j, m in enumerate(spec.marginals)])


def independence_vine(kind: VineKind, marginals: Sequence[MarginalSpec]) -> VineSpec:
    """Vine whose pair-copulas are all the independence copula."""
    d = len(marginals)
    trees = tuple(
        tuple(CopulaSpec(CopulaFamily.INDEPENDENCE, ()) for _ in range(d - 1 - t))
        for t in range(d - 1)
    )
    return VineSpec(kind, trees, tuple(marginals))

"""
Performance functions g(x) evaluated on propagated samples.

The transverse-modulus surrogate is the Halpin-Tsai estimate with reinforcing
factor xi = 2. Constituent inputs use GPa for moduli.
"""

import logging
import subprocess
import threading
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, InputError, StageError

LOGGER = logging.getLogger(__name__)

HALPIN_TSAI_XI = 2.0

# E-glass fiber / polyester resin constituents
CONSTITUENT_MEANS: Dict[str, float] = {
    "V_f": 0.6,
    "E_m": 3.375,
    "nu_m": 0.35,
    "E_1f": 73.01,
    "nu_12f": 0.228,
}
CONSTITUENT_COV = 0.05
CONSTITUENT_ORDER = ("E_m", "nu_m", "E_1f", "nu_12f", "V_f")


@dataclass(frozen=True)
class ConstituentInputs:
    """Fiber and matrix properties of one composite realization."""

    v_f: float
    e_m: float
    nu_m: float
    e_1f: float
    nu_12f: float

    def __post_init__(self):
        if not 0.0 < self.v_f < 1.0:
            raise DomainError(f"fiber volume fraction must lie in (0, 1), got {self.v_f}")
        if self.e_m <= 0.0 or self.e_1f <= 0.0:
            raise DomainError("moduli must be positive")
        for name, nu in (("nu_m", self.nu_m), ("nu_12f", self.nu_12f)):
            if not 0.0 < nu < 0.5:
                raise DomainError(f"{name} must lie in (0, 0.5), got {nu}")

    @classmethod
    def means(cls) -> "ConstituentInputs":
        m = CONSTITUENT_MEANS
        return cls(m["V_f"], m["E_m"], m["nu_m"], m["E_1f"], m["nu_12f"])


def halpin_tsai_e22(
    v_f,
    e_m,
    e_1f,
    xi: float = HALPIN_TSAI_XI,
    nu_m=None,
    nu_12f=None,
) -> np.ndarray:
    """
    Vectorized Halpin-Tsai transverse modulus.

    eta = (E_1f/E_m - 1) / (E_1f/E_m + xi);  E_22 = E_m (1 + xi eta V_f) / (1 - eta V_f)

    When both Poisson ratios are given, the result is divided by (1 - nu^2) with the
    rule-of-mixtures ratio nu = V_f nu_12f + (1 - V_f) nu_m.

    Raises:
        DomainError: If eta V_f >= 1 anywhere
    """
    v_f = np.asarray(v_f, dtype=float)
    e_m = np.asarray(e_m, dtype=float)
    ratio = np.asarray(e_1f, dtype=float) / e_m
    eta = (ratio - 1.0) / (ratio + xi)
    denominator = 1.0 - eta * v_f
    if np.any(denominator <= 0.0):
        raise DomainError("Halpin-Tsai estimate is singular: eta * V_f >= 1")
    e22 = e_m * (1.0 + xi * eta * v_f) / denominator
    if nu_m is not None and nu_12f is not None:
        nu = v_f * np.asarray(nu_12f, dtype=float) + (1.0 - v_f) * np.asarray(nu_m, dtype=float)
        e22 = e22 / (1.0 - nu * nu)
    return e22


def transverse_modulus_surrogate(
    inputs: ConstituentInputs, xi: float = HALPIN_TSAI_XI, poisson_correction: bool = False
) -> float:
    """Transverse Young's modulus E_22 (GPa) of one constituent realization."""
    if poisson_correction:
        value = halpin_tsai_e22(
            inputs.v_f, inputs.e_m, inputs.e_1f, xi, inputs.nu_m, inputs.nu_12f
        )
    else:
        value = halpin_tsai_e22(inputs.v_f, inputs.e_m, inputs.e_1f, xi)
    return float(value)


def halpin_tsai_gradient(
    inputs: ConstituentInputs, xi: float = HALPIN_TSAI_XI
) -> Dict[str, float]:
    """Analytic partial derivatives of the uncorrected E_22 surrogate."""
    v, em, ef = inputs.v_f, inputs.e_m, inputs.e_1f
    r = ef / em
    eta = (r - 1.0) / (r + xi)
    denominator = (1.0 - eta * v) ** 2
    d_eta = em * v * (1.0 + xi) / denominator
    d_ratio = (1.0 + xi) / (r + xi) ** 2
    return {
        "v_f": em * eta * (1.0 + xi) / denominator,
        "e_m": (1.0 + xi * eta * v) / (1.0 - eta * v) - d_eta * d_ratio * ef / em**2,
        "e_1f": d_eta * d_ratio / em,
        "nu_m": 0.0,
        "nu_12f": 0.0,
    }


def test_function_linear(x, a: float = 1.0, b: float = 1.0) -> np.ndarray:
    """a x1 + b x2; mean a mu1 + b mu2 under any input law with those means."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return a * x[:, 0] + b * x[:, 1]


def test_function_quadratic(x) -> np.ndarray:
    """x1^2 + x2^2; mean 2 under a standard bivariate normal of any correlation."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return x[:, 0] ** 2 + x[:, 1] ** 2


# not pytest tests
test_function_linear.__test__ = False
test_function_quadratic.__test__ = False


@dataclass(frozen=True)
class PerformanceFunction:
    """
    A named vectorized g over an (n, d) array.

    ``inputs`` names the columns g consumes, in order; ``None`` consumes all columns
    in the order given.
    """

    name: str
    function: Callable[[np.ndarray], np.ndarray]
    inputs: Optional[Tuple[str, ...]] = None

    def bind(self, columns: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
        """Callable over arrays whose columns are named ``columns``."""
        if self.inputs is None:
            return self.function
        missing = [c for c in self.inputs if c not in columns]
        if missing:
            raise InputError(f"performance function {self.name} needs columns {missing}")
        index = [list(columns).index(c) for c in self.inputs]

        def bound(x):
            return self.function(np.asarray(x, dtype=float)[:, index])

        return bound

    def __call__(self, x) -> np.ndarray:
        return self.function(np.asarray(x, dtype=float))


def _e22_factory(xi: float = HALPIN_TSAI_XI, poisson_correction: bool = False):
    def e22(x):
        e_m, nu_m, e_1f, nu_12f, v_f = (x[:, j] for j in range(5))
        if poisson_correction:
            return halpin_tsai_e22(v_f, e_m, e_1f, xi, nu_m, nu_12f)
        return halpin_tsai_e22(v_f, e_m, e_1f, xi)

    return PerformanceFunction("e22_halpin_tsai", e22, CONSTITUENT_ORDER)


def _linear_factory(a: float = 1.0, b: float = 1.0, inputs: Optional[Sequence[str]] = None):
    return PerformanceFunction(
        "linear",
        lambda x: test_function_linear(x, a, b),
        tuple(inputs) if inputs else None,
    )


def _quadratic_factory(inputs: Optional[Sequence[str]] = None):
    return PerformanceFunction(
        "quadratic", test_function_quadratic, tuple(inputs) if inputs else None
    )


PERFORMANCE_FUNCTIONS: Dict[str, Callable[..., PerformanceFunction]] = {
    "e22_halpin_tsai": _e22_factory,
    "linear": _linear_factory,
    "quadratic": _quadratic_factory,
}


def get_performance_function(name: str, **params) -> PerformanceFunction:
    """
    Look up a performance function by name.

    Raises:
        InputError: For an unknown name or unsupported parameters
    """
    try:
        factory = PERFORMANCE_FUNCTIONS[name]
    except KeyError:
        raise InputError(
            f"unknown performance function {name!r}; choose from {sorted(PERFORMANCE_FUNCTIONS)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as e:
        raise InputError(f"bad parameters for performance function {name!r}: {e}") from e


class CountingFunction:
    """Wraps a vectorized g and counts evaluated points and calls (thread-safe)."""

    def __init__(self, function: Callable[[np.ndarray], np.ndarray]):
        self.function = function
        self.evaluations = 0
        self.calls = 0
        self._lock = threading.Lock()

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        with self._lock:
            self.calls += 1
            self.evaluations += len(x)
        return self.function(x)

    def reset(self):
        with self._lock:
            self.calls = 0
            self.evaluations = 0


class SubprocessModel:
    """
    External performance model driven through a subprocess per sample.

    Protocol: one CSV row of inputs on stdin, one real number on stdout.
    """

    def __init__(self, command: Sequence[str], timeout: Optional[float] = 600.0):
        if not command:
            raise InputError("the external model command must not be empty")
        self.command = list(command)
        self.timeout = timeout

    def evaluate_row(self, row: Sequence[float]) -> float:
        line = ",".join(repr(float(v)) for v in row) + "\n"
        try:
            result = subprocess.run(
                self.command,
                input=line,
                capture_output=True,
                text=True,
                check=True,
                timeout=self.timeout,
            )
        except subprocess.CalledProcessError as e:
            raise StageError(
                "performance",
                f"external model exited with status {e.returncode}",
                {"command": self.command, "stderr": (e.stderr or "").strip()},
            ) from e
        except (FileNotFoundError, subprocess.TimeoutExpired) as e:
            raise StageError("performance", f"external model failed: {e}") from e

        try:
            return float(result.stdout.strip().splitlines()[-1])
        except (ValueError, IndexError) as e:
            raise StageError(
                "performance",
                "external model did not print a number",
                {"stdout": result.stdout.strip()},
            ) from e

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        LOGGER.info(
            "Evaluating %d samples with %s", len(x), self.command[0], extra={"stage": "performance"}
        )
        return np.array([self.evaluate_row(row) for row in x])

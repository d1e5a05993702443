"""
Run configuration.

A run is described by one JSON document whose layout mirrors the dataclasses below.
Unknown keys are rejected at every level; CLI flags override file values through
dotted keys (``{"ensemble.n_td": 200}``).

Marginal parameterizations used by prior overrides:

    Gaussian   [mean, std]
    Gamma      [shape, scale]
    Lognormal  [log_mean, log_std]
    Weibull    [shape, scale]
"""

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union, get_type_hints

from .bayes_inference import (
    CopulaCandidate,
    InferenceConfig,
    MarginalCandidate,
    McmcConfig,
    PriorSpec,
)
from .copula_core import CopulaFamily
from .errors import DomainError, InputError
from .hierarchy import DEPENDENCE_MODES
from .marginal_core import MarginalFamily

__all__ = [
    "BlockConfig",
    "DependenceConfig",
    "EnsembleConfig",
    "InferenceConfig",
    "McmcConfig",
    "PerformanceConfig",
    "PriorConfig",
    "PropagationConfig",
    "RunConfig",
    "TruthConfig",
    "load_run_config",
]

DEFAULT_COPULA_FAMILIES = ("Gaussian", "StudentT", "Clayton", "Gumbel", "Frank")
DEFAULT_MARGINAL_FAMILIES = ("Gaussian", "Gamma", "Lognormal", "Weibull")


@dataclass(frozen=True)
class BlockConfig:
    """Declared dependence structure: dependent pairs and independent variables."""

    pairs: Tuple[Tuple[str, str], ...] = (("x1", "x2"),)
    singles: Tuple[str, ...] = ()

    def __post_init__(self):
        pairs = tuple(tuple(p) for p in self.pairs)
        if any(len(p) != 2 for p in pairs):
            raise InputError(f"every dependent block must name exactly two variables: {pairs}")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "singles", tuple(self.singles))
        if not pairs and not self.singles:
            raise InputError("the block structure names no variables")

    @property
    def variables(self) -> List[str]:
        return [v for p in self.pairs for v in p] + list(self.singles)


@dataclass(frozen=True)
class PriorConfig:
    """Prior overrides; anything not listed uses the default noninformative boxes."""

    marginal: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    copula: Mapping[str, Any] = field(default_factory=dict)
    prior_width: float = 3.0
    prior_factor: float = 3.0

    def __post_init__(self):
        if self.prior_width <= 0.0 or self.prior_factor <= 1.0:
            raise InputError("prior_width must be > 0 and prior_factor > 1")

    def marginal_priors(self, variable: str) -> Dict[str, PriorSpec]:
        return {
            family: _prior_spec(value, f"priors.marginal.{variable}.{family}")
            for family, value in self.marginal.get(variable, {}).items()
        }

    def copula_priors(self) -> Dict[str, PriorSpec]:
        return {
            family: _prior_spec(value, f"priors.copula.{family}")
            for family, value in self.copula.items()
        }


def _prior_spec(value: Any, path: str) -> PriorSpec:
    try:
        if isinstance(value, Mapping):
            return PriorSpec.from_dict(value)
        return PriorSpec(tuple(tuple(b) for b in value))
    except (DomainError, TypeError, KeyError, ValueError) as e:
        raise InputError(f"{path}: invalid prior {value!r}: {e}") from e


@dataclass(frozen=True)
class EnsembleConfig:
    """Sizes and draw scheme of the hierarchical ensemble."""

    n_td: int = 1000
    n_tc: int = 500
    sampling: str = "random"
    model_selection: str = "posterior"

    def __post_init__(self):
        if self.n_td < 1 or self.n_tc < 1:
            raise InputError("n_td and n_tc must be positive")
        if self.sampling not in ("random", "lhs"):
            raise InputError(f"ensemble.sampling must be 'random' or 'lhs', got {self.sampling!r}")
        if self.model_selection not in ("posterior", "uniform"):
            raise InputError("ensemble.model_selection must be 'posterior' or 'uniform'")


@dataclass(frozen=True)
class DependenceConfig:
    """How dependence inside each pair block is treated."""

    mode: str = "copula"
    rho: float = 0.8

    def __post_init__(self):
        if self.mode not in DEPENDENCE_MODES:
            raise InputError(
                f"dependence.mode must be one of {DEPENDENCE_MODES}, got {self.mode!r}"
            )
        if not -1.0 < self.rho < 1.0:
            raise InputError("dependence.rho must lie in (-1, 1)")


@dataclass(frozen=True)
class PropagationConfig:
    """Sampling from q*, CDF band layout and the optional lookup table."""

    n_samples: int = 5000
    weighting: str = "uniform"
    band_level: str = "pair"
    grid_points: int = 50
    normalized: bool = True
    lookup_grid: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InputError("propagation.n_samples must be positive")
        if self.grid_points < 2:
            raise InputError("propagation.grid_points must be at least 2")
        if self.weighting not in ("uniform", "posterior"):
            raise InputError("propagation.weighting must be 'uniform' or 'posterior'")
        if self.band_level not in ("joint", "pair"):
            raise InputError("propagation.band_level must be 'joint' or 'pair'")
        if self.lookup_grid < 0 or self.lookup_grid == 1:
            raise InputError("propagation.lookup_grid must be 0 (off) or at least 2")


@dataclass(frozen=True)
class PerformanceConfig:
    """A named performance function or an external command."""

    name: str = "linear"
    params: Mapping[str, Any] = field(default_factory=dict)
    command: Optional[Tuple[str, ...]] = None
    timeout: float = 600.0

    def __post_init__(self):
        if self.command is not None:
            object.__setattr__(self, "command", tuple(self.command))
            if not self.command:
                raise InputError("performance.command must not be empty")


@dataclass(frozen=True)
class TruthConfig:
    """Synthetic data generator used when no data file is given."""

    preset: str = "frank_demo"
    n: int = 1000
    seed: int = 0
    theta: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise InputError("truth.n must be positive")


@dataclass(frozen=True)
class RunConfig:
    """
    Complete description of one pipeline run.

    ``data_path`` points to a CSV with one column per variable; when it is absent the
    ``truth`` generator supplies the data.
    """

    data_path: Optional[str] = None
    output_dir: str = "runs/default"
    seed: int = 0
    blocks: BlockConfig = field(default_factory=BlockConfig)
    marginal_families: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)
    copula_families: Tuple[str, ...] = DEFAULT_COPULA_FAMILIES
    priors: PriorConfig = field(default_factory=PriorConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    dependence: DependenceConfig = field(default_factory=DependenceConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    performance: PerformanceConfig = field(default_factory=PerformanceConfig)
    truth: Optional[TruthConfig] = None

    def __post_init__(self):
        families = {
            v: tuple(self.marginal_families.get(v, DEFAULT_MARGINAL_FAMILIES))
            for v in self.blocks.variables
        }
        unknown = sorted(set(self.marginal_families) - set(families))
        if unknown:
            raise InputError(f"marginal_families names variables outside the blocks: {unknown}")
        object.__setattr__(self, "marginal_families", families)
        object.__setattr__(self, "copula_families", tuple(self.copula_families))
        try:
            for names in families.values():
                for name in names:
                    MarginalFamily(name)
            for name in self.copula_families:
                CopulaFamily(name)
        except ValueError as e:
            raise InputError(f"unknown model family: {e}") from e
        if any(not names for names in families.values()) or not self.copula_families:
            raise InputError("every variable and every pair needs at least one candidate family")

    @property
    def variables(self) -> List[str]:
        return self.blocks.variables

    def marginal_candidates(self) -> Dict[str, List[MarginalCandidate]]:
        return {
            v: [
                MarginalCandidate(
                    MarginalFamily(n), self.priors.prior_width, self.priors.prior_factor
                )
                for n in names
            ]
            for v, names in self.marginal_families.items()
        }

    def copula_candidates(self) -> List[CopulaCandidate]:
        return [CopulaCandidate(CopulaFamily(n)) for n in self.copula_families]

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable(dataclasses.asdict(self))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _build(cls, data: Any, path: str):
    """Instantiate a config dataclass from parsed JSON, rejecting unknown keys."""
    if not isinstance(data, Mapping):
        raise InputError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = ", ".join(f"{path}.{k}" if path else k for k in unknown)
        raise InputError(f"unknown configuration key(s): {where}")

    hints = get_type_hints(cls)
    kwargs = {}
    for key, value in data.items():
        hint = hints[key]
        nested = _dataclass_type(hint)
        child = f"{path}.{key}" if path else key
        if nested is not None and value is not None:
            kwargs[key] = _build(nested, value, child)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise InputError(f"{path or 'config'}: {e}") from e


def _dataclass_type(hint) -> Optional[type]:
    if dataclasses.is_dataclass(hint):
        return hint
    for arg in getattr(hint, "__args__", ()):
        if dataclasses.is_dataclass(arg):
            return arg
    return None


def _apply_overrides(raw: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(raw)
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = merged
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise InputError(f"cannot override {dotted}: {key} is not an object")
        node[leaf] = copy.deepcopy(value)
    return merged


def load_run_config(
    path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """
    Read a run configuration, applying dotted-key overrides on top of the file.

    Args:
        path: JSON file (``None`` starts from defaults)
        overrides: Values keyed by dotted path; ``None`` values are ignored

    Raises:
        InputError: On unreadable JSON, unknown keys or invalid values
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read run config {path}: {e}") from e
    raw = _apply_overrides(raw, overrides or {})
    return _build(RunConfig, raw, "")


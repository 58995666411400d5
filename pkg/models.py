"""Scenario configuration: JSON files parsed into frozen dataclasses.

Every level rejects unknown keys. Defaults live on the dataclasses, so the
normalized dump is simply `asdict` of the parsed scenario.
"""
import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union, get_args, get_origin, get_type_hints

from coefficient import BRANCH_KINDS
from errors import ConfigurationError
from manufactured import SOLUTIONS
from motion import MotionFamily


logger = logging.getLogger(__name__)

DATA_KINDS = ('zero', 'constant', 'sine')
BOUNDARIES = ('dirichlet', 'neumann')


def _require(ok: bool, message: str, key: str) -> None:
    if not ok:
        raise ConfigurationError(message, key=key)


@dataclass(frozen=True)
class MotionSpec:
    # 'identity' or 'separable_flow'
    family: str = 'identity'
    amplitude: float = 0.0
    frequency: float = 0.0
    gamma0: float = 0.5
    horizon: float = 1.0

    def __post_init__(self) -> None:
        _require(self.family in {f.value for f in MotionFamily}, f"unknown motion family '{self.family}'", 'family')
        _require(0.0 < self.gamma0 < 1.0, f"gamma0 must lie in (0, 1), got {self.gamma0}", 'gamma0')
        _require(self.horizon > 0.0, f"horizon must be positive, got {self.horizon}", 'horizon')


@dataclass(frozen=True)
class BranchSpec:
    # zero | constant | linear_in_t | product
    kind: str = 'constant'
    value: float = 1.0
    slope: float = 0.0
    x_slope: float = 0.0

    def __post_init__(self) -> None:
        _require(self.kind in BRANCH_KINDS, f"unknown branch function '{self.kind}'", 'kind')


@dataclass(frozen=True)
class CoefficientSpec:
    branch1: BranchSpec = field(default_factory=BranchSpec)
    branch2: BranchSpec = field(default_factory=BranchSpec)
    alpha0: float = 1.0

    def __post_init__(self) -> None:
        _require(self.alpha0 > 0.0, f"alpha0 must be positive, got {self.alpha0}", 'alpha0')


@dataclass(frozen=True)
class OperatorSpec:
    boundary: str = 'dirichlet'
    diffusion1: BranchSpec = field(default_factory=BranchSpec)
    diffusion2: BranchSpec = field(default_factory=BranchSpec)
    advection: float = 0.0
    reaction: float = 0.0
    # None means certified from the operator data
    c_A: Optional[float] = None
    C_A: Optional[float] = None
    lambda0: Optional[float] = None

    def __post_init__(self) -> None:
        _require(self.boundary in BOUNDARIES, f"unknown boundary choice '{self.boundary}'", 'boundary')
        if self.c_A is not None:
            _require(self.c_A > 0.0, f"c_A must be positive, got {self.c_A}", 'c_A')
        if self.c_A is not None and self.C_A is not None:
            _require(self.C_A >= self.c_A, f"C_A={self.C_A} below c_A={self.c_A}", 'C_A')


@dataclass(frozen=True)
class DataSpec:
    # manufactured solution name; when set, source/initial are ignored
    solution: Optional[str] = None
    source: str = 'zero'
    source_value: float = 0.0
    initial: str = 'zero'
    initial_value: float = 0.0

    def __post_init__(self) -> None:
        if self.solution is not None:
            _require(self.solution in SOLUTIONS, f"unknown manufactured solution '{self.solution}'", 'solution')
        _require(self.source in DATA_KINDS, f"unknown data kind '{self.source}'", 'source')
        _require(self.initial in DATA_KINDS, f"unknown data kind '{self.initial}'", 'initial')


@dataclass(frozen=True)
class DiscretizationSpec:
    n_x: int = 16
    n_t: int = 16
    q_x: int = 4
    q_t: int = 3
    # (n_x, n_t) per study level, refining by 2
    levels: List[List[int]] = field(default_factory=lambda: [[4, 4], [8, 8], [16, 16], [32, 32]])

    def __post_init__(self) -> None:
        _require(self.n_x >= 2, f"n_x must be >= 2, got {self.n_x}", 'n_x')
        _require(self.n_t >= 1, f"n_t must be >= 1, got {self.n_t}", 'n_t')
        _require(self.q_x >= 2, f"q_x must be >= 2, got {self.q_x}", 'q_x')
        _require(self.q_t >= 2, f"q_t must be >= 2, got {self.q_t}", 'q_t')
        _require(len(self.levels) >= 1, "levels must not be empty", 'levels')
        for i, level in enumerate(self.levels):
            _require(len(level) == 2 and level[0] >= 2 and level[1] >= 1,
                     f"level must be [n_x >= 2, n_t >= 1], got {level}", f"levels[{i}]")


@dataclass(frozen=True)
class StudySpec:
    jobs: int = 1
    tol_scale: float = 1.0
    lambda0: List[float] = field(default_factory=lambda: [-1.0, 1.0])
    eps: List[float] = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    # catalog field names; empty means all ten
    fields: List[str] = field(default_factory=list)
    n_pairs: int = 20
    max_ratio: float = 4.0
    h_ref: float = 1.0 / 512
    time_panels: int = 32
    dump_system: bool = False

    def __post_init__(self) -> None:
        _require(self.jobs >= 1, f"jobs must be >= 1, got {self.jobs}", 'jobs')
        _require(self.tol_scale > 0.0, f"tol_scale must be positive, got {self.tol_scale}", 'tol_scale')
        _require(all(e > 0.0 for e in self.eps), "eps values must be positive", 'eps')
        _require(self.n_pairs >= 1, f"n_pairs must be >= 1, got {self.n_pairs}", 'n_pairs')
        _require(self.max_ratio >= 1.0, f"max_ratio must be >= 1, got {self.max_ratio}", 'max_ratio')
        _require(self.h_ref > 0.0, f"h_ref must be positive, got {self.h_ref}", 'h_ref')
        _require(self.time_panels >= 1, f"time_panels must be >= 1, got {self.time_panels}", 'time_panels')


@dataclass(frozen=True)
class OutputSpec:
    directory: str = 'out'


@dataclass(frozen=True)
class Scenario:
    motion: MotionSpec
    coefficient: CoefficientSpec
    operator: OperatorSpec = field(default_factory=OperatorSpec)
    data: DataSpec = field(default_factory=DataSpec)
    discretization: DiscretizationSpec = field(default_factory=DiscretizationSpec)
    study: StudySpec = field(default_factory=StudySpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    seed: int = 0
    # taken from the file name, not part of the configuration
    name: str = field(default='', compare=False)

    def __post_init__(self) -> None:
        _require(0 <= self.seed < 2 ** 64, f"seed must be an unsigned 64-bit integer, got {self.seed}", 'seed')


# -- parsing -------------------------------------------------------------------------

def _type_error(key: str, expected: str, value: Any) -> ConfigurationError:
    return ConfigurationError(f"expected {expected}, got {type(value).__name__} {value!r}", key=key)


def _convert(value: Any, hint: Any, key: str) -> Any:
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, key)
    origin = get_origin(hint)
    if origin is Union:
        inner = [a for a in get_args(hint) if a is not type(None)][0]
        return None if value is None else _convert(value, inner, key)
    if origin in (list, List):
        if not isinstance(value, list):
            raise _type_error(key, 'a list', value)
        (inner,) = get_args(hint)
        return [_convert(v, inner, f"{key}[{i}]") for i, v in enumerate(value)]
    if hint is bool:
        if not isinstance(value, bool):
            raise _type_error(key, 'a boolean', value)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise _type_error(key, 'an integer', value)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _type_error(key, 'a number', value)
        if not math.isfinite(value):
            raise ConfigurationError(f"value must be finite, got {value!r}", key=key)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise _type_error(key, 'a string', value)
        return value
    raise TypeError(f"unsupported config type {hint!r}")


def _build(cls, payload: Any, prefix: str):
    if not isinstance(payload, dict):
        raise _type_error(prefix or 'config', 'an object', payload)
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.compare}
    for key in payload:
        if key not in names:
            raise ConfigurationError(f"unknown key '{key}'", key=f"{prefix}.{key}" if prefix else key)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if not f.compare:
            continue
        key = f"{prefix}.{f.name}" if prefix else f.name
        if f.name not in payload:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise ConfigurationError(f"missing required key '{f.name}'", key=key)
            continue
        kwargs[f.name] = _convert(payload[f.name], hints[f.name], key)
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        if not (prefix and exc.key):
            raise
        raise ConfigurationError(exc.reason, key=f"{prefix}.{exc.key}") from None


def scenario_from_dict(payload: Dict[str, Any], name: str = '') -> Scenario:
    scenario = _build(Scenario, payload, '')
    return dataclasses.replace(scenario, name=name)


def parse_config(path: str) -> Scenario:
    """Read and validate a JSON scenario file."""
    try:
        with open(path, encoding='utf-8') as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    name = os.path.splitext(os.path.basename(path))[0]
    scenario = scenario_from_dict(payload, name=name)
    logger.debug("[CONFIG] parsed %s", path)
    return scenario


def normalize_config(scenario: Scenario) -> Dict[str, Any]:
    out = dataclasses.asdict(scenario)
    out.pop('name', None)
    return out


def dump_config(scenario: Scenario, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(normalize_config(scenario), fh, indent=2, sort_keys=True)
        fh.write('\n')
    return path


def with_overrides(scenario: Scenario, out: Optional[str] = None, seed: Optional[int] = None,
                   jobs: Optional[int] = None, tol_scale: Optional[float] = None) -> Scenario:
    """Apply command-line flags on top of the file values."""
    if out is not None:
        scenario = dataclasses.replace(scenario, output=OutputSpec(directory=out))
    if seed is not None:
        scenario = dataclasses.replace(scenario, seed=seed)
    if jobs is not None or tol_scale is not None:
        study = scenario.study
        scenario = dataclasses.replace(scenario, study=dataclasses.replace(
            study, jobs=study.jobs if jobs is None else jobs,
            tol_scale=study.tol_scale if tol_scale is None else tol_scale))
    return scenario

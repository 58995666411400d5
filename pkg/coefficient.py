"""Two-branch coefficients given in Lagrangian form.

A branch is a function beta(x0, t) of the initial position; the Eulerian
branch is alpha_i(x, t) = beta_i(Phi^{-1}(x, t), t), so it is C1 up to the
moving interface by construction.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from errors import ConfigurationError, DomainViolationError, InterfaceTraceError
from motion import MotionMap


logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

TRACE_TOL = 1e-14
SAMPLES = 200
INFLATION = 1.01

BRANCH_KINDS = ('zero', 'constant', 'linear_in_t', 'product')


def _out(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def certified_max(samples: np.ndarray) -> float:
    """max|samples|, inflated by 1% unless the samples are constant."""
    samples = np.asarray(samples, dtype=float)
    peak = float(np.max(np.abs(samples))) if samples.size else 0.0
    if samples.size == 0 or np.ptp(samples) == 0.0:
        return peak
    return peak * INFLATION


@dataclass(frozen=True)
class BranchFunction:
    """Catalog branch beta(x0, t).

    zero:         0
    constant:     value
    linear_in_t:  value + slope*t
    product:      value * (1 + slope*t) * (1 + x_slope*x0)
    """
    kind: str = 'constant'
    value: float = 1.0
    slope: float = 0.0
    x_slope: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in BRANCH_KINDS:
            raise ConfigurationError(f"unknown branch function '{self.kind}'", key='kind')

    @property
    def is_zero(self) -> bool:
        return self.kind == 'zero'

    @property
    def is_constant(self) -> bool:
        return self.kind in ('zero', 'constant')

    def lagrangian(self, x0: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        shape = np.broadcast(x0, t).shape
        zeros = np.zeros(shape)
        if self.kind == 'zero':
            return zeros, zeros.copy(), zeros.copy()
        if self.kind == 'constant':
            return np.full(shape, self.value), zeros, zeros.copy()
        if self.kind == 'linear_in_t':
            return self.value + self.slope * t + zeros, np.full(shape, self.slope), zeros
        time_part = 1.0 + self.slope * t
        space_part = 1.0 + self.x_slope * x0
        return (self.value * time_part * space_part + zeros,
                self.value * self.slope * space_part + zeros,
                self.value * self.x_slope * time_part + zeros)


@dataclass(frozen=True)
class PiecewiseField:
    """Scalar field with one smooth Lagrangian branch per subdomain."""
    motion: MotionMap
    branch1: BranchFunction
    branch2: BranchFunction

    def branch(self, side: int) -> BranchFunction:
        return self.branch1 if side == 1 else self.branch2

    def side_of(self, x: ArrayLike, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        gamma = float(self.motion.interface_position(t))
        if np.any(np.abs(x - gamma) <= TRACE_TOL):
            raise InterfaceTraceError(f"coefficient is multivalued on the interface x={gamma!r} at t={t!r}")
        return np.where(x < gamma, 1, 2)

    def evaluate_side(self, x: ArrayLike, t: float, side: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(value, dt_value, dx_value) of the branch selected by `side` (no interface check)."""
        shape = np.shape(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        side = np.broadcast_to(np.atleast_1d(np.asarray(side)), x.shape)
        if self.motion.is_static:
            x0 = x
            phi_x = np.ones_like(x)
            v = np.zeros_like(x)
        else:
            x0 = np.asarray(self.motion.inverse_map(x, t))
            phi_x = np.asarray(self.motion.forward_map_dx(x0, t))
            v = np.asarray(self.motion.velocity(x, t))
        value = np.zeros_like(x)
        dt_value = np.zeros_like(x)
        dx_value = np.zeros_like(x)
        for s in (1, 2):
            mask = side == s
            if not np.any(mask):
                continue
            beta, beta_t, beta_x0 = self.branch(s).lagrangian(x0[mask], t)
            dx = beta_x0 / phi_x[mask]
            value[mask] = beta
            dx_value[mask] = dx
            dt_value[mask] = beta_t - dx * v[mask]
        return value.reshape(shape), dt_value.reshape(shape), dx_value.reshape(shape)

    def evaluate(self, x: ArrayLike, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.evaluate_side(x, t, self.side_of(x, t))

    def max_abs(self) -> float:
        """Certified max over both branch closures of |value|, |dt|, |dx|."""
        peaks = []
        for side in (1, 2):
            values = self.closure_samples(side)
            peaks.extend(certified_max(q) for q in values)
        return max(peaks)

    def closure_samples(self, side: int, samples: int = SAMPLES) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo, hi = (0.0, self.motion.gamma0) if side == 1 else (self.motion.gamma0, 1.0)
        x0 = np.linspace(lo, hi, samples)
        times = np.linspace(0.0, self.motion.horizon, samples)
        out = [], [], []
        for t in times:
            x = np.asarray(self.motion.forward_map(x0, t))
            for acc, q in zip(out, self.evaluate_side(x, float(t), side)):
                acc.append(q)
        return tuple(np.concatenate(acc) for acc in out)


@dataclass(frozen=True)
class BranchSample:
    value: ArrayLike
    dt_value: ArrayLike
    dx_value: ArrayLike
    side: ArrayLike


@dataclass(frozen=True)
class GlobalConstants:
    C_alpha: float
    C_v: float
    alpha0: float


@dataclass(frozen=True)
class PiecewiseCoefficient(PiecewiseField):
    alpha0: float = 1.0

    def __post_init__(self) -> None:
        if self.branch1.is_zero and self.branch2.is_zero:
            raise ConfigurationError("coefficient vanishes on both subdomains", key='coefficient')
        if not self.alpha0 > 0.0:
            raise ConfigurationError(f"alpha0 must be positive, got {self.alpha0}", key='alpha0')

    @property
    def branch1_active(self) -> bool:
        return not self.branch1.is_zero

    @property
    def branch2_active(self) -> bool:
        return not self.branch2.is_zero

    def is_active(self, side: int) -> bool:
        return self.branch1_active if side == 1 else self.branch2_active

    @property
    def is_degenerate(self) -> bool:
        return not (self.branch1_active and self.branch2_active)

    @property
    def is_piecewise_constant(self) -> bool:
        return self.branch1.is_constant and self.branch2.is_constant

    def active_mask(self, side: np.ndarray) -> np.ndarray:
        side = np.asarray(side)
        return ((side == 1) & self.branch1_active) | ((side == 2) & self.branch2_active)

    def evaluate_branch(self, x: ArrayLike, t: float) -> BranchSample:
        if np.any(np.asarray(x) < 0.0) or np.any(np.asarray(x) > 1.0):
            raise DomainViolationError(f"position outside [0, 1]: {x}")
        side = self.side_of(x, t)
        value, dt_value, dx_value = self.evaluate_side(x, t, side)
        return BranchSample(_out(value), _out(dt_value), _out(dx_value),
                            int(side) if np.ndim(side) == 0 else side)

    def support_contains(self, x: ArrayLike, t: float) -> Union[bool, np.ndarray]:
        inside = self.active_mask(self.side_of(x, t))
        return bool(inside) if np.ndim(inside) == 0 else inside

    def global_constants(self, motion: Optional[MotionMap] = None) -> GlobalConstants:
        motion = motion or self.motion
        peaks = []
        for side in (1, 2):
            value, dt_value, dx_value = self.closure_samples(side)
            if self.is_active(side) and np.min(value) < self.alpha0 * (1.0 - 1e-12):
                raise ConfigurationError(
                    f"coefficient drops to {np.min(value):.6g} below alpha0={self.alpha0} on branch {side}",
                    key='alpha0')
            peaks.extend(certified_max(q) for q in (value, dt_value, dx_value))
        c_alpha = max(peaks)
        c_v = velocity_bound(motion)
        logger.debug("[COEFF] constants C_alpha=%.6g C_v=%.6g alpha0=%.6g", c_alpha, c_v, self.alpha0)
        return GlobalConstants(C_alpha=c_alpha, C_v=c_v, alpha0=self.alpha0)


def velocity_bound(motion: MotionMap, samples: int = SAMPLES) -> float:
    """Certified C1 bound of the velocity sampled on a space-time grid."""
    x = np.linspace(0.0, 1.0, samples)
    times = np.linspace(0.0, motion.horizon, samples)
    xx, tt = np.meshgrid(x, times)
    return max(certified_max(motion.velocity(xx, tt)),
               certified_max(motion.velocity_dx(xx, tt)),
               certified_max(motion.velocity_dt(xx, tt)))

"""Interface kinematics on the fixed domain (0, 1).

The separable flow is the exact flow of v(x, t) = a*w*cos(w t)*sin(pi x):

    Phi(x0, t) = (2/pi) * arctan(tan(pi x0 / 2) * exp(pi G(t))),  G(t) = a sin(w t)

written with atan2 so the endpoints stay exact.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from errors import DomainViolationError, NumericalFailureError
from quadrature_utils import composite_rule


logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SPACE_TOL = 1e-14
TIME_TOL = 1e-12


class MotionFamily(str, Enum):
    IDENTITY = 'identity'
    SEPARABLE_FLOW = 'separable_flow'


def _out(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class MotionMap:
    family: MotionFamily = MotionFamily.IDENTITY
    amplitude: float = 0.0
    frequency: float = 0.0
    gamma0: float = 0.5
    horizon: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, 'family', MotionFamily(self.family))
        if not 0.0 < self.gamma0 < 1.0:
            raise DomainViolationError(f"initial interface must lie in (0, 1), got {self.gamma0}")
        if not self.horizon > 0.0:
            raise DomainViolationError(f"horizon must be positive, got {self.horizon}")

    @property
    def is_static(self) -> bool:
        return self.family is MotionFamily.IDENTITY or self.amplitude == 0.0

    # -- argument checks -------------------------------------------------

    def _space(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x < -SPACE_TOL) or np.any(x > 1.0 + SPACE_TOL):
            raise DomainViolationError(f"position outside [0, 1]: {x}")
        return np.clip(x, 0.0, 1.0)

    def _time(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < -TIME_TOL) or np.any(t > self.horizon + TIME_TOL):
            raise DomainViolationError(f"time outside [0, {self.horizon}]: {t}")
        return t

    # -- separable flow ingredients ---------------------------------------

    def _g(self, t: np.ndarray) -> np.ndarray:
        return self.amplitude * np.sin(self.frequency * t)

    def _flow(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        half = 0.5 * np.pi * x
        return (2.0 / np.pi) * np.arctan2(np.sin(half) * np.exp(np.pi * g), np.cos(half))

    # -- public operations -------------------------------------------------

    def forward_map(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        x = self._space(x)
        t = self._time(t)
        if self.family is MotionFamily.IDENTITY:
            return _out(np.broadcast_to(x, np.broadcast(x, t).shape).copy())
        return _out(self._flow(x, self._g(t)))

    def inverse_map(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        x = self._space(x)
        t = self._time(t)
        if self.family is MotionFamily.IDENTITY:
            return _out(np.broadcast_to(x, np.broadcast(x, t).shape).copy())
        return _out(self._flow(x, -self._g(t)))

    def forward_map_dx(self, x0: ArrayLike, t: ArrayLike) -> ArrayLike:
        """d Phi / d x0, strictly positive."""
        x0 = self._space(x0)
        t = self._time(t)
        if self.family is MotionFamily.IDENTITY:
            return _out(np.ones(np.broadcast(x0, t).shape))
        e = np.exp(np.pi * self._g(t))
        half = 0.5 * np.pi * x0
        return _out(e / (np.cos(half) ** 2 + (np.sin(half) * e) ** 2))

    def velocity(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        x = self._space(x)
        t = self._time(t)
        if self.family is MotionFamily.IDENTITY:
            return _out(np.zeros(np.broadcast(x, t).shape))
        a, w = self.amplitude, self.frequency
        return _out(a * w * np.cos(w * t) * np.sin(np.pi * x))

    def velocity_dx(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        x = self._space(x)
        t = self._time(t)
        if self.family is MotionFamily.IDENTITY:
            return _out(np.zeros(np.broadcast(x, t).shape))
        a, w = self.amplitude, self.frequency
        return _out(a * w * np.pi * np.cos(w * t) * np.cos(np.pi * x))

    def velocity_dt(self, x: ArrayLike, t: ArrayLike) -> ArrayLike:
        x = self._space(x)
        t = self._time(t)
        if self.family is MotionFamily.IDENTITY:
            return _out(np.zeros(np.broadcast(x, t).shape))
        a, w = self.amplitude, self.frequency
        return _out(-a * w * w * np.sin(w * t) * np.sin(np.pi * x))

    def interface_position(self, t: ArrayLike) -> ArrayLike:
        return self.forward_map(self.gamma0, t)

    def newton_inverse(self, x: ArrayLike, t: ArrayLike, tol: float = 1e-13, max_iter: int = 50) -> ArrayLike:
        """Invert x0 -> Phi(x0, t) by Newton's method (fallback for motions without a closed form)."""
        x = self._space(x)
        t = self._time(t)
        x0 = np.array(np.broadcast_to(x, np.broadcast(x, t).shape), dtype=float)
        for it in range(max_iter):
            defect = np.asarray(self.forward_map(x0, t)) - x
            if np.max(np.abs(defect), initial=0.0) <= tol:
                return _out(x0)
            x0 = np.clip(x0 - defect / np.asarray(self.forward_map_dx(x0, t)), 0.0, 1.0)
        defect = np.asarray(self.forward_map(x0, t)) - x
        if np.max(np.abs(defect), initial=0.0) <= tol:
            return _out(x0)
        raise NumericalFailureError(f"Newton inverse did not converge in {max_iter} iterations "
                                    f"(defect {np.max(np.abs(defect)):.3e})")

    def velocity_defect(self, x: ArrayLike, t: float, h: float) -> ArrayLike:
        """|v - (Phi(X, t+h) - Phi(X, t-h)) / 2h| with X = Phi^{-1}(x, t)."""
        x0 = self.inverse_map(x, t)
        fd = (np.asarray(self.forward_map(x0, t + h)) - np.asarray(self.forward_map(x0, t - h))) / (2.0 * h)
        return _out(np.abs(np.asarray(self.velocity(x, t)) - fd))

    def reynolds_residual(self, f, t: float, dt: float, order: int = 10, panels: int = 8) -> float:
        """Central-difference check of the transport identity on the split domain.

        `f` provides vectorised value, dt_value and dx_value callables (x, t).
        """
        if dt <= 0.0:
            raise DomainViolationError(f"step must be positive, got {dt}")
        if t - dt < -TIME_TOL or t + dt > self.horizon + TIME_TOL:
            raise DomainViolationError(f"step too large: [{t - dt}, {t + dt}] leaves [0, {self.horizon}]")

        def split_integral(integrand, time: float) -> float:
            gamma = float(self.interface_position(time))
            total = 0.0
            for a, b in ((0.0, gamma), (gamma, 1.0)):
                xq, wq = composite_rule(a, b, panels, order)
                total += float(np.dot(wq, integrand(xq, time)))
            return total

        mass_rate = (split_integral(f.value, t + dt) - split_integral(f.value, t - dt)) / (2.0 * dt)

        def transport(xq: np.ndarray, time: float) -> np.ndarray:
            v = np.asarray(self.velocity(xq, time))
            v_x = np.asarray(self.velocity_dx(xq, time))
            return f.dt_value(xq, time) + f.dx_value(xq, time) * v + f.value(xq, time) * v_x

        residual = abs(mass_rate - split_integral(transport, t))
        logger.debug("[MOTION] reynolds residual t=%.6g dt=%.3g -> %.3e", t, dt, residual)
        return residual

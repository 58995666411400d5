"""Manufactured solutions and their classical source data.

Every function takes (x, t, side) so branch formulas are never sampled on
the wrong side of the interface.
"""
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from coefficient import PiecewiseCoefficient
from discretization import ProblemData
from errors import ConfigurationError
from motion import MotionMap
from spatial_operator import SpatialOperator


SideFn = Callable[[np.ndarray, float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ExactSolution:
    value: SideFn
    dx_value: SideFn
    dt_value: SideFn
    dxx_value: SideFn
    name: str = ''


def _zeros(x, t, side):
    return np.zeros_like(np.asarray(x, dtype=float))


def zero_solution() -> ExactSolution:
    return ExactSolution(_zeros, _zeros, _zeros, _zeros, name='zero')


def sine_growth() -> ExactSolution:
    """u = sin(pi x)(1 + t)."""
    return ExactSolution(
        value=lambda x, t, side: np.sin(np.pi * x) * (1.0 + t),
        dx_value=lambda x, t, side: np.pi * np.cos(np.pi * x) * (1.0 + t),
        dt_value=lambda x, t, side: np.sin(np.pi * x) + 0.0 * x,
        dxx_value=lambda x, t, side: -np.pi ** 2 * np.sin(np.pi * x) * (1.0 + t),
        name='sine_growth')


def bilinear() -> ExactSolution:
    """u = (1 + x)(1 + t), exactly representable by the trial space on a static mesh."""
    return ExactSolution(
        value=lambda x, t, side: (1.0 + x) * (1.0 + t),
        dx_value=lambda x, t, side: (1.0 + t) + 0.0 * x,
        dt_value=lambda x, t, side: 1.0 + x,
        dxx_value=_zeros,
        name='bilinear')


def kinked_tent(motion: MotionMap, k1: float, k2: float) -> ExactSolution:
    """u_i = (1 + t)(x - gamma(t)) x (1 - x) / k_i.

    Continuous across gamma(t) with k_i d_x u_i equal on both sides there.
    """
    def scale(side):
        return np.where(np.asarray(side) == 1, 1.0 / k1, 1.0 / k2)

    def value(x, t, side):
        gamma = float(motion.interface_position(t))
        return (1.0 + t) * (x - gamma) * x * (1.0 - x) * scale(side)

    def dx_value(x, t, side):
        gamma = float(motion.interface_position(t))
        return (1.0 + t) * (x * (1.0 - x) + (x - gamma) * (1.0 - 2.0 * x)) * scale(side)

    def dxx_value(x, t, side):
        gamma = float(motion.interface_position(t))
        return (1.0 + t) * (2.0 - 6.0 * x + 2.0 * gamma) * scale(side)

    def dt_value(x, t, side):
        gamma = float(motion.interface_position(t))
        gamma_t = float(motion.velocity(gamma, t))
        return ((x - gamma) - (1.0 + t) * gamma_t) * x * (1.0 - x) * scale(side)

    return ExactSolution(value, dx_value, dt_value, dxx_value, name='kinked_tent')


SOLUTIONS = ('zero', 'sine_growth', 'bilinear', 'kinked_tent')


def solution_by_name(name: str, motion: MotionMap, op: SpatialOperator) -> ExactSolution:
    if name == 'zero':
        return zero_solution()
    if name == 'sine_growth':
        return sine_growth()
    if name == 'bilinear':
        return bilinear()
    if name == 'kinked_tent':
        b1, b2 = op.diffusion.branch1, op.diffusion.branch2
        if not (b1.kind == 'constant' and b2.kind == 'constant'):
            raise ConfigurationError("kinked_tent needs piecewise-constant diffusion", key='data.solution')
        return kinked_tent(motion, b1.value, b2.value)
    raise ConfigurationError(f"unknown manufactured solution '{name}'", key='data.solution')


def manufactured_data(exact: ExactSolution, coeff: PiecewiseCoefficient, op: SpatialOperator) -> ProblemData:
    """g1 = alpha d_t u - d_x(k d_x u) + b d_x u + c u, evaluated branch by branch; g2 = u(., 0)."""
    def source(x, t, side):
        alpha, _, _ = coeff.evaluate_side(x, t, side)
        k, _, k_x = op.diffusion.evaluate_side(x, t, side)
        u = exact.value(x, t, side)
        u_x = exact.dx_value(x, t, side)
        out = (alpha * exact.dt_value(x, t, side) - k * exact.dxx_value(x, t, side) - k_x * u_x
               + op.advection * u_x + op.reaction * u)
        if op.mass_shift != 0.0:
            out = out + op.mass_shift * alpha * u
        return out

    def initial(x, side):
        return exact.value(x, 0.0, side)

    flux = None
    if op.boundary == 'neumann':
        ends = np.array([0.0, 1.0])
        sides = np.array([1, 2])

        def flux(t):
            k, _, _ = op.diffusion.evaluate_side(ends, t, sides)
            u_x = exact.dx_value(ends, t, sides)
            return float(-k[0] * u_x[0]), float(k[1] * u_x[1])

    return ProblemData(source=source, initial=initial, flux=flux, name=exact.name)


def named_data(source: str, source_value: float, initial: str, initial_value: float) -> ProblemData:
    """Time-independent catalog data: 'zero', 'constant' or 'sine' for g1 and g2."""
    shapes: Dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
        'zero': lambda x, c: np.zeros_like(x),
        'constant': lambda x, c: np.full_like(x, c),
        'sine': lambda x, c: c * np.sin(np.pi * x),
    }
    for key, kind in (('data.source', source), ('data.initial', initial)):
        if kind not in shapes:
            raise ConfigurationError(f"unknown data kind '{kind}'", key=key)
    g1 = shapes[source]
    g2 = shapes[initial]
    return ProblemData(source=lambda x, t, side: g1(np.asarray(x, dtype=float), source_value),
                       initial=lambda x, side: g2(np.asarray(x, dtype=float), initial_value),
                       name=f"{source}/{initial}")

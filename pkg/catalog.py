"""Named catalogs and the builders that turn a Scenario into live objects."""
import logging
import math
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np

from calculus import TimeDependentField
from coefficient import BranchFunction, PiecewiseCoefficient, PiecewiseField, certified_max, INFLATION
from discretization import Problem, ProblemData
from errors import ConfigurationError
from manufactured import (ExactSolution, bilinear, kinked_tent, manufactured_data, named_data, sine_growth,
                          solution_by_name, zero_solution)
from models import BranchSpec, CoefficientSpec, DataSpec, MotionSpec, OperatorSpec, Scenario
from motion import MotionFamily, MotionMap
from spatial_operator import SpatialOperator, certify_poincare_constant, lambda1


logger = logging.getLogger(__name__)


# -- builders ------------------------------------------------------------------

def build_motion(spec: MotionSpec) -> MotionMap:
    try:
        family = MotionFamily(spec.family)
    except ValueError:
        raise ConfigurationError(f"unknown motion family '{spec.family}'", key='motion.family') from None
    return MotionMap(family=family, amplitude=spec.amplitude, frequency=spec.frequency,
                     gamma0=spec.gamma0, horizon=spec.horizon)


def build_branch(spec: BranchSpec) -> BranchFunction:
    return BranchFunction(kind=spec.kind, value=spec.value, slope=spec.slope, x_slope=spec.x_slope)


def build_coefficient(spec: CoefficientSpec, motion: MotionMap) -> PiecewiseCoefficient:
    return PiecewiseCoefficient(motion=motion, branch1=build_branch(spec.branch1),
                                branch2=build_branch(spec.branch2), alpha0=spec.alpha0)


@lru_cache(maxsize=2)
def poincare_factor(boundary: str) -> float:
    return certify_poincare_constant(boundary)


def auto_constants(diffusion: PiecewiseField, advection: float, reaction: float, boundary: str,
                   coeff: PiecewiseCoefficient) -> Tuple[float, float, float]:
    """(c_A, C_A, lambda0) certified from the operator data.

    Dirichlet: c_A from the Poincare factor and lambda0 = lambda1.
    Neumann: the lambda0*alpha mass term supplies the L2 part, which needs
    a nondegenerate coefficient and no advection.
    """
    values = np.concatenate([diffusion.closure_samples(side)[0] for side in (1, 2)])
    k_min = float(np.min(values))
    if np.ptp(values) > 0.0:
        k_min /= INFLATION
    if k_min <= 0.0:
        raise ConfigurationError(f"diffusion must be positive, got minimum {k_min:.6g}", key='operator.diffusion')
    C_A = certified_max(values) + abs(advection) + abs(reaction)
    constants = coeff.global_constants()
    if boundary == 'dirichlet':
        factor = poincare_factor(boundary)
        mu = factor / (1.0 - factor)
        c_A = (k_min * mu + min(reaction, 0.0)) / (mu + 1.0)
        if c_A <= 0.0:
            raise ConfigurationError("reaction too negative for a coercive operator", key='operator.reaction')
        return c_A, max(C_A, c_A), lambda1(constants.C_alpha, 1.0, constants.C_v, c_A, constants.alpha0)
    if coeff.is_degenerate:
        raise ConfigurationError("the Neumann space needs a nondegenerate coefficient", key='operator.boundary')
    if advection != 0.0:
        raise ConfigurationError("advection is only supported with Dirichlet conditions", key='operator.advection')
    c_A = min(k_min, 1.0 + min(reaction, 0.0))
    if c_A <= 0.0:
        raise ConfigurationError("reaction too negative for a coercive operator", key='operator.reaction')
    lam = lambda1(constants.C_alpha, 1.0, constants.C_v, c_A, constants.alpha0) + 1.0 / constants.alpha0
    return c_A, max(C_A, c_A), lam


def build_operator(spec: OperatorSpec, coeff: PiecewiseCoefficient, motion: MotionMap) -> SpatialOperator:
    diffusion = PiecewiseField(motion=motion, branch1=build_branch(spec.diffusion1),
                               branch2=build_branch(spec.diffusion2))
    c_A, C_A, lam = auto_constants(diffusion, spec.advection, spec.reaction, spec.boundary, coeff)
    if spec.c_A is not None:
        c_A = spec.c_A
    if spec.C_A is not None:
        C_A = spec.C_A
    if spec.lambda0 is not None:
        lam = spec.lambda0
    return SpatialOperator(diffusion=diffusion, advection=spec.advection, reaction=spec.reaction,
                           c_A=c_A, C_A=C_A, lambda0=lam, boundary=spec.boundary)


def build_data(spec: DataSpec, motion: MotionMap, coeff: PiecewiseCoefficient,
               op: SpatialOperator) -> Tuple[ProblemData, Optional[ExactSolution]]:
    if spec.solution:
        exact = solution_by_name(spec.solution, motion, op)
        return manufactured_data(exact, coeff, op), exact
    return named_data(spec.source, spec.source_value, spec.initial, spec.initial_value), None


def build_problem(scenario: Scenario) -> Problem:
    motion = build_motion(scenario.motion)
    coeff = build_coefficient(scenario.coefficient, motion)
    op = build_operator(scenario.operator, coeff, motion)
    data, exact = build_data(scenario.data, motion, coeff, op)
    logger.info("[CONFIG] %s: %s motion, c_A=%.6g C_A=%.6g lambda0=%.6g", scenario.name or 'scenario',
                motion.family.value, op.c_A, op.C_A, op.lambda0)
    return Problem(motion=motion, coeff=coeff, op=op, data=data, exact=exact, name=scenario.name)


def declares_constants(scenario: Scenario) -> bool:
    spec = scenario.operator
    return spec.c_A is not None or spec.C_A is not None or spec.lambda0 is not None


# -- benchmarks ------------------------------------------------------------------

def _constant(value: float) -> BranchFunction:
    return BranchFunction(kind='constant', value=value) if value != 0.0 else BranchFunction(kind='zero')


def benchmark_motion(moving: bool = True, horizon: float = 1.0) -> MotionMap:
    if not moving:
        return MotionMap(family=MotionFamily.IDENTITY, gamma0=0.5, horizon=horizon)
    return MotionMap(family=MotionFamily.SEPARABLE_FLOW, amplitude=0.1, frequency=2.0 * math.pi,
                     gamma0=0.5, horizon=horizon)


def make_problem(motion: MotionMap, alpha: Tuple[float, float], k: Tuple[float, float],
                 exact: Optional[ExactSolution], name: str, boundary: str = 'dirichlet',
                 data: Optional[ProblemData] = None) -> Problem:
    coeff = PiecewiseCoefficient(motion=motion, branch1=_constant(alpha[0]), branch2=_constant(alpha[1]),
                                 alpha0=min(a for a in alpha if a > 0.0))
    diffusion = PiecewiseField(motion=motion, branch1=_constant(k[0]), branch2=_constant(k[1]))
    c_A, C_A, lam = auto_constants(diffusion, 0.0, 0.0, boundary, coeff)
    op = SpatialOperator(diffusion=diffusion, c_A=c_A, C_A=C_A, lambda0=lam, boundary=boundary)
    if data is None:
        data = manufactured_data(exact, coeff, op) if exact is not None else ProblemData()
    return Problem(motion=motion, coeff=coeff, op=op, data=data, exact=exact, name=name)


def heat_problem(horizon: float = 1.0) -> Problem:
    """alpha = 1, k = 1, no motion, u = sin(pi x)(1 + t)."""
    return make_problem(benchmark_motion(False, horizon), (1.0, 1.0), (1.0, 1.0), sine_growth(), 'heat')


def m1_problem() -> Problem:
    return make_problem(benchmark_motion(), (1.0, 2.0), (1.0, 1.0), sine_growth(), 'm1')


def m2_problem() -> Problem:
    motion = benchmark_motion()
    return make_problem(motion, (1.0, 2.0), (1.0, 2.0), kinked_tent(motion, 1.0, 2.0), 'm2')


def m3_problem() -> Problem:
    return make_problem(benchmark_motion(), (1.0, 0.0), (1.0, 1.0), sine_growth(), 'm3')


def exact_linear_problem() -> Problem:
    """Neumann problem whose solution (1 + x)(1 + t) lies in the trial space."""
    return make_problem(benchmark_motion(False), (1.0, 2.0), (1.0, 1.0), bilinear(), 'exact_linear',
                        boundary='neumann')


def zero_problem() -> Problem:
    return make_problem(benchmark_motion(False), (1.0, 1.0), (1.0, 1.0), zero_solution(), 'zero')


BENCHMARKS = {
    'heat': heat_problem,
    'm1': m1_problem,
    'm2': m2_problem,
    'm3': m3_problem,
    'exact_linear': exact_linear_problem,
    'zero': zero_problem,
}


# -- calculus catalogs -------------------------------------------------------------

def coefficient_regimes(motion: MotionMap) -> Dict[str, PiecewiseCoefficient]:
    return {
        'jump': PiecewiseCoefficient(motion=motion, branch1=_constant(1.0), branch2=_constant(2.0), alpha0=1.0),
        'smooth_varying': PiecewiseCoefficient(
            motion=motion,
            branch1=BranchFunction(kind='product', value=1.0, slope=0.5, x_slope=0.5),
            branch2=BranchFunction(kind='linear_in_t', value=2.0, slope=0.5),
            alpha0=1.0),
        'degenerate': PiecewiseCoefficient(motion=motion, branch1=_constant(1.0), branch2=_constant(0.0),
                                           alpha0=1.0),
    }


def _field(name: str, value, dt_value, dx_value, smooth: bool = True,
           density_order: Optional[float] = 2.0) -> TimeDependentField:
    return TimeDependentField(value=value, dt_value=dt_value, dx_value=dx_value, smooth=smooth, name=name,
                              density_order=density_order)


def catalog_fields(motion: MotionMap) -> List[TimeDependentField]:
    """Ten fields vanishing at x = 0 and x = 1.

    `smooth` is False only for the field with a kink in time at T/2; the
    interface-kinked field is smooth on each branch, but its spatial kink moves
    with the interface, so no density order is claimed for it under motion.
    """
    pi = np.pi
    half = 0.5 * motion.horizon

    def gamma(t):
        return float(motion.interface_position(t))

    def gamma_t(t):
        return float(motion.velocity(gamma(t), t))

    def sign(x, t):
        return np.where(x < gamma(t), -1.0, 1.0)

    return [
        _field('sine_static',
               lambda x, t: np.sin(pi * x),
               lambda x, t: np.zeros_like(x),
               lambda x, t: pi * np.cos(pi * x)),
        _field('sine_growth',
               lambda x, t: np.sin(pi * x) * (1.0 + t),
               lambda x, t: np.sin(pi * x),
               lambda x, t: pi * np.cos(pi * x) * (1.0 + t)),
        _field('sine_decay',
               lambda x, t: np.sin(pi * x) * np.exp(-t),
               lambda x, t: -np.sin(pi * x) * np.exp(-t),
               lambda x, t: pi * np.cos(pi * x) * np.exp(-t)),
        _field('sine_oscillating',
               lambda x, t: np.sin(pi * x) * np.cos(2.0 * pi * t),
               lambda x, t: -2.0 * pi * np.sin(pi * x) * np.sin(2.0 * pi * t),
               lambda x, t: pi * np.cos(pi * x) * np.cos(2.0 * pi * t)),
        _field('double_mode',
               lambda x, t: np.sin(2.0 * pi * x) * (1.0 + t * t),
               lambda x, t: np.sin(2.0 * pi * x) * 2.0 * t,
               lambda x, t: 2.0 * pi * np.cos(2.0 * pi * x) * (1.0 + t * t)),
        _field('polynomial',
               lambda x, t: x * (1.0 - x) * (1.0 + t),
               lambda x, t: x * (1.0 - x),
               lambda x, t: (1.0 - 2.0 * x) * (1.0 + t)),
        _field('travelling',
               lambda x, t: np.sin(pi * x) * np.sin(pi * (x - 0.1 * t)),
               lambda x, t: -0.1 * pi * np.sin(pi * x) * np.cos(pi * (x - 0.1 * t)),
               lambda x, t: pi * (np.cos(pi * x) * np.sin(pi * (x - 0.1 * t))
                                  + np.sin(pi * x) * np.cos(pi * (x - 0.1 * t)))),
        _field('product_exp',
               lambda x, t: x * (1.0 - x) * np.exp(x * t),
               lambda x, t: x * x * (1.0 - x) * np.exp(x * t),
               lambda x, t: ((1.0 - 2.0 * x) + x * (1.0 - x) * t) * np.exp(x * t)),
        _field('kinked_interface',
               lambda x, t: np.abs(x - gamma(t)) * x * (1.0 - x),
               lambda x, t: -sign(x, t) * gamma_t(t) * x * (1.0 - x),
               lambda x, t: sign(x, t) * (x * (1.0 - x) + (x - gamma(t)) * (1.0 - 2.0 * x)),
               density_order=2.0 if motion.is_static else None),
        _field('kinked_time',
               lambda x, t: np.sin(pi * x) * abs(t - half),
               lambda x, t: np.sin(pi * x) * (1.0 if t >= half else -1.0),
               lambda x, t: pi * np.cos(pi * x) * abs(t - half),
               smooth=False, density_order=1.0),
    ]


def field_by_name(name: str, motion: MotionMap) -> TimeDependentField:
    for f in catalog_fields(motion):
        if f.name == name:
            return f
    raise ConfigurationError(f"unknown catalog field '{name}'", key='study.fields')

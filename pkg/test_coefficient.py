import math

import numpy as np
import pytest

from coefficient import BranchFunction, PiecewiseCoefficient, certified_max
from errors import ConfigurationError, DomainViolationError, InterfaceTraceError
from motion import MotionFamily, MotionMap


FLOW = MotionMap(family=MotionFamily.SEPARABLE_FLOW, amplitude=0.1, frequency=2.0 * math.pi)
STATIC = MotionMap()


def constant(value):
    return BranchFunction(kind='constant', value=value) if value else BranchFunction(kind='zero')


def jump(motion=STATIC, a1=1.0, a2=2.0, alpha0=1.0):
    return PiecewiseCoefficient(motion=motion, branch1=constant(a1), branch2=constant(a2), alpha0=alpha0)


def test_branch_selection_and_side_labels():
    coeff = jump()
    left = coeff.evaluate_branch(0.25, 0.0)
    right = coeff.evaluate_branch(0.75, 0.0)
    assert (left.value, left.side) == (1.0, 1)
    assert (right.value, right.side) == (2.0, 2)
    assert left.dt_value == 0.0 and left.dx_value == 0.0


def test_interface_point_is_rejected():
    coeff = jump(FLOW)
    gamma = FLOW.interface_position(0.25)
    with pytest.raises(InterfaceTraceError):
        coeff.evaluate_branch(gamma, 0.25)


def test_outside_domain_is_rejected():
    with pytest.raises(DomainViolationError):
        jump().evaluate_branch(1.2, 0.0)


def test_coefficient_must_live_somewhere():
    with pytest.raises(ConfigurationError):
        PiecewiseCoefficient(motion=STATIC, branch1=constant(0.0), branch2=constant(0.0))
    with pytest.raises(ConfigurationError):
        jump(alpha0=0.0)
    with pytest.raises(ConfigurationError):
        BranchFunction(kind='cubic')


def test_degenerate_support():
    coeff = jump(a2=0.0)
    assert coeff.is_degenerate
    assert coeff.support_contains(0.25, 0.0) is True
    assert coeff.support_contains(0.75, 0.0) is False
    assert coeff.evaluate_branch(0.75, 0.3).value == 0.0


def test_lagrangian_composition_matches_finite_differences():
    coeff = PiecewiseCoefficient(motion=FLOW,
                                 branch1=BranchFunction(kind='product', value=1.0, slope=0.5, x_slope=0.5),
                                 branch2=BranchFunction(kind='linear_in_t', value=2.0, slope=0.5))
    h = 1e-6
    for x, t in ((0.2, 0.3), (0.8, 0.6)):
        sample = coeff.evaluate_branch(x, t)
        side = sample.side
        fd_x = (coeff.evaluate_side(x + h, t, side)[0] - coeff.evaluate_side(x - h, t, side)[0]) / (2.0 * h)
        fd_t = (coeff.evaluate_side(x, t + h, side)[0] - coeff.evaluate_side(x, t - h, side)[0]) / (2.0 * h)
        assert sample.dx_value == pytest.approx(float(fd_x), abs=1e-7)
        assert sample.dt_value == pytest.approx(float(fd_t), abs=1e-7)


def test_branch_is_carried_by_the_flow():
    # a branch depending on x0 only is constant along trajectories
    coeff = PiecewiseCoefficient(motion=FLOW,
                                 branch1=BranchFunction(kind='product', value=1.0, x_slope=1.0),
                                 branch2=constant(1.0))
    x0 = 0.2
    for t in (0.0, 0.2, 0.45):
        x = FLOW.forward_map(x0, t)
        assert coeff.evaluate_branch(x, t).value == pytest.approx(1.2, abs=1e-13)


def test_global_constants_for_static_jump():
    constants = jump().global_constants()
    assert constants.C_alpha == 2.0
    assert constants.C_v == 0.0
    assert constants.alpha0 == 1.0


def test_global_constants_inflate_varying_samples():
    constants = jump(FLOW).global_constants()
    assert constants.C_alpha == 2.0
    v_max = 0.1 * 2.0 * math.pi * math.pi
    assert v_max < constants.C_v <= 1.01 * (0.1 * (2.0 * math.pi) ** 2)


def test_alpha0_above_coefficient_is_rejected():
    with pytest.raises(ConfigurationError):
        jump(alpha0=1.5).global_constants()


def test_certified_max():
    assert certified_max(np.array([2.0, 2.0])) == 2.0
    assert certified_max(np.array([1.0, -3.0])) == pytest.approx(3.03)
    assert certified_max(np.array([])) == 0.0

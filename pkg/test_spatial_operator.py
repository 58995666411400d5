import math

import numpy as np
import pytest

from calculus import NormContext, SpatialField
from catalog import benchmark_motion, heat_problem, m1_problem, m3_problem
from coefficient import BranchFunction, PiecewiseCoefficient, PiecewiseField
from errors import ConfigurationError, DomainViolationError
from spatial_operator import (SpatialOperator, apply_form, certify_poincare_constant, check_constants,
                              coercivity_margin, lambda1, shifted_operator)


STATIC = benchmark_motion(moving=False)
CTX = NormContext(h_ref=1.0 / 128)
ONE = BranchFunction(kind='constant', value=1.0)
SINE = SpatialField(value=lambda x: np.sin(np.pi * x), dx_value=lambda x: np.pi * np.cos(np.pi * x), name='sine')
POINCARE = math.pi ** 2 / (1.0 + math.pi ** 2)


def laplacian(c_A=0.5, C_A=1.0, lambda0=0.0, boundary='dirichlet'):
    return SpatialOperator(diffusion=PiecewiseField(motion=STATIC, branch1=ONE, branch2=ONE),
                           c_A=c_A, C_A=C_A, lambda0=lambda0, boundary=boundary)


def unit_coefficient():
    return PiecewiseCoefficient(motion=STATIC, branch1=ONE, branch2=ONE)


def test_apply_form_on_sine():
    assert apply_form(laplacian(), 0.3, SINE, SINE, CTX) == pytest.approx(math.pi ** 2 / 2.0, rel=1e-10)


def test_apply_form_checks_dirichlet_condition():
    cosine = SpatialField(value=lambda x: np.cos(np.pi * x), dx_value=lambda x: -np.pi * np.sin(np.pi * x))
    with pytest.raises(DomainViolationError):
        apply_form(laplacian(), 0.0, cosine, SINE, CTX)
    neumann = laplacian(boundary='neumann')
    assert apply_form(neumann, 0.0, cosine, cosine, CTX) == pytest.approx(math.pi ** 2 / 2.0, rel=1e-10)


def test_operator_validation():
    with pytest.raises(ConfigurationError):
        laplacian(c_A=2.0, C_A=1.0)
    with pytest.raises(ConfigurationError):
        laplacian(boundary='robin')


def test_poincare_constant_is_certified():
    value = certify_poincare_constant()
    assert value == pytest.approx(POINCARE, abs=1e-8)
    assert value <= POINCARE
    with pytest.raises(DomainViolationError):
        certify_poincare_constant('neumann')


def test_lambda1_formula():
    assert lambda1(2.0, 1.0, 1.0, 0.5, 1.0) == pytest.approx(16.0)
    with pytest.raises(DomainViolationError):
        lambda1(2.0, 1.0, 1.0, 0.0, 1.0)


def test_sharp_coercivity_on_first_mode():
    op = laplacian(c_A=POINCARE)
    margin = coercivity_margin(op, 0.0, SINE, unit_coefficient(), CTX, lambda_1=op.lambda0)
    assert abs(margin) <= 1e-10


def test_shifted_operator():
    op = laplacian(lambda0=2.0)
    coeff = PiecewiseCoefficient(motion=STATIC, branch1=ONE, branch2=BranchFunction(kind='constant', value=2.0))
    shifted = shifted_operator(op, coeff)
    assert shifted.mass_shift == 2.0
    assert shifted.lambda0 == 0.0
    assert shifted.C_A == pytest.approx(op.C_A + 2.0 * 2.0)
    plain_op = laplacian()
    assert shifted_operator(plain_op, coeff) is plain_op
    # the shift adds lambda0 * ||sqrt(alpha) w||^2
    plain = apply_form(op, 0.0, SINE, SINE, CTX)
    assert apply_form(shifted, 0.0, SINE, SINE, CTX, coeff) == pytest.approx(plain + 2.0 * 0.75, rel=1e-10)
    with pytest.raises(DomainViolationError):
        apply_form(shifted, 0.0, SINE, SINE, CTX)


@pytest.mark.parametrize('factory', [heat_problem, m1_problem, m3_problem])
def test_certified_constants_pass_sampling(factory):
    problem = factory()
    check = check_constants(problem.op, problem.coeff, np.random.default_rng(0), CTX, n_pairs=10, n_times=3)
    assert check.max_ratio <= problem.op.C_A
    assert check.min_margin >= -1e-10 * max(1.0, problem.op.C_A)


def test_overstated_coercivity_is_rejected():
    op = laplacian(c_A=1.5, C_A=2.0)
    with pytest.raises(ConfigurationError) as exc:
        check_constants(op, unit_coefficient(), np.random.default_rng(1), CTX, n_pairs=5, n_times=2)
    assert exc.value.key == 'c_A'


def test_understated_boundedness_is_rejected():
    op = laplacian(c_A=0.005, C_A=0.01)
    with pytest.raises(ConfigurationError) as exc:
        check_constants(op, unit_coefficient(), np.random.default_rng(2), CTX, n_pairs=20, n_times=2)
    assert exc.value.key == 'C_A'

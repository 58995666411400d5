import math

import numpy as np
import pytest

from catalog import exact_linear_problem, heat_problem, m1_problem, m2_problem, m3_problem, zero_problem
from discretization import assemble_system, build_mesh
from errors import DiscreteInstabilityError, DomainViolationError
from solver import (apriori_check, check_nested, convergence_study, dense_cap, dense_svd_inf_sup, discrete_inf_sup,
                    elliptic_residual, energy_residual, error_norms, inactive_dofs, pencil_inf_sup, shift_equivalence,
                    solve_level, stability_study, svd_inf_sup)


LEVELS = [(4, 4), (8, 8), (16, 16)]
FINE_LEVELS = LEVELS + [(32, 32)]


def test_scalar_pencil():
    one = np.array([[1.0]])
    assert pencil_inf_sup(np.array([[-3.0]]), one, one, cap=10) == pytest.approx(3.0)


def test_diagonal_pencil_dense_and_iterative():
    B = np.diag([1.0, 2.0, 3.0, 4.0])
    M_X = np.diag([4.0, 1.0, 1.0, 1.0])
    M_Y = np.eye(4)
    assert pencil_inf_sup(B, M_X, M_Y, cap=10) == pytest.approx(0.5, rel=1e-12)
    assert svd_inf_sup(B, M_X, M_Y) == pytest.approx(0.5, rel=1e-12)
    assert pencil_inf_sup(B, M_X, M_Y, cap=0) == pytest.approx(0.5, rel=1e-6)


def test_pencil_matches_svd_on_heat():
    problem = heat_problem()
    system = assemble_system(build_mesh(4, 4, problem.motion), problem)
    assert discrete_inf_sup(system, cap=1000) == pytest.approx(dense_svd_inf_sup(system), rel=1e-8)


def test_dense_cap_from_environment(monkeypatch):
    monkeypatch.setenv('EIP_DENSE_CAP', '7')
    assert dense_cap() == 7
    monkeypatch.setenv('EIP_DENSE_CAP', 'many')
    assert dense_cap() == 2000


def test_zero_data_gives_zero_solution():
    problem = zero_problem()
    system, sol = solve_level(problem, 4, 4)
    assert not np.any(sol.coefficients)
    assert sol.coefficients.size == system.mesh.trial_dim


def test_trial_space_solution_is_evaluated_exactly():
    problem = exact_linear_problem()
    _, sol = solve_level(problem, 4, 4)
    assert sol.evaluate(0.3, 0.45) == pytest.approx(1.3 * 1.45, abs=1e-10)
    values = sol.evaluate(np.array([0.0, 0.6, 1.0]), 1.0)
    assert np.allclose(values, [2.0, 3.2, 4.0], atol=1e-10)


def test_apriori_estimate_holds_with_computed_constant():
    problem = m1_problem()
    system, sol = solve_level(problem, 8, 8)
    c_bh = discrete_inf_sup(system)
    record = apriori_check(sol, system, c_bh)
    assert record.satisfied
    assert record.g1_norm > 0.0 and record.g2_norm > 0.0
    assert record.g1_initial_norm == 0.0
    with pytest.raises(DiscreteInstabilityError):
        apriori_check(sol, system, 0.0)


def test_heat_stability_is_level_independent():
    report = stability_study(heat_problem(), LEVELS)
    assert [(r.n_x, r.n_t) for r in report.rows] == LEVELS
    assert all(r.apriori_satisfied for r in report.rows)
    assert all(r.condition is not None for r in report.rows)
    assert report.passed


@pytest.mark.slow
@pytest.mark.parametrize('factory', [m1_problem, m2_problem, m3_problem])
def test_moving_interface_stability(factory):
    report = stability_study(factory(), FINE_LEVELS)
    assert [(r.n_x, r.n_t) for r in report.rows] == FINE_LEVELS
    assert all(r.c_bh > 0.0 and r.apriori_satisfied for r in report.rows)
    assert report.ratio <= 4.0


def test_heat_convergence_orders():
    table = convergence_study(heat_problem(), LEVELS)
    assert all(a.l2_q > b.l2_q for a, b in zip(table.rows, table.rows[1:]))
    assert table.rows[0].rate_l2_q is None
    assert 1.6 <= table.order_l2_q <= 2.4
    assert 0.8 <= table.order_l2_v <= 1.3


@pytest.mark.slow
@pytest.mark.parametrize('factory', [m1_problem, m2_problem])
def test_moving_interface_convergence_orders(factory):
    table = convergence_study(factory(), FINE_LEVELS)
    assert all(a.l2_q > b.l2_q and a.l2_v > b.l2_v for a, b in zip(table.rows, table.rows[1:]))
    assert 1.7 <= table.order_l2_q <= 2.3
    assert 0.8 <= table.order_l2_v <= 1.2


def test_levels_must_be_nested():
    check_nested(LEVELS)
    with pytest.raises(DomainViolationError):
        check_nested([(4, 4), (6, 8)])
    with pytest.raises(DomainViolationError):
        convergence_study(heat_problem(), [(4, 4), (8, 4)])


def test_error_norms_need_an_exact_solution():
    problem = heat_problem()
    _, sol = solve_level(problem, 4, 4)
    no_exact = type(problem)(motion=problem.motion, coeff=problem.coeff, op=problem.op, data=problem.data)
    with pytest.raises(DomainViolationError):
        error_norms(sol, no_exact)


def test_shift_with_zero_rate_is_exact():
    assert shift_equivalence(heat_problem(), 0.0, n_x=8, n_t=8).max_pointwise_gap == 0.0


@pytest.mark.parametrize('factory', [heat_problem, m1_problem])
def test_shift_equivalence(factory):
    record = shift_equivalence(factory(), 2.0, n_x=8, n_t=8)
    assert record.lambda0 == 2.0
    assert record.max_pointwise_gap <= 1e-8


def test_energy_identity_for_discrete_heat_solution():
    problem = heat_problem()
    _, sol = solve_level(problem, 8, 8)
    assert energy_residual(sol, problem) < 1e-10


def test_energy_identity_with_moving_interface():
    problem = m1_problem()
    _, sol = solve_level(problem, 8, 8)
    assert energy_residual(sol, problem) < 1e-10


def test_inactive_dofs_for_degenerate_coefficient():
    problem = m3_problem()
    mesh = build_mesh(8, 4, problem.motion)
    # free nodes are 1..7, the interface node is 4
    assert list(inactive_dofs(mesh, problem)) == [4, 5, 6]
    assert inactive_dofs(mesh, heat_problem()).size == 0


def test_initial_elliptic_rows_are_satisfied():
    problem = m3_problem()
    system, sol = solve_level(problem, 16, 8)
    assert system.elliptic_rows.size > 0
    assert elliptic_residual(sol, system, 0) < 1e-8
    assert math.isfinite(elliptic_residual(sol, system, system.mesh.n_t))


@pytest.mark.parametrize('n_x, n_t', LEVELS)
def test_final_elliptic_residual_is_below_the_discretization_error(n_x, n_t):
    problem = m3_problem()
    system, sol = solve_level(problem, n_x, n_t)
    residual = elliptic_residual(sol, system, system.mesh.n_t)
    assert residual <= error_norms(sol, problem).l2_q

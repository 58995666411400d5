import math

import numpy as np
import pytest
from scipy import integrate

from calculus import (DensityRow, NormContext, SpatialField, TimeBump, TimeDependentField, classical_pairing,
                      density_study, embedding_constant, embedding_ratio, fitted_density_order, graph_norm,
                      ibp_residual, kernel_shift, material_pairing, mollifier_constant, mollifier_kernel,
                      mollify, random_bump, random_spatial_field, reynolds_pairing, sigma_norm_equivalence,
                      transport_correction, weighted_pairing)
from catalog import benchmark_motion, coefficient_regimes, field_by_name
from coefficient import BranchFunction, PiecewiseCoefficient
from errors import DomainViolationError


FLOW = benchmark_motion()
STATIC = benchmark_motion(moving=False)
# fine quadrature for the identities, coarse for the norms
FINE = NormContext(h_ref=1.0 / 128, q_x=8, q_t=8, time_panels=32)
COARSE = NormContext(h_ref=1.0 / 64, time_panels=16)


def sine_growth():
    return field_by_name('sine_growth', FLOW)


# -- mollifier -----------------------------------------------------------------

def test_kernel_has_unit_mass():
    for eps in (0.1, 0.01):
        mass, _ = integrate.quad(lambda s: mollifier_kernel(eps, s), -eps, eps, epsabs=1e-14, limit=200)
        assert mass == pytest.approx(1.0, abs=1e-10)


def test_kernel_shape():
    assert mollifier_kernel(0.1, 0.1) == 0.0
    assert mollifier_kernel(0.1, -0.1) == 0.0
    assert mollifier_kernel(0.1, 0.03) == mollifier_kernel(0.1, -0.03)
    assert mollifier_kernel(0.1, 0.0) == pytest.approx(10.0 * mollifier_constant())
    with pytest.raises(DomainViolationError):
        mollifier_kernel(0.0, 0.0)


def test_kernel_shift_keeps_window_inside():
    assert kernel_shift(0.05, 0.0, 1.0) == pytest.approx(0.05)
    assert kernel_shift(0.05, 0.5, 1.0) == pytest.approx(0.0)
    assert kernel_shift(0.05, 1.0, 1.0) == pytest.approx(-0.05)


def test_mollify_preserves_time_constant_fields():
    u = field_by_name('sine_static', STATIC)
    x = np.array([0.1, 0.5, 0.9])
    for t in (0.0, 0.3, 1.0):
        assert np.max(np.abs(mollify(u, 0.05, x, t) - np.sin(np.pi * x))) < 1e-10


def test_mollify_matches_adaptive_quadrature():
    u = TimeDependentField(value=lambda x, t: np.sin(np.pi * t) + 0.0 * x,
                           dt_value=lambda x, t: np.pi * np.cos(np.pi * t) + 0.0 * x,
                           dx_value=lambda x, t: 0.0 * x)
    eps, t = 0.05, 0.3
    center = t + kernel_shift(eps, t, 1.0)
    expected, _ = integrate.quad(lambda s: mollifier_kernel(eps, center - s) * math.sin(math.pi * s),
                                 center - eps, center + eps, epsabs=1e-14, limit=200)
    assert mollify(u, eps, 0.5, t) == pytest.approx(expected, abs=1e-10)


def test_mollify_rejects_wide_kernels():
    with pytest.raises(DomainViolationError):
        mollify(sine_growth(), 0.3, 0.5, 0.5, horizon=1.0)


def test_shifted_density_is_first_order_for_linear_time():
    rows = density_study(field_by_name('sine_growth', STATIC), [0.1, 0.05, 0.025], COARSE, shift=True)
    assert all(a.error > b.error for a, b in zip(rows, rows[1:]))
    assert all(abs(r.rate - 1.0) < 0.05 for r in rows[1:])


def test_centred_density_is_second_order_for_smooth_fields():
    rows = density_study(field_by_name('sine_oscillating', STATIC), [0.1, 0.05, 0.025, 0.0125], COARSE,
                         shift=False)
    assert all(a.error > b.error for a, b in zip(rows, rows[1:]))
    assert 1.7 <= rows[-1].rate <= 2.3


def test_density_converges_for_kinked_field():
    ctx = NormContext(h_ref=1.0 / 64, time_panels=64)
    rows = density_study(field_by_name('kinked_time', STATIC), [0.1, 0.05, 0.025, 0.0125], ctx, shift=False)
    assert all(a.error > b.error for a, b in zip(rows, rows[1:]))
    assert all(r.rate > 1.0 for r in rows[1:])


def test_density_needs_decreasing_widths():
    with pytest.raises(DomainViolationError):
        density_study(sine_growth(), [0.05, 0.1], COARSE)


def test_kernel_reproduces_fields_linear_in_time():
    u = TimeDependentField(value=lambda x, t: t + 0.0 * x, dt_value=lambda x, t: 1.0 + 0.0 * x,
                           dx_value=lambda x, t: 0.0 * x)
    eps = 0.05
    assert mollify(u, eps, 0.5, 0.5, shift=False) == pytest.approx(0.5, abs=1e-13)
    # the shifted kernel returns its own centre
    assert mollify(u, eps, 0.5, 0.0) == pytest.approx(kernel_shift(eps, 0.0, 1.0), abs=1e-13)


def test_fitted_density_order():
    rows = [DensityRow(eps=e, error=3.0 * e ** 2, rate=None) for e in (0.1, 0.05, 0.025)]
    assert fitted_density_order(rows) == pytest.approx(2.0, abs=1e-10)
    assert fitted_density_order(rows[:1]) is None
    assert fitted_density_order([DensityRow(0.1, 0.0, None), DensityRow(0.05, 0.0, None)]) is None


def test_catalog_density_orders():
    assert field_by_name('sine_oscillating', FLOW).density_order == 2.0
    assert field_by_name('kinked_time', FLOW).density_order == 1.0
    assert field_by_name('kinked_interface', STATIC).density_order == 2.0
    # a moving spatial kink does not give a clean order in eps
    assert field_by_name('kinked_interface', FLOW).density_order is None


# -- weighted time derivative --------------------------------------------------

def test_weighted_pairing_vanishes_for_static_data():
    coeff = coefficient_regimes(STATIC)['jump']
    u = field_by_name('sine_static', STATIC)
    w = SpatialField(value=lambda x: np.sin(2.0 * np.pi * x), dx_value=lambda x: 2.0 * np.pi * np.cos(2.0 * np.pi * x))
    assert abs(weighted_pairing(u, TimeBump(0.2, 0.8), w, coeff, STATIC, FINE)) < 1e-12


@pytest.mark.parametrize('regime', ['jump', 'smooth_varying', 'degenerate'])
def test_weighted_pairing_is_consistent_with_classical(regime):
    coeff = coefficient_regimes(FLOW)[regime]
    rng = np.random.default_rng(7)
    u = sine_growth()
    for _ in range(3):
        phi = random_bump(rng, FLOW.horizon)
        w = random_spatial_field(rng)
        weighted = weighted_pairing(u, phi, w, coeff, FLOW, FINE)
        classical = classical_pairing(u, phi, w, coeff, FLOW, FINE)
        assert abs(weighted - classical) <= 1e-7


def test_material_pairing_differs_by_transport_term():
    coeff = coefficient_regimes(FLOW)['smooth_varying']
    rng = np.random.default_rng(3)
    u = field_by_name('travelling', FLOW)
    phi = random_bump(rng, FLOW.horizon)
    w = random_spatial_field(rng)
    gap = (material_pairing(u, phi, w, coeff, FLOW, FINE) - weighted_pairing(u, phi, w, coeff, FLOW, FINE)
           - transport_correction(u, phi, w, coeff, FLOW, FINE))
    assert abs(gap) < 1e-10


def test_reynolds_pairing_agrees_for_piecewise_constant_alpha():
    coeff = coefficient_regimes(FLOW)['jump']
    rng = np.random.default_rng(11)
    u = sine_growth()
    phi = random_bump(rng, FLOW.horizon)
    w = random_spatial_field(rng)
    assert abs(reynolds_pairing(u, phi, w, coeff, FLOW, FINE) - weighted_pairing(u, phi, w, coeff, FLOW, FINE)) < 1e-6


def test_reynolds_pairing_needs_piecewise_constant_alpha():
    coeff = coefficient_regimes(FLOW)['smooth_varying']
    w = random_spatial_field(np.random.default_rng(0))
    with pytest.raises(DomainViolationError):
        reynolds_pairing(sine_growth(), TimeBump(0.2, 0.8), w, coeff, FLOW, FINE)


def test_test_function_must_vanish_at_the_ends():
    coeff = coefficient_regimes(FLOW)['jump']
    w = random_spatial_field(np.random.default_rng(0))
    with pytest.raises(DomainViolationError):
        weighted_pairing(sine_growth(), TimeBump(0.0, 0.5), w, coeff, FLOW, FINE)


# -- integration by parts --------------------------------------------------------

def test_ibp_exact_for_static_data():
    coeff = coefficient_regimes(STATIC)['jump']
    u = field_by_name('sine_static', STATIC)
    assert ibp_residual(u, u, 0.0, 1.0, coeff, STATIC, FINE) < 1e-12


@pytest.mark.parametrize('regime', ['jump', 'smooth_varying'])
def test_ibp_holds_under_motion(regime):
    coeff = coefficient_regimes(FLOW)[regime]
    u = sine_growth()
    z = field_by_name('double_mode', FLOW)
    assert ibp_residual(u, z, 0.0, 1.0, coeff, FLOW, FINE) <= 1e-8
    assert ibp_residual(u, z, 0.2, 0.7, coeff, FLOW, FINE) <= 1e-8


def test_ibp_is_symmetric():
    coeff = coefficient_regimes(FLOW)['jump']
    u = sine_growth()
    z = field_by_name('polynomial', FLOW)
    assert ibp_residual(u, z, 0.1, 0.9, coeff, FLOW, COARSE) == ibp_residual(z, u, 0.1, 0.9, coeff, FLOW, COARSE)


def test_ibp_interval_checks():
    coeff = coefficient_regimes(FLOW)['jump']
    u = sine_growth()
    with pytest.raises(DomainViolationError):
        ibp_residual(u, u, 0.5, 0.5, coeff, FLOW, COARSE)
    with pytest.raises(DomainViolationError):
        ibp_residual(u, u, 0.7, 0.2, coeff, FLOW, COARSE)


# -- embedding ---------------------------------------------------------------------

def test_embedding_constant_hand_values():
    assert embedding_constant(2.0, 2.0, 1.0, 1.0, 1.0) == pytest.approx(math.sqrt(5.0), abs=1e-15)
    assert embedding_constant(2.0, 1.0, 2.0, 1.0, 1.0) == pytest.approx(math.sqrt(7.0), abs=1e-15)
    assert embedding_constant(2.0, 0.0, 1.0, 1.0, 1.0) == pytest.approx(math.sqrt(3.0), abs=1e-15)
    # (1 + 1 + 1/4) * 2 * 1 * 4^(1/2) + 1 = 10
    assert embedding_constant(4.0, 1.0, 2.0, 1.0, 4.0) == pytest.approx(math.sqrt(10.0), abs=1e-14)
    with pytest.raises(DomainViolationError):
        embedding_constant(1.5, 0.0, 1.0, 1.0, 1.0)


def test_embedding_ratio_for_static_sine():
    one = BranchFunction(kind='constant', value=1.0)
    coeff = PiecewiseCoefficient(motion=STATIC, branch1=one, branch2=one)
    report = embedding_ratio(field_by_name('sine_static', STATIC), coeff, STATIC, COARSE)
    assert report.bound == pytest.approx(math.sqrt(3.0))
    assert 0.0 < report.ratio <= math.sqrt(3.0)
    assert report.satisfied


def test_embedding_ratio_of_zero_field():
    zero = TimeDependentField(value=lambda x, t: 0.0 * x, dt_value=lambda x, t: 0.0 * x,
                              dx_value=lambda x, t: 0.0 * x, name='zero')
    report = embedding_ratio(zero, coefficient_regimes(STATIC)['jump'], STATIC, COARSE)
    assert report.ratio == 0.0
    assert report.bound > 0.0


@pytest.mark.slow
@pytest.mark.parametrize('regime', ['jump', 'smooth_varying', 'degenerate'])
def test_embedding_holds_for_catalog_fields(regime):
    coeff = coefficient_regimes(FLOW)[regime]
    for name in ('sine_growth', 'kinked_interface', 'kinked_time', 'product_exp'):
        assert embedding_ratio(field_by_name(name, FLOW), coeff, FLOW, COARSE).satisfied


def test_graph_norm_parts():
    coeff = coefficient_regimes(STATIC)['jump']
    norm = graph_norm(field_by_name('sine_static', STATIC), coeff, STATIC, COARSE)
    assert norm.primal == pytest.approx(math.sqrt(0.5 + 0.5 * math.pi ** 2), rel=1e-8)
    assert norm.dual == 0.0
    p4 = graph_norm(sine_growth(), coefficient_regimes(FLOW)['jump'], FLOW, NormContext(h_ref=1.0 / 64, p=4.0))
    assert p4.primal > 0.0 and p4.dual > 0.0


def test_sigma_norm_equivalence():
    for regime, coeff in coefficient_regimes(FLOW).items():
        result = sigma_norm_equivalence(sine_growth(), 0.4, coeff, COARSE)
        assert result.satisfied, regime

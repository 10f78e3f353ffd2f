import math

import numpy as np
import pytest

from stablelab.core.kernels import (
    SpectralDensity,
    StableParams,
    ball_exit_probability,
    ball_exit_radial_cdf,
    ball_green,
    ball_green_from_center,
    ball_harmonic_measure,
    calibrate_c0,
    char_exponent,
    exterior_integral,
    jump_density,
    killing_density,
    poisson_mass_from_center,
    riesz_constant,
    riesz_green,
    riesz_green_constant,
    sphere_moment,
    unit_sphere_area,
)
from stablelab.core import kernels
from stablelab.core.geometry import Ball
from stablelab.exceptions import DegenerateConfigurationError, DomainError, ParameterError, QuadratureError


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_poisson_kernel_has_unit_mass(d, alpha):
    assert poisson_mass_from_center(StableParams(d, alpha)) == pytest.approx(1.0, abs=1e-8)


def test_poisson_mass_scales_with_radius():
    assert poisson_mass_from_center(StableParams(2, 1.0), r=3.0) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_exit_probability_matches_radial_law_from_center(alpha):
    p = StableParams(2, alpha)
    direct = ball_exit_probability(p, (0.0, 0.0), 1.0, (0.0, 0.0), 1.0, 2.0)
    assert direct == pytest.approx(ball_exit_radial_cdf(p, 1.0, 2.0), abs=1e-6)


def test_harmonic_measure_off_center_sums_to_one():
    p = StableParams(2, 1.0)
    mass = ball_harmonic_measure(p, (0.0, 0.0), 1.0, (0.4, 0.2), [1.0, 1.5, 3.0, np.inf])
    assert mass.shape == (3,)
    assert np.all(mass > 0)
    assert mass.sum() == pytest.approx(1.0, abs=1e-6)


def test_harmonic_measure_rejects_unsorted_edges():
    with pytest.raises(ParameterError):
        ball_harmonic_measure(StableParams(2, 1.0), (0.0, 0.0), 1.0, (0.0, 0.0), [2.0, 1.0])


def test_radial_cdf_limits():
    p = StableParams(3, 1.2)
    assert ball_exit_radial_cdf(p, 1.0, 1.0) == 0.0
    assert ball_exit_radial_cdf(p, 1.0, 1e8) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ParameterError):
        ball_exit_radial_cdf(p, 1.0, 0.5)


def test_sphere_constants():
    assert unit_sphere_area(1) == pytest.approx(2 * math.pi)
    assert unit_sphere_area(2) == pytest.approx(4 * math.pi)
    # mean of |cos| over the circle is 2/pi
    assert sphere_moment(2, 1.0) == pytest.approx(4.0)


def test_jump_density_and_riesz_green():
    p = StableParams(3, 1.0)
    x, y = np.zeros(3), np.array([2.0, 0.0, 0.0])
    assert jump_density(p, x, y) == pytest.approx(0.5 * riesz_constant(p) * 2.0 ** -4)
    assert riesz_green(p, x, y) == pytest.approx(riesz_green_constant(p) / 4.0)
    # classical Newtonian-type constant for d = 3, alpha = 1
    assert riesz_green_constant(p) == pytest.approx(1.0 / (2 * math.pi ** 2))
    with pytest.raises(DegenerateConfigurationError):
        jump_density(p, x, x)


def test_killing_density_at_ball_center(unit_ball, params):
    est = killing_density(params, unit_ball, (0.0, 0.0))
    expected = riesz_constant(params) * 2 * math.pi / params.alpha
    assert est.value == pytest.approx(expected, rel=1e-8)


def test_killing_density_box_monte_carlo(unit_square, params):
    inner = killing_density(params, unit_square, (0.5, 0.5), rng=1)
    edge = killing_density(params, unit_square, (0.5, 0.05), rng=1)
    assert edge.value > inner.value > 0
    assert inner.error < 0.02 * inner.value


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_ball_green_beta_and_quadrature_agree(alpha):
    p = StableParams(2, alpha)
    x = np.array([[0.1, 0.2], [0.7, -0.1], [0.0, 0.0]])
    y = np.array([[-0.3, 0.4], [0.75, -0.05], [0.0, 0.9]])
    beta = ball_green(p, 1.0, x, y)
    quad = ball_green(p, 1.0, x, y, method="quad")
    np.testing.assert_allclose(beta, quad, rtol=1e-8)


def test_ball_green_is_symmetric_and_tends_to_riesz(params):
    x, y = np.array([0.2, 0.1]), np.array([-0.4, 0.3])
    assert ball_green(params, 1.0, x, y) == pytest.approx(ball_green(params, 1.0, y, x))
    assert ball_green(params, 1e6, x, y) == pytest.approx(riesz_green(params, x, y), rel=1e-5)


def test_ball_green_from_center_matches_pointwise(params):
    dist = np.array([0.1, 0.5, 0.9])
    y = np.stack([dist, np.zeros(3)], axis=1)
    np.testing.assert_allclose(
        ball_green_from_center(params, 1.0, dist),
        ball_green(params, 1.0, np.zeros((3, 2)), y),
        rtol=1e-12,
    )
    assert ball_green_from_center(params, 1.0, 1.5) == 0.0


def test_ball_green_rejects_outside_points(params):
    with pytest.raises(DomainError):
        ball_green(params, 1.0, (0.0, 0.0), (1.0, 0.0))


def test_calibrated_c0_is_below_the_riesz_constant(params):
    c0 = calibrate_c0(params, n_pairs=2000, rng=3)
    assert 0.8 * riesz_green_constant(params) < c0 <= riesz_green_constant(params) * (1 + 1e-12)
    assert calibrate_c0(params, n_pairs=2000, rng=3) == c0


def test_char_exponent_of_constant_density():
    p = StableParams(2, 1.0)
    xi = np.array([3.0, 4.0])
    est = char_exponent(p, SpectralDensity.constant(), xi)
    assert est.value == pytest.approx(5.0 * sphere_moment(2, 1.0), rel=1e-5)


def test_char_exponent_is_bounded_by_the_density_bounds():
    p = StableParams(3, 1.5)
    f = SpectralDensity.two_bump((0.0, 0.0, 1.0), amplitude=2.0)
    xi = np.array([0.0, 0.0, 1.0])
    base = sphere_moment(3, 1.5)
    est = char_exponent(p, f, xi, order=256)
    assert base / f.c1 <= est.value <= base * f.c1


def test_spectral_density_validation():
    with pytest.raises(ParameterError):
        SpectralDensity(lambda y: np.ones(y.shape[0]), 0.5)
    lopsided = SpectralDensity(lambda y: 1.0 + 0.5 * y[:, 0], 2.0, name="lopsided")
    with pytest.raises(ParameterError):
        char_exponent(StableParams(2, 1.0), lopsided, (1.0, 0.0))


def test_weighted_exterior_integral_matches_closed_radial_form():
    p, ball = StableParams(2, 1.0), Ball((0.0, 0.0), 1.0)
    plain = exterior_integral(p, ball, (0.2, 0.0))
    weighted = exterior_integral(p, ball, (0.2, 0.0), radial_weight=np.ones_like)
    assert weighted.value == pytest.approx(plain.value, rel=1e-8)
    assert weighted.error <= 1e-6 * weighted.value


def test_exterior_integral_counts_inner_quadrature_error(monkeypatch):
    p, ball = StableParams(2, 1.0), Ball((0.0, 0.0), 1.0)
    exact_quad = kernels.integrate.quad

    def coarse_inner_quad(f, lo, hi, **kwargs):
        val, err = exact_quad(f, lo, hi, **kwargs)
        return val, (1e-3 * abs(val) if np.isinf(hi) else err)

    monkeypatch.setattr(kernels.integrate, "quad", coarse_inner_quad)
    assert exterior_integral(p, ball, (0.2, 0.0)).value > 0
    with pytest.raises(QuadratureError):
        exterior_integral(p, ball, (0.2, 0.0), radial_weight=np.ones_like)

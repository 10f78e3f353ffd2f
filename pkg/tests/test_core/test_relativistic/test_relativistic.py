import numpy as np
import pytest

from stablelab.core.kernels import StableParams, riesz_constant
from stablelab.core.relativistic import (
    CANCELLATION_RADIUS,
    F_m,
    RelativisticParams,
    fit_quadratic_bound,
    jump_density_relativistic,
    killing_decomposition_gap,
    levy_density_relativistic,
    one_minus_psi,
    psi,
    psi_closed,
    q_m_profile,
)
from stablelab.exceptions import DegenerateConfigurationError, ParameterError


@pytest.fixture
def rel():
    return RelativisticParams(StableParams(2, 1.0), 1.0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_psi_is_one_at_the_origin(alpha):
    p = RelativisticParams(StableParams(3, alpha), 2.0)
    assert psi(p, 0.0) == pytest.approx(1.0, abs=1e-8)
    assert psi_closed(p, 0.0) == 1.0


def test_quadrature_and_bessel_forms_agree(rel):
    r = np.array([0.01, 0.5, 2.0, 5.0])
    np.testing.assert_allclose(psi(rel, r), psi_closed(rel, r), rtol=1e-7)


def test_psi_is_decreasing_and_bounded(rel):
    vals = psi_closed(rel, np.linspace(0.0, 10.0, 201))
    assert np.all(np.diff(vals) < 0)
    assert np.all((vals > 0) & (vals <= 1))


def test_one_minus_psi_small_radius_asymptotics(rel):
    # 1 - psi(r) ~ r^2 / (4 (nu - 1)) as r -> 0
    r = 1e-4
    assert one_minus_psi(rel, r) == pytest.approx(r * r / (4 * (rel.nu - 1)), rel=1e-3)


def test_one_minus_psi_is_continuous_across_the_switch(rel):
    lo = one_minus_psi(rel, CANCELLATION_RADIUS * (1 - 1e-9))
    hi = one_minus_psi(rel, CANCELLATION_RADIUS * (1 + 1e-9))
    assert lo == pytest.approx(hi, rel=1e-6)
    assert one_minus_psi(rel, 0.5) == pytest.approx(1.0 - psi(rel, 0.5), rel=1e-7)


def test_levy_density_is_dominated_by_the_stable_one(rel):
    x = np.array([[0.1, 0.0], [1.0, 1.0], [3.0, -2.0]])
    stable = riesz_constant(rel.base) * np.linalg.norm(x, axis=1) ** -3
    nu = levy_density_relativistic(rel, x)
    assert np.all(nu <= stable)
    assert np.all(nu > 0)
    with pytest.raises(DegenerateConfigurationError):
        levy_density_relativistic(rel, (0.0, 0.0))


def test_jump_density_and_F_m(rel):
    x, y = np.array([0.0, 0.0]), np.array([0.3, 0.4])
    f = F_m(rel, x, y)
    assert -1.0 < f <= 0.0
    ratio = jump_density_relativistic(rel, x, y) * 2 / (riesz_constant(rel.base) * 0.5 ** -3)
    assert ratio == pytest.approx(1.0 + f, rel=1e-9)


def test_quadratic_bound_fit(rel):
    fit = fit_quadratic_bound(rel, np.geomspace(1e-3, 0.1, 20))
    assert fit.slope == pytest.approx(2.0, abs=0.05)
    assert fit.r2 >= 0.99
    assert fit.c > 0
    with pytest.raises(ParameterError):
        fit_quadratic_bound(rel, [0.5, 2.0])


def test_killing_density_splits_into_stable_part_and_q_m(rel, unit_ball):
    assert killing_decomposition_gap(rel, unit_ball, (0.3, 0.2)) < 1e-5


def test_q_m_profile_is_nonpositive_and_sorted(rel, unit_ball):
    table = q_m_profile(rel, unit_ball, n_grid=4)
    assert list(table.columns) == ["depth", "q_m", "error"]
    assert table["depth"].is_monotonic_increasing
    assert (table["q_m"] < 0).all()


def test_mass_must_be_positive():
    with pytest.raises(ParameterError):
        RelativisticParams(StableParams(2, 1.0), 0.0)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablelab.core.geometry import Ball, mutual_scale, rho
from stablelab.core.green import BallGreenOracle
from stablelab.core.kernels import StableParams
from stablelab.exceptions import DegenerateConfigurationError, DomainError, ParameterError
from stablelab.lab.inequality_lab import (
    DEFAULT_DELTAS,
    RatioRecord,
    carleson_check,
    classical_rhs,
    counterexample_points,
    counterexample_sweep,
    elementary_ineq_check,
    fit_3g,
    fit_classical_3g,
    g_values,
    growth_check,
    intermediate_bound_check,
    threeg_lhs,
    threeg_rhs,
)
from stablelab.lab.sampling import sample_tuples

positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(positive, positive, positive)
def test_elementary_inequality_always_holds(a, b, c):
    assert elementary_ineq_check(a, b, c)


def test_elementary_inequality_rejects_nonpositive():
    with pytest.raises(ParameterError):
        elementary_ineq_check(1.0, 0.0, 1.0)


def test_rhs_without_correction_is_the_power_product(params):
    x, y, z, w = (np.array(v) for v in ((0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5)))
    h = threeg_rhs(params, x, y, z, w, 0.0)
    assert h == pytest.approx((0.5 / (0.5 * 0.5)) ** 1.0)
    assert threeg_rhs(params, x, y, z, w, 0.5) >= h


def test_lhs_rejects_degenerate_tuples(oracle):
    p = (0.1, 0.1)
    with pytest.raises(DegenerateConfigurationError):
        threeg_lhs(oracle, p, p, (0.2, 0.0), (0.3, 0.0))


def test_classical_rhs(params):
    assert classical_rhs(params, (0.0, 0.0), (0.5, 0.0), (0.5, 0.25)) == pytest.approx(2.0 + 4.0)


def test_counterexample_points_share_their_scale():
    ball = Ball((0.0, 0.0), 1.0)
    x, y, z, w = counterexample_points(ball, 0.01, 0.5)
    np.testing.assert_allclose(rho(ball, np.stack([x, y, z, w])), 0.01, rtol=1e-9)
    assert np.linalg.norm(x - w) == pytest.approx(0.5)
    assert mutual_scale(ball, x, y) == pytest.approx(0.01)
    assert mutual_scale(ball, z, w) == pytest.approx(0.01)
    with pytest.raises(ParameterError):
        counterexample_points(ball, 0.4, 0.1)


def test_counterexample_sweep_separates_the_two_bounds():
    ball = Ball((0.0, 0.0), 1.0)
    table = counterexample_sweep(StableParams(2, 1.0), ball, DEFAULT_DELTAS)
    assert len(table) == len(DEFAULT_DELTAS)
    assert np.all(np.diff(table["factor_free_ratio"]) > 0)
    last = table["factored_ratio"].to_numpy()[-2:]
    assert abs(last[1] - last[0]) / abs(last[0]) <= 0.10


def test_fit_3g_report(oracle, unit_ball, ball_frame):
    report = fit_3g(oracle, unit_ball, ball_frame, 2000, gamma_grid=[0.25, 0.5, 1.0], seed=3)
    assert report.n_tuples <= 2000
    assert set(report.stability_curve["label"]) == {"gamma=0.25", "gamma=0.5", "gamma=1"}
    assert report.gamma_hat is None or report.gamma_hat in (0.25, 0.5, 1.0)
    assert report.grid_resolution == pytest.approx(0.5)
    assert np.isfinite(report.c_hat) and report.c_hat > 0
    records = list(RatioRecord.from_frame(report.table.head(3)))
    assert records[0].green_source == "oracle"
    assert records[0].ratio == pytest.approx(records[0].lhs / records[0].rhs)


def test_fit_3g_rejects_negative_gamma(oracle, unit_ball, ball_frame):
    with pytest.raises(ParameterError):
        fit_3g(oracle, unit_ball, ball_frame, 10, gamma_grid=[-0.1])


def test_classical_3g_on_the_ball(oracle, unit_ball):
    report = fit_classical_3g(oracle, unit_ball, 2000, seed=4)
    assert report.gamma_hat is None
    assert np.isfinite(report.c_hat) and report.c_hat > 0
    assert list(report.table.columns) == ["lhs", "rhs", "ratio"]


def test_growth_exponent_is_below_alpha(oracle, unit_ball, ball_frame, params):
    report = growth_check(oracle, unit_ball, ball_frame, (1.0, 0.0), 0.1)
    # boundary decay of the ball Green function is rho^(alpha/2)
    assert report.gamma_hat == pytest.approx(params.alpha / 2, abs=0.1)
    assert report.gamma_hat < params.alpha - 0.01
    assert report.accepted
    assert report.c_hat > 0
    with pytest.raises(ParameterError):
        growth_check(oracle, unit_ball, ball_frame, (1.0, 0.0), 0.1, s_grid=[0.2])


def test_carleson_ratio(oracle, unit_ball, ball_frame):
    r = ball_frame.kappa * ball_frame.R / 8
    report = carleson_check(oracle, unit_ball, ball_frame, (1.0, 0.0), r, ball_frame.z0, 1000, seed=2)
    assert len(report.table) == 1000
    assert np.isfinite(report.c_hat) and report.c_hat > 0
    with pytest.raises(ParameterError):
        carleson_check(oracle, unit_ball, ball_frame, (1.0, 0.0), 0.5, ball_frame.z0, 10)
    with pytest.raises(DomainError):
        carleson_check(oracle, unit_ball, ball_frame, (1.0, 0.0), r, (0.9, 0.0), 10)


def test_g_is_capped_at_z0(oracle, ball_frame):
    vals = g_values(oracle, ball_frame, np.array([[0.0, 0.0], [0.5, 0.0]]))
    assert vals[0] == pytest.approx(ball_frame.c1)
    assert 0 < vals[1] <= ball_frame.c1


def test_intermediate_bound_columns(oracle, unit_ball, ball_frame):
    tuples = sample_tuples(unit_ball, 300, 4, 6)
    report = intermediate_bound_check(oracle, unit_ball, ball_frame, tuples, 0.5)
    expected = {
        "main",
        "triangle",
        "g_dominated_by_witness",
        "witness_monotone",
        "witness_floor",
        "witness_growth",
        "pair_factor_xw",
        "pair_factor_yz",
        "two_sided_green",
        "boundary_quotient",
    }
    assert set(report.columns) == expected
    assert np.isfinite(report.columns["main"]) and report.columns["main"] > 0
    assert report.columns["two_sided_green"] >= 1.0
    assert report.gamma_hat == 0.5

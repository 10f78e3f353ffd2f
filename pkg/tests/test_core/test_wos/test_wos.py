import numpy as np
import pytest
from scipy import stats

from stablelab.core.geometry import rho
from stablelab.core.kernels import (
    StableParams,
    ball_exit_radial_cdf,
    ball_green,
    ball_harmonic_measure,
)
from stablelab.core.wos import (
    EstimatorResult,
    estimate_g,
    estimate_green,
    estimate_martin,
    exit_histogram,
    exit_radii,
    expected_jump_sum,
    harnack_band,
    run_walk,
    sample_ball_exit,
    simulate_walks,
)
from stablelab.exceptions import DegenerateConfigurationError, DomainError, ParameterError


def count_jumps(a, b):
    return np.ones(a.shape[0])


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_ball_exit_radii_follow_the_radial_law(alpha):
    p = StableParams(2, alpha)
    z = sample_ball_exit(p, (0.0, 0.0), 1.0, 2024, size=100_000)
    s = np.linalg.norm(z, axis=1)
    assert np.all(s > 1.0)
    result = stats.kstest(s, lambda v: ball_exit_radial_cdf(p, 1.0, v))
    assert result.pvalue >= 0.01


@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.9])
def test_exit_radii_invert_the_cdf(alpha):
    p = StableParams(3, alpha)
    u = np.linspace(0.0, 0.999, 101)
    s = exit_radii(p, u)
    assert np.all(s > 1.0)
    np.testing.assert_allclose(ball_exit_radial_cdf(p, 1.0, s), u, atol=1e-10)


def test_sample_ball_exit_scales_and_shifts():
    p = StableParams(2, 1.0)
    z = sample_ball_exit(p, (5.0, -1.0), 0.5, 1, size=1000)
    assert np.all(np.linalg.norm(z - (5.0, -1.0), axis=1) > 0.5)
    assert sample_ball_exit(p, (0.0, 0.0), 1.0, 1).shape == (2,)
    with pytest.raises(ParameterError):
        sample_ball_exit(p, (0.0, 0.0), 0.0, 1)


def test_walk_from_ball_center_exits_in_one_step(unit_ball, params):
    chain = run_walk(params, unit_ball, (0.0, 0.0), 3)
    assert chain.n_steps == 1
    assert not chain.truncated
    assert not unit_ball.contains(chain.exit_point[None, :])[0]


def test_walk_records_steps(unit_square, params):
    chain = run_walk(params, unit_square, (0.5, 0.5), 9, theta=0.5)
    for center, radius, _ in chain.steps:
        assert radius == pytest.approx(0.5 * rho(unit_square, center))
    assert chain.truncated == bool(unit_square.contains(chain.exit_point[None, :])[0])


def test_walk_must_start_inside(unit_ball, params):
    with pytest.raises(DomainError):
        run_walk(params, unit_ball, (2.0, 0.0), 1)
    with pytest.raises(ParameterError):
        run_walk(params, unit_ball, (0.0, 0.0), 1, theta=1.5)


def test_simulated_exits_lie_outside(unit_square, params):
    batch = simulate_walks(params, unit_square, (0.3, 0.6), 500, 5)
    done = ~batch.truncated
    assert done.all()
    assert not unit_square.contains(batch.exits[done]).any()
    assert np.all(batch.n_steps >= 1)


def test_green_estimate_matches_ball_oracle(unit_ball, params):
    x, y = np.array([0.2, 0.0]), np.array([-0.3, 0.2])
    truth = ball_green(params, 1.0, x, y)
    res = estimate_green(params, unit_ball, x, y, 20_000, seed=11)
    assert abs(res.value - truth) <= max(0.05 * truth, 4 * res.stderr)
    assert res.n_samples == 20_000
    assert res.extras["n_truncated"] == 0


def test_green_estimate_does_not_depend_on_worker_count(unit_square, params):
    kw = dict(batch_size=250)
    one = estimate_green(params, unit_square, (0.3, 0.4), (0.6, 0.5), 1000, seed=5, workers=1, **kw)
    two = estimate_green(params, unit_square, (0.3, 0.4), (0.6, 0.5), 1000, seed=5, workers=2, **kw)
    assert one.value == two.value
    assert one.stderr == two.stderr


def test_green_estimate_validates_points(unit_ball, params):
    with pytest.raises(DegenerateConfigurationError):
        estimate_green(params, unit_ball, (0.1, 0.1), (0.1, 0.1), 10)
    with pytest.raises(DomainError):
        estimate_green(params, unit_ball, (1.1, 0.0), (0.1, 0.1), 10)
    with pytest.raises(ParameterError):
        estimate_green(params, unit_ball, (0.2, 0.0), (0.1, 0.1), 0)


def test_g_is_capped_near_z0(unit_ball, params, ball_frame):
    res = estimate_g(ball_frame, params, unit_ball, (0.01, 0.0), 200, seed=1)
    assert res.extras["capped"]
    assert res.value == pytest.approx(ball_frame.c1)
    assert res.stderr == 0.0
    assert res.extras["raw_value"] > ball_frame.c1


def test_martin_kernel_at_reference_point_is_one(unit_ball, params):
    ys = [(0.9, 0.0), (0.95, 0.0), (0.99, 0.0)]
    seq = estimate_martin(params, unit_ball, (0.0, 0.0), (0.0, 0.0), ys, 100, seed=2)
    assert [r.value for r in seq] == [1.0, 1.0, 1.0]
    assert seq.stabilized


def test_martin_sequence_table(unit_ball, params):
    ys = [(0.8, 0.0), (0.9, 0.0), (0.95, 0.0)]
    seq = estimate_martin(params, unit_ball, (0.0, 0.0), (0.3, 0.0), ys, 400, seed=2)
    frame = seq.to_frame()
    assert len(seq) == 3
    assert {"value", "stderr", "green_x", "green_x0", "rho_y"} <= set(frame.columns)
    assert (frame["value"] > 0).all()


def test_harnack_band_constant(unit_ball, params):
    band = harnack_band(params, unit_ball, [(0.1, 0.0), (0.0, 0.1)], [(0.0, -0.1), (-0.1, 0.0)], (0.6, 0.0), 400, seed=4)
    assert len(band.table) == 2
    assert band.constant >= 1.0


def test_jump_sum_is_zero_when_the_first_jump_exits(unit_ball, params):
    res = expected_jump_sum(params, unit_ball, (0.0, 0.0), count_jumps, 300, seed=1)
    assert res.value == 0.0


def test_jump_sum_counts_interior_jumps(unit_square, params):
    res = expected_jump_sum(params, unit_square, (0.5, 0.5), count_jumps, 500, seed=1)
    assert res.value > 0.0


def test_exit_histogram_matches_harmonic_measure(unit_ball, params):
    edges = [1.0, 1.5, 3.0, np.inf]
    emp = exit_histogram(params, unit_ball, (0.3, 0.0), 20_000, edges, (0.0, 0.0), seed=8)
    exact = ball_harmonic_measure(params, (0.0, 0.0), 1.0, (0.3, 0.0), edges)
    np.testing.assert_allclose(emp, exact, atol=0.02)


def test_estimator_result_validation():
    with pytest.raises(ValueError):
        EstimatorResult(1.0, -1.0, 10, 0, 0.0)
    res = EstimatorResult(1.0, 0.1, 10, 0, 0.0, extras={"n_truncated": 0})
    assert res.as_dict()["n_truncated"] == 0

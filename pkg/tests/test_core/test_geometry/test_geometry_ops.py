import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablelab.core.geometry import (
    Ball,
    BallUnion,
    Box,
    KFatCharacteristics,
    build_frame,
    bset_witness,
    corkscrew,
    kfat_certify,
    mutual_scale,
    rho,
    sample_interior,
    sample_shell,
)
from stablelab.exceptions import CorkscrewError, DomainError, ParameterError

coords = st.floats(min_value=-0.7, max_value=0.7, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(coords, coords, coords, coords)
def test_rho_is_one_lipschitz(a, b, c, e):
    D = Ball((0.0, 0.0), 1.0)
    x, y = np.array([a, b]), np.array([c, e])
    assert abs(rho(D, x) - rho(D, y)) <= np.linalg.norm(x - y) + 1e-12


def test_ball_corkscrew_moves_half_radius_inward(unit_ball, ball_chars):
    A = corkscrew(unit_ball, (1.0, 0.0), 0.5, chars=ball_chars)
    np.testing.assert_allclose(A, (0.75, 0.0))


def test_corkscrew_ball_is_contained(unit_ball, ball_chars, rng):
    Q = np.array([0.0, 1.0])
    r = 0.5
    A = corkscrew(unit_ball, Q, r, chars=ball_chars)
    k = ball_chars.kappa * r * (1 - 1e-9)
    dirs = rng.standard_normal((10_000, 2))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    pts = A + k * dirs * np.sqrt(rng.random(10_000))[:, None]
    assert unit_ball.contains(pts).all()
    assert np.all(np.linalg.norm(pts - Q, axis=1) < r)


def test_box_corkscrew_on_face(unit_square):
    A = corkscrew(unit_square, (0.5, 0.0), 0.2)
    np.testing.assert_allclose(A, (0.5, 0.1))


def test_tangent_union_corkscrew_uses_first_ball():
    D = BallUnion((Ball((-1.0, 0.0), 1.0), Ball((1.0, 0.0), 1.0)))
    A = corkscrew(D, (0.0, 0.0), 0.5, chars=KFatCharacteristics(1.0, 0.5))
    np.testing.assert_allclose(A, (-0.25, 0.0), atol=1e-12)


def test_corkscrew_rejects_bad_radius_and_interior_base(unit_ball, ball_chars):
    with pytest.raises(CorkscrewError):
        corkscrew(unit_ball, (1.0, 0.0), 1.5, chars=ball_chars)
    with pytest.raises(CorkscrewError):
        corkscrew(unit_ball, (1.0, 0.0), 0.0, chars=ball_chars)
    with pytest.raises(DomainError):
        corkscrew(unit_ball, (0.5, 0.0), 0.1, chars=ball_chars)


def test_mutual_scale(unit_ball):
    x, y = np.array([0.9, 0.0]), np.array([0.0, 0.5])
    assert mutual_scale(unit_ball, x, y) == pytest.approx(np.hypot(0.9, 0.5))
    assert mutual_scale(unit_ball, x, x) == pytest.approx(0.1)
    assert mutual_scale(unit_ball, x, y) == mutual_scale(unit_ball, y, x)


def test_witness_far_pair_is_z0(unit_ball, ball_frame):
    z = bset_witness(unit_ball, ball_frame, (0.1, 0.0), (0.0, 0.2))
    np.testing.assert_allclose(z, ball_frame.z0)


def test_witness_near_boundary_pair_is_corkscrew(unit_ball, ball_frame):
    assert ball_frame.eps1 == pytest.approx(0.03125)
    x, y = np.array([0.98, 0.0]), np.array([0.975, 0.005])
    A = bset_witness(unit_ball, ball_frame, x, y)
    r = mutual_scale(unit_ball, x, y)
    assert r < ball_frame.eps1
    np.testing.assert_allclose(A, (1.0 - r / 2, 0.0))
    assert rho(unit_ball, A) > r / ball_frame.M
    assert max(np.linalg.norm(x - A), np.linalg.norm(y - A)) < 5 * r


def test_certify_ball_passes(unit_ball, ball_chars, rng):
    report = kfat_certify(unit_ball, ball_chars, n_boundary=20, n_radii=6, rng=rng, n_ball_points=500)
    assert report.passed
    assert report.failures.empty
    assert report.kappa_max == pytest.approx(0.5)


def test_certify_box_with_admissible_kappa(unit_square, rng):
    chars = KFatCharacteristics(0.5, 0.4)
    report = kfat_certify(unit_square, chars, n_boundary=30, n_radii=5, rng=rng, n_ball_points=300)
    assert report.passed


def test_certify_box_rejects_large_kappa(unit_square, rng):
    report = kfat_certify(unit_square, KFatCharacteristics(0.5, 0.5), 200, 5, rng, n_ball_points=0)
    assert not report.passed
    assert (report.failures["reason"] == "analytic containment").all()


def test_kappa_above_half_is_rejected():
    with pytest.raises(ParameterError):
        KFatCharacteristics(1.0, 0.9)


def test_frame_defaults_to_deepest_point(unit_ball, ball_chars):
    frame = build_frame(unit_ball, ball_chars)
    np.testing.assert_allclose(frame.z0, (0.0, 0.0), atol=1e-12)
    assert frame.rho_z0 == pytest.approx(1.0)
    assert frame.M == pytest.approx(4.0)


def test_frame_rejects_shallow_z0(unit_ball, ball_chars):
    with pytest.raises(ParameterError):
        build_frame(unit_ball, ball_chars, z0=(0.5, 0.0))


def test_sample_shell_stays_within_eps(unit_square, rng):
    pts = sample_shell(unit_square, 2_000, 0.01, rng)
    depth = rho(unit_square, pts)
    assert unit_square.contains(pts).all()
    assert np.all(depth < 0.01)


def test_sample_interior_is_inside():
    D = Box((0.0, 0.0), (2.0, 1.0))
    pts = sample_interior(D, 500, 3)
    assert pts.shape == (500, 2)
    assert D.contains(pts).all()

import math

import numpy as np
import pytest

from stablelab.core.geometry import (
    Ball,
    BallUnion,
    Box,
    LipschitzHypograph,
    LShape,
    make_domain,
    nearest_boundary_point,
    rho,
)
from stablelab.exceptions import DomainError


def test_ball_distance_and_volume(unit_ball):
    assert rho(unit_ball, (0.0, 0.0)) == pytest.approx(1.0)
    assert rho(unit_ball, (0.6, 0.0)) == pytest.approx(0.4)
    assert unit_ball.volume == pytest.approx(math.pi)
    assert unit_ball.diameter == 2.0


def test_box_distance(unit_square):
    assert rho(unit_square, (0.5, 0.1)) == pytest.approx(0.1)
    assert rho(unit_square, (0.25, 0.5)) == pytest.approx(0.25)
    # outside points are measured to the closed box
    assert rho(unit_square, (1.5, 0.5)) == pytest.approx(0.5)


def test_box_center_tie_goes_to_first_axis_lower_face(unit_square):
    Q = nearest_boundary_point(unit_square, (0.5, 0.5))
    np.testing.assert_allclose(Q, (0.0, 0.5))


def test_lshape_distance_near_reentrant_corner():
    D = LShape((0.0, 0.0), (2.0, 2.0), (1.0, 1.0))
    assert rho(D, (0.9, 0.95)) == pytest.approx(math.hypot(0.1, 0.05))
    assert rho(D, (0.5, 1.5)) == pytest.approx(0.5)
    assert D.volume == pytest.approx(3.0)
    Q = nearest_boundary_point(D, (0.9, 0.95))
    np.testing.assert_allclose(Q, (1.0, 1.0), atol=1e-12)


def test_lshape_excludes_notch():
    D = LShape((0.0, 0.0), (2.0, 2.0), (1.0, 1.0))
    assert not D.contains(np.array([[1.5, 1.5]]))[0]
    assert D.contains(np.array([[1.5, 0.5]]))[0]


def test_ball_union_distance_picks_closest_ball():
    D = BallUnion((Ball((-1.0, 0.0), 1.0), Ball((1.0, 0.0), 1.0)))
    assert rho(D, (-1.0, 0.0)) == pytest.approx(1.0)
    assert rho(D, (0.5, 0.0)) == pytest.approx(0.5)
    assert D.volume == pytest.approx(2 * math.pi)


def test_hypograph_distance_matches_brute_force():
    D = LipschitzHypograph((0.0,), (2.0,), 0.0, 1.0, 0.1, 2.0)
    x = np.array([1.0, 0.8])
    s = np.linspace(0.0, 2.0, 200_001)
    graph = np.hypot(s - x[0], 1.0 + 0.1 * np.cos(2.0 * s) - x[1]).min()
    brute = min(graph, x[1], x[0], 2.0 - x[0])
    assert rho(D, x) == pytest.approx(brute, abs=1e-6)
    assert D.lipschitz == pytest.approx(0.2)


def test_make_domain_round_trips_describe(unit_square):
    D = make_domain(unit_square.describe())
    assert D == unit_square
    union = make_domain(
        {
            "shape": "ball_union",
            "balls": [{"center": [-1, 0], "radius": 1}, {"center": [1, 0], "radius": 1}],
        }
    )
    assert len(union.balls) == 2


@pytest.mark.parametrize(
    "description",
    [
        {"shape": "torus"},
        {"shape": "ball", "center": [0, 0], "radius": -1},
        {"shape": "box", "lo": [0, 0], "hi": [1, 0]},
        {"shape": "l_shape", "lo": [0, 0], "hi": [2, 2], "notch": [3, 1]},
    ],
)
def test_make_domain_rejects_bad_descriptions(description):
    with pytest.raises(DomainError):
        make_domain(description)


def test_nearest_boundary_point_requires_interior(unit_ball):
    with pytest.raises(DomainError):
        nearest_boundary_point(unit_ball, (2.0, 0.0))

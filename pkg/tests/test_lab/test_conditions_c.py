from dataclasses import dataclass

import numpy as np
import pytest

from stablelab.core.geometry import Ball
from stablelab.core.green import BallGreenOracle
from stablelab.core.kernels import StableParams
from stablelab.exceptions import DomainError, ParameterError
from stablelab.lab.conditions_c import c4_ratio, check_C1, check_C2, check_C3, check_C4


@dataclass(frozen=True)
class RhoDividedGreen:
    """The ball Green function divided by rho(y): violates the upper Riesz bound."""

    p: StableParams
    domain: Ball

    def evaluate(self, x, y, seed=None):
        vals, errs = BallGreenOracle(self.p, self.domain).evaluate(x, y)
        depth = -self.domain.signed_distance(np.atleast_2d(y))
        return vals / depth, errs


def test_c1_growth_on_the_ball(oracle, unit_ball, ball_frame, params):
    report = check_C1(oracle, unit_ball, ball_frame, n_boundary=3, seed=1)
    assert report.accepted
    assert report.gamma_hat < params.alpha
    assert report.c_hat > 0
    assert set(report.table["Q"]) == {0, 1, 2}


def test_c1_skips_the_exponent_test_without_stable_scaling(oracle, unit_ball, ball_frame):
    report = check_C1(oracle, unit_ball, ball_frame, Q_points=[(0.0, 1.0)], stable_scaling=False)
    assert report.n_tuples == 1
    assert report.accepted


def test_c2_sups_grow_with_L(oracle, unit_ball):
    report = check_C2(oracle, unit_ball, n=2000, L_values=[1.0, 2.0, 4.0], seed=2)
    sups = [report.columns[k] for k in ("L=1", "L=2", "L=4")]
    assert sups == sorted(sups)
    assert report.c_hat == sups[-1]
    with pytest.raises(ParameterError):
        check_C2(oracle, unit_ball, n=10, L_values=[0.0])


def test_c3_holds_for_the_ball(oracle, params, unit_ball):
    report = check_C3(oracle, params, unit_ball, n=4000, seed=3)
    assert report.accepted
    assert set(report.columns) == {"upper", "lower"}


def test_c3_catches_a_corrupted_green_function(params, unit_ball):
    bad = RhoDividedGreen(params, unit_ball)
    report = check_C3(bad, params, unit_ball, n=4000, seed=3)
    assert not report.accepted
    assert any("upper" in note for note in report.notes)


def test_c4_on_the_ball(oracle, unit_ball, ball_frame):
    report = check_C4(oracle, unit_ball, ball_frame, n=1000, seed=4)
    assert len(report.table) == 1000
    assert np.isfinite(report.c_hat) and report.c_hat > 0


def test_c4_ratio_validates_geometry(oracle, unit_ball, ball_frame):
    Q = (1.0, 0.0)
    r = 0.4
    z1, z2 = (0.98, 0.0), (0.97, 0.01)
    x, y = (-0.5, 0.0), (0.0, 0.5)
    ratio = c4_ratio(oracle, unit_ball, ball_frame, Q, r, x, y, z1, z2)
    assert ratio > 0
    with pytest.raises(DomainError):
        c4_ratio(oracle, unit_ball, ball_frame, Q, r, (0.8, 0.0), y, z1, z2)
    with pytest.raises(DomainError):
        c4_ratio(oracle, unit_ball, ball_frame, Q, r, x, y, (0.5, 0.0), z2)
    with pytest.raises(DomainError):
        c4_ratio(oracle, unit_ball, ball_frame, (0.5, 0.0), r, x, y, z1, z2)

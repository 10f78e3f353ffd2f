import numpy as np
import pytest

from stablelab.core.geometry import Ball, Box, KFatCharacteristics, build_frame
from stablelab.core.green import BallGreenOracle
from stablelab.core.kernels import StableParams, default_c0


@pytest.fixture
def unit_ball():
    return Ball((0.0, 0.0), 1.0)


@pytest.fixture
def unit_square():
    return Box((0.0, 0.0), (1.0, 1.0))


@pytest.fixture
def params():
    return StableParams(2, 1.0)


@pytest.fixture
def ball_chars():
    # M = 4, so 2R/M = 0.75 < rho(0) = 1 < R
    return KFatCharacteristics(1.5, 0.5)


@pytest.fixture
def ball_frame(unit_ball, ball_chars, params):
    frame = build_frame(unit_ball, ball_chars, z0=(0.0, 0.0))
    return frame.with_green_constant(params.d, params.alpha, default_c0(params))


@pytest.fixture
def oracle(params, unit_ball):
    return BallGreenOracle(params, unit_ball)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


@pytest.fixture
def ball_config():
    return {
        "study": "threeg",
        "domain": {"shape": "ball", "center": [0.0, 0.0], "radius": 1.0},
        "process": {"d": 2, "alpha": 1.0},
        "kfat": {"R": 1.5, "kappa": 0.5},
        "frame": {"z0": [0.0, 0.0]},
        "n_samples": 400,
        "seed": 7,
    }

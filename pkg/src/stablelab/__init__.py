"""
stablelab - a numerical potential-theory laboratory for rotationally
invariant stable and relativistic stable processes on kappa-fat domains.

Exact ball-exit simulation and walk-on-spheres estimation of Green
functions, harmonic measure and Martin kernels, with harnesses that test
3G-type inequalities, Kato-class gauges and the Green-function conditions
they rest on.
"""

__version__ = "0.1.0"
__license__ = "MIT"

# Core numerics
from .core.geometry import Ball, Box, BallUnion, LShape, LipschitzHypograph, KFatCharacteristics, make_domain
from .core.kernels import StableParams
from .core.relativistic import RelativisticParams
from .core.green import BallGreenOracle, MonteCarloGreen, TabulatedGreen
from .core.wos import EstimatorResult, estimate_green

# Studies
from .config import ExperimentConfig, load_config
from .api import run_study

from .decorators import log_calls, profile_execution

__all__ = [
    "Ball",
    "Box",
    "BallUnion",
    "LShape",
    "LipschitzHypograph",
    "KFatCharacteristics",
    "make_domain",
    "StableParams",
    "RelativisticParams",
    "BallGreenOracle",
    "MonteCarloGreen",
    "TabulatedGreen",
    "EstimatorResult",
    "estimate_green",
    "ExperimentConfig",
    "load_config",
    "run_study",
    "log_calls",
    "profile_execution",
]

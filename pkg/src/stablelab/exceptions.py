"""
Exception hierarchy for stablelab.

Numerical outcomes (failed certification, unstable sups, divergent integrals)
are reported as data in result objects; the exceptions below are reserved for
violated preconditions and failed numerical contracts.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple


class StableLabError(Exception):
    """Base class for all errors raised by stablelab."""


class ParameterError(StableLabError, ValueError):
    """Invalid process, geometry or sampling parameter."""


class DomainError(StableLabError, ValueError):
    """A point lies on the wrong side of a domain, or a shape is malformed."""


class DegenerateConfigurationError(StableLabError, ValueError):
    """Coincident points where distinct points are required."""


class CorkscrewError(StableLabError):
    """A corkscrew point could not be built or failed its containment check."""


class WitnessError(StableLabError):
    """A witness point violates one of the membership inequalities."""


class ProjectionError(StableLabError, RuntimeError):
    """Projection onto a Lipschitz graph did not converge."""


class QuadratureError(StableLabError, RuntimeError):
    """A quadrature or Monte Carlo error estimate exceeded its tolerance."""


class YoungExponentError(StableLabError, ValueError):
    """The admissible interval for a Young exponent is empty."""


class AcceptanceError(StableLabError):
    """A study ran but its numerical acceptance criterion failed."""


class ConfigError(StableLabError):
    """
    Schema violations in an experiment config.

    :param errors: pairs of (dotted field path, message).
    """

    def __init__(self, errors: Sequence[Tuple[str, str]]):
        self.errors: List[Tuple[str, str]] = list(errors)
        lines = [f"{path}: {message}" for path, message in self.errors]
        super().__init__("invalid config:\n  " + "\n  ".join(lines))

"""
Green function evaluators.

Every evaluator answers ``evaluate(x, y) -> (values, errors)`` for row-paired
point arrays. The checker harnesses only talk to this interface, so a
closed-form oracle, a walk-on-spheres estimator and a precomputed table are
interchangeable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol, Tuple

import numpy as np
from sklearn.neighbors import KDTree

from stablelab.core.geometry import Ball, DomainSpec, as_points, sample_interior, _norm
from stablelab.core.kernels import StableParams, ball_green
from stablelab.core.rng import as_seed_sequence, child_sequences
from stablelab.exceptions import DegenerateConfigurationError, ParameterError

logger = logging.getLogger(__name__)


class GreenEvaluator(Protocol):
    p: StableParams
    domain: DomainSpec

    def evaluate(self, x, y, seed=None) -> Tuple[np.ndarray, np.ndarray]:
        """Values and errors at the pairs; random evaluators draw from ``seed`` when given."""
        ...


@dataclass(frozen=True)
class BallGreenOracle:
    """Closed-form Green function of a ball; errors are zero."""

    p: StableParams
    domain: Ball

    def evaluate(self, x, y, seed=None):
        xs, _ = as_points(x, self.p.d)
        ys, _ = as_points(y, self.p.d)
        vals = np.atleast_1d(ball_green(self.p, self.domain.radius, xs, ys, center=self.domain.c))
        return vals, np.zeros_like(vals)


@dataclass
class MonteCarloGreen:
    """
    Walk-on-spheres estimates, one independent stream per evaluated pair.

    Pair ``i`` draws from child ``i`` of the call seed. Without one, the
    ``k``-th call uses child ``k`` of the root seed, so repeated calls never
    reuse randomness. Work fanned out to other processes must pass ``seed``:
    a pickled copy of the counter is not shared.
    """

    p: StableParams
    domain: DomainSpec
    n: int = 2000
    seed: int = 0
    workers: int = 1
    theta: float = 1.0
    _calls: int = field(default=0, repr=False)

    def evaluate(self, x, y, seed=None):
        from stablelab.core.wos import estimate_green

        xs, _ = as_points(x, self.p.d)
        ys, _ = as_points(y, self.p.d)
        if seed is None:
            call = as_seed_sequence(self.seed).spawn(self._calls + 1)[-1]
            self._calls += 1
        else:
            call = as_seed_sequence(seed)
        streams = child_sequences(call, xs.shape[0])
        vals = np.empty(xs.shape[0])
        errs = np.empty(xs.shape[0])
        for i, (u, v, ss) in enumerate(zip(xs, ys, streams)):
            res = estimate_green(self.p, self.domain, u, v, self.n, ss, workers=self.workers, theta=self.theta)
            vals[i], errs[i] = res.value, res.stderr
        return vals, errs


@dataclass
class TabulatedGreen:
    """
    Nearest-neighbour interpolation of a table of Green values.

    The table stores log(G |x-y|^(d-alpha)), which stays bounded near the
    diagonal, at points (x, y) of R^(2d), both orders included. A query
    averages its ``k`` nearest rows with inverse-distance weights; the
    reported error is the spread of those rows.
    """

    p: StableParams
    domain: DomainSpec
    pairs: np.ndarray
    log_scaled: np.ndarray
    k: int = 4
    tree: KDTree = field(init=False, repr=False)

    def __post_init__(self):
        if self.pairs.shape[0] != self.log_scaled.shape[0]:
            raise ParameterError("table pairs and values must have the same length")
        if self.pairs.shape[0] < self.k:
            raise ParameterError("table has fewer rows than neighbours")
        self.tree = KDTree(self.pairs)

    @classmethod
    def from_evaluator(cls, source: GreenEvaluator, n_pairs: int, seed=None, k: int = 4) -> "TabulatedGreen":
        gen = np.random.Generator(np.random.Philox(as_seed_sequence(seed)))
        D, p = source.domain, source.p
        x = sample_interior(D, n_pairs, gen)
        y = sample_interior(D, n_pairs, gen)
        keep = _norm(x - y) > 0
        x, y = x[keep], y[keep]
        vals, _ = source.evaluate(x, y)
        logger.debug("tabulated %d Green values", vals.size)
        return cls.from_arrays(p, D, x, y, vals, k=k)

    @classmethod
    def from_arrays(cls, p: StableParams, domain: DomainSpec, x, y, g, k: int = 4) -> "TabulatedGreen":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape[1] != p.d:
            raise ParameterError(f"table dimension {x.shape[1]} does not match d={p.d}")
        scaled = np.log(np.asarray(g, dtype=float) * _norm(x - y) ** (p.d - p.alpha))
        pairs = np.concatenate([np.hstack([x, y]), np.hstack([y, x])])
        return cls(p, domain, pairs, np.concatenate([scaled, scaled]), k=k)

    @classmethod
    def from_file(cls, p: StableParams, domain: DomainSpec, path, k: int = 4) -> "TabulatedGreen":
        """Load a ``x0..,y0..,g,g_err`` table."""
        from stablelab.core.io.io_utils import read_green_table

        x, y, g, _ = read_green_table(path)
        logger.info("loaded %d tabulated Green values from %s", g.size, path)
        return cls.from_arrays(p, domain, x, y, g, k=k)

    def evaluate(self, x, y, seed=None):
        xs, _ = as_points(x, self.p.d)
        ys, _ = as_points(y, self.p.d)
        dist = _norm(xs - ys)
        if np.any(dist == 0):
            raise DegenerateConfigurationError("the two points must be distinct")
        nd, ni = self.tree.query(np.hstack([xs, ys]), k=self.k)
        w = 1.0 / np.maximum(nd, 1e-12)
        w /= w.sum(axis=1, keepdims=True)
        neigh = self.log_scaled[ni]
        logv = np.sum(w * neigh, axis=1)
        spread = neigh.max(axis=1) - neigh.min(axis=1)
        scale = dist ** (self.p.alpha - self.p.d)
        vals = np.exp(logv) * scale
        return vals, vals * spread

"""
Bounded open sets, their distance geometry and the kappa-fat constructions.

Every shape exposes an exact signed distance (negative inside), a nearest
boundary point, a shape-specific corkscrew construction and boundary
sampling. All methods are vectorized over a leading batch axis; the module
level functions accept either a single point of shape ``(d,)`` or a batch of
shape ``(n, d)`` and return matching shapes.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from stablelab.core.rng import RngLike, as_generator
from stablelab.exceptions import (
    CorkscrewError,
    DomainError,
    ParameterError,
    ProjectionError,
    WitnessError,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Tuple[float, ...], list]

# relative tolerance for "this point lies on the boundary"
BOUNDARY_RTOL = 1e-9
# golden-section stop for the Lipschitz-graph projection
PROJECTION_ATOL = 1e-10
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def as_points(x: ArrayLike, d: Optional[int] = None) -> Tuple[np.ndarray, bool]:
    """
    Coerce ``x`` to a float array of shape ``(n, d)``.

    :return: the batch and a flag telling whether a single point was given.
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.ndim != 2:
        raise DomainError(f"points must have shape (d,) or (n, d), got {arr.shape}")
    if d is not None and pts.shape[1] != d:
        raise DomainError(f"points have dimension {pts.shape[1]}, expected {d}")
    if not np.all(np.isfinite(pts)):
        raise DomainError("points must have finite coordinates")
    return pts, single


def _unbatch(values: np.ndarray, single: bool):
    if not single:
        return values
    out = values[0]
    return float(out) if np.ndim(out) == 0 else out


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def unit_directions(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform directions on the unit sphere of R^d."""
    g = rng.standard_normal((n, d))
    return g / _norm(g)[:, None]


def _box_signed_distance(pts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    q = np.abs(pts - mid) - half
    outside = _norm(np.maximum(q, 0.0))
    inside = np.minimum(q.max(axis=1), 0.0)
    return outside + inside


def _box_outside_distance(pts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return _norm(pts - np.clip(pts, lo, hi))


def _box_face_projection(pts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Nearest face point for points inside a box, ties to smallest axis then lower face."""
    n, d = pts.shape
    gaps = np.empty((n, 2 * d))
    gaps[:, 0::2] = pts - lo
    gaps[:, 1::2] = hi - pts
    best = np.argmin(gaps, axis=1)
    axis, upper = np.divmod(best, 2)
    out = pts.copy()
    rows = np.arange(n)
    out[rows, axis] = np.where(upper == 1, hi[axis], lo[axis])
    return out


def _box_corkscrew(
    Q: np.ndarray, r: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> np.ndarray:
    """
    Corkscrew points of an axis-aligned box.

    Face points farther than r/2 from every other face move r/2 along the
    inward normal. Every other point is projected onto the box shrunk by
    r/(1+sqrt(d)), which keeps a ball of that radius inside B(Q, r).
    """
    n, d = Q.shape
    gaps = np.empty((n, 2 * d))
    gaps[:, 0::2] = Q - lo
    gaps[:, 1::2] = hi - Q
    face = np.argmin(gaps, axis=1)
    axis, upper = np.divmod(face, 2)
    rows = np.arange(n)

    normal = np.zeros_like(Q)
    normal[rows, axis] = np.where(upper == 1, -1.0, 1.0)
    face_point = Q + 0.5 * r[:, None] * normal

    other = np.minimum(Q - lo, hi - Q)
    other[rows, axis] = np.inf
    width = (hi - lo)[axis]
    interior_face = (other.min(axis=1) >= 0.5 * r) & (width >= r)

    delta = r / (1.0 + math.sqrt(d))
    shrunk = np.clip(Q, lo + delta[:, None], hi - delta[:, None])
    return np.where(interior_face[:, None], face_point, shrunk)


def _uniform_on_faces(
    n: int, lo: np.ndarray, hi: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    d = lo.size
    side = hi - lo
    areas = np.array([np.prod(np.delete(side, k)) for k in range(d)])
    probs = np.repeat(areas, 2) / (2.0 * areas.sum())
    face = rng.choice(2 * d, size=n, p=probs)
    axis, upper = np.divmod(face, 2)
    pts = lo + rng.random((n, d)) * side
    rows = np.arange(n)
    pts[rows, axis] = np.where(upper == 1, hi[axis], lo[axis])
    return pts


class DomainSpec(ABC):
    """
    A bounded open set of R^d with an exact distance oracle.

    Subclasses are frozen dataclasses and therefore hashable and safe to
    share between worker processes.
    """

    kind: str = "domain"

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    @property
    @abstractmethod
    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        ...

    @property
    @abstractmethod
    def diameter(self) -> float:
        ...

    @property
    @abstractmethod
    def volume(self) -> float:
        ...

    @property
    @abstractmethod
    def max_corkscrew_radius(self) -> float:
        """Largest r for which the corkscrew construction is defined."""

    @property
    @abstractmethod
    def kappa_hint(self) -> float:
        """The kappa guaranteed by the corkscrew construction."""

    @abstractmethod
    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        """Distance to the boundary, negative inside. ``pts`` has shape (n, d)."""

    @abstractmethod
    def project(self, pts: np.ndarray) -> np.ndarray:
        """Nearest boundary points of interior points."""

    @abstractmethod
    def corkscrew_points(self, Q: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Unchecked corkscrew construction for boundary points ``Q``."""

    @abstractmethod
    def sample_boundary(self, n: int, rng: np.random.Generator) -> np.ndarray:
        ...

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.signed_distance(pts) < 0.0

    def describe(self) -> dict:
        """Plain-data description used by manifests and config round trips."""
        out = {"shape": self.kind}
        for key, value in self.__dict__.items():
            if key == "kind":
                continue
            if isinstance(value, tuple) and value and isinstance(value[0], DomainSpec):
                out[key] = [v.describe() for v in value]
            else:
                out[key] = list(value) if isinstance(value, tuple) else value
        return out


@dataclass(frozen=True)
class Ball(DomainSpec):
    center: Tuple[float, ...]
    radius: float
    kind: str = field(default="ball", init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) < 2:
            raise DomainError("ball center must have dimension >= 2")
        if not self.radius > 0:
            raise DomainError(f"ball radius must be positive, got {self.radius}")

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def bounding_box(self):
        return self.c - self.radius, self.c + self.radius

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def volume(self) -> float:
        d = self.dim
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius ** d

    @property
    def max_corkscrew_radius(self) -> float:
        return 2.0 * self.radius

    @property
    def kappa_hint(self) -> float:
        return 0.5

    def signed_distance(self, pts):
        return _norm(pts - self.c) - self.radius

    def project(self, pts):
        v = pts - self.c
        nrm = _norm(v)
        direction = np.zeros_like(v)
        direction[:, 0] = -1.0
        safe = nrm > 0
        direction[safe] = v[safe] / nrm[safe, None]
        return self.c + self.radius * direction

    def corkscrew_points(self, Q, r):
        inward = self.c - Q
        nrm = _norm(inward)
        return Q + 0.5 * r[:, None] * inward / nrm[:, None]

    def sample_boundary(self, n, rng):
        return self.c + self.radius * unit_directions(n, self.dim, rng)


@dataclass(frozen=True)
class Box(DomainSpec):
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    kind: str = field(default="box", init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or len(self.lo) < 2:
            raise DomainError("box corners must share a dimension >= 2")
        if not all(h > l for l, h in zip(self.lo, self.hi)):
            raise DomainError("box requires lo < hi in every coordinate")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def bounding_box(self):
        return np.asarray(self.lo), np.asarray(self.hi)

    @property
    def diameter(self) -> float:
        lo, hi = self.bounding_box
        return float(_norm(hi - lo))

    @property
    def volume(self) -> float:
        lo, hi = self.bounding_box
        return float(np.prod(hi - lo))

    @property
    def max_corkscrew_radius(self) -> float:
        lo, hi = self.bounding_box
        return float((hi - lo).min())

    @property
    def kappa_hint(self) -> float:
        return 1.0 / (1.0 + math.sqrt(self.dim))

    def signed_distance(self, pts):
        return _box_signed_distance(pts, *self.bounding_box)

    def project(self, pts):
        lo, hi = self.bounding_box
        inside = self.signed_distance(pts) < 0
        return np.where(inside[:, None], _box_face_projection(pts, lo, hi), np.clip(pts, lo, hi))

    def corkscrew_points(self, Q, r):
        return _box_corkscrew(Q, r, *self.bounding_box)

    def sample_boundary(self, n, rng):
        return _uniform_on_faces(n, *self.bounding_box, rng)


@dataclass(frozen=True)
class BallUnion(DomainSpec):
    """Finite union of pairwise disjoint open balls; closures may touch."""

    balls: Tuple[Ball, ...]
    kind: str = field(default="ball_union", init=False, repr=False)

    def __post_init__(self):
        balls = tuple(
            b if isinstance(b, Ball) else Ball(**{k: v for k, v in b.items() if k != "shape"})
            for b in self.balls
        )
        object.__setattr__(self, "balls", balls)
        if not balls:
            raise DomainError("ball union needs at least one ball")
        if len({b.dim for b in balls}) != 1:
            raise DomainError("all balls must share a dimension")
        for i, a in enumerate(balls):
            for b in balls[i + 1:]:
                gap = float(_norm(a.c - b.c)) - a.radius - b.radius
                if gap < -BOUNDARY_RTOL * max(a.radius, b.radius):
                    raise DomainError("balls of a union must have disjoint interiors")

    @property
    def centers(self) -> np.ndarray:
        return np.stack([b.c for b in self.balls])

    @property
    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls])

    @property
    def dim(self) -> int:
        return self.balls[0].dim

    @property
    def bounding_box(self):
        c, r = self.centers, self.radii[:, None]
        return (c - r).min(axis=0), (c + r).max(axis=0)

    @property
    def diameter(self) -> float:
        c, r = self.centers, self.radii
        spans = _norm(c[:, None, :] - c[None, :, :]) + r[:, None] + r[None, :]
        return float(spans.max())

    @property
    def volume(self) -> float:
        return float(sum(b.volume for b in self.balls))

    @property
    def max_corkscrew_radius(self) -> float:
        return float(2.0 * self.radii.min())

    @property
    def kappa_hint(self) -> float:
        return 0.5

    def _per_ball(self, pts):
        return _norm(pts[:, None, :] - self.centers[None, :, :]) - self.radii[None, :]

    def signed_distance(self, pts):
        return self._per_ball(pts).min(axis=1)

    def project(self, pts):
        idx = np.argmin(self._per_ball(pts), axis=1)
        out = np.empty_like(pts)
        for k, ball in enumerate(self.balls):
            mask = idx == k
            if mask.any():
                out[mask] = ball.project(pts[mask])
        return out

    def corkscrew_points(self, Q, r):
        # lowest-index ball whose sphere carries Q
        on_sphere = np.abs(self._per_ball(Q)) <= BOUNDARY_RTOL * self.radii[None, :]
        idx = np.argmax(on_sphere, axis=1)
        out = np.empty_like(Q)
        for k, ball in enumerate(self.balls):
            mask = idx == k
            if mask.any():
                out[mask] = ball.corkscrew_points(Q[mask], r[mask])
        return out

    def sample_boundary(self, n, rng):
        weights = self.radii ** (self.dim - 1)
        idx = rng.choice(len(self.balls), size=n, p=weights / weights.sum())
        dirs = unit_directions(n, self.dim, rng)
        return self.centers[idx] + self.radii[idx, None] * dirs


@dataclass(frozen=True)
class LShape(DomainSpec):
    """The box (lo, hi) with the closed corner block [notch, hi] removed."""

    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    notch: Tuple[float, ...]
    kind: str = field(default="l_shape", init=False, repr=False)

    def __post_init__(self):
        for name in ("lo", "hi", "notch"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not (len(self.lo) == len(self.hi) == len(self.notch) >= 2):
            raise DomainError("L-shape corners must share a dimension >= 2")
        if not all(l < m < h for l, m, h in zip(self.lo, self.notch, self.hi)):
            raise DomainError("L-shape requires lo < notch < hi in every coordinate")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def bounding_box(self):
        return np.asarray(self.lo), np.asarray(self.hi)

    @property
    def components(self) -> Tuple[Box, ...]:
        """Boxes {x in [lo, hi] : x_k <= notch_k}; their union is the closure."""
        boxes = []
        for k in range(self.dim):
            hi = list(self.hi)
            hi[k] = self.notch[k]
            boxes.append(Box(self.lo, tuple(hi)))
        return tuple(boxes)

    @property
    def diameter(self) -> float:
        lo, hi = self.bounding_box
        return float(_norm(hi - lo))

    @property
    def volume(self) -> float:
        lo, hi = self.bounding_box
        notch = np.asarray(self.notch)
        return float(np.prod(hi - lo) - np.prod(hi - notch))

    @property
    def max_corkscrew_radius(self) -> float:
        return min(b.max_corkscrew_radius for b in self.components)

    @property
    def kappa_hint(self) -> float:
        return 1.0 / (1.0 + math.sqrt(self.dim))

    def signed_distance(self, pts):
        lo, hi = self.bounding_box
        notch = np.asarray(self.notch)
        sd_box = _box_signed_distance(pts, lo, hi)
        to_notch = _box_outside_distance(pts, notch, hi)
        inside = (sd_box < 0) & (to_notch > 0)
        inner = np.minimum(-sd_box, to_notch)
        outer = np.min(
            [_box_outside_distance(pts, *b.bounding_box) for b in self.components], axis=0
        )
        return np.where(inside, -inner, outer)

    def project(self, pts):
        lo, hi = self.bounding_box
        notch = np.asarray(self.notch)
        on_box = _box_face_projection(pts, lo, hi)
        on_notch = np.clip(pts, notch, hi)
        use_notch = _norm(pts - on_notch) < _norm(pts - on_box)
        return np.where(use_notch[:, None], on_notch, on_box)

    def corkscrew_points(self, Q, r):
        notch = np.asarray(self.notch)
        tol = BOUNDARY_RTOL * self.diameter
        member = Q <= notch + tol
        idx = np.argmax(member, axis=1)
        out = np.empty_like(Q)
        for k, box in enumerate(self.components):
            mask = idx == k
            if mask.any():
                out[mask] = box.corkscrew_points(Q[mask], r[mask])
        return out

    def sample_boundary(self, n, rng):
        tol = BOUNDARY_RTOL * self.diameter
        out = np.empty((0, self.dim))
        comps = self.components
        while out.shape[0] < n:
            k = rng.integers(len(comps))
            cand = comps[k].sample_boundary(2 * n, rng)
            keep = np.abs(self.signed_distance(cand)) <= tol
            out = np.concatenate([out, cand[keep]])
        return out[:n]


@dataclass(frozen=True)
class LipschitzHypograph(DomainSpec):
    """
    Region under a Lipschitz graph over a base box.

    D = {x : base_lo < x[:-1] < base_hi, floor < x[-1] < phi(x[0])} with the
    ridge profile phi(u) = height + amplitude * cos(frequency * u), whose
    Lipschitz constant is |amplitude * frequency|.
    """

    base_lo: Tuple[float, ...]
    base_hi: Tuple[float, ...]
    floor: float
    height: float
    amplitude: float
    frequency: float
    kind: str = field(default="lipschitz_hypograph", init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "base_lo", tuple(float(v) for v in self.base_lo))
        object.__setattr__(self, "base_hi", tuple(float(v) for v in self.base_hi))
        if len(self.base_lo) != len(self.base_hi) or len(self.base_lo) < 1:
            raise DomainError("base box corners must share a dimension >= 1")
        if not all(h > l for l, h in zip(self.base_lo, self.base_hi)):
            raise DomainError("base box requires lo < hi in every coordinate")
        if not self.floor < self.height - abs(self.amplitude):
            raise DomainError("floor must lie strictly below the graph")

    @property
    def lipschitz(self) -> float:
        return abs(self.amplitude * self.frequency)

    def phi(self, u: np.ndarray) -> np.ndarray:
        return self.height + self.amplitude * np.cos(self.frequency * u)

    @property
    def dim(self) -> int:
        return len(self.base_lo) + 1

    @property
    def bounding_box(self):
        lo = np.append(self.base_lo, self.floor)
        hi = np.append(self.base_hi, self.height + abs(self.amplitude))
        return lo, hi

    @property
    def inner_box(self) -> Box:
        return Box(
            tuple(self.base_lo) + (self.floor,),
            tuple(self.base_hi) + (self.height - abs(self.amplitude),),
        )

    @property
    def diameter(self) -> float:
        lo, hi = self.bounding_box
        return float(_norm(hi - lo))

    @property
    def volume(self) -> float:
        a, b = self.base_lo[0], self.base_hi[0]
        cross = float(np.prod(np.subtract(self.base_hi[1:], self.base_lo[1:]))) if self.dim > 2 else 1.0
        wave = 0.0
        if self.frequency != 0:
            wave = self.amplitude * (math.sin(self.frequency * b) - math.sin(self.frequency * a)) / self.frequency
        else:
            wave = self.amplitude * (b - a)
        return cross * ((self.height - self.floor) * (b - a) + wave)

    @property
    def max_corkscrew_radius(self) -> float:
        return self.inner_box.max_corkscrew_radius

    @property
    def kappa_hint(self) -> float:
        return 1.0 / ((1.0 + math.sqrt(self.dim)) * math.sqrt(1.0 + self.lipschitz ** 2))

    # -- profile geometry in the (x[0], x[-1]) plane ---------------------

    def _graph_search(self, u, t, lo_s, hi_s):
        """Closest graph point over [lo_s, hi_s]; returns (s*, distance)."""
        n_grid = 65
        frac = np.linspace(0.0, 1.0, n_grid)
        grid = lo_s[:, None] + (hi_s - lo_s)[:, None] * frac[None, :]
        f = (grid - u[:, None]) ** 2 + (self.phi(grid) - t[:, None]) ** 2
        j = np.argmin(f, axis=1)
        step = (hi_s - lo_s) / (n_grid - 1)
        a = np.maximum(grid[np.arange(len(u)), j] - step, lo_s)
        b = np.minimum(grid[np.arange(len(u)), j] + step, hi_s)

        def objective(s):
            return (s - u) ** 2 + (self.phi(s) - t) ** 2

        c = b - _GOLDEN * (b - a)
        e = a + _GOLDEN * (b - a)
        fc, fe = objective(c), objective(e)
        for _ in range(200):
            if np.all(b - a <= PROJECTION_ATOL):
                break
            left = fc < fe
            b = np.where(left, e, b)
            a = np.where(left, a, c)
            e_new = np.where(left, c, a + _GOLDEN * (b - a))
            c_new = np.where(left, b - _GOLDEN * (b - a), e)
            c, e = c_new, e_new
            fc, fe = objective(c), objective(e)
        if not np.all(b - a <= PROJECTION_ATOL):
            raise ProjectionError("graph projection did not reach its tolerance")
        s = 0.5 * (a + b)
        best = np.sqrt(objective(s))
        ends = np.stack([lo_s, hi_s], axis=1)
        fends = np.sqrt((ends - u[:, None]) ** 2 + (self.phi(ends) - t[:, None]) ** 2)
        use_end = fends.min(axis=1) < best
        s = np.where(use_end, ends[np.arange(len(u)), np.argmin(fends, axis=1)], s)
        dist = np.where(use_end, fends.min(axis=1), best)
        if not np.all(np.isfinite(dist)):
            raise ProjectionError("graph projection produced a non-finite distance")
        return s, dist

    def _profile(self, u, t):
        """Distances to the four profile pieces and their closest points."""
        a, b = self.base_lo[0], self.base_hi[0]
        fl = self.floor
        pieces = []
        # walls at u = a and u = b
        for wall in (a, b):
            top = float(self.phi(np.asarray(wall)))
            tt = np.clip(t, fl, top)
            pieces.append((np.hypot(u - wall, t - tt), np.full_like(u, wall), tt))
        # floor
        uu = np.clip(u, a, b)
        pieces.append((np.hypot(u - uu, t - fl), uu, np.full_like(t, fl)))
        # graph, searched within the current best distance
        bound = np.min([p[0] for p in pieces], axis=0)
        above = (u >= a) & (u <= b)
        bound = np.where(above, np.minimum(bound, np.abs(t - self.phi(np.clip(u, a, b)))), bound)
        lo_s = np.clip(u - bound, a, b)
        hi_s = np.clip(u + bound, a, b)
        s, dist = self._graph_search(u, t, lo_s, hi_s)
        pieces.append((dist, s, self.phi(s)))
        return pieces

    def _inside_profile(self, u, t):
        a, b = self.base_lo[0], self.base_hi[0]
        return (u > a) & (u < b) & (t > self.floor) & (t < self.phi(u))

    def signed_distance(self, pts):
        u, t = pts[:, 0], pts[:, -1]
        mid = pts[:, 1:-1]
        mlo, mhi = np.asarray(self.base_lo[1:]), np.asarray(self.base_hi[1:])
        d2 = np.min([p[0] for p in self._profile(u, t)], axis=0)
        inside2 = self._inside_profile(u, t)
        if mid.shape[1]:
            in_mid = np.all((mid > mlo) & (mid < mhi), axis=1)
            mid_gap = np.minimum(mid - mlo, mhi - mid).min(axis=1)
            offset = _norm(mid - np.clip(mid, mlo, mhi))
        else:
            in_mid = np.ones(len(pts), dtype=bool)
            mid_gap = np.full(len(pts), np.inf)
            offset = np.zeros(len(pts))
        inside = inside2 & in_mid
        outside_dist = np.where(inside2, offset, np.hypot(offset, d2))
        return np.where(inside, -np.minimum(d2, mid_gap), outside_dist)

    def project(self, pts):
        u, t = pts[:, 0], pts[:, -1]
        n, d = pts.shape
        mlo, mhi = np.asarray(self.base_lo[1:]), np.asarray(self.base_hi[1:])
        pieces = self._profile(u, t)
        candidates, dists = [], []
        # order encodes the tie rule: axis 0 walls, middle axes, floor, graph
        for dist, su, st in pieces[:2]:
            q = pts.copy()
            q[:, 0], q[:, -1] = su, st
            candidates.append(q)
            dists.append(dist)
        for k in range(1, d - 1):
            for bound in (mlo[k - 1], mhi[k - 1]):
                q = pts.copy()
                q[:, k] = bound
                candidates.append(q)
                dists.append(np.abs(pts[:, k] - bound))
        for dist, su, st in pieces[2:]:
            q = pts.copy()
            q[:, 0], q[:, -1] = su, st
            candidates.append(q)
            dists.append(dist)
        pick = np.argmin(np.stack(dists, axis=1), axis=1)
        stacked = np.stack(candidates, axis=1)
        return stacked[np.arange(n), pick]

    def corkscrew_points(self, Q, r):
        d = self.dim
        tol = BOUNDARY_RTOL * self.diameter
        on_graph = np.abs(Q[:, -1] - self.phi(Q[:, 0])) <= tol
        delta = r / (1.0 + math.sqrt(d))
        lo, hi = self.inner_box.bounding_box
        # graph points: vertical offset r/2 below the graph
        drop = Q.copy()
        drop[:, -1] -= 0.5 * r
        drop[:, :-1] = np.clip(drop[:, :-1], lo[:-1] + delta[:, None], hi[:-1] - delta[:, None])
        drop[:, -1] = np.maximum(drop[:, -1], self.floor + delta)
        flat = np.clip(Q, lo + delta[:, None], hi - delta[:, None])
        return np.where(on_graph[:, None], drop, flat)

    def sample_boundary(self, n, rng):
        d = self.dim
        lo, hi = self.bounding_box
        base = np.asarray(self.base_hi) - np.asarray(self.base_lo)
        wall_h = self.height - self.floor
        areas = [float(np.prod(base))] * 2
        for k in range(d - 1):
            areas += [float(np.prod(np.delete(base, k))) * wall_h] * 2
        probs = np.asarray(areas) / np.sum(areas)
        piece = rng.choice(len(areas), size=n, p=probs)
        pts = lo + rng.random((n, d)) * (hi - lo)
        pts[:, :-1] = np.asarray(self.base_lo) + rng.random((n, d - 1)) * base
        graph = piece == 0
        pts[graph, -1] = self.phi(pts[graph, 0])
        pts[piece == 1, -1] = self.floor
        for k in range(d - 1):
            for side, bound in enumerate((self.base_lo[k], self.base_hi[k])):
                mask = piece == 2 + 2 * k + side
                pts[mask, k] = bound
                top = self.phi(pts[mask, 0])
                pts[mask, -1] = self.floor + rng.random(mask.sum()) * (top - self.floor)
        return pts


SHAPES = {
    "ball": Ball,
    "box": Box,
    "ball_union": BallUnion,
    "l_shape": LShape,
    "lipschitz_hypograph": LipschitzHypograph,
}


def make_domain(description: dict) -> DomainSpec:
    """Build a shape from a plain description such as ``{"shape": "ball", ...}``."""
    spec = dict(description)
    kind = spec.pop("shape", None)
    if kind not in SHAPES:
        raise DomainError(f"unknown shape {kind!r}; expected one of {sorted(SHAPES)}")
    if kind == "ball_union":
        spec["balls"] = tuple(
            Ball(**{k: v for k, v in b.items() if k != "shape"}) for b in spec.get("balls", ())
        )
    return SHAPES[kind](**spec)


def lipschitz_kappa(lipschitz: float) -> float:
    """kappa of a Lipschitz graph domain with constant ``lipschitz``."""
    return 1.0 / (2.0 * math.sqrt(1.0 + lipschitz ** 2))


@dataclass(frozen=True)
class KFatCharacteristics:
    R: float
    kappa: float

    def __post_init__(self):
        if not self.R > 0:
            raise ParameterError(f"kfat.R must be positive, got {self.R}")
        if not 0 < self.kappa <= 0.5:
            raise ParameterError(f"kfat.kappa must lie in (0, 1/2], got {self.kappa}")


@dataclass(frozen=True)
class ReferenceFrame:
    """Anchor points and scales shared by every estimate phrased through g."""

    z0: Tuple[float, ...]
    x0: Tuple[float, ...]
    R: float
    kappa: float
    rho_z0: float
    c0: Optional[float] = None
    c1: Optional[float] = None

    @property
    def M(self) -> float:
        return 2.0 / self.kappa

    @property
    def eps1(self) -> float:
        return self.R / (12.0 * self.M)

    def with_green_constant(self, d: int, alpha: float, c0: float) -> "ReferenceFrame":
        """Record C0 and the cap C1 = C0 2^(d-alpha) rho(z0)^(alpha-d)."""
        c1 = c0 * 2.0 ** (d - alpha) * self.rho_z0 ** (alpha - d)
        return replace(self, c0=float(c0), c1=float(c1))


# -- module-level operations ---------------------------------------------


def rho(D: DomainSpec, x: ArrayLike, with_side: bool = False):
    """
    Distance from ``x`` to the boundary of ``D``.

    :param with_side: also return the inside flag.
    """
    pts, single = as_points(x, D.dim)
    sd = D.signed_distance(pts)
    dist = _unbatch(np.abs(sd), single)
    if not with_side:
        return dist
    inside = sd < 0
    return dist, (bool(inside[0]) if single else inside)


def contains(D: DomainSpec, x: ArrayLike):
    pts, single = as_points(x, D.dim)
    inside = D.contains(pts)
    return bool(inside[0]) if single else inside


def _require_inside(D: DomainSpec, pts: np.ndarray, what: str = "x") -> None:
    if not np.all(D.contains(pts)):
        raise DomainError(f"{what} must lie in the open domain")


def nearest_boundary_point(D: DomainSpec, x: ArrayLike):
    pts, single = as_points(x, D.dim)
    _require_inside(D, pts)
    Q = D.project(pts)
    err = np.abs(_norm(pts - Q) - np.abs(D.signed_distance(pts)))
    if np.any(err > BOUNDARY_RTOL * D.diameter):
        raise ProjectionError("nearest boundary point disagrees with the distance oracle")
    return _unbatch(Q, single)


def corkscrew(
    D: DomainSpec,
    Q: ArrayLike,
    r,
    chars: Optional[KFatCharacteristics] = None,
):
    """
    Corkscrew point A_r(Q) with B(A, kappa r) inside D and B(Q, r).

    Uses the certified characteristics when given, the construction's own
    kappa otherwise.
    """
    Qs, single = as_points(Q, D.dim)
    radii = np.broadcast_to(np.asarray(r, dtype=float), (Qs.shape[0],)).copy()
    R = chars.R if chars is not None else D.max_corkscrew_radius
    kappa = chars.kappa if chars is not None else D.kappa_hint
    if np.any(radii <= 0) or np.any(radii >= R):
        raise CorkscrewError(f"corkscrew radius must lie in (0, {R})")
    tol = BOUNDARY_RTOL * D.diameter
    if np.any(np.abs(D.signed_distance(Qs)) > tol):
        raise DomainError("corkscrew base point must lie on the boundary")
    A = D.corkscrew_points(Qs, radii)
    depth = -D.signed_distance(A)
    slack = radii - _norm(A - Qs)
    ok = (depth >= kappa * radii - tol) & (slack >= kappa * radii - tol)
    if not np.all(ok):
        raise CorkscrewError("corkscrew ball is not contained in D and B(Q, r)")
    return _unbatch(A, single)


def mutual_scale(D: DomainSpec, x: ArrayLike, y: ArrayLike):
    """r(x, y) = rho(x) v rho(y) v |x - y|."""
    xs, single = as_points(x, D.dim)
    ys, _ = as_points(y, D.dim)
    sx = np.abs(D.signed_distance(xs))
    sy = np.abs(D.signed_distance(ys))
    return _unbatch(np.maximum(np.maximum(sx, sy), _norm(xs - ys)), single)


def bset_witness(D: DomainSpec, frame: ReferenceFrame, x: ArrayLike, y: ArrayLike):
    """
    A point of the witness set B(x, y).

    Returns z0 when r(x, y) >= eps1 and the corkscrew A_{r(x,y)}(Q_x)
    otherwise, after checking both membership inequalities.
    """
    xs, single = as_points(x, D.dim)
    ys, _ = as_points(y, D.dim)
    _require_inside(D, xs)
    _require_inside(D, ys, "y")
    r = np.atleast_1d(mutual_scale(D, xs, ys))
    out = np.broadcast_to(np.asarray(frame.z0), xs.shape).copy()
    near = r < frame.eps1
    if near.any():
        Q = D.project(xs[near])
        chars = KFatCharacteristics(frame.R, frame.kappa)
        A = np.atleast_2d(corkscrew(D, Q, r[near], chars=chars))
        rn = r[near]
        depth = np.abs(D.signed_distance(A))
        reach = np.maximum(_norm(xs[near] - A), _norm(ys[near] - A))
        if np.any(depth <= rn / frame.M):
            raise WitnessError("witness too shallow: rho(A) <= r(x, y)/M")
        if np.any(reach >= 5.0 * rn):
            raise WitnessError("witness too far: |x-A| v |y-A| >= 5 r(x, y)")
        if np.any(_norm(xs[near] - A) > 2.0 * rn * (1 + BOUNDARY_RTOL)):
            raise WitnessError("witness violates |x - A| <= 2 r(x, y)")
        out[near] = A
    return _unbatch(out, single)


# -- sampling --------------------------------------------------------------


def sample_boundary(D: DomainSpec, n: int, rng: RngLike = None) -> np.ndarray:
    return D.sample_boundary(n, as_generator(rng))


def sample_interior(D: DomainSpec, n: int, rng: RngLike = None) -> np.ndarray:
    """Uniform points of D by rejection from the bounding box."""
    gen = as_generator(rng)
    lo, hi = D.bounding_box
    out = np.empty((0, D.dim))
    while out.shape[0] < n:
        cand = lo + gen.random((2 * n + 16, D.dim)) * (hi - lo)
        out = np.concatenate([out, cand[D.contains(cand)]])
    return out[:n]


def sample_shell(D: DomainSpec, n: int, eps, rng: RngLike = None) -> np.ndarray:
    """
    Points of D with rho_D < eps, placed on segments from boundary points
    toward their corkscrew points.

    ``eps`` may be a scalar or an array of length ``n``.
    """
    gen = as_generator(rng)
    eps_all = np.broadcast_to(np.asarray(eps, dtype=float), (n,)).copy()
    out = np.empty((n, D.dim))
    todo = np.arange(n)
    cap = 0.5 * D.max_corkscrew_radius
    while todo.size:
        e = eps_all[todo]
        Q = D.sample_boundary(todo.size, gen)
        r = np.minimum(2.0 * e, cap)
        A = D.corkscrew_points(Q, r)
        v = A - Q
        v /= _norm(v)[:, None]
        cand = Q + (e * gen.random(todo.size))[:, None] * v
        sd = D.signed_distance(cand)
        keep = (sd < 0) & (-sd < e)
        out[todo[keep]] = cand[keep]
        todo = todo[~keep]
    return out


# -- characteristics -------------------------------------------------------


@dataclass
class CertificationReport:
    candidate: KFatCharacteristics
    radii: np.ndarray
    n_boundary: int
    n_ball_points: int
    checks: pd.DataFrame
    kappa_max: float

    @property
    def failures(self) -> pd.DataFrame:
        return self.checks[~self.checks["passed"]].reset_index(drop=True)

    @property
    def passed(self) -> bool:
        return bool(self.checks["passed"].all())


def kfat_certify(
    D: DomainSpec,
    candidate: KFatCharacteristics,
    n_boundary: int,
    n_radii: int,
    rng: RngLike = None,
    n_ball_points: int = 10_000,
) -> CertificationReport:
    """
    Sampling harness for the corkscrew property.

    Boundary points and a uniform radius grid in (0, R) are checked both
    analytically (depth and slack of the corkscrew ball) and by rejection
    sampling ``n_ball_points`` points of each corkscrew ball.
    """
    if n_boundary < 1 or n_radii < 1:
        raise ParameterError("n_boundary and n_radii must be at least 1")
    gen = as_generator(rng)
    kappa = candidate.kappa
    radii = candidate.R * np.arange(1, n_radii + 1) / (n_radii + 1)
    Q = D.sample_boundary(n_boundary, gen)
    tol = BOUNDARY_RTOL * D.diameter
    rows = []
    kappa_max = 0.5
    for r in radii:
        rr = np.full(n_boundary, r)
        if r >= D.max_corkscrew_radius:
            for q in Q:
                rows.append((*q, r, np.nan, False, "radius beyond construction range"))
            kappa_max = 0.0
            continue
        A = D.corkscrew_points(Q, rr)
        depth = -D.signed_distance(A)
        slack = r - _norm(A - Q)
        achieved = np.minimum(depth, slack) / r
        kappa_max = min(kappa_max, float(achieved.min()))
        for i in range(n_boundary):
            reason = ""
            ok = depth[i] >= kappa * r - tol and slack[i] >= kappa * r - tol
            if not ok:
                reason = "analytic containment"
            elif n_ball_points:
                ball = A[i] + (kappa * r * (1 - 1e-9)) * (
                    unit_directions(n_ball_points, D.dim, gen)
                    * gen.random(n_ball_points)[:, None] ** (1.0 / D.dim)
                )
                in_d = D.contains(ball).all()
                in_b = np.all(_norm(ball - Q[i]) < r)
                if not (in_d and in_b):
                    ok, reason = False, "sampled containment"
            rows.append((*Q[i], r, achieved[i], bool(ok), reason))
    cols = [f"q{k}" for k in range(D.dim)] + ["r", "kappa_achieved", "passed", "reason"]
    checks = pd.DataFrame(rows, columns=cols)
    report = CertificationReport(
        candidate=candidate,
        radii=radii,
        n_boundary=n_boundary,
        n_ball_points=n_ball_points,
        checks=checks,
        kappa_max=max(kappa_max, 0.0),
    )
    logger.info(
        "certified %s with kappa=%.4g R=%.4g: %d/%d checks failed, kappa_max=%.4g",
        D.kind, kappa, candidate.R, len(report.failures), len(checks), report.kappa_max,
    )
    return report


def build_frame(
    D: DomainSpec,
    chars: KFatCharacteristics,
    x0: Optional[ArrayLike] = None,
    z0: Optional[ArrayLike] = None,
    resolution: int = 41,
) -> ReferenceFrame:
    """
    Reference frame for D.

    z0 defaults to the deepest grid point among those with
    kappa R < rho(z0) < R; ties go to the first grid point in 'ij' order.
    """
    M = 2.0 / chars.kappa
    lo, hi = D.bounding_box
    if z0 is None:
        axes = [np.linspace(l, h, resolution) for l, h in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, D.dim)
        sd = D.signed_distance(grid)
        depth = -sd
        admissible = (depth > 2.0 * chars.R / M) & (depth < chars.R)
        if not admissible.any():
            raise ParameterError(
                "no grid point satisfies 2R/M < rho(z0) < R; lower kfat.R or refine the grid"
            )
        masked = np.where(admissible, depth, -np.inf)
        z = grid[int(np.argmax(masked))]
    else:
        z, _ = as_points(z0, D.dim)
        z = z[0]
    rz = float(-D.signed_distance(z[None, :])[0])
    if not 2.0 * chars.R / M < rz < chars.R:
        raise ParameterError(f"z0 depth {rz:.6g} violates 2R/M < rho(z0) < R")
    x = z if x0 is None else as_points(x0, D.dim)[0][0]
    _require_inside(D, x[None, :], "x0")
    logger.debug("reference frame z0=%s rho(z0)=%.6g", z, rz)
    return ReferenceFrame(
        z0=tuple(map(float, z)),
        x0=tuple(map(float, x)),
        R=chars.R,
        kappa=chars.kappa,
        rho_z0=rz,
    )

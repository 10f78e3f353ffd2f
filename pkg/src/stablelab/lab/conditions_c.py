"""
Checks of the four Green-function conditions under which the 3G machinery
runs for a general process:

- C1, boundary growth toward z0 along corkscrew points;
- C2, Harnack comparability of nearby interior points;
- C3, two-sided Riesz-type bounds;
- C4, the boundary Harnack comparison of Green quotients.

Each check only needs a :class:`~stablelab.core.green.GreenEvaluator`, so a
tabulated Green function of another process plugs in unchanged.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from stablelab.core.geometry import (
    DomainSpec,
    KFatCharacteristics,
    ReferenceFrame,
    _norm,
    as_points,
    corkscrew,
    unit_directions,
)
from stablelab.core.green import GreenEvaluator
from stablelab.core.kernels import StableParams
from stablelab.core.rng import RngLike, as_generator
from stablelab.exceptions import DomainError, ParameterError
from stablelab.lab.inequality_lab import green_source, growth_check
from stablelab.lab.sampling import (
    CAVEAT,
    STABILITY_RTOL,
    FitReport,
    labelled_curves,
    loglog_fit,
    sample_points,
    stability_curve,
)

logger = logging.getLogger(__name__)

DEFAULT_L = (1.0, 2.0, 4.0)
DEPTH_SLOPE_TOL = 0.5
DEPTH_MIN_BIN = 10


def _rho(D: DomainSpec, pts: np.ndarray) -> np.ndarray:
    return -D.signed_distance(pts)


def check_C1(
    green: GreenEvaluator,
    D: DomainSpec,
    frame: ReferenceFrame,
    Q_points: Optional[np.ndarray] = None,
    r: Optional[float] = None,
    s_grid: Optional[Sequence[float]] = None,
    n_boundary: int = 4,
    seed: RngLike = None,
    stable_scaling: Optional[bool] = None,
) -> FitReport:
    """
    Growth of G(A_s(Q), z0) against G(A_r(Q), z0) at several boundary points.

    ``gamma_hat`` is the largest fitted exponent and ``c_hat`` the smallest
    constant. gamma_hat < alpha is required only for evaluators with stable
    scaling (the built-in ones unless told otherwise).
    """
    p = green.p
    if stable_scaling is None:
        stable_scaling = green_source(green) in ("oracle", "mc")
    r = 0.5 * frame.R if r is None else r
    Qs = D.sample_boundary(n_boundary, as_generator(seed)) if Q_points is None else as_points(Q_points, p.d)[0]
    reports = [growth_check(green, D, frame, Q, r, s_grid) for Q in Qs]
    gammas = np.array([rep.gamma_hat for rep in reports])
    consts = np.array([rep.c_hat for rep in reports])
    notes = [f"gamma_fit per boundary point: {np.round(gammas, 4).tolist()}"]
    for rep in reports:
        notes.extend(n for n in rep.notes[1:] if n not in notes)
    accepted = bool(np.all(consts > 0))
    if stable_scaling:
        accepted &= bool(np.all(gammas < p.alpha))
    curve = pd.concat(
        [rep.stability_curve.assign(label=f"Q{i}") for i, rep in enumerate(reports)], ignore_index=True
    )
    table = pd.concat([rep.table.assign(Q=i) for i, rep in enumerate(reports)], ignore_index=True)
    return FitReport(
        c_hat=float(consts.min()),
        gamma_hat=float(gammas.max()),
        n_tuples=len(reports),
        stability_curve=curve,
        grid_resolution=reports[0].grid_resolution,
        accepted=accepted,
        notes=notes,
        columns={"r": r, "min_r2": float(min(rep.columns["r2"] for rep in reports))},
        table=table,
    )


def check_C2(
    green: GreenEvaluator,
    D: DomainSpec,
    n: int = 10_000,
    L_values: Sequence[float] = DEFAULT_L,
    seed: RngLike = None,
) -> FitReport:
    """
    sup G(x2, y) / G(x1, y) over x1, x2 outside B(y, rho(y)/2) with
    |x1 - x2| < L (rho(x1) ^ rho(x2)), one sup per L.

    All L share one sample drawn for the largest L, so the sups are
    nondecreasing in L.
    """
    L_values = sorted(float(v) for v in L_values)
    if not L_values or L_values[0] <= 0:
        raise ParameterError("L values must be positive")
    gen = as_generator(seed)
    y = sample_points(D, n, gen)
    x1 = sample_points(D, n, gen)
    step = unit_directions(n, D.dim, gen) * (L_values[-1] * _rho(D, x1) * gen.random(n))[:, None]
    x2 = x1 + step
    ry = _rho(D, y)
    ok = (
        D.contains(x2)
        & (_norm(x1 - y) >= ry / 2)
        & (_norm(x2 - y) >= ry / 2)
    )
    ratio = np.full(n, np.nan)
    if ok.any():
        num, _ = green.evaluate(x2[ok], y[ok])
        den, _ = green.evaluate(x1[ok], y[ok])
        ratio[ok] = num / den
    sep = _norm(x1 - x2)
    depth = np.minimum(_rho(D, x1), np.abs(D.signed_distance(x2)))
    curves = {}
    for L in L_values:
        curves[f"L={L:g}"] = stability_curve(np.where(ok & (sep < L * depth), ratio, np.nan))
    notes = [CAVEAT.format(n=n, tol=STABILITY_RTOL), f"{int(ok.sum())} admissible triples"]
    unstable = [k for k, c in curves.items() if not c.accepted]
    if unstable:
        logger.warning("C2: unstable sups for %s", unstable)
    last = curves[f"L={L_values[-1]:g}"]
    return FitReport(
        c_hat=last.value,
        gamma_hat=None,
        n_tuples=n,
        stability_curve=labelled_curves(curves),
        accepted=not unstable,
        notes=notes,
        columns={k: c.value for k, c in curves.items()},
    )


def _depth_slope(values: np.ndarray, depth: np.ndarray, min_bin: int = DEPTH_MIN_BIN) -> float:
    """
    Log-log slope of per-bin sups against dyadic depth bins; NaN with fewer
    than three populated bins.
    """
    ok = np.isfinite(values) & (depth > 0)
    level = np.floor(np.log2(depth[ok]))
    vals = values[ok]
    centers, sups = [], []
    for k in np.unique(level):
        in_bin = level == k
        if in_bin.sum() >= min_bin:
            centers.append(2.0 ** (k + 0.5))
            sups.append(vals[in_bin].max())
    if len(centers) < 3:
        return np.nan
    return loglog_fit(centers, sups).slope


def check_C3(green: GreenEvaluator, p: StableParams, D: DomainSpec, n: int = 10_000, seed: RngLike = None) -> FitReport:
    """
    Two-sided Riesz comparison: sup G |x-y|^(d-alpha) over all pairs and
    sup |x-y|^(alpha-d) / G over pairs with |x-y| <= rho(y)/2.

    Even rows are near-diagonal pairs, odd rows independent pairs, so every
    prefix of the sample holds both kinds. ``c_hat`` is the larger sup.
    Besides stability, each bound is binned by dyadic depth of y: a log-log
    slope of the bin sups beyond DEPTH_SLOPE_TOL means the bound drifts
    toward the boundary and fails.
    """
    d, a = p.d, p.alpha
    gen = as_generator(seed)
    y = sample_points(D, n, gen)
    x = sample_points(D, n, gen)
    near = np.arange(n) % 2 == 0
    m = int(near.sum())
    x[near] = y[near] + unit_directions(m, d, gen) * (0.5 * _rho(D, y[near]) * gen.random(m))[:, None]
    keep = _norm(x - y) > 0
    dist = _norm(x - y)
    g = np.full(n, np.nan)
    vals, _ = green.evaluate(x[keep], y[keep])
    g[keep] = vals
    upper = g * dist ** (d - a)
    lower = np.where(near & keep, dist ** (a - d) / g, np.nan)
    bounds = {"upper": upper, "lower": lower}
    curves = {k: stability_curve(v) for k, v in bounds.items()}
    slopes = {k: _depth_slope(v, _rho(D, y)) for k, v in bounds.items()}
    notes = [CAVEAT.format(n=n, tol=STABILITY_RTOL)]
    unstable = [k for k, c in curves.items() if not c.accepted]
    if unstable:
        notes.append("unstable bounds: " + ", ".join(unstable))
        logger.warning("C3: unstable bounds %s", unstable)
    drifting = [k for k, s in slopes.items() if np.isfinite(s) and abs(s) > DEPTH_SLOPE_TOL]
    if drifting:
        notes.append(
            "bounds drifting with depth: "
            + ", ".join(f"{k} (slope {slopes[k]:.3g})" for k in drifting)
        )
        logger.warning("C3: bounds %s drift with depth", drifting)
    columns = {k: c.value for k, c in curves.items()}
    columns.update({f"{k}_depth_slope": s for k, s in slopes.items()})
    return FitReport(
        c_hat=max(curves["upper"].value, curves["lower"].value),
        gamma_hat=None,
        n_tuples=n,
        stability_curve=labelled_curves(curves),
        accepted=not unstable and not drifting,
        notes=notes,
        columns=columns,
    )


def c4_ratio(green: GreenEvaluator, D: DomainSpec, frame: ReferenceFrame, Q, r, x, y, z1, z2) -> np.ndarray:
    """
    [G(x,z1)/G(y,z1)] / [G(x,z2)/G(y,z2)].

    :raises DomainError: unless Q is on the boundary, 0 < r < R, x and y lie
        in D outside B(Q, r) and z1, z2 lie in D within r/M of Q.
    """
    d = D.dim
    Qs, single = as_points(Q, d)
    xs, _ = as_points(x, d)
    ys, _ = as_points(y, d)
    z1s, _ = as_points(z1, d)
    z2s, _ = as_points(z2, d)
    rr = np.broadcast_to(np.asarray(r, dtype=float), (xs.shape[0],))
    if np.any(rr <= 0) or np.any(rr >= frame.R):
        raise DomainError(f"r must lie in (0, R) = (0, {frame.R:g})")
    if np.any(np.abs(D.signed_distance(Qs)) > 1e-9 * D.diameter):
        raise DomainError("Q must lie on the boundary")
    if not (np.all(D.contains(xs)) and np.all(D.contains(ys))):
        raise DomainError("x and y must lie in D")
    if np.any(_norm(xs - Qs) < rr) or np.any(_norm(ys - Qs) < rr):
        raise DomainError("x and y must lie outside B(Q, r)")
    if not (np.all(D.contains(z1s)) and np.all(D.contains(z2s))):
        raise DomainError("z1 and z2 must lie in D")
    if np.any(_norm(z1s - Qs) >= rr / frame.M) or np.any(_norm(z2s - Qs) >= rr / frame.M):
        raise DomainError("z1 and z2 must lie in B(Q, r/M)")
    k = xs.shape[0]
    v, _ = green.evaluate(np.vstack([xs, ys, xs, ys]), np.vstack([z1s, z1s, z2s, z2s]))
    out = (v[:k] / v[k:2 * k]) / (v[2 * k:3 * k] / v[3 * k:])
    return out[0] if single else out


def _near_boundary(D: DomainSpec, Q: np.ndarray, A: np.ndarray, radius: np.ndarray, gen) -> np.ndarray:
    """Points of D within ``radius`` of Q, between Q and A; A where a draw fails."""
    t = gen.random(Q.shape[0]) ** 2
    cand = Q + t[:, None] * (A - Q)
    ok = D.contains(cand) & (_norm(cand - Q) < radius)
    return np.where(ok[:, None], cand, A)


def _outside(D: DomainSpec, Q: np.ndarray, r: np.ndarray, gen, max_rounds: int = 64) -> np.ndarray:
    pts = sample_points(D, Q.shape[0], gen)
    for _ in range(max_rounds):
        bad = _norm(pts - Q) < r
        if not bad.any():
            return pts
        pts[bad] = sample_points(D, int(bad.sum()), gen)
    raise ParameterError("could not place points outside B(Q, r); lower the radii")


def check_C4(
    green: GreenEvaluator,
    D: DomainSpec,
    frame: ReferenceFrame,
    n: int = 10_000,
    seed: RngLike = None,
    levels: Sequence[int] = (1, 6),
) -> FitReport:
    """
    sup of the Green-quotient comparison over random configurations.

    Q is a boundary sample, r = R 2^-j with j uniform on ``levels``, z1 and
    z2 lie between Q and the corkscrew point A_{r/(2M)}(Q), x and y are
    boundary-biased points outside B(Q, r).
    """
    gen = as_generator(seed)
    Q = D.sample_boundary(n, gen)
    j = gen.integers(levels[0], levels[1] + 1, size=n)
    r = frame.R * 2.0 ** -j
    inner = r / frame.M
    A = np.atleast_2d(corkscrew(D, Q, 0.5 * inner, KFatCharacteristics(frame.R, frame.kappa)))
    z1 = _near_boundary(D, Q, A, inner, gen)
    z2 = _near_boundary(D, Q, A, inner, gen)
    x = _outside(D, Q, r, gen)
    y = _outside(D, Q, r, gen)
    ratio = np.atleast_1d(c4_ratio(green, D, frame, Q, r, x, y, z1, z2))
    curve = stability_curve(ratio)
    notes = [CAVEAT.format(n=n, tol=STABILITY_RTOL)]
    if not curve.accepted:
        logger.warning("C4: sup not stable (last change %.3g)", curve.last_change)
    return FitReport(
        c_hat=curve.value,
        gamma_hat=None,
        n_tuples=n,
        stability_curve=labelled_curves({"C4": curve}),
        accepted=curve.accepted,
        notes=notes,
        table=pd.DataFrame({"r": r, "ratio": ratio}),
    )

"""
Empirical checks of 3G-type inequalities for Green functions of stable
processes on kappa-fat sets.

Every check works against a :class:`~stablelab.core.green.GreenEvaluator`.
On balls the closed-form oracle keeps estimator noise out of the ratios;
elsewhere Monte Carlo errors are propagated and reported. A sup over finite
samples never certifies an inequality: reports carry their stability curve
and the caveat line.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from stablelab.core.geometry import (
    Ball,
    DomainSpec,
    KFatCharacteristics,
    ReferenceFrame,
    _norm,
    as_points,
    bset_witness,
    corkscrew,
    mutual_scale,
)
from stablelab.core.green import BallGreenOracle, GreenEvaluator, MonteCarloGreen, TabulatedGreen
from stablelab.core.kernels import StableParams, default_c0
from stablelab.core.rng import RngLike, as_generator
from stablelab.exceptions import DegenerateConfigurationError, DomainError, ParameterError
from stablelab.lab.sampling import (
    CAVEAT,
    STABILITY_RTOL,
    FitReport,
    labelled_curves,
    loglog_fit,
    sample_tuples,
    stability_curve,
)

logger = logging.getLogger(__name__)

NOISE_RTOL = 0.20
DEFAULT_DELTAS = tuple(2.0 ** -k for k in range(3, 11))


def green_source(green: GreenEvaluator) -> str:
    if isinstance(green, BallGreenOracle):
        return "oracle"
    if isinstance(green, MonteCarloGreen):
        return "mc"
    if isinstance(green, TabulatedGreen):
        return "table"
    return type(green).__name__


def default_gamma_grid(alpha: float, n: int = 10) -> np.ndarray:
    return np.linspace(alpha / 4.0, alpha, n)


# -- ratio records ---------------------------------------------------------


@dataclass(frozen=True)
class RatioRecord:
    x: Tuple[float, ...]
    y: Tuple[float, ...]
    z: Tuple[float, ...]
    w: Tuple[float, ...]
    lhs: float
    rhs: float
    ratio: float
    gamma_used: float
    green_source: str

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> Iterator["RatioRecord"]:
        d = sum(1 for c in frame.columns if c.startswith("x") and c[1:].isdigit())
        for row in frame.itertuples(index=False):
            rec = row._asdict()
            pts = {k: tuple(rec[f"{k}{i}"] for i in range(d)) for k in "xyzw"}
            yield cls(
                **pts,
                lhs=rec["lhs"],
                rhs=rec["rhs"],
                ratio=rec["ratio"],
                gamma_used=rec["gamma_used"],
                green_source=rec["green_source"],
            )

    def as_dict(self) -> dict:
        return asdict(self)


def ratio_frame(tuples: np.ndarray, lhs, rhs, gamma: float, source: str) -> pd.DataFrame:
    """RatioRecord rows for a batch of tuples of shape (n, 4, d)."""
    n, _, d = tuples.shape
    cols = {}
    for j, name in enumerate("xyzw"):
        for i in range(d):
            cols[f"{name}{i}"] = tuples[:, j, i]
    cols["lhs"] = lhs
    cols["rhs"] = rhs
    cols["ratio"] = np.asarray(lhs) / np.asarray(rhs)
    cols["gamma_used"] = np.full(n, float(gamma))
    cols["green_source"] = [source] * n
    return pd.DataFrame(cols)


# -- the two sides ---------------------------------------------------------


def _rel(vals: np.ndarray, errs: np.ndarray) -> np.ndarray:
    return np.divide(errs, np.abs(vals), out=np.zeros_like(vals), where=vals != 0)


def _check_distinct(pairs: dict) -> None:
    for name, (a, b) in pairs.items():
        if np.any(_norm(a - b) == 0):
            raise DegenerateConfigurationError(f"degenerate tuple: {name}")


def threeg_lhs(green: GreenEvaluator, x, y, z, w) -> Tuple[np.ndarray, np.ndarray]:
    """
    G(x,y) G(z,w) / G(x,w) with first-order error propagation.

    Returns ``(values, errors)`` for row-paired point arrays.
    """
    d = green.p.d
    xs, _ = as_points(x, d)
    ys, _ = as_points(y, d)
    zs, _ = as_points(z, d)
    ws, _ = as_points(w, d)
    _check_distinct({"x = y": (xs, ys), "z = w": (zs, ws), "x = w": (xs, ws)})
    n = xs.shape[0]
    vals, errs = green.evaluate(np.vstack([xs, zs, xs]), np.vstack([ys, ws, ws]))
    gxy, gzw, gxw = vals[:n], vals[n:2 * n], vals[2 * n:]
    rel = np.sqrt(
        _rel(gxy, errs[:n]) ** 2 + _rel(gzw, errs[n:2 * n]) ** 2 + _rel(gxw, errs[2 * n:]) ** 2
    )
    lhs = gxy * gzw / gxw
    return lhs, lhs * rel


def threeg_rhs(p: StableParams, x, y, z, w, gamma: float) -> np.ndarray:
    """
    ((|x-w| ^ |y-z|)/|x-y| v 1)^gamma ((|x-w| ^ |y-z|)/|z-w| v 1)^gamma H(x,y,z,w)

    with H = |x-w|^(d-alpha) / (|x-y|^(d-alpha) |z-w|^(d-alpha)); the
    constant c is left out.
    """
    d, a = p.d, p.alpha
    xs, single = as_points(x, d)
    ys, _ = as_points(y, d)
    zs, _ = as_points(z, d)
    ws, _ = as_points(w, d)
    _check_distinct({"x = y": (xs, ys), "z = w": (zs, ws), "x = w": (xs, ws)})
    dxy, dzw, dxw, dyz = _norm(xs - ys), _norm(zs - ws), _norm(xs - ws), _norm(ys - zs)
    m = np.minimum(dxw, dyz)
    factors = np.maximum(m / dxy, 1.0) ** gamma * np.maximum(m / dzw, 1.0) ** gamma
    h = (dxw / (dxy * dzw)) ** (d - a)
    out = factors * h
    return out[0] if single else out


def classical_rhs(p: StableParams, x, y, z) -> np.ndarray:
    """|x-y|^(alpha-d) + |y-z|^(alpha-d)."""
    xs, single = as_points(x, p.d)
    ys, _ = as_points(y, p.d)
    zs, _ = as_points(z, p.d)
    e = p.alpha - p.d
    out = _norm(xs - ys) ** e + _norm(ys - zs) ** e
    return out[0] if single else out


def _noise_notes(rel: np.ndarray, notes: list) -> None:
    noisy = int(np.sum(rel > NOISE_RTOL))
    if noisy:
        notes.append(f"{noisy} ratios carry Monte Carlo error above {NOISE_RTOL:.0%}")
        logger.warning("%d ratios carry Monte Carlo error above %.0f%%", noisy, 100 * NOISE_RTOL)


def _drop_degenerate(tuples: np.ndarray, slots: Sequence[Tuple[int, int]]) -> np.ndarray:
    keep = np.ones(tuples.shape[0], dtype=bool)
    for i, j in slots:
        keep &= _norm(tuples[:, i] - tuples[:, j]) > 0
    return tuples[keep]


# -- fits ------------------------------------------------------------------


def fit_3g(
    green: GreenEvaluator,
    D: DomainSpec,
    frame: ReferenceFrame,
    n: int,
    gamma_grid: Optional[Sequence[float]] = None,
    seed: RngLike = None,
    **sampling,
) -> FitReport:
    """
    Sup of G(x,y,z,w) / RHS_gamma over boundary-biased quadruples for each
    gamma of the grid.

    ``gamma_hat`` is the least grid gamma whose sup is stable under doubling
    of the sample; ``c_hat`` is that sup. ``table`` holds the ratio records
    at ``gamma_hat`` (the largest grid gamma when none is stable).
    """
    p = green.p
    grid = np.sort(np.asarray(default_gamma_grid(p.alpha) if gamma_grid is None else gamma_grid, dtype=float))
    if grid.size == 0 or np.any(grid < 0):
        raise ParameterError("gamma_grid must hold nonnegative values")
    tuples = _drop_degenerate(sample_tuples(D, n, 4, seed, **sampling), [(0, 1), (2, 3), (0, 3)])
    x, y, z, w = (tuples[:, k] for k in range(4))
    lhs, err = threeg_lhs(green, x, y, z, w)
    notes = [CAVEAT.format(n=tuples.shape[0], tol=STABILITY_RTOL)]
    _noise_notes(_rel(lhs, err), notes)

    curves, rhs_by_gamma = {}, {}
    gamma_hat = None
    for g in grid:
        rhs = threeg_rhs(p, x, y, z, w, g)
        rhs_by_gamma[g] = rhs
        curve = stability_curve(lhs / rhs)
        curves[f"gamma={g:.6g}"] = curve
        if gamma_hat is None and curve.accepted:
            gamma_hat = float(g)
    chosen = gamma_hat if gamma_hat is not None else float(grid[-1])
    if gamma_hat is None:
        notes.append("no grid gamma gave a stable sup")
        logger.warning("3G fit: no gamma in %s gave a stable sup", grid)
    c_hat = curves[f"gamma={chosen:.6g}"].value
    resolution = float(np.diff(grid).max()) if grid.size > 1 else None
    logger.info("3G fit on %s: gamma_hat=%s c_hat=%.6g over %d tuples", D.kind, gamma_hat, c_hat, tuples.shape[0])
    return FitReport(
        c_hat=c_hat,
        gamma_hat=gamma_hat,
        n_tuples=int(tuples.shape[0]),
        stability_curve=labelled_curves(curves),
        grid_resolution=resolution,
        accepted=gamma_hat is not None,
        notes=notes,
        table=ratio_frame(tuples, lhs, rhs_by_gamma[chosen], chosen, green_source(green)),
    )


def fit_classical_3g(green: GreenEvaluator, D: DomainSpec, n: int, seed: RngLike = None, **sampling) -> FitReport:
    """Sup of G(x,y) G(y,z) / (G(x,z) (|x-y|^(alpha-d) + |y-z|^(alpha-d)))."""
    p = green.p
    triples = _drop_degenerate(sample_tuples(D, n, 3, seed, **sampling), [(0, 1), (1, 2), (0, 2)])
    x, y, z = (triples[:, k] for k in range(3))
    # G(x,y,y,z) is the classical numerator and denominator
    lhs, err = threeg_lhs(green, x, y, y, z)
    rhs = classical_rhs(p, x, y, z)
    notes = [CAVEAT.format(n=triples.shape[0], tol=STABILITY_RTOL)]
    _noise_notes(_rel(lhs, err), notes)
    curve = stability_curve(lhs / rhs)
    if not curve.accepted:
        logger.warning("classical 3G sup unstable: last doubling changed it by %.3g", curve.last_change)
    table = pd.DataFrame({"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs})
    return FitReport(
        c_hat=curve.value,
        gamma_hat=None,
        n_tuples=int(triples.shape[0]),
        stability_curve=labelled_curves({"classical": curve}),
        accepted=curve.accepted,
        notes=notes,
        table=table,
    )


# -- counterexample --------------------------------------------------------


def counterexample_points(ball: Ball, delta: float, separation: float) -> np.ndarray:
    """
    (x, y, z, w) in the plane of the first two axes.

    x and w sit at depth ``delta`` with |x - w| = ``separation``; y is x
    rotated toward w by a chord of delta/2, z is w rotated toward x the same
    way, so r(x,y) = rho(x) = rho(y) and r(z,w) = rho(z) = rho(w).
    """
    R = ball.radius
    s = R - delta
    if not 0 < delta < R:
        raise ParameterError("delta must lie in (0, radius)")
    if not 0 < separation <= 2 * s:
        raise ParameterError("separation does not fit on the sphere of depth delta")
    half = np.arcsin(separation / (2 * s))
    step = 2 * np.arcsin(delta / (4 * s))
    if 2 * step >= 2 * half:
        raise ParameterError("delta too large for the separation")
    angles = np.array([-half, -half + step, half - step, half])
    pts = np.zeros((4, ball.dim))
    pts[:, 0] = s * np.cos(angles)
    pts[:, 1] = s * np.sin(angles)
    return pts + ball.c


def counterexample_sweep(
    p: StableParams,
    ball: Ball,
    deltas: Sequence[float] = DEFAULT_DELTAS,
    separation: float = 0.5,
    gamma: Optional[float] = None,
) -> pd.DataFrame:
    """
    lhs / H and lhs / RHS_gamma along shrinking depths.

    Without the correction factors the ratio grows as the four points sink
    to the boundary; with them (default gamma = alpha/2) it stays bounded.
    """
    gamma = p.alpha / 2.0 if gamma is None else gamma
    oracle = BallGreenOracle(p, ball)
    rows = []
    for delta in deltas:
        x, y, z, w = counterexample_points(ball, float(delta), separation)
        lhs = float(threeg_lhs(oracle, x, y, z, w)[0][0])
        h = float(threeg_rhs(p, x, y, z, w, 0.0))
        full = float(threeg_rhs(p, x, y, z, w, gamma))
        rows.append({
            "delta": float(delta),
            "separation": separation,
            "lhs": lhs,
            "factor_free_ratio": lhs / h,
            "factored_ratio": lhs / full,
            "gamma": gamma,
            "blowup": separation ** 2 / float(delta) ** 2,
        })
    return pd.DataFrame(rows)


# -- boundary growth and Carleson ------------------------------------------


def _chars(frame: ReferenceFrame) -> KFatCharacteristics:
    return KFatCharacteristics(frame.R, frame.kappa)


def growth_check(
    green: GreenEvaluator,
    D: DomainSpec,
    frame: ReferenceFrame,
    Q,
    r: float,
    s_grid: Optional[Sequence[float]] = None,
) -> FitReport:
    """
    Fit u(A_s(Q)) >= c (s/r)^gamma u(A_r(Q)) for u = G_D(., z0).

    gamma_fit is the log-log slope of u(A_s)/u(A_r) against s/r and c the
    smallest ratio once that power is divided out. The stability curve holds
    the slope refitted on coarser subgrids.
    """
    p = green.p
    s = np.sort(np.geomspace(r / 2 ** 8, r, 9) if s_grid is None else np.asarray(s_grid, dtype=float))
    if np.any(s <= 0) or np.any(s > r):
        raise ParameterError("s_grid must lie in (0, r]")
    Qp = as_points(Q, p.d)[0][0]
    chars = _chars(frame)
    pts = np.atleast_2d(corkscrew(D, np.repeat(Qp[None, :], s.size + 1, axis=0), np.append(s, r), chars))
    z0 = np.broadcast_to(np.asarray(frame.z0), pts.shape)
    u, u_err = green.evaluate(pts, z0)
    ratio = u[:-1] / u[-1]
    t = s / r
    fit = loglog_fit(t, ratio) if np.any(t < 1) else None
    if fit is None:
        raise ParameterError("s_grid needs at least one s < r")
    gamma_fit = fit.slope
    c = float(np.min(ratio / t ** gamma_fit))
    notes = [f"gamma_fit={gamma_fit:.4g}, alpha={p.alpha:.4g}, margin={p.alpha - gamma_fit:.4g}, kappa={frame.kappa:.4g}"]
    if fit.r2 < 0.9:
        notes.append(f"noisy growth fit: R^2={fit.r2:.3f} < 0.9")
        logger.warning("growth fit at Q=%s has R^2=%.3f", Qp, fit.r2)
    _noise_notes(_rel(u, u_err), notes)
    rows = []
    for step in (4, 2, 1):
        sub = slice(None, None, step)
        if np.sum(t[sub] < 1) >= 2:
            rows.append({"n": int(t[sub].size), "sup": loglog_fit(t[sub], ratio[sub]).slope})
    table = pd.DataFrame({"s": s, "u": u[:-1], "u_err": u_err[:-1], "ratio": ratio})
    return FitReport(
        c_hat=c,
        gamma_hat=float(gamma_fit),
        n_tuples=int(s.size),
        stability_curve=pd.DataFrame(rows, columns=["n", "sup"]),
        grid_resolution=float(np.max(np.diff(np.log2(t)))) if t.size > 1 else None,
        accepted=bool(gamma_fit < p.alpha),
        notes=notes,
        columns={"r2": fit.r2},
        table=table,
    )


def _probe_ball(D: DomainSpec, Q: np.ndarray, r: float, n: int, gen: np.random.Generator) -> np.ndarray:
    """Points of D in B(Q, r), radially biased toward Q."""
    out = np.empty((0, D.dim))
    while out.shape[0] < n:
        m = 2 * n + 16
        dirs = gen.standard_normal((m, D.dim))
        dirs /= _norm(dirs)[:, None]
        cand = Q + dirs * (r * gen.random(m))[:, None]
        out = np.concatenate([out, cand[D.contains(cand)]])
    return out[:n]


def carleson_check(
    green: GreenEvaluator,
    D: DomainSpec,
    frame: ReferenceFrame,
    Q,
    r: float,
    y_far,
    n_probe: int,
    seed: RngLike = None,
) -> FitReport:
    """Sup of G(x, y) / G(A_r(Q), y) over probes x in D within r of Q."""
    p = green.p
    if not 0 < r < frame.kappa * frame.R / 4.0:
        raise ParameterError(f"Carleson radius must lie in (0, kappa R / 4) = (0, {frame.kappa * frame.R / 4:.6g})")
    Qp = as_points(Q, p.d)[0][0]
    y = as_points(y_far, p.d)[0][0]
    if not D.contains(y[None, :])[0]:
        raise DomainError("y_far must lie in D")
    if _norm((y - Qp)[None, :])[0] < 4 * r:
        raise DomainError("y_far must lie outside B(Q, 4r)")
    A = np.atleast_2d(corkscrew(D, Qp, r, _chars(frame)))
    x = _probe_ball(D, Qp, r, n_probe, as_generator(seed))
    vals, errs = green.evaluate(np.vstack([x, A]), np.broadcast_to(y, (n_probe + 1, p.d)))
    ratio = vals[:-1] / vals[-1]
    rel = np.sqrt(_rel(vals[:-1], errs[:-1]) ** 2 + _rel(vals[-1:], errs[-1:]) ** 2)
    notes = [CAVEAT.format(n=n_probe, tol=STABILITY_RTOL)]
    _noise_notes(rel, notes)
    curve = stability_curve(ratio)
    table = pd.DataFrame({"rho": -D.signed_distance(x), "ratio": ratio})
    return FitReport(
        c_hat=curve.value,
        gamma_hat=None,
        n_tuples=n_probe,
        stability_curve=labelled_curves({"carleson": curve}),
        accepted=curve.accepted,
        notes=notes,
        columns={"r": r},
        table=table,
    )


def elementary_ineq_check(a, b, c):
    """(a/b v 1) + (a/c v 1) <= 2 (a/b v 1)(a/c v 1), elementwise."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    if np.any(a <= 0) or np.any(b <= 0) or np.any(c <= 0):
        raise ParameterError("a, b and c must be positive")
    u = np.maximum(a / b, 1.0)
    v = np.maximum(a / c, 1.0)
    held = u + v <= 2.0 * u * v
    return bool(held) if held.ndim == 0 else held


# -- the intermediate bound and its ratio bounds ---------------------------


def g_values(green: GreenEvaluator, frame: ReferenceFrame, pts: np.ndarray) -> np.ndarray:
    """g = G_D(., z0) capped at C1; g(z0) = C1."""
    if frame.c1 is None:
        frame = frame.with_green_constant(green.p.d, green.p.alpha, default_c0(green.p))
    z0 = np.asarray(frame.z0)
    out = np.full(pts.shape[0], frame.c1)
    away = _norm(pts - z0) > 0
    if away.any():
        vals, _ = green.evaluate(pts[away], np.broadcast_to(z0, (int(away.sum()), pts.shape[1])))
        out[away] = np.minimum(vals, frame.c1)
    return out


def _boundary_quotient(green, D, frame, x, y, z) -> np.ndarray:
    """
    [G(x,z)/G(y,z)] / [G(x,z')/G(y,z')] with z' halfway between z and its
    nearest boundary point Q, so both lie in B(Q, r/4) for r = 4 rho(z).
    NaN unless r < R and x, y stay outside B(Q, r).
    """
    Q = D.project(z)
    zh = 0.5 * (z + Q)
    r = 4.0 * _norm(z - Q) * (1 + 1e-9)
    ok = (r < frame.R) & (_norm(x - Q) >= r) & (_norm(y - Q) >= r)
    out = np.full(x.shape[0], np.nan)
    if ok.any():
        xs, ys, zs, ws = x[ok], y[ok], z[ok], zh[ok]
        k = xs.shape[0]
        v, _ = green.evaluate(np.vstack([xs, ys, xs, ys]), np.vstack([zs, zs, ws, ws]))
        out[ok] = (v[:k] / v[k:2 * k]) / (v[2 * k:3 * k] / v[3 * k:])
    return out


def _witness_floor(green, D, frame, x, gamma) -> np.ndarray:
    """r^gamma / g(A_r(Q_x)) at r = rho(x) where rho(x) < eps1, NaN elsewhere."""
    r = -D.signed_distance(x)
    near = r < frame.eps1
    out = np.full(x.shape[0], np.nan)
    if near.any():
        A = np.atleast_2d(corkscrew(D, D.project(x[near]), r[near], _chars(frame)))
        out[near] = r[near] ** gamma / g_values(green, frame, A)
    return out


def intermediate_bound_check(
    green: GreenEvaluator,
    D: DomainSpec,
    frame: ReferenceFrame,
    tuples: np.ndarray,
    gamma: float,
) -> FitReport:
    """
    The g-form bound on G(x,y,z,w) and the ratio bounds behind it.

    Each column is a ratio whose sup over tuples must stay bounded:

    - ``main``: G(x,y,z,w) / [g(y) g(z) g(A_xw)^2 / (g(A_xy)^2 g(A_zw)^2) H]
    - ``triangle``: g(A_xw)^2 / (g(A_xy)^2 + g(A_yz)^2 + g(A_zw)^2)
    - ``g_dominated_by_witness``: (g(x) v g(y)) / g(A_xy)
    - ``witness_monotone``: g(A_xy) / g(A_yz) where r(x,z) <= r(y,z)
    - ``witness_floor``: r^gamma / g(A_r(Q_x)) for r = rho(x) < eps1
    - ``witness_growth``: g(A_yz) / g(A_xy) over (r(y,z)/r(x,y))^gamma v 1
    - ``pair_factor_xw`` and ``pair_factor_yz``: the g-expression over the
      gamma factors built from r(x,w) and r(y,z) respectively
    - ``two_sided_green``: the two-sided g-form estimate of G(x,y), as
      max(t, 1/t)
    - ``boundary_quotient``: the boundary Green-quotient comparison for
      the pair (x, y) against z and a point below it (NaN where the
      geometry does not apply)

    ``A_uv`` is the witness of the pair (u, v) from ``bset_witness``.
    """
    p = green.p
    d, a = p.d, p.alpha
    tuples = _drop_degenerate(np.asarray(tuples, dtype=float), [(0, 1), (2, 3), (0, 3), (1, 2)])
    n = tuples.shape[0]
    if n == 0:
        raise ParameterError("no admissible tuples")
    x, y, z, w = (tuples[:, k] for k in range(4))
    if frame.c1 is None:
        frame = frame.with_green_constant(d, a, default_c0(p))

    A_xy = np.atleast_2d(bset_witness(D, frame, x, y))
    A_zw = np.atleast_2d(bset_witness(D, frame, z, w))
    A_xw = np.atleast_2d(bset_witness(D, frame, x, w))
    A_yz = np.atleast_2d(bset_witness(D, frame, y, z))
    g_all = g_values(green, frame, np.vstack([x, y, z, w, A_xy, A_zw, A_xw, A_yz]))
    gx, gy, gz, gw, g_xy, g_zw, g_xw, g_yz = np.split(g_all, 8)

    lhs, err = threeg_lhs(green, x, y, z, w)
    h = threeg_rhs(p, x, y, z, w, 0.0)
    gexpr = gy * gz * g_xw ** 2 / (g_xy ** 2 * g_zw ** 2)

    r_xy = np.atleast_1d(mutual_scale(D, x, y))
    r_zw = np.atleast_1d(mutual_scale(D, z, w))
    r_xw = np.atleast_1d(mutual_scale(D, x, w))
    r_yz = np.atleast_1d(mutual_scale(D, y, z))
    r_xz = np.atleast_1d(mutual_scale(D, x, z))

    def pair_factor(r_mid):
        return np.maximum(r_mid / r_xy, 1.0) ** gamma * np.maximum(r_mid / r_zw, 1.0) ** gamma

    gxy_pair, _ = green.evaluate(x, y)
    t = gxy_pair * g_xy ** 2 / (gx * gy * _norm(x - y) ** (a - d))
    cols = {
        "main": lhs / (gexpr * h),
        "triangle": g_xw ** 2 / (g_xy ** 2 + g_yz ** 2 + g_zw ** 2),
        "g_dominated_by_witness": np.maximum(np.maximum(gx, gy) / g_xy, np.maximum(gz, gw) / g_zw),
        "witness_monotone": np.where(r_xz <= r_yz, g_xy / g_yz, np.nan),
        "witness_floor": _witness_floor(green, D, frame, x, gamma),
        "witness_growth": (g_yz / g_xy) / np.maximum((r_yz / r_xy) ** gamma, 1.0),
        "pair_factor_xw": gexpr / pair_factor(r_xw),
        "pair_factor_yz": gexpr / pair_factor(r_yz),
        "two_sided_green": np.maximum(t, 1.0 / t),
        "boundary_quotient": _boundary_quotient(green, D, frame, x, y, z),
    }
    curves = {name: stability_curve(v) for name, v in cols.items()}
    notes = [CAVEAT.format(n=n, tol=STABILITY_RTOL)]
    _noise_notes(_rel(lhs, err), notes)
    unstable = [k for k, c in curves.items() if not c.accepted]
    if unstable:
        notes.append("unstable columns: " + ", ".join(unstable))
        logger.warning("intermediate bound: unstable columns %s", unstable)
    return FitReport(
        c_hat=curves["main"].value,
        gamma_hat=float(gamma),
        n_tuples=n,
        stability_curve=labelled_curves(curves),
        accepted=not unstable,
        notes=notes,
        columns={k: c.value for k, c in curves.items()},
        table=pd.DataFrame(cols),
    )

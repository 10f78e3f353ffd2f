"""
Kato-class diagnostics for non-local and local perturbations of killed
stable processes.

The gauge double integral

    I(x, w) = int_D int_D G(x,y) G(z,w) / G(x,w) |F(y,z)| |y-z|^(-d-alpha) dy dz

is estimated by stratifying |y - z| into dyadic shells and importance
sampling y near x and z near w. A shell-truncated sum that keeps moving as
shells are added is flagged divergent.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from stablelab.core.geometry import Ball, DomainSpec, _norm, as_points, sample_interior, unit_directions
from stablelab.core.green import GreenEvaluator
from stablelab.core.kernels import StableParams, unit_sphere_area
from stablelab.core.parallel import run_ordered
from stablelab.core.reduction import Moments, tree_sum
from stablelab.core.relativistic import (
    CANCELLATION_RADIUS,
    RelativisticParams,
    one_minus_psi,
    psi_closed,
    q_m_profile,
)
from stablelab.core.rng import as_seed_sequence, child_sequences, make_generator, seed_provenance, spawn_sequences
from stablelab.core.wos import EstimatorResult
from stablelab.exceptions import AcceptanceError, DegenerateConfigurationError, ParameterError, YoungExponentError
from stablelab.lab.sampling import CAVEAT, STABILITY_RTOL, FitReport, sample_tuples, stability_curve

logger = logging.getLogger(__name__)

YOUNG_CASES = ("f1", "f2", "f3", "f4")
FORMS = ("power", "relativistic", "table", "zero")
BASE_LEVELS = 8
LEVELS_PER_REFINEMENT = 4
REFINEMENTS = 3


# -- perturbations ---------------------------------------------------------


@dataclass(frozen=True)
class PerturbationSpec:
    """
    A bound |F(y, z)| as a function of |y - z|.

    ``hypothesis`` records whether |F| <= c |y-z|^beta holds with beta > alpha.
    """

    form: str
    beta: float
    c: float = 1.0
    m: Optional[float] = None
    table: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = None
    hypothesis: bool = False

    def __post_init__(self):
        if self.form not in FORMS:
            raise ParameterError(f"unknown perturbation form {self.form!r}")
        if self.c < 0:
            raise ParameterError("perturbation constant c must be >= 0")
        if self.form == "relativistic" and not (self.m and self.m > 0):
            raise ParameterError("relativistic perturbations need a mass m > 0")
        if self.form == "table" and self.table is None:
            raise ParameterError("table perturbations need (r, value) columns")

    @classmethod
    def power(cls, p: StableParams, beta: float, c: float = 1.0) -> "PerturbationSpec":
        return cls("power", float(beta), float(c), hypothesis=beta > p.alpha)

    @classmethod
    def relativistic(cls, p: StableParams, m: float, c: float = 1.0) -> "PerturbationSpec":
        # |F^m| <= c r^2 near the diagonal and |F^m| <= 1 everywhere
        return cls("relativistic", 2.0, float(c), m=float(m), hypothesis=2.0 > p.alpha)

    @classmethod
    def zero(cls) -> "PerturbationSpec":
        return cls("zero", math.inf, 0.0, hypothesis=True)

    @classmethod
    def from_table(cls, p: StableParams, r, values, beta: float) -> "PerturbationSpec":
        r = tuple(float(v) for v in r)
        values = tuple(abs(float(v)) for v in values)
        if len(r) != len(values) or len(r) < 2 or any(b <= a for a, b in zip(r, r[1:])):
            raise ParameterError("table radii must increase and pair up with values")
        return cls("table", float(beta), 1.0, table=(r, values), hypothesis=beta > p.alpha)

    def magnitude(self, p: StableParams, dist: np.ndarray) -> np.ndarray:
        """|F| at separations ``dist``."""
        if self.form == "zero":
            return np.zeros_like(dist)
        if self.form == "power":
            return self.c * dist ** self.beta
        if self.form == "relativistic":
            rp = RelativisticParams(p, self.m)
            r = rp.scale * np.asarray(dist, dtype=float)
            # 1 - psi(r) = r^2 / (4 (nu - 1)) + O(r^4) below the cancellation radius
            out = r * r / (4.0 * (rp.nu - 1.0))
            far = r >= CANCELLATION_RADIUS
            if np.any(far):
                out = np.where(far, 0.0, out)
                out[far] = np.atleast_1d(one_minus_psi(rp, r[far]))
            return self.c * out
        r, v = (np.asarray(t) for t in self.table)
        return np.interp(dist, r, v)

    def describe(self) -> dict:
        out = {"form": self.form, "beta": self.beta, "c": self.c, "hypothesis": self.hypothesis}
        if self.m is not None:
            out["m"] = self.m
        return out


# -- Young exponents -------------------------------------------------------


@dataclass(frozen=True)
class YoungExponents:
    case: str
    p: float
    q: float
    interval: Optional[Tuple[float, float]]
    split_needed: bool = True
    margins: Dict[str, float] = field(default_factory=dict)


def _young_interval(d: int, alpha: float, lower: Dict[str, float]) -> Tuple[float, float, str]:
    hi = d / (d - alpha)
    name, lo = max(lower.items(), key=lambda kv: kv[1])
    return lo, hi, name


def select_young_exponents(p: StableParams, beta: float, gamma: float, case: str) -> YoungExponents:
    """
    Hölder pair (p, q) splitting the case function by Young's inequality.

    ``f1``: (d-alpha) p < d and (2 alpha - beta) q < d.
    ``f2``/``f3``: (d-alpha) p < d, gamma q < d and (2 alpha - beta - gamma) q < d.
    ``f4``: ``f1`` with alpha replaced by alpha - gamma.

    p is the midpoint of the admissible interval and q = p/(p-1). When the
    power of |y - z| is nonnegative no split is needed and p = q = 2.
    """
    if case not in YOUNG_CASES:
        raise ParameterError(f"unknown Young case {case!r}; expected one of {YOUNG_CASES}")
    d, a = p.d, p.alpha
    if not beta > a:
        raise YoungExponentError(f"beta > alpha fails: beta={beta:g}, alpha={a:g}")
    if not a < d:
        raise YoungExponentError(f"alpha < d fails: alpha={a:g}, d={d}")
    if case != "f1" and not 0 < gamma < a:
        raise YoungExponentError(f"0 < gamma < alpha fails: gamma={gamma:g}, alpha={a:g}")

    if case in ("f1", "f4"):
        a_eff = a if case == "f1" else a - gamma
        if beta >= 2 * a_eff:
            return YoungExponents(case, 2.0, 2.0, None, split_needed=False)
        lo, hi, name = _young_interval(d, a_eff, {"1": 1.0, "d/(d-2alpha+beta)": d / (d - 2 * a_eff + beta)})
        if not lo < hi:
            raise YoungExponentError(f"empty interval: {name} = {lo:g} >= d/(d-alpha) = {hi:g}")
        pp = 0.5 * (lo + hi)
        qq = pp / (pp - 1.0)
        margins = {
            "(d-alpha)p < d": d - (d - a_eff) * pp,
            "(2alpha-beta)q < d": d - (2 * a_eff - beta) * qq,
        }
    else:
        if beta + gamma >= 2 * a:
            return YoungExponents(case, 2.0, 2.0, None, split_needed=False)
        lower = {"1": 1.0, "d/(d-gamma)": d / (d - gamma), "d/(d-2alpha+beta+gamma)": d / (d - 2 * a + beta + gamma)}
        lo, hi, name = _young_interval(d, a, lower)
        if not lo < hi:
            raise YoungExponentError(f"empty interval: {name} = {lo:g} >= d/(d-alpha) = {hi:g}")
        pp = 0.5 * (lo + hi)
        qq = pp / (pp - 1.0)
        margins = {
            "(d-alpha)p < d": d - (d - a) * pp,
            "gamma q < d": d - gamma * qq,
            "(2alpha-beta-gamma)q < d": d - (2 * a - beta - gamma) * qq,
        }
    bad = [k for k, v in margins.items() if not v > 0]
    if bad:
        raise YoungExponentError(f"constraint fails at the midpoint: {', '.join(bad)}")
    return YoungExponents(case, pp, qq, (lo, hi), True, margins)


# -- majorant --------------------------------------------------------------


def six_term_majorant(p: StableParams, x, y, z, w, beta: float, gamma: float) -> np.ndarray:
    """
    Sum of the six power terms dominating
    G(x,y) G(z,w) / G(x,w) |y-z|^(beta-d-alpha), constant left out.
    """
    d, a = p.d, p.alpha
    xs, single = as_points(x, d)
    ys, _ = as_points(y, d)
    zs, _ = as_points(z, d)
    ws, _ = as_points(w, d)
    s = _norm(xs - ys)
    t = _norm(ys - zs)
    u = _norm(zs - ws)
    if np.any(s == 0) or np.any(t == 0) or np.any(u == 0):
        raise DegenerateConfigurationError("x = y, y = z or z = w")
    e, g = d - a, gamma
    out = (
        1.0 / (s ** (e + g) * t ** (d + a - beta))
        + 1.0 / (t ** (d + a - beta) * u ** (e + g))
        + 1.0 / (s ** e * t ** (2 * a - beta) * u ** e)
        + 1.0 / (s ** e * t ** (2 * a - beta - g) * u ** (e + g))
        + 1.0 / (s ** (e + g) * t ** (2 * a - beta - g) * u ** e)
        + 1.0 / (s ** (e + g) * t ** (2 * a - beta - 2 * g) * u ** (e + g))
    )
    return out[0] if single else out


# -- densities -------------------------------------------------------------


def rho_power_density(D: DomainSpec, s: float, c: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """q(y) = c rho_D(y)^(-s)."""

    def density(pts: np.ndarray) -> np.ndarray:
        return c * np.abs(D.signed_distance(pts)) ** (-s)

    return density


def q_m_density(p: RelativisticParams, ball: Ball, n_grid: int = 24) -> Callable[[np.ndarray], np.ndarray]:
    """|q^m| on a ball, interpolated in depth from ``q_m_profile``."""
    table = q_m_profile(p, ball, n_grid)
    depth = table["depth"].to_numpy()
    vals = np.abs(table["q_m"].to_numpy())

    def density(pts: np.ndarray) -> np.ndarray:
        return np.interp(np.abs(ball.signed_distance(pts)), depth, vals)

    return density


# -- importance sampling ---------------------------------------------------


def _power_sample(center: np.ndarray, scale: float, a: float, n: int, gen: np.random.Generator) -> np.ndarray:
    """Density proportional to |y - center|^(a-d) on B(center, scale)."""
    d = center.shape[0]
    return center + unit_directions(n, d, gen) * (scale * gen.random(n) ** (1.0 / a))[:, None]


def _power_density(pts: np.ndarray, center: np.ndarray, scale: float, a: float) -> np.ndarray:
    d = center.shape[0]
    r = _norm(pts - center)
    inside = (r < scale) & (r > 0)
    safe = np.where(inside, r, 1.0)
    return np.where(inside, a * safe ** (a - d) / (unit_sphere_area(d - 1) * scale ** a), 0.0)


def _shell_volume(d: int, r1: float, r2: float) -> float:
    return unit_sphere_area(d - 1) / d * (r2 ** d - r1 ** d)


def _shell_offsets(d: int, r1: float, r2: float, n: int, gen: np.random.Generator) -> np.ndarray:
    rad = (r1 ** d + gen.random(n) * (r2 ** d - r1 ** d)) ** (1.0 / d)
    return unit_directions(n, d, gen) * rad[:, None]


def _gauge_level(task) -> Moments:
    """Mean and spread of one dyadic shell of |y - z|."""
    green, D, F, x, w, gxw, k, n, ss, mass = task
    # evaluator randomness comes from the task stream, never from evaluator state
    green_ss = child_sequences(ss, 1)[0]
    p = green.p
    d, a = p.d, p.alpha
    gen = make_generator(ss)
    diam = D.diameter
    r1, r2 = diam * 2.0 ** (-k - 1), diam * 2.0 ** -k
    h = _shell_offsets(d, r1, r2, n, gen)
    comp = gen.integers(0, 3, size=n)
    y = np.empty((n, d))
    uni = comp == 0
    if uni.any():
        y[uni] = sample_interior(D, int(uni.sum()), gen)
    near_x = comp == 1
    if near_x.any():
        y[near_x] = _power_sample(x, diam, a / 2, int(near_x.sum()), gen)
    near_w = comp == 2
    if near_w.any():
        y[near_w] = _power_sample(w, diam, a / 2, int(near_w.sum()), gen) - h[near_w]
    z = y + h
    inside = D.contains(y) & D.contains(z) & (_norm(y - x) > 0) & (_norm(z - w) > 0)
    q = (
        inside / D.volume
        + _power_density(y, x, diam, a / 2)
        + _power_density(z, w, diam, a / 2)
    ) / (3.0 * _shell_volume(d, r1, r2))
    vals = np.zeros(n)
    if inside.any():
        yi, zi = y[inside], z[inside]
        m = yi.shape[0]
        g, _ = green.evaluate(
            np.vstack([np.broadcast_to(x, (m, d)), zi]), np.vstack([yi, np.broadcast_to(w, (m, d))]), seed=green_ss
        )
        dist = h[inside]
        dist = _norm(dist)
        f = g[:m] * g[m:] / gxw * F.magnitude(p, dist) * dist ** (-d - a)
        if mass is not None:
            rp = RelativisticParams(p, mass)
            f = f * psi_closed(rp, rp.scale * dist)
        vals[inside] = f / q[inside]
    return Moments.of(vals)


def _stability(partial: Sequence[float], rtol: float) -> Tuple[bool, bool, float]:
    changes = []
    for prev, cur in zip(partial, partial[1:]):
        if cur == 0 and prev == 0:
            changes.append(0.0)
        else:
            changes.append(abs(cur - prev) / abs(cur))
    stable = changes[-1] <= rtol
    divergent = len(changes) >= REFINEMENTS and all(c > rtol for c in changes[-REFINEMENTS:])
    return stable, divergent, changes[-1]


def gauge_double_integral(
    green: GreenEvaluator,
    D: DomainSpec,
    F: PerturbationSpec,
    x,
    w,
    n: int = 20_000,
    seed=None,
    *,
    base_levels: int = BASE_LEVELS,
    relativistic_mass: Optional[float] = None,
    workers: int = 1,
    strict: bool = False,
) -> EstimatorResult:
    """
    Stratified estimate of the gauge double integral at (x, w).

    Shell k holds diam 2^(-k-1) <= |y-z| < diam 2^-k and draws ``n`` samples
    from its own stream, so adding shells never changes earlier ones. The
    sum over ``base_levels`` shells is refined three times by
    ``LEVELS_PER_REFINEMENT`` shells; it is stable when the last refinement
    moves it by at most 10% and divergent when all three do.
    ``relativistic_mass`` weights the jump kernel by psi(m^(1/alpha)|y-z|).

    :raises AcceptanceError: when ``strict`` and the integral is flagged divergent.
    """
    p = green.p
    xp = as_points(x, p.d)[0][0]
    wp = as_points(w, p.d)[0][0]
    if np.array_equal(xp, wp):
        raise DegenerateConfigurationError("x and w must differ")
    if not np.all(D.contains(np.vstack([xp, wp]))):
        raise ParameterError("x and w must lie in D")
    started = time.perf_counter()
    n_levels = base_levels + REFINEMENTS * LEVELS_PER_REFINEMENT
    streams = spawn_sequences(seed, n_levels + 1)
    gxw = float(green.evaluate(xp, wp, seed=streams[-1])[0][0])
    tasks = [(green, D, F, xp, wp, gxw, k, n, streams[k], relativistic_mass) for k in range(n_levels)]
    levels = run_ordered(_gauge_level, tasks, workers=workers)
    means = [lv.mean for lv in levels]
    cuts = [base_levels + j * LEVELS_PER_REFINEMENT for j in range(REFINEMENTS + 1)]
    partial = [tree_sum(means[:c]) for c in cuts]
    stable, divergent, change = _stability(partial, STABILITY_RTOL)
    stderr = math.sqrt(tree_sum([lv.stderr ** 2 for lv in levels]))
    if divergent:
        logger.warning("gauge integral at x=%s w=%s flagged divergent (last change %.3g)", xp, wp, change)
        if strict:
            raise AcceptanceError(f"gauge integral flagged divergent at x={xp}, w={wp}")
    elif not stable:
        logger.warning("gauge integral at x=%s w=%s not stable (last change %.3g)", xp, wp, change)
    return EstimatorResult(
        value=partial[-1],
        stderr=stderr,
        n_samples=n * n_levels,
        seed=seed_provenance(seed),
        walltime=time.perf_counter() - started,
        extras={
            "stable": stable,
            "divergent": divergent,
            "last_change": change,
            "partial_sums": partial,
            "level_means": means,
        },
    )


def _scan_report(rows, notes, label) -> FitReport:
    table = pd.DataFrame(rows)
    values = table["value"].to_numpy()
    best = int(np.argmax(values))
    curve = stability_curve(values)
    all_stable = bool(table["stable"].all())
    any_divergent = bool(table["divergent"].any())
    if any_divergent:
        notes.append(f"{int(table['divergent'].sum())} {label} flagged divergent")
    if not all_stable:
        notes.append(f"{int((~table['stable']).sum())} {label} not stable under refinement")
    if not curve.accepted:
        notes.append(f"sup over {label} moved {curve.last_change:.3g} on the last doubling")
    return FitReport(
        c_hat=float(values[best]),
        gamma_hat=None,
        n_tuples=len(values),
        stability_curve=curve.table,
        accepted=all_stable and not any_divergent and curve.accepted,
        notes=notes,
        columns={"argmax": best, "grid_change": curve.last_change},
        table=table,
    )


def gauge_sup_scan(
    green: GreenEvaluator,
    D: DomainSpec,
    F: PerturbationSpec,
    pairs: Optional[np.ndarray] = None,
    n_pairs: int = 8,
    n: int = 20_000,
    seed=None,
    **kwargs,
) -> FitReport:
    """
    Gauge integrals over a grid of (x, w) pairs, boundary-biased by default.

    ``c_hat`` is the largest value and ``columns["argmax"]`` its row; the
    scan is accepted when every pair is stable and the sup over the first
    n, n/2, n/4, n/8 pairs settles to within 10% on the last doubling.
    """
    p = green.p
    streams = spawn_sequences(seed, 2)
    if pairs is None:
        pairs = sample_tuples(D, n_pairs, 2, streams[0])
    pairs = np.asarray(pairs, dtype=float)
    pair_streams = streams[1].spawn(pairs.shape[0])
    rows = []
    for i, (x, w) in enumerate(pairs):
        res = gauge_double_integral(green, D, F, x, w, n, pair_streams[i], **kwargs)
        row = {f"x{k}": x[k] for k in range(p.d)}
        row.update({f"w{k}": w[k] for k in range(p.d)})
        row.update({
            "rho_x": float(-D.signed_distance(x[None, :])[0]),
            "rho_w": float(-D.signed_distance(w[None, :])[0]),
            "value": res.value,
            "stderr": res.stderr,
            "stable": res.extras["stable"],
            "divergent": res.extras["divergent"],
        })
        rows.append(row)
    notes = [CAVEAT.format(n=len(rows), tol=STABILITY_RTOL), f"perturbation: {F.describe()}"]
    report = _scan_report(rows, notes, "pairs")
    logger.info("gauge scan over %d pairs: max %.6g (accepted=%s)", len(rows), report.c_hat, report.accepted)
    return report


def martin_gauge_scan(
    green: GreenEvaluator,
    D: DomainSpec,
    F: PerturbationSpec,
    x,
    w_sequence,
    n: int = 20_000,
    seed=None,
    **kwargs,
) -> FitReport:
    """
    Martin-kernel gauge integrals along a sequence w_k tending to the boundary.

    With M_D(z, w_k) = G(z, w_k) / G(x0, w_k) the normalizing point cancels
    between numerator and denominator, so each term is the gauge integral at
    (x, w_k); the scan reports their sup.
    """
    p = green.p
    ws, _ = as_points(w_sequence, p.d)
    streams = as_seed_sequence(seed).spawn(ws.shape[0])
    rows = []
    for k, wk in enumerate(ws):
        res = gauge_double_integral(green, D, F, x, wk, n, streams[k], **kwargs)
        rows.append({
            "k": k,
            "rho_w": float(-D.signed_distance(wk[None, :])[0]),
            "value": res.value,
            "stderr": res.stderr,
            "stable": res.extras["stable"],
            "divergent": res.extras["divergent"],
        })
    notes = [CAVEAT.format(n=len(rows), tol=STABILITY_RTOL), f"perturbation: {F.describe()}"]
    return _scan_report(rows, notes, "sequence terms")


def s_infty_integral(
    green: GreenEvaluator,
    D: DomainSpec,
    q: Callable[[np.ndarray], np.ndarray],
    x,
    z,
    n: int = 40_000,
    seed=None,
) -> EstimatorResult:
    """
    int_D G(x,y) G(y,z) / G(x,z) |q(y)| dy, sampling y uniformly and near
    x and z. ``extras["stable"]`` compares the estimate on the first half
    of the sample with the full one.
    """
    p = green.p
    d, a = p.d, p.alpha
    xp = as_points(x, d)[0][0]
    zp = as_points(z, d)[0][0]
    if np.array_equal(xp, zp):
        raise DegenerateConfigurationError("x and z must differ")
    started = time.perf_counter()
    root = as_seed_sequence(seed)
    gen = make_generator(root)
    s_gxz, s_pairs = child_sequences(root, 2)
    diam = D.diameter
    comp = gen.integers(0, 3, size=n)
    y = np.empty((n, d))
    for c, center in ((0, None), (1, xp), (2, zp)):
        mask = comp == c
        if mask.any():
            k = int(mask.sum())
            y[mask] = sample_interior(D, k, gen) if center is None else _power_sample(center, diam, a / 2, k, gen)
    inside = D.contains(y) & (_norm(y - xp) > 0) & (_norm(y - zp) > 0)
    dens = (inside / D.volume + _power_density(y, xp, diam, a / 2) + _power_density(y, zp, diam, a / 2)) / 3.0
    vals = np.zeros(n)
    gxz = float(green.evaluate(xp, zp, seed=s_gxz)[0][0])
    if inside.any():
        yi = y[inside]
        m = yi.shape[0]
        g, _ = green.evaluate(
            np.vstack([np.broadcast_to(xp, (m, d)), yi]), np.vstack([yi, np.broadcast_to(zp, (m, d))]), seed=s_pairs
        )
        vals[inside] = g[:m] * g[m:] / gxz * np.abs(q(yi)) / dens[inside]
    full = Moments.of(vals)
    half = Moments.of(vals[: n // 2])
    change = abs(full.mean - half.mean) / abs(full.mean) if full.mean != 0 else 0.0
    return EstimatorResult(
        value=full.mean,
        stderr=full.stderr,
        n_samples=n,
        seed=seed_provenance(seed),
        walltime=time.perf_counter() - started,
        extras={"stable": change <= STABILITY_RTOL, "last_change": change},
    )

"""
Closed-form kernels of the rotationally invariant alpha-stable process.

Riesz constants, jumping and killing densities, the Poisson kernel of a ball
and its radial exit law from the center, the ball Green function (the exact
oracle of the package) and the characteristic exponent of a stable law with
a spectral density on the sphere.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional

import numpy as np
from scipy import integrate, special

from stablelab.core.geometry import (
    Ball,
    DomainSpec,
    as_points,
    unit_directions,
    _norm,
    _unbatch,
)
from stablelab.core.rng import RngLike, as_generator
from stablelab.exceptions import (
    DegenerateConfigurationError,
    DomainError,
    ParameterError,
    QuadratureError,
)

logger = logging.getLogger(__name__)

ORACLE_RTOL = 1e-10
FIELD_RTOL = 1e-6


@dataclass(frozen=True)
class StableParams:
    d: int
    alpha: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ParameterError(f"process.d must be an integer >= 2, got {self.d}")
        if not 0 < self.alpha < 2:
            raise ParameterError(f"process.alpha must lie in (0, 2), got {self.alpha}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "alpha", float(self.alpha))


@dataclass(frozen=True)
class Estimate:
    """A deterministic or Monte Carlo value with its error estimate."""

    value: float
    error: float


def unit_sphere_area(k: int) -> float:
    """Surface area of the unit sphere S^k in R^(k+1); S^0 counts two points."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def sphere_moment(d: int, alpha: float) -> float:
    """Integral of |y_1|^alpha over the unit sphere of R^d."""
    return 2.0 * math.pi ** ((d - 1) / 2) * math.gamma((alpha + 1) / 2) / math.gamma((d + alpha) / 2)


def riesz_constant(p: StableParams) -> float:
    """A(d, -alpha) = alpha 2^(alpha-1) pi^(-d/2) Gamma((d+alpha)/2) / Gamma(1-alpha/2)."""
    d, a = p.d, p.alpha
    return a * 2.0 ** (a - 1) * math.pi ** (-d / 2) * special.gamma((d + a) / 2) / special.gamma(1 - a / 2)


def riesz_green_constant(p: StableParams) -> float:
    d, a = p.d, p.alpha
    if not a < d:
        raise ParameterError("the Riesz potential needs alpha < d")
    return special.gamma((d - a) / 2) / (2.0 ** a * math.pi ** (d / 2) * special.gamma(a / 2))


def _pair_distance(x, y, d: int):
    xs, single = as_points(x, d)
    ys, single_y = as_points(y, d)
    dist = _norm(xs - ys)
    if np.any(dist == 0):
        raise DegenerateConfigurationError("the two points must be distinct")
    return dist, single and single_y


def jump_density(p: StableParams, x, y):
    """J(x, y) = A(d, -alpha) |x-y|^(-d-alpha) / 2."""
    dist, single = _pair_distance(x, y, p.d)
    return _unbatch(0.5 * riesz_constant(p) * dist ** (-p.d - p.alpha), single)


def riesz_green(p: StableParams, x, y):
    """Green function of the whole space, c |x-y|^(alpha-d)."""
    dist, single = _pair_distance(x, y, p.d)
    return _unbatch(riesz_green_constant(p) * dist ** (p.alpha - p.d), single)


# -- exterior integrals ----------------------------------------------------


def _ball_chord(s: float, R: float, phi: np.ndarray) -> np.ndarray:
    """Distance from a point at radius s to the sphere of radius R along angle phi."""
    return -s * np.cos(phi) + np.sqrt(R * R - (s * np.sin(phi)) ** 2)


def exterior_integral(
    p: StableParams,
    D: DomainSpec,
    x,
    radial_weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    *,
    rtol: float = FIELD_RTOL,
    n_mc: int = 400_000,
    mc_rtol: float = 2e-2,
    rng: RngLike = None,
) -> Estimate:
    """
    A(d,-alpha) times the integral over the complement of D of
    w(|x-y|) |x-y|^(-d-alpha) dy.

    Balls reduce to an angular integral of a radial integral, evaluated by
    adaptive quadrature; ``w = None`` uses the closed radial antiderivative.
    Other shapes use importance sampling with Pareto radii from rho_D(x),
    which covers the infinite tail exactly.
    """
    pts, _ = as_points(x, p.d)
    point = pts[0]
    sd = float(D.signed_distance(pts)[0])
    if not sd < 0:
        raise DomainError("x must lie in the open domain")
    A = riesz_constant(p)
    d, a = p.d, p.alpha

    if isinstance(D, Ball):
        s = float(_norm(point - D.c))
        R = D.radius
        inner_errs: List[float] = []

        def radial(t0: float) -> float:
            if radial_weight is None:
                return t0 ** (-a) / a
            val, err = integrate.quad(
                lambda t: float(radial_weight(np.asarray(t))) * t ** (-1 - a),
                t0, np.inf, epsabs=0.0, epsrel=1e-11, limit=200,
            )
            inner_errs.append(err)
            return val

        def angular(phi: float) -> float:
            return radial(float(_ball_chord(s, R, phi))) * math.sin(phi) ** (d - 2)

        val, err = integrate.quad(angular, 0.0, math.pi, epsabs=0.0, epsrel=1e-11, limit=200)
        # the angular weight is at most one on [0, pi]
        inner = math.pi * max(inner_errs, default=0.0)
        scale = A * unit_sphere_area(d - 2)
        value, error = scale * val, scale * (err + inner)
        logger.debug("exterior quadrature: outer error %.3g, inner bound %.3g", err, inner)
        if abs(error) > rtol * abs(value):
            raise QuadratureError(
                f"exterior quadrature error {error:.3g} exceeds {rtol:g} relative"
            )
        return Estimate(value, error)

    gen = as_generator(rng)
    depth = -sd
    t = depth * (1.0 - gen.random(n_mc)) ** (-1.0 / a)
    theta = unit_directions(n_mc, d, gen)
    y = point + t[:, None] * theta
    f = (~D.contains(y)).astype(float)
    if radial_weight is not None:
        f *= radial_weight(t)
    scale = A * unit_sphere_area(d - 1) * depth ** (-a) / a
    value = scale * f.mean()
    error = scale * f.std(ddof=1) / math.sqrt(n_mc)
    if abs(error) > mc_rtol * abs(value):
        raise QuadratureError(
            f"exterior Monte Carlo error {error:.3g} exceeds {mc_rtol:g} relative"
        )
    return Estimate(float(value), float(error))


def killing_density(p: StableParams, D: DomainSpec, x, **kwargs) -> Estimate:
    """kappa_D(x) = A(d,-alpha) times the integral of |x-y|^(-d-alpha) over the complement of D."""
    return exterior_integral(p, D, x, None, **kwargs)


# -- the ball ---------------------------------------------------------------


@lru_cache(maxsize=None)
def poisson_constant(p: StableParams) -> float:
    """
    Normalizing constant of the ball Poisson kernel.

    From the center, the radial mass reduces to half of the integral of
    u^(alpha/2-1) (1-u)^(-alpha/2) over (0, 1); the endpoint singularities
    are handled by an algebraic-weight rule.
    """
    a = p.alpha
    val, err = integrate.quad(
        lambda u: 0.5, 0.0, 1.0, weight="alg", wvar=(a / 2 - 1, -a / 2), epsabs=0.0, epsrel=1e-13
    )
    c1 = 1.0 / (unit_sphere_area(p.d - 1) * val)
    logger.debug("Poisson constant d=%d alpha=%g: %.15g", p.d, a, c1)
    return c1


def ball_poisson_kernel(p: StableParams, center, r: float, x, z):
    """Density at z of the exit position from B(center, r) started at x."""
    c, _ = as_points(center, p.d)
    xs, single = as_points(x, p.d)
    zs, single_z = as_points(z, p.d)
    rx2 = np.sum((xs - c) ** 2, axis=1)
    rz2 = np.sum((zs - c) ** 2, axis=1)
    if np.any(rx2 >= r * r):
        raise DomainError("x must lie in the open ball")
    if np.any(rz2 <= r * r):
        raise DomainError("z must lie outside the closed ball")
    a = p.alpha
    val = poisson_constant(p) * ((r * r - rx2) / (rz2 - r * r)) ** (a / 2) * _norm(xs - zs) ** (-p.d)
    return _unbatch(val, single and single_z)


def poisson_mass_from_center(p: StableParams, r: float = 1.0) -> float:
    """
    Total mass of the ball Poisson kernel seen from the center, integrated
    radially from the kernel itself. Equals one up to quadrature error.
    """
    d, a = p.d, p.alpha
    area = unit_sphere_area(d - 1)
    origin = np.zeros(d)

    def shell(s: float) -> float:
        z = origin.copy()
        z[0] = s
        return area * s ** (d - 1) * float(ball_poisson_kernel(p, origin, r, origin, z))

    def regular(s: float) -> float:
        # shell(s) * (s - r)^(a/2), finite at s = r
        return area * poisson_constant(p) * r ** a * (s + r) ** (-a / 2) / s

    near, err_near = integrate.quad(
        regular, r, 2 * r, weight="alg", wvar=(-a / 2, 0.0),
        epsabs=1e-13, epsrel=1e-12, limit=200,
    )
    far, err_far = integrate.quad(shell, 2 * r, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    if err_near + err_far > 1e-8:
        raise QuadratureError(f"Poisson mass quadrature error {err_near + err_far:.3g} too large")
    return near + far


def ball_exit_radial_cdf(p: StableParams, r: float, s):
    """P(|X_exit - center| <= s) from the center of a ball of radius r."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < r):
        raise ParameterError("the exit radius s must satisfy s >= r")
    a = p.alpha
    with np.errstate(divide="ignore"):
        x = 1.0 - (r / s_arr) ** 2
    out = special.betainc(1 - a / 2, a / 2, x)
    return float(out) if np.ndim(out) == 0 else out


def ball_exit_radial_density(p: StableParams, r: float, s):
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= r):
        raise ParameterError("the density is defined for s > r")
    a = p.alpha
    out = 2.0 * math.sin(math.pi * a / 2) / math.pi * r ** a / s_arr * (s_arr ** 2 - r * r) ** (-a / 2)
    return float(out) if np.ndim(out) == 0 else out


def ball_exit_probability(p: StableParams, center, r: float, x, s_lo: float, s_hi: float) -> float:
    """
    P(s_lo < |X_exit - center| <= s_hi) from x by direct integration of the
    Poisson kernel.

    The integral is taken in (radius, polar angle about the axis through x)
    after the substitution sigma = (s^2 - r^2)^(1 - alpha/2), which removes
    the boundary singularity.
    """
    c, _ = as_points(center, p.d)
    xs, _ = as_points(x, p.d)
    c, xp = c[0], xs[0]
    if s_lo < r:
        raise ParameterError("s_lo must be at least r")
    d, a = p.d, p.alpha
    h = float(_norm(xp - c))
    if h >= r:
        raise DomainError("x must lie in the open ball")
    pref = poisson_constant(p) * (r * r - h * h) ** (a / 2) * unit_sphere_area(d - 2) / (2.0 - a)
    expo = 1.0 / (1.0 - a / 2)

    def integrand(phi: float, sigma: float) -> float:
        s = math.sqrt(r * r + sigma ** expo)
        dist2 = s * s + h * h - 2.0 * s * h * math.cos(phi)
        return s ** (d - 2) * dist2 ** (-d / 2) * math.sin(phi) ** (d - 2)

    lo = (s_lo ** 2 - r * r) ** (1 - a / 2)
    hi = np.inf if np.isinf(s_hi) else (s_hi ** 2 - r * r) ** (1 - a / 2)
    if hi == np.inf:
        val, _ = integrate.dblquad(integrand, lo, np.inf, 0.0, math.pi, epsabs=1e-12, epsrel=1e-10)
    else:
        val, _ = integrate.dblquad(integrand, lo, hi, 0.0, math.pi, epsabs=1e-12, epsrel=1e-10)
    return float(pref * val)


def ball_harmonic_measure(p: StableParams, center, r: float, x, edges) -> np.ndarray:
    """
    Exit probabilities from B(center, r) started at x over the radial cells
    (edges[i], edges[i+1]]; the last edge may be infinite.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterError("edges must be a strictly increasing sequence of radii")
    return np.array(
        [ball_exit_probability(p, center, r, x, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    )


def ball_green(
    p: StableParams,
    r: float,
    x,
    y,
    *,
    center=None,
    method: str = "beta",
):
    """
    Green function of the ball B(center, r).

    G = c_R |x-y|^(alpha-d) I_{w/(1+w)}(alpha/2, (d-alpha)/2) with
    w = (r^2-|x-c|^2)(r^2-|y-c|^2) / (r^2 |x-y|^2); the regularized incomplete
    beta tends to one as r grows, so the constant is the Riesz constant.
    ``method="quad"`` evaluates the inner integral by adaptive quadrature.
    """
    d, a = p.d, p.alpha
    c = np.zeros(d) if center is None else as_points(center, d)[0][0]
    xs, single = as_points(x, d)
    ys, single_y = as_points(y, d)
    rx2 = np.sum((xs - c) ** 2, axis=1)
    ry2 = np.sum((ys - c) ** 2, axis=1)
    if np.any(rx2 >= r * r) or np.any(ry2 >= r * r):
        raise DomainError("both points must lie in the open ball")
    dist = _norm(xs - ys)
    if np.any(dist == 0):
        raise DegenerateConfigurationError("the two points must be distinct")
    w = (r * r - rx2) * (r * r - ry2) / (r * r * dist * dist)
    ha, hb = a / 2, (d - a) / 2
    if method == "beta":
        frac = special.betainc(ha, hb, w / (1.0 + w))
    elif method == "quad":
        norm = special.beta(ha, hb)
        frac = np.empty_like(w)
        for i, wi in enumerate(w):
            # s = v^(1/ha) turns s^(ha-1) ds into dv/ha
            val, err = integrate.quad(
                lambda v: (1.0 + v ** (1.0 / ha)) ** (-d / 2) / ha,
                0.0, wi ** ha, epsabs=0.0, epsrel=ORACLE_RTOL, limit=200,
            )
            if err > 100 * ORACLE_RTOL * max(abs(val), 1e-300):
                raise QuadratureError("ball Green quadrature missed its tolerance")
            frac[i] = val / norm
    else:
        raise ParameterError(f"unknown ball_green method {method!r}")
    return _unbatch(riesz_green_constant(p) * dist ** (a - d) * frac, single and single_y)


def ball_green_from_center(p: StableParams, r, dist) -> np.ndarray:
    """
    G_{B(c, r)}(c, y) as a function of r and |y - c|, vectorized over both.

    Zero outside the ball; the caller guards dist = 0.
    """
    r = np.asarray(r, dtype=float)
    dist = np.asarray(dist, dtype=float)
    d, a = p.d, p.alpha
    inside = dist < r
    safe = np.where(inside, dist, 1.0)
    frac = special.betainc(a / 2, (d - a) / 2, np.where(inside, 1.0 - (safe / r) ** 2, 0.0))
    return np.where(inside, riesz_green_constant(p) * safe ** (a - d) * frac, 0.0)


def calibrate_c0(p: StableParams, n_pairs: int = 10_000, rng: RngLike = None) -> float:
    """
    sup of G_B(x,y) |x-y|^(d-alpha) over pairs of the unit ball.

    Half of the pairs are uniform, half are close pairs deep inside, where
    the sup is approached.
    """
    gen = as_generator(rng)
    d = p.d
    unit = Ball(tuple([0.0] * d), 1.0)
    half = n_pairs // 2
    x = _uniform_ball(gen, n_pairs, d, 0.999)
    y = np.empty_like(x)
    y[:half] = _uniform_ball(gen, half, d, 0.999)
    offs = unit_directions(n_pairs - half, d, gen) * (0.05 * gen.random(n_pairs - half))[:, None]
    x[half:] = x[half:] * 0.5
    y[half:] = x[half:] + offs
    keep = _norm(x - y) > 0
    g = ball_green(p, unit.radius, x[keep], y[keep])
    return float(np.max(g * _norm(x[keep] - y[keep]) ** (d - p.alpha)))


def _uniform_ball(gen: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    return unit_directions(n, d, gen) * (radius * gen.random(n) ** (1.0 / d))[:, None]


# -- characteristic exponent -----------------------------------------------


@dataclass(frozen=True)
class SpectralDensity:
    """
    A symmetric density on the unit sphere with bounds 1/c1 <= f <= c1.

    ``f`` maps an array of unit vectors of shape (n, d) to values (n,).
    """

    f: Callable[[np.ndarray], np.ndarray]
    c1: float
    name: str = "custom"

    def __post_init__(self):
        if not self.c1 >= 1:
            raise ParameterError("spectral density bound c1 must be >= 1")

    @classmethod
    def constant(cls, value: float = 1.0) -> "SpectralDensity":
        c1 = max(value, 1.0 / value)
        return cls(lambda y: np.full(y.shape[0], float(value)), c1, name=f"constant({value})")

    @classmethod
    def two_bump(cls, axis, amplitude: float = 1.0, sharpness: float = 8.0) -> "SpectralDensity":
        """1 + amplitude exp(-sharpness (1 - (y.e)^2)): bumps at +e and -e."""
        e = np.asarray(axis, dtype=float)
        e = e / np.linalg.norm(e)

        def f(y: np.ndarray) -> np.ndarray:
            return 1.0 + amplitude * np.exp(-sharpness * (1.0 - (y @ e) ** 2))

        return cls(f, 1.0 + amplitude, name="two_bump")


def _sphere_rule(d: int, order: int):
    if d == 2:
        theta = 2.0 * math.pi * np.arange(order) / order
        nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return nodes, np.full(order, 2.0 * math.pi / order)
    if d == 3:
        n_t = max(order // 2, 2)
        z, wz = np.polynomial.legendre.leggauss(n_t)
        phi = 2.0 * math.pi * np.arange(2 * n_t) / (2 * n_t)
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        ww = np.repeat(wz[:, None], 2 * n_t, axis=1) * (math.pi / n_t)
        rho = np.sqrt(1.0 - zz ** 2)
        nodes = np.stack([rho * np.cos(pp), rho * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        return nodes, ww.reshape(-1)
    raise ParameterError("the characteristic exponent is implemented for d = 2 and d = 3")


def char_exponent(p: StableParams, f: SpectralDensity, xi, order: int = 4096) -> Estimate:
    """
    Phi(xi) = integral over the unit sphere of |y.xi|^alpha f(y) sigma(dy).

    Trapezoid rule on the circle for d = 2, Gauss-Legendre in the polar
    cosine times a trapezoid in longitude for d = 3. The error estimate is
    the difference with the rule of half the order.
    """
    xs, _ = as_points(xi, p.d)
    xi_v = xs[0]

    def rule(n: int) -> float:
        nodes, weights = _sphere_rule(p.d, n)
        vals = f.f(nodes)
        if np.any(vals < 1.0 / f.c1 - 1e-12) or np.any(vals > f.c1 + 1e-12):
            raise ParameterError(f"spectral density {f.name} leaves its stated bounds")
        if not np.allclose(vals, f.f(-nodes), rtol=1e-12, atol=0.0):
            raise ParameterError(f"spectral density {f.name} is not symmetric")
        return float(np.sum(weights * np.abs(nodes @ xi_v) ** p.alpha * vals))

    if p.d == 3:
        order = min(order, 512)
    full = rule(order)
    coarse = rule(order // 2)
    return Estimate(full, abs(full - coarse))


@lru_cache(maxsize=None)
def default_c0(p: StableParams) -> float:
    """calibrate_c0 on the default stream, computed once per (d, alpha)."""
    c0 = calibrate_c0(p)
    logger.info("calibrated C0 for d=%d alpha=%g: %.6g", p.d, p.alpha, c0)
    return c0

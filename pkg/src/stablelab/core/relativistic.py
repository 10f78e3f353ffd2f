"""
Kernels of the relativistic alpha-stable process.

The Levy density is the stable one damped by psi(m^(1/alpha)|x|), where

    psi(r) = 2^-(d+alpha) / Gamma((d+alpha)/2) * int_0^inf s^((d+alpha)/2-1) exp(-s/4 - r^2/s) ds

is a smooth function of r^2 with psi(0) = 1 and 0 < psi <= 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import integrate, special
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from stablelab.core.geometry import Ball, DomainSpec, as_points, _norm, _unbatch
from stablelab.core.kernels import (
    Estimate,
    StableParams,
    exterior_integral,
    jump_density,
    killing_density,
    riesz_constant,
)
from stablelab.exceptions import DegenerateConfigurationError, ParameterError, QuadratureError

logger = logging.getLogger(__name__)

PSI_RTOL = 1e-8
Q_M_RTOL = 1e-5


@dataclass(frozen=True)
class RelativisticParams:
    base: StableParams
    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise ParameterError(f"process.m must be > 0, got {self.m}")
        object.__setattr__(self, "m", float(self.m))

    @property
    def nu(self) -> float:
        return (self.base.d + self.base.alpha) / 2

    @property
    def scale(self) -> float:
        """m^(1/alpha), the factor applied to distances inside psi."""
        return self.m ** (1.0 / self.base.alpha)


def _split_quad(fn, r: float, rtol: float):
    """Integrate fn over (0, inf), split at s = 2r where exp(-s/4 - r^2/s) peaks."""
    kw = dict(epsabs=0.0, epsrel=rtol / 10, limit=400)
    if r == 0:
        val, err = integrate.quad(fn, 0.0, np.inf, **kw)
        return val, err
    v1, e1 = integrate.quad(fn, 0.0, 2.0 * r, **kw)
    v2, e2 = integrate.quad(fn, 2.0 * r, np.inf, **kw)
    return v1 + v2, e1 + e2


def _psi_scalar(nu: float, r: float, rtol: float) -> float:
    val, err = _split_quad(lambda s: s ** (nu - 1) * math.exp(-s / 4 - r * r / s), r, rtol)
    if err > rtol * abs(val):
        raise QuadratureError(f"psi({r:g}) quadrature error {err:.3g} above {rtol:g} relative")
    # 2^-(2 nu) / Gamma(nu) in log form keeps large nu finite
    return math.exp(math.log(val) - 2 * nu * math.log(2.0) - special.gammaln(nu))


def psi(p: RelativisticParams, r, rtol: float = PSI_RTOL):
    """psi(r) by adaptive quadrature; accepts a scalar or an array of r >= 0."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ParameterError("psi needs r >= 0")
    out = np.array([_psi_scalar(p.nu, float(v), rtol) for v in r_arr.ravel()]).reshape(r_arr.shape)
    return float(out) if out.ndim == 0 else out


def _log_psi_closed(nu: float, r: np.ndarray) -> np.ndarray:
    safe = np.where(r > 0, r, 1.0)
    # kve(nu, r) = K_nu(r) e^r
    log_val = (
        (1 - nu) * math.log(2.0) + nu * np.log(safe) + np.log(special.kve(nu, safe)) - safe - special.gammaln(nu)
    )
    return np.where(r > 0, log_val, 0.0)


def psi_closed(p: RelativisticParams, r):
    """Bessel form 2^(1-nu) r^nu K_nu(r) / Gamma(nu), with psi(0) = 1."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ParameterError("psi needs r >= 0")
    out = np.exp(_log_psi_closed(p.nu, r_arr))
    return float(out) if out.ndim == 0 else out


def _one_minus_psi_scalar(nu: float, r: float, rtol: float) -> float:
    if r == 0:
        return 0.0
    val, err = _split_quad(
        lambda s: -(s ** (nu - 1)) * math.exp(-s / 4) * math.expm1(-r * r / s), r, rtol
    )
    if err > rtol * abs(val):
        raise QuadratureError(f"1 - psi({r:g}) quadrature error {err:.3g} above {rtol:g} relative")
    return math.exp(math.log(val) - 2 * nu * math.log(2.0) - special.gammaln(nu))


CANCELLATION_RADIUS = 1e-3


def one_minus_psi(p: RelativisticParams, r, rtol: float = PSI_RTOL):
    """
    1 - psi(r) without cancellation for small r.

    Below CANCELLATION_RADIUS the expm1 form of the defining integral is
    integrated directly; above it the Bessel form loses no digits.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ParameterError("psi needs r >= 0")
    flat = r_arr.ravel()
    out = -np.expm1(_log_psi_closed(p.nu, flat))
    for i in np.flatnonzero(flat < CANCELLATION_RADIUS):
        out[i] = _one_minus_psi_scalar(p.nu, float(flat[i]), rtol)
    out = out.reshape(r_arr.shape)
    return float(out) if out.ndim == 0 else out


def levy_density_relativistic(p: RelativisticParams, x):
    """nu(x) = A(d,-alpha) |x|^(-d-alpha) psi(m^(1/alpha) |x|)."""
    xs, single = as_points(x, p.base.d)
    dist = _norm(xs)
    if np.any(dist == 0):
        raise DegenerateConfigurationError("the Levy density is singular at the origin")
    base = riesz_constant(p.base) * dist ** (-p.base.d - p.base.alpha)
    return _unbatch(base * psi_closed(p, p.scale * dist), single)


def jump_density_relativistic(p: RelativisticParams, x, y):
    """J^m(x, y) = J(x, y) psi(m^(1/alpha)|x-y|)."""
    xs, single = as_points(x, p.base.d)
    ys, single_y = as_points(y, p.base.d)
    stable = np.atleast_1d(jump_density(p.base, xs, ys))
    return _unbatch(stable * psi_closed(p, p.scale * _norm(xs - ys)), single and single_y)


def F_m(p: RelativisticParams, x, y):
    """F^m(x, y) = psi(m^(1/alpha)|x-y|) - 1, in (-1, 0]."""
    xs, single = as_points(x, p.base.d)
    ys, single_y = as_points(y, p.base.d)
    dist = _norm(xs - ys)
    if np.any(dist == 0):
        raise DegenerateConfigurationError("the two points must be distinct")
    vals = -np.atleast_1d(one_minus_psi(p, p.scale * dist))
    return _unbatch(vals, single and single_y)


def killing_density_relativistic(p: RelativisticParams, D: DomainSpec, x, **kwargs) -> Estimate:
    """kappa^m_D(x): the exterior integral of the relativistic jump kernel."""
    return exterior_integral(
        p.base, D, x, lambda t: psi_closed(p, p.scale * np.asarray(t)), **kwargs
    )


def q_m(p: RelativisticParams, D: DomainSpec, x, **kwargs) -> Estimate:
    """q^m(x) = kappa^m_D(x) - kappa_D(x), the exterior integral weighted by F^m <= 0."""
    kwargs.setdefault("rtol", Q_M_RTOL)
    return exterior_integral(
        p.base, D, x, lambda t: -one_minus_psi(p, p.scale * np.asarray(t)), **kwargs
    )


def killing_decomposition_gap(p: RelativisticParams, D: DomainSpec, x, **kwargs) -> float:
    """Relative gap between kappa^m_D and kappa_D + q^m computed separately."""
    km = killing_density_relativistic(p, D, x, **kwargs).value
    k = killing_density(p.base, D, x, **kwargs).value
    q = q_m(p, D, x, **kwargs).value
    return abs(km - (k + q)) / abs(km)


def q_m_profile(p: RelativisticParams, ball: Ball, n_grid: int = 24) -> pd.DataFrame:
    """
    q^m along a radius of a ball, tabulated against the boundary distance.

    Rows are sorted by increasing depth; the table feeds the kato module as
    a radial density.
    """
    if not isinstance(ball, Ball):
        raise ParameterError("q_m_profile is tabulated on balls only")
    depth = ball.radius * np.geomspace(1e-3, 1.0, n_grid, endpoint=False)
    rows = []
    e1 = np.zeros(ball.dim)
    e1[0] = 1.0
    for rho_v in depth:
        est = q_m(p, ball, ball.c + (ball.radius - rho_v) * e1)
        rows.append({"depth": rho_v, "q_m": est.value, "error": est.error})
    logger.debug("tabulated q^m on %d depths for m=%g", n_grid, p.m)
    return pd.DataFrame(rows)


@dataclass(frozen=True)
class QuadraticBoundFit:
    c: float
    slope: float
    r2: float


def fit_quadratic_bound(p: RelativisticParams, radii: Sequence[float]) -> QuadraticBoundFit:
    """
    Fitted c in |F^m| <= c r^2 on radii in (0, 1], with the log-log slope of
    |F^m| against r and its coefficient of determination.
    """
    r = np.asarray(radii, dtype=float)
    if np.any(r <= 0) or np.any(r > 1):
        raise ParameterError("radii must lie in (0, 1]")
    vals = np.atleast_1d(one_minus_psi(p, p.scale * r))
    c = float(np.max(vals / r ** 2))
    X = np.log(r).reshape(-1, 1)
    y = np.log(vals)
    model = LinearRegression().fit(X, y)
    fit = QuadraticBoundFit(c=c, slope=float(model.coef_[0]), r2=float(r2_score(y, model.predict(X))))
    logger.info("quadratic bound for m=%g: c=%.6g slope=%.4f", p.m, fit.c, fit.slope)
    return fit

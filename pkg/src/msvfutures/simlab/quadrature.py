"""Model-implied group parameters by Gauss-Hermite quadrature over the fast invariant law N(m_y, nu^2).

The Poisson-equation term uses the integrated-by-parts form

    <phi' eta beta> = -(beta / nu^2) < H(y) (eta^2(y) - eta_bar^2) >,   H(y) = int_{m_y}^y eta(u) du,

which avoids nesting the one-sided integral inside the outer average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from ..errors import NumericError
from ..pricing import GroupMarketParams
from .model import ModelSpec

QUAD_TOL = 1e-8
N_START = 32
N_MAX = 1024
_GL_X, _GL_W = leggauss(48)


def _invariant_average(f, m_y, nu, tol=QUAD_TOL):
    """<f> under N(m_y, nu^2), doubling the node count until the relative change is <= tol."""
    prev = None
    n = N_START
    while n <= N_MAX:
        x, w = hermegauss(n)
        val = np.dot(w, f(m_y + nu * x)) / np.sqrt(2 * np.pi)
        if prev is not None and abs(val - prev) <= tol * max(abs(val), 1e-300):
            return float(val)
        prev = val
        n *= 2
    raise NumericError(f"Gauss-Hermite average did not settle to {tol:g} by {N_MAX} nodes", best=float(prev))


def _antiderivative(eta, y, m_y):
    """int_{m_y}^y eta(u) du by fixed Gauss-Legendre on each interval."""
    y = np.asarray(y, dtype=float)
    half = 0.5 * (y - m_y)
    u = m_y + half[..., None] * (1.0 + _GL_X)
    return half * np.sum(_GL_W * eta(u), axis=-1)


@dataclass(frozen=True)
class FastAverages:
    eta_bar: float
    eta_mean: float
    phi_eta_beta: float


def fast_averages(spec: ModelSpec, z: float) -> FastAverages:
    m_y, nu = spec.m_y, spec.nu

    def eta(y):
        return spec.eta(y, z)

    eta_bar = np.sqrt(_invariant_average(lambda y: eta(y) ** 2, m_y, nu))
    eta_mean = _invariant_average(eta, m_y, nu)
    if spec.vol == "const":
        # eta^2 - eta_bar^2 vanishes identically; so does the Poisson solution
        return FastAverages(float(eta_bar), float(eta_mean), 0.0)
    cross = _invariant_average(lambda y: _antiderivative(eta, y, m_y) * (eta(y) ** 2 - eta_bar ** 2), m_y, nu)
    return FastAverages(float(eta_bar), float(eta_mean), float(-spec.beta / nu ** 2 * cross))


def eta_bar_of_z(spec: ModelSpec, z: float) -> float:
    return float(np.sqrt(_invariant_average(lambda y: spec.eta(y, z) ** 2, spec.m_y, spec.nu)))


def implied_group_params(spec: ModelSpec, z: float | None = None) -> GroupMarketParams:
    """(kappa, eta_bar, V3eps, V0delta) implied by the full model at slow level z (default z0)."""
    z = spec.z0 if z is None else z
    av = fast_averages(spec, z)
    h = 1e-5 * max(1.0, abs(z))
    d_eta_bar = (eta_bar_of_z(spec, z + h) - eta_bar_of_z(spec, z - h)) / (2 * h)
    v3 = -np.sqrt(spec.eps) * 0.5 * spec.rho1 * av.phi_eta_beta
    v0 = np.sqrt(spec.delta) / (2 * spec.kappa) * spec.rho2 * av.eta_mean * spec.nu_z * av.eta_bar * d_eta_bar
    return GroupMarketParams(spec.kappa, av.eta_bar, float(v3), float(v0))


def futures_level_V(spec: ModelSpec, z: float | None = None) -> tuple[float, float]:
    """Scaled futures-level corrections (sqrt(eps) V3, sqrt(delta) V1) for ``futures_curve``."""
    g = implied_group_params(spec, z)
    return g.V3eps, 2 * spec.kappa * g.V0delta

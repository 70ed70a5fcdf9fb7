"""First-order future prices on the exp-OU spot and their inversion in the log-state.

The spot is V = exp(s(t) + U) with U mean-reverting at rate kappa to m.
``h0`` is the leading-order future price, ``h_corrections`` the fast- and
slow-scale corrections and ``H0``/``H_corrections`` the inverse map from a
future price back to the log-state ``u``.

The correction scalars ``V3`` and ``V1`` are stored already multiplied by
sqrt(eps) and sqrt(delta) respectively, so ``h0 + h10 + h01`` is the
first-order future price.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError


def _zero(t):
    return 0.0 * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class SpotDynamicsParams:
    kappa: float
    m: float
    eta_bar: float
    V3: float = 0.0
    V1: float = 0.0
    seasonality: Callable = field(default=_zero, compare=False)

    def __post_init__(self):
        if not (self.kappa > 0 and np.isfinite(self.kappa)):
            raise DomainError("kappa must be positive")
        if not (self.eta_bar >= 0 and np.isfinite(self.eta_bar)):
            raise DomainError("eta_bar must be non-negative")


@dataclass(frozen=True)
class FuturesPoint:
    t: float
    T: float
    u: float
    price: float


def _tau(t, T):
    tau = np.asarray(T, dtype=float) - np.asarray(t, dtype=float)
    if np.any(tau < 0):
        raise DomainError("futures maturity T must not precede t")
    return tau


def _out(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def g_fast(tau, kappa):
    """(exp(-3 kappa tau) - 1) / (3 kappa)."""
    return np.expm1(-3.0 * kappa * np.asarray(tau, dtype=float)) / (3.0 * kappa)


def f_slow(tau, kappa):
    """Slow-scale time factor; ``f_slow * exp(-3 kappa tau)`` is bounded in tau.

    (exp(3k tau) - exp(2k tau)) / (2k^2) - (exp(3k tau) - 1) / (6k^2)
    """
    tau = np.asarray(tau, dtype=float)
    k = kappa
    return np.exp(3 * k * tau) * (-np.expm1(-k * tau)) / (2 * k * k) - np.expm1(3 * k * tau) / (6 * k * k)


def _slow_weight(tau, kappa):
    # f_slow(tau) * exp(-3 kappa tau), evaluated without overflow
    k = kappa
    return -np.expm1(-k * tau) / (2 * k * k) + np.expm1(-3 * k * tau) / (6 * k * k)


def _fast_weight(tau, kappa):
    # int_0^tau exp(-3 kappa s) ds = -g_fast(tau)
    return -g_fast(tau, kappa)


def h0(t, u, params: SpotDynamicsParams, T):
    tau = _tau(t, T)
    k = params.kappa
    expo = (params.seasonality(T) + params.m + (np.asarray(u, dtype=float) - params.m) * np.exp(-k * tau)
            + params.eta_bar ** 2 / (4 * k) * (-np.expm1(-2 * k * tau)))
    return _out(np.exp(expo))


def h_corrections(t, u, params: SpotDynamicsParams, T):
    """Fast (h10) and slow (h01) first-order corrections to the future price.

    h10 = V3 * (1 - exp(-3 kappa tau)) / (3 kappa) * h0
    h01 = V1 * f_slow(tau) * exp(-3 kappa tau) * h0
    """
    tau = _tau(t, T)
    base = h0(t, u, params, T)
    h10 = params.V3 * _fast_weight(tau, params.kappa) * base
    h01 = params.V1 * _slow_weight(tau, params.kappa) * base
    return _out(h10), _out(h01)


def H0(t, x, params: SpotDynamicsParams, T):
    """Inverse of ``h0`` in the log-state."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("future price must be positive")
    tau = _tau(t, T)
    k = params.kappa
    drift = params.seasonality(T) + params.m + params.eta_bar ** 2 / (4 * k) * (-np.expm1(-2 * k * tau))
    return _out(params.m + np.exp(k * tau) * (np.log(x) - drift))


def H_corrections(t, x, params: SpotDynamicsParams, T):
    """First-order corrections of the inverse map; neither depends on the price level.

    H10 = -h10 / (dh0/du) and H01 = -h01 / (dh0/du) at u = H0(x).
    """
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("future price must be positive")
    tau = _tau(t, T)
    k = params.kappa
    # dh0/du = exp(-kappa tau) h0
    scale = np.exp(k * tau)
    H10 = -params.V3 * _fast_weight(tau, k) * scale + 0.0 * x
    H01 = -params.V1 * _slow_weight(tau, k) * scale + 0.0 * x
    return _out(H10), _out(H01)


def dh0_du(t, u, params: SpotDynamicsParams, T):
    tau = _tau(t, T)
    return _out(np.exp(-params.kappa * tau) * h0(t, u, params, T))

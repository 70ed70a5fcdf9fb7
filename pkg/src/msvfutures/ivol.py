"""First-order implied volatility, affine in LMMR = log(K/F)/T0.

    I ~ eta_bar*b_bar + (V3/eta_bar)*b_eps + (V0/eta_bar)*b_delta
        + ((V3/eta_bar^3)*a_eps + (V0/eta_bar^3)*a_delta) * LMMR

Coefficients are evaluated at valuation time zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ExpansionBreakdownError
from .pricing import GroupMarketParams
from .weights import Tenor, lam0, lam1, lam3, lam_sigma

IV_FLOOR = 0.005


@dataclass(frozen=True)
class SmileCoefficients:
    b_bar: float
    b_eps: float
    b_delta: float
    a_eps: float
    a_delta: float


@dataclass(frozen=True)
class LMMRPoint:
    lmmr: float
    iv: float


def lmmr(strike, forward, T0):
    return np.log(np.asarray(strike, dtype=float) / np.asarray(forward, dtype=float)) / np.asarray(T0, dtype=float)


def smile_coefficients(T0, T, kappa) -> SmileCoefficients:
    T0 = np.asarray(T0, dtype=float)
    if np.any(T0 <= 0):
        raise DomainError("option maturity must be positive")
    tenor = Tenor(0.0, T0, T)
    ls = lam_sigma(tenor, kappa)
    l3 = lam3(tenor, kappa)
    l0 = lam0(tenor, kappa)
    l1 = lam1(tenor, kappa)
    return SmileCoefficients(
        b_bar=ls,
        b_eps=1.5 * l3 / ls,
        b_delta=l0 / ls + 0.5 * l1 / ls,
        a_eps=l3 / ls ** 3,
        a_delta=l1 / ls ** 3,
    )


def smile_slope_intercept(T0, T, gmp: GroupMarketParams):
    """(slope, intercept) of the affine smile for one tenor."""
    c = smile_coefficients(T0, T, gmp.kappa)
    eb = gmp.eta_bar
    slope = gmp.V3eps / eb ** 3 * c.a_eps + gmp.V0delta / eb ** 3 * c.a_delta
    level = eb * c.b_bar + gmp.V3eps / eb * c.b_eps + gmp.V0delta / eb * c.b_delta
    return slope, level


def iv_approx(x_lmmr, T0, T, gmp: GroupMarketParams, check: bool = True):
    slope, level = smile_slope_intercept(T0, T, gmp)
    iv = level + slope * np.asarray(x_lmmr, dtype=float)
    if check and np.any(iv <= IV_FLOOR):
        raise ExpansionBreakdownError(
            f"first-order implied vol fell to {np.min(iv):.4g} (<= {IV_FLOOR}); "
            "parameters are outside the asymptotic regime"
        )
    iv = np.asarray(iv)
    return iv[()] if iv.ndim == 0 else iv

"""First-order price approximation for European calls/puts on a future.

    P ~ P0 + P10_eps + P01_delta

P0 is the Black price at the time-averaged vol sigma_bar; the two
corrections are combinations of the D2 and D1D2 Greek operators of that
Black price, weighted by the tenor weights and the group parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import black76
from .errors import DomainError
from .weights import Tenor, lam0, lam1, lam3, sigma_bar

CREDIBILITY = 0.5


@dataclass(frozen=True)
class GroupMarketParams:
    """Group market parameters at the current slow-factor level.

    ``V3eps`` and ``V0delta`` already include the sqrt(eps)/sqrt(delta) scaling.
    """

    kappa: float
    eta_bar: float
    V3eps: float = 0.0
    V0delta: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise DomainError("kappa must be positive")
        if not (np.isfinite(self.eta_bar) and self.eta_bar > 0):
            raise DomainError("eta_bar must be positive")
        if not (np.isfinite(self.V3eps) and np.isfinite(self.V0delta)):
            raise DomainError("V3eps and V0delta must be finite")
        bound = CREDIBILITY * self.eta_bar ** 3
        if abs(self.V3eps) > bound or abs(self.V0delta) > bound:
            warnings.warn(
                f"group corrections exceed {CREDIBILITY}*eta_bar^3 = {bound:.3g}; "
                "first-order approximation may be unreliable",
                RuntimeWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class VanillaSpec:
    style: str
    strike: float
    T0: float
    T: float
    rate: float = 0.0

    def __post_init__(self):
        if self.style not in ("call", "put"):
            raise DomainError(f"style must be 'call' or 'put', got {self.style!r}")
        if not np.all(np.asarray(self.strike) > 0):
            raise DomainError("strike must be positive")
        if not (0 < self.T0 <= self.T):
            raise DomainError("need 0 < T0 <= T")


@dataclass(frozen=True)
class PriceBreakdown:
    p0: float
    p10_eps: float
    p01_delta: float
    total: float


def _tenor(spec: VanillaSpec, t) -> Tenor:
    if np.any(np.asarray(t) >= spec.T0):
        raise DomainError("valuation time must precede option maturity")
    return Tenor(t, spec.T0, spec.T)


def _black_args(x, spec: VanillaSpec, gmp: GroupMarketParams, t):
    tenor = _tenor(spec, t)
    sig = sigma_bar(tenor, gmp.kappa, gmp.eta_bar)
    return tenor, (x, spec.strike, sig, spec.T0 - np.asarray(t, dtype=float), spec.rate)


def price_p0(x, spec: VanillaSpec, gmp: GroupMarketParams, t=0.0):
    _, args = _black_args(x, spec, gmp, t)
    return black76.black_price(spec.style, *args)


def price_correction_eps(x, spec: VanillaSpec, gmp: GroupMarketParams, t=0.0):
    """(T0-t) lam3 V3eps (D2 + D1D2) P_B(sigma_bar)."""
    tenor, args = _black_args(x, spec, gmp, t)
    ops = black76.d2_operator(*args) + black76.d1d2_operator(*args)
    return (spec.T0 - t) * lam3(tenor, gmp.kappa) * gmp.V3eps * ops


def price_correction_delta(x, spec: VanillaSpec, gmp: GroupMarketParams, t=0.0):
    """(T0-t) V0delta (lam0 D2 + lam1 D1D2) P_B(sigma_bar)."""
    tenor, args = _black_args(x, spec, gmp, t)
    d2 = black76.d2_operator(*args)
    d1d2 = black76.d1d2_operator(*args)
    return (spec.T0 - t) * gmp.V0delta * (lam0(tenor, gmp.kappa) * d2 + lam1(tenor, gmp.kappa) * d1d2)


def price_total(x, spec: VanillaSpec, gmp: GroupMarketParams, t=0.0) -> PriceBreakdown:
    p0 = price_p0(x, spec, gmp, t)
    pe = price_correction_eps(x, spec, gmp, t)
    pd = price_correction_delta(x, spec, gmp, t)
    return PriceBreakdown(p0=p0, p10_eps=pe, p01_delta=pd, total=p0 + pe + pd)

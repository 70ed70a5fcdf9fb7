"""Closed-form time-averaging weights for the tenor triple (t, T0, T).

All weights are integral means of exponential kernels over the option life:

    lam(kappa) = 1/(T0-t) * int_t^T0 exp(-kappa (T-u)) du
               = (exp(-kappa (T-T0)) - exp(-kappa (T-t))) / (kappa (T0-t))

and the other weights are built from ``lam`` at 1, 2 and 3 times kappa.
Functions broadcast over numpy arrays held in the :class:`Tenor` fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# below this value of kappa*(T-t) the exponential difference is replaced by its series
SMALL_KAPPA = 1e-6


@dataclass(frozen=True)
class Tenor:
    """Time triple: valuation time ``t``, option maturity ``T0``, future maturity ``T`` (years)."""

    t: float
    T0: float
    T: float

    def validate(self) -> None:
        t, T0, T = (np.asarray(v, dtype=float) for v in (self.t, self.T0, self.T))
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(T0)) and np.all(np.isfinite(T))):
            raise DomainError("tenor contains non-finite values")
        if np.any(T0 <= t):
            raise DomainError("tenor requires T0 > t")
        if np.any(T < T0):
            raise DomainError("tenor requires T >= T0")


@dataclass(frozen=True)
class WeightSet:
    lam: float
    lam_sigma: float
    lam3: float
    lam0: float
    lam1: float


def _check_kappa(kappa):
    k = np.asarray(kappa, dtype=float)
    if not np.all(np.isfinite(k)) or np.any(k < 0):
        raise DomainError(f"kappa must be finite and non-negative, got {kappa!r}")
    return k


def lam(tenor: Tenor, kappa):
    """Mean of exp(-kappa*s) over s in [T-T0, T-t]."""
    tenor.validate()
    k = _check_kappa(kappa)
    t, T0, T = (np.asarray(v, dtype=float) for v in (tenor.t, tenor.T0, tenor.T))
    a = T - T0
    length = T0 - t
    b = a + length
    x = k * length
    small = k * b < SMALL_KAPPA
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = np.exp(-k * a) * (-np.expm1(-x)) / x
    # 1 - kappa*E[s] + kappa^2*E[s^2]/2 for s uniform on [a, b]
    m1 = 0.5 * (a + b)
    m2 = (a * a + a * b + b * b) / 3.0
    series = 1.0 - k * m1 + 0.5 * k * k * m2
    out = np.where(small, series, exact)
    return out[()] if out.ndim == 0 else out


def lam_sigma(tenor: Tenor, kappa):
    """Square root of ``lam`` at 2*kappa; sigma_bar = eta_bar * lam_sigma."""
    return np.sqrt(lam(tenor, 2.0 * np.asarray(kappa, dtype=float)))


def lam3(tenor: Tenor, kappa):
    return lam(tenor, 3.0 * np.asarray(kappa, dtype=float))


def lam0(tenor: Tenor, kappa):
    """Mean over the option life of exp(-kappa(T-u)) - exp(-3 kappa(T-u))."""
    k = np.asarray(kappa, dtype=float)
    return lam(tenor, k) - lam(tenor, 3.0 * k)


def lam1(tenor: Tenor, kappa):
    """exp(-2 kappa (T-T0)) * lam(kappa) - lam(3 kappa)."""
    k = np.asarray(kappa, dtype=float)
    a = np.asarray(tenor.T, dtype=float) - np.asarray(tenor.T0, dtype=float)
    return np.exp(-2.0 * k * a) * lam(tenor, k) - lam(tenor, 3.0 * k)


def sigma_bar(tenor: Tenor, kappa, eta_bar):
    """Time-averaged effective volatility over [t, T0]."""
    eb = np.asarray(eta_bar, dtype=float)
    if np.any(eb <= 0) or not np.all(np.isfinite(eb)):
        raise DomainError("eta_bar must be positive and finite")
    return eb * lam_sigma(tenor, kappa)


def weight_set(tenor: Tenor, kappa) -> WeightSet:
    return WeightSet(
        lam=lam(tenor, kappa),
        lam_sigma=lam_sigma(tenor, kappa),
        lam3=lam3(tenor, kappa),
        lam0=lam0(tenor, kappa),
        lam1=lam1(tenor, kappa),
    )

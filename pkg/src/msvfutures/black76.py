"""Black (1976) model for European options on a futures price.

Prices, the scale-invariant Greek operators D2 = x^2 d^2/dx^2 and
D1 D2 = x d/dx (x^2 d^2/dx^2), and a safeguarded Newton implied-vol solver.
Everything is vectorised over numpy inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, NumericError

VOL_MAX = 5.0
STALL_REL = 1e-10
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class BlackInputs:
    forward: float
    strike: float
    vol: float
    maturity: float
    rate: float = 0.0


@dataclass(frozen=True)
class GreekBundle:
    price: float
    vega: float
    d2_op: float
    d1d2_op: float


def _arr(x):
    return np.asarray(x, dtype=float)


def _out(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def _check(forward, strike, maturity, vol=None):
    f, k, tau = _arr(forward), _arr(strike), _arr(maturity)
    bad = ~(np.isfinite(f) & np.isfinite(k) & np.isfinite(tau))
    if np.any(bad) or np.any(f <= 0) or np.any(k <= 0) or np.any(tau <= 0):
        raise DomainError("forward, strike and maturity must be finite and positive")
    if vol is not None:
        v = _arr(vol)
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise DomainError("vol must be finite and non-negative")
        return f, k, tau, v
    return f, k, tau


def _npdf(x):
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def black_call(forward, strike, vol, maturity, rate=0.0):
    f, k, tau, v = _check(forward, strike, maturity, vol)
    disc = np.exp(-_arr(rate) * tau)
    s = v * np.sqrt(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = np.log(f / k) / s + 0.5 * s
        d2 = d1 - s
        price = disc * (f * ndtr(d1) - k * ndtr(d2))
    intrinsic = disc * np.maximum(f - k, 0.0)
    return _out(np.where(s > 0, np.maximum(price, intrinsic), intrinsic))


def black_put(forward, strike, vol, maturity, rate=0.0):
    f, k, tau, v = _check(forward, strike, maturity, vol)
    disc = np.exp(-_arr(rate) * tau)
    s = v * np.sqrt(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = np.log(f / k) / s + 0.5 * s
        d2 = d1 - s
        price = disc * (k * ndtr(-d2) - f * ndtr(-d1))
    intrinsic = disc * np.maximum(k - f, 0.0)
    return _out(np.where(s > 0, np.maximum(price, intrinsic), intrinsic))


def black_price(style: str, forward, strike, vol, maturity, rate=0.0):
    if style == "call":
        return black_call(forward, strike, vol, maturity, rate)
    if style == "put":
        return black_put(forward, strike, vol, maturity, rate)
    raise DomainError(f"unknown option style {style!r}")


def vega(forward, strike, vol, maturity, rate=0.0):
    """dPrice/dvol; identical for calls and puts."""
    f, k, tau, v = _check(forward, strike, maturity, vol)
    if np.any(v <= 0):
        raise DomainError("Greeks need vol > 0")
    s = v * np.sqrt(tau)
    d1 = np.log(f / k) / s + 0.5 * s
    return _out(np.exp(-_arr(rate) * tau) * f * _npdf(d1) * np.sqrt(tau))


def d2_operator(forward, strike, vol, maturity, rate=0.0):
    """x^2 d^2P/dx^2, from the relation vega = T0 * vol * D2 P."""
    v = _arr(vol)
    return _out(vega(forward, strike, vol, maturity, rate) / (_arr(maturity) * v))


def d1d2_operator(forward, strike, vol, maturity, rate=0.0):
    """x d/dx (x^2 d^2P/dx^2) = (1/2 + log(K/x)/(vol^2 T0)) * D2 P."""
    f, k, tau, v = _arr(forward), _arr(strike), _arr(maturity), _arr(vol)
    d2 = d2_operator(forward, strike, vol, maturity, rate)
    return _out((0.5 + np.log(k / f) / (v * v * tau)) * d2)


def greeks(inp: BlackInputs, style: str = "call") -> GreekBundle:
    args = (inp.forward, inp.strike, inp.vol, inp.maturity, inp.rate)
    return GreekBundle(
        price=black_price(style, *args),
        vega=vega(*args),
        d2_op=d2_operator(*args),
        d1d2_op=d1d2_operator(*args),
    )


def implied_vol(price, forward, strike, maturity, rate=0.0, style: str = "call",
                tol: float = 1e-14, max_iter: int = 200):
    """Black implied volatility of a call or put price.

    The quote is mapped to the out-of-the-money option by parity and the
    equation log(P_otm(vol)) = log(target) is solved by Newton steps kept
    inside a shrinking bracket, falling back to bisection whenever a step
    leaves it. Working on log-price keeps far-wing quotes well conditioned.
    Raises DomainError for prices outside the open no-arbitrage band and
    NumericError (with ``best``) if the solve does not converge or the
    price needs vol above ``VOL_MAX``.
    """
    f, k, tau = _check(forward, strike, maturity)
    p = _arr(price)
    r = _arr(rate)
    f, k, tau, p, r = np.broadcast_arrays(f, k, tau, p, r)
    disc = np.exp(-r * tau)
    if style == "call":
        upper = disc * f
        otm_call = k >= f
        target = np.where(otm_call, p, p - disc * (f - k))
    elif style == "put":
        upper = disc * k
        otm_call = k > f
        target = np.where(otm_call, p + disc * (f - k), p)
    else:
        raise DomainError(f"unknown option style {style!r}")
    intrinsic = disc * np.maximum(f - k, 0.0) if style == "call" else disc * np.maximum(k - f, 0.0)
    if np.any(~np.isfinite(p)) or np.any(p <= intrinsic) or np.any(p >= upper) or np.any(target <= 0):
        raise DomainError("price outside the open no-arbitrage band")

    sqrt_tau = np.sqrt(tau)
    log_target = np.log(target)
    logfk = np.log(f / k)

    def otm_price_and_vega(sig):
        s = sig * sqrt_tau
        d1 = logfk / s + 0.5 * s
        d2 = d1 - s
        call = disc * (f * ndtr(d1) - k * ndtr(d2))
        put = disc * (k * ndtr(-d2) - f * ndtr(-d1))
        pr = np.where(otm_call, call, put)
        vg = disc * f * _npdf(d1) * sqrt_tau
        return pr, vg

    lo = np.zeros_like(p)
    hi = np.full_like(p, VOL_MAX)
    p_hi, _ = otm_price_and_vega(hi)
    if np.any(p_hi < target):
        raise NumericError(f"price requires vol above {VOL_MAX}", best=_out(hi))

    # at-the-money guess, kept inside the bracket
    sig = np.clip(target * math.sqrt(2.0 * math.pi) / (disc * f * sqrt_tau), 1e-4, VOL_MAX)
    done = np.zeros(p.shape, dtype=bool)
    prev_move = np.full(p.shape, np.inf)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        for _ in range(max_iter):
            pr, vg = otm_price_and_vega(sig)
            g = np.log(pr) - log_target
            # g is increasing in vol
            below = g < 0
            lo = np.where(below & ~done, np.maximum(lo, sig), lo)
            hi = np.where(~below & ~done, np.minimum(hi, sig), hi)
            step = g * pr / vg
            newton = sig - step
            # inclusive: a step that rounds to zero lands on the bracket edge and is a converged iterate
            ok = np.isfinite(newton) & (newton >= lo) & (newton <= hi)
            nxt = np.where(ok, newton, 0.5 * (lo + hi))
            move = np.abs(nxt - sig)
            conv = (move <= tol * np.maximum(sig, 1e-300)) | (g == 0) | (hi - lo <= tol * hi)
            # far-wing prices carry rounding noise in log-price; once steps stop shrinking
            # at that floor the iterate is as good as the price allows
            conv |= (move >= prev_move) & (move <= STALL_REL * sig)
            prev_move = move
            sig = np.where(done, sig, nxt)
            done = done | conv
            if np.all(done):
                break
    if not np.all(done):
        raise NumericError("implied vol did not converge", best=_out(sig))
    return _out(sig)

"""Nested Monte Carlo for options on futures.

The option pays on F_{T0,T} = E[V_T | U, Y, Z at T0]. Because U is linear,

    F_{T0,T} = exp(s(T) + m + e^{-kappa tau}(U_{T0} - m)) * G(Y_{T0}, Z_{T0}),

where G does not depend on U. G is estimated by inner simulation on a
(y, z) node grid with common random numbers and the exponential-martingale
control variate (mean exactly 1, perfect when eta is constant), then
interpolated in log space. The outer
simulation integrates the W0 component orthogonal to (W1, W2) in closed
form, so each outer path contributes a Black price.

Inner noise is measured by repeating the whole estimate with the inner
paths split into independent batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .. import black76
from ..errors import DomainError
from ..pricing import VanillaSpec
from .engine import (STREAM_INNER, STREAM_OUTER, McEstimate, _block_sizes, _cap, _integrate, _map_blocks,
                     _n_steps, _pair_means, block_rng)
from .model import ModelSpec

INNER_BLOCK = 2_000


@dataclass(frozen=True)
class Budget:
    n_outer: int = 200_000
    n_inner: int = 10_000
    ny: int = 25
    nz: int = 5
    batches: int = 8
    workers: int = 1

    def __post_init__(self):
        if self.n_inner < 10_000:
            raise DomainError("n_inner must be >= 10000")
        if self.batches < 2 or (self.n_inner // 2) % self.batches:
            raise DomainError("inner antithetic pairs must split evenly into >= 2 batches")
        if self.ny < 4 or self.nz < 1:
            raise DomainError("need ny >= 4 and nz >= 1")


@dataclass(frozen=True)
class InnerGrid:
    y_nodes: np.ndarray
    z_nodes: np.ndarray
    log_g: np.ndarray  # (1 + batches, ny, nz); index 0 uses every inner path

    def log_value(self, k, y, z):
        y = np.clip(y, self.y_nodes[0], self.y_nodes[-1])
        if len(self.z_nodes) == 1:
            return CubicSpline(self.y_nodes, self.log_g[k, :, 0])(y)
        z = np.clip(z, self.z_nodes[0], self.z_nodes[-1])
        ky = min(3, len(self.z_nodes) - 1)
        return RectBivariateSpline(self.y_nodes, self.z_nodes, self.log_g[k], kx=3, ky=ky).ev(y, z)


def _inner_block(spec, T0, T, n, n_steps, seed, b, y_nodes, z_nodes, cap):
    rng = block_rng(seed, STREAM_INNER, b)
    y = y_nodes[None, :, None]
    z = z_nodes[None, None, :]
    r = _integrate(spec, y, z, T0, T, n_steps, T, rng, cap, n, bcast=(1, 1), want_bar=True)
    a3 = spec.w0_loadings()[2]
    shape = (n, len(y_nodes), len(z_nodes))
    X = np.broadcast_to(np.exp(r["M"] + 0.5 * a3 * a3 * r["S"]), shape)
    C = np.broadcast_to(r["control"], shape)
    h = n // 2
    return 0.5 * (X[:h] + X[h:]), 0.5 * (C[:h] + C[h:])


def _cv_mean(X, C):
    xm, cm = X.mean(axis=0), C.mean(axis=0)
    dc = C - cm
    sxx = np.sum(dc * dc, axis=0)
    safe = np.where(sxx > 0, sxx, 1.0)
    b = np.where(sxx > 0, np.sum((X - xm) * dc, axis=0) / safe, 0.0)
    return xm - b * (cm - 1.0)


def inner_grid(spec: ModelSpec, T0: float, T: float, y_nodes, z_nodes, n_inner: int, batches: int,
               seed: int, workers: int = 1) -> InnerGrid:
    y_nodes = np.asarray(y_nodes, dtype=float)
    z_nodes = np.asarray(z_nodes, dtype=float)
    tau = T - T0
    if tau == 0:
        return InnerGrid(y_nodes, z_nodes, np.zeros((1 + batches, len(y_nodes), len(z_nodes))))
    n_steps = _n_steps(spec, tau)
    cap = _cap(spec)
    sizes = [INNER_BLOCK] * (n_inner // INNER_BLOCK) + ([n_inner % INNER_BLOCK] if n_inner % INNER_BLOCK else [])
    if any(s % 2 for s in sizes):
        raise DomainError("n_inner must be even")
    parts = _map_blocks(_inner_block, [(spec, T0, T, n, n_steps, seed, b, y_nodes, z_nodes, cap)
                                       for b, n in enumerate(sizes)], workers)
    X = np.concatenate([p[0] for p in parts])
    C = np.concatenate([p[1] for p in parts])
    grids = [_cv_mean(X, C)]
    for chunk in np.array_split(np.arange(len(X)), batches):
        grids.append(_cv_mean(X[chunk], C[chunk]))
    return InnerGrid(y_nodes, z_nodes, np.log(np.stack(grids)))


def _outer_block(spec, T0, n, n_steps, seed, b, cap):
    rng = block_rng(seed, STREAM_OUTER, b)
    y = np.full(n, spec.y_start)
    z = np.full(n, spec.z0)
    r = _integrate(spec, y, z, 0.0, T0, n_steps, T0, rng, cap, n)
    return r["M"], r["S"], r["y"], r["z"]


@dataclass(frozen=True)
class NestedRun:
    """Pair-averaged conditional option prices and forwards, one row per inner grid."""

    price: np.ndarray    # (1 + batches, n_pairs)
    forward: np.ndarray  # (1 + batches, n_pairs)
    n_outer: int
    seed: int
    meta: dict

    @property
    def batches(self) -> int:
        return self.price.shape[0] - 1


def nested_run(spec: ModelSpec, vanilla: VanillaSpec, budget: Budget, seed: int) -> NestedRun:
    T0, T = vanilla.T0, vanilla.T
    if not 0 < T0 <= T:
        raise DomainError("need 0 < T0 <= T")
    cap = _cap(spec)
    n_steps = _n_steps(spec, T0)
    sizes = _block_sizes(budget.n_outer)
    parts = _map_blocks(_outer_block, [(spec, T0, n, n_steps, seed, b, cap) for b, n in enumerate(sizes)],
                        budget.workers)
    M, S, y, z = (np.concatenate([p[i] for p in parts]) for i in range(4))

    lo = min(spec.m_y - 6 * spec.nu, float(y.min()))
    hi = max(spec.m_y + 6 * spec.nu, float(y.max()))
    y_nodes = np.linspace(lo, hi, budget.ny)
    zlo, zhi = float(z.min()), float(z.max())
    if zhi - zlo <= 1e-9 * max(1.0, abs(spec.z0)) or budget.nz == 1:
        z_nodes = np.array([spec.z0 if zhi - zlo <= 1e-9 else 0.5 * (zlo + zhi)])
    else:
        z_nodes = np.linspace(zlo, zhi, budget.nz)
    grid = inner_grid(spec, T0, T, y_nodes, z_nodes, budget.n_inner, budget.batches, seed, budget.workers)

    k, tau = spec.kappa, T - T0
    a3 = spec.w0_loadings()[2]
    mu = spec.m + (spec.u0 - spec.m) * math.exp(-k * T0) + M
    L0 = spec.seasonality(T) + spec.m + math.exp(-k * tau) * (mu - spec.m)
    var = math.exp(-2 * k * tau) * a3 * a3 * S
    vol = np.sqrt(var / T0)
    prices, forwards = [], []
    for g in range(grid.log_g.shape[0]):
        fwd = np.exp(L0 + grid.log_value(g, y, z) + 0.5 * var)
        p = black76.black_price(vanilla.style, fwd, vanilla.strike, vol, T0, vanilla.rate)
        prices.append(_pair_means(p))
        forwards.append(_pair_means(fwd))
    meta = {"outer_steps": n_steps, "eta_cap": cap, "ny": len(y_nodes), "nz": len(z_nodes),
            "n_inner": budget.n_inner}
    return NestedRun(np.stack(prices), np.stack(forwards), budget.n_outer, seed, meta)


def _mean_se(pairs):
    return float(np.mean(pairs)), float(np.std(pairs, ddof=1) / math.sqrt(len(pairs)))


def _batch_se(values):
    values = np.asarray(values)
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def mc_option_price(spec: ModelSpec, vanilla: VanillaSpec, n_outer: int = 200_000, n_inner: int = 10_000,
                    seed: int = 0, budget: Budget | None = None) -> McEstimate:
    """Nested MC price; ``std_error`` combines outer sampling and inner-batch noise.

    ``extras`` holds the tower-property forward estimate and its error.
    """
    budget = budget or Budget(n_outer=n_outer, n_inner=n_inner)
    run = nested_run(spec, vanilla, budget, seed)
    value, se_out = _mean_se(run.price[0])
    se_in = _batch_se(run.price[1:].mean(axis=1))
    fwd, fse_out = _mean_se(run.forward[0])
    fse_in = _batch_se(run.forward[1:].mean(axis=1))
    extras = {"outer_se": se_out, "inner_se": se_in, "forward": fwd,
              "forward_se": math.hypot(fse_out, fse_in), **run.meta}
    return McEstimate(value, math.hypot(se_out, se_in), budget.n_outer, seed, extras)

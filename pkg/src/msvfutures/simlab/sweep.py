"""Empirical accuracy of the first-order price versus the small scales (eps, delta)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..pricing import VanillaSpec, price_total
from .model import ModelSpec
from .nested import Budget, nested_run
from .quadrature import implied_group_params

SE_FRACTION = 0.3
# errors this close to zero, relative to the price, are rounding noise
ROUNDOFF_REL = 1e-12


@dataclass(frozen=True)
class SweepRow:
    eps: float
    delta: float
    mc_price: float
    mc_se: float
    approx_price: float
    abs_error: float
    error_se: float
    forward: float
    inconclusive: bool


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    slope: float | None

    @property
    def any_inconclusive(self) -> bool:
        return any(r.inconclusive for r in self.rows)


def rung_error(spec: ModelSpec, vanilla: VanillaSpec, budget: Budget, seed: int) -> SweepRow:
    """MC price minus the first-order price, both at the MC estimate of today's future price.

    The first-order formula is evaluated at the tower-property forward
    (mean of the conditional forwards), so any common bias of the inner
    grid moves both sides together. Its error bar uses the delta method.
    """
    gmp = implied_group_params(spec)
    run = nested_run(spec, vanilla, budget, seed)

    def stat(p, f):
        x = float(np.mean(f))
        approx = float(price_total(x, vanilla, gmp).total)
        h = 1e-6 * x
        slope = (float(price_total(x + h, vanilla, gmp).total) - float(price_total(x - h, vanilla, gmp).total)) / (2 * h)
        return float(np.mean(p)) - approx, approx, x, p - slope * f

    err, approx, x, lin = stat(run.price[0], run.forward[0])
    se_out = float(np.std(lin, ddof=1) / math.sqrt(len(lin)))
    batch_errs = [stat(run.price[k], run.forward[k])[0] for k in range(1, run.batches + 1)]
    se_in = float(np.std(batch_errs, ddof=1) / math.sqrt(run.batches))
    se = math.hypot(se_out, se_in)
    p_mean = float(np.mean(run.price[0]))
    p_se = float(np.std(run.price[0], ddof=1) / math.sqrt(run.price.shape[1]))
    p_se = math.hypot(p_se, float(np.std(run.price[1:].mean(axis=1), ddof=1) / math.sqrt(run.batches)))
    return SweepRow(spec.eps, spec.delta, p_mean, p_se, approx, abs(err), se, x,
                    inconclusive=bool(se > SE_FRACTION * abs(err) or abs(err) <= ROUNDOFF_REL * max(1.0, abs(approx))))


def loglog_slope(x, y) -> float | None:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(y <= 0):
        return None
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def accuracy_sweep(spec: ModelSpec, vanilla: VanillaSpec, ladder, budget: Budget | None = None,
                   seed: int = 0) -> SweepResult:
    """Error ladder over decreasing (eps, delta) rungs and its fitted log-log slope in eps + delta.

    A rung is flagged inconclusive when its error bar exceeds 30% of the
    measured error, or the error is at rounding level (as when the expansion is exact).
    """
    budget = budget or Budget()
    ladder = [(float(e), float(d)) for e, d in ladder]
    if not ladder:
        raise DomainError("empty ladder")
    sums = [e + d for e, d in ladder]
    if any(b >= a for a, b in zip(sums, sums[1:])):
        raise DomainError("ladder must be strictly decreasing in eps + delta")
    rows = tuple(rung_error(spec.with_scales(e, d), vanilla, budget, seed) for e, d in ladder)
    slope = loglog_slope(sums, [r.abs_error for r in rows])
    return SweepResult(rows, slope)

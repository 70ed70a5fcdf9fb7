"""Three-stage least-squares calibration of the group market parameters.

Stage 1 regresses each smile's implied vols on LMMR (slope a_ij, intercept b_ij).
Stage 2 fits the slopes to a0*a_eps(kappa) + a1*a_delta(kappa). The problem
is linear in (a0, a1), so it is solved by variable projection: an exact
inner linear solve inside a 1-D search over log(kappa).
Stage 3 fits the intercepts to b0*b_bar + b0^2*(a0*b_eps + a1*b_delta), a
quartic objective in the scalar b0.
Finally eta_bar = b0, V3eps = a0*b0^3 and V0delta = a1*b0^3.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CalibrationError, CollinearityError
from .ivol import smile_coefficients
from .marketdata import QuotePanel
from .pricing import GroupMarketParams

log = logging.getLogger(__name__)

KAPPA_BOUNDS = (1e-4, 20.0)
B0_MAX = 3.0
COND_MAX = 1e10


@dataclass(frozen=True)
class SmileFit:
    T: float
    T0: float
    slope: float
    intercept: float
    residual_rms: float
    n: int


@dataclass(frozen=True)
class StageOneFit:
    smiles: tuple[SmileFit, ...]
    excluded: tuple[str, ...] = ()

    @property
    def T0(self):
        return np.array([s.T0 for s in self.smiles])

    @property
    def T(self):
        return np.array([s.T for s in self.smiles])

    @property
    def a_hat(self):
        return np.array([s.slope for s in self.smiles])

    @property
    def b_hat(self):
        return np.array([s.intercept for s in self.smiles])


@dataclass(frozen=True)
class StageTwoFit:
    a0: float
    a1: float
    kappa: float
    objective: float
    at_bound: bool
    cond: float


@dataclass(frozen=True)
class StageThreeFit:
    b0: float
    objective: float
    at_bound: bool


@dataclass(frozen=True)
class CalibrationResult:
    kappa_hat: float
    eta_bar_hat: float
    V3eps_hat: float
    V0delta_hat: float
    a0_hat: float
    a1_hat: float
    b0_hat: float
    stage2_objective: float
    stage3_objective: float
    diagnostics: tuple[str, ...] = field(default=())

    @property
    def converged(self) -> bool:
        return not self.diagnostics

    def group_params(self) -> GroupMarketParams:
        return GroupMarketParams(self.kappa_hat, self.eta_bar_hat, self.V3eps_hat, self.V0delta_hat)


def ols_line(x, y):
    """Least-squares (slope, intercept, rms residual) of y on x, via centred normal equations."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = np.dot(dx, dx)
    if sxx <= (1e-14 * max(1.0, abs(xm))) ** 2 * len(x):
        raise CalibrationError("degenerate regressor: all LMMR values coincide")
    slope = np.dot(dx, y - ym) / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    return slope, intercept, float(np.sqrt(np.mean(resid ** 2)))


def stage1_smile_regression(panel: QuotePanel, allow_two_points: bool = False) -> StageOneFit:
    fits, excluded = [], []
    min_pts = 2 if allow_two_points else 3
    for sm in panel.smiles:
        label = f"T={sm.future_days}d T0={sm.option_days}d"
        if len(np.unique(sm.strikes)) < min_pts:
            excluded.append(f"{label}: fewer than {min_pts} distinct strikes")
            log.warning("excluding smile %s: too few strikes", label)
            continue
        x = np.log(sm.strikes / sm.future_price) / sm.T0
        try:
            a, b, rms = ols_line(x, sm.ivs)
        except CalibrationError as exc:
            excluded.append(f"{label}: {exc}")
            log.warning("excluding smile %s: %s", label, exc)
            continue
        fits.append(SmileFit(T=sm.T, T0=sm.T0, slope=a, intercept=b, residual_rms=rms, n=len(x)))
    if not fits:
        raise CalibrationError("no smile survived stage 1")
    return StageOneFit(tuple(fits), tuple(excluded))


def _slope_design(T0, T, kappa):
    c = smile_coefficients(T0, T, kappa)
    return np.column_stack([c.a_eps, c.a_delta])


def _inner(T0, T, a_hat, kappa):
    X = _slope_design(T0, T, kappa)
    coef, *_ = np.linalg.lstsq(X, a_hat, rcond=None)
    r = a_hat - X @ coef
    return coef, float(np.dot(r, r)), X


def stage2_term_structure_fit(fit: StageOneFit, init_kappa: float = 0.5,
                              n_grid: int = 401) -> StageTwoFit:
    """Variable-projection fit of (a0, a1, kappa) to the stage-1 slopes.

    The profile objective is scanned on a fixed log-kappa grid; the best
    grid bracket is then polished with a bounded Brent search. ``init_kappa``
    is added to the scan so a user guess is always considered.
    """
    T0, T, a_hat = fit.T0, fit.T, fit.a_hat
    pairs = {(round(a, 12), round(b, 12)) for a, b in zip(T0, T)}
    if len(fit.smiles) < 3 or len(pairs) < 2:
        raise CollinearityError(
            f"stage 2 needs >= 3 smiles over >= 2 distinct (T0, T) pairs; got {len(fit.smiles)} smiles, "
            f"{len(pairs)} pairs"
        )
    lo, hi = np.log(KAPPA_BOUNDS[0]), np.log(KAPPA_BOUNDS[1])
    grid = np.linspace(lo, hi, n_grid)
    if KAPPA_BOUNDS[0] < init_kappa < KAPPA_BOUNDS[1]:
        grid = np.sort(np.append(grid, np.log(init_kappa)))
    obj = np.array([_inner(T0, T, a_hat, np.exp(g))[1] for g in grid])
    i = int(np.argmin(obj))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(lambda g: _inner(T0, T, a_hat, np.exp(g))[1], bounds=(a, b),
                          method="bounded", options={"xatol": 1e-12, "maxiter": 500})
    g_best = res.x if res.fun <= obj[i] else grid[i]
    kappa = float(np.exp(g_best))
    coef, val, X = _inner(T0, T, a_hat, kappa)
    sv = np.linalg.svd(X, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if cond > COND_MAX:
        raise CollinearityError(f"slope design matrix is collinear (condition number {cond:.3g})")
    at_bound = bool(g_best - lo < 1e-6 or hi - g_best < 1e-6)
    return StageTwoFit(a0=float(coef[0]), a1=float(coef[1]), kappa=kappa, objective=val,
                       at_bound=at_bound, cond=cond)


def _level_terms(fit: StageOneFit, s2: StageTwoFit):
    c = smile_coefficients(fit.T0, fit.T, s2.kappa)
    lin = np.asarray(c.b_bar, dtype=float)
    quad = s2.a0 * np.asarray(c.b_eps) + s2.a1 * np.asarray(c.b_delta)
    return lin, quad


def _b0_objective(b0, b_hat, lin, quad):
    r = b_hat - (b0 * lin + b0 * b0 * quad)
    return float(np.dot(r, r))


def stage3_level_fit(fit: StageOneFit, s2: StageTwoFit, init_b0: float | None = None,
                     n_scan: int = 3001) -> StageThreeFit:
    """Global minimiser of the quartic level objective on (0, B0_MAX].

    A fixed scan locates the basin, then Newton iterations on the cubic
    derivative polish it. ``init_b0`` only adds a scan point.
    """
    b_hat = fit.b_hat
    lin, quad = _level_terms(fit, s2)
    # objective coefficients: J(b) = sum (y - b L - b^2 Q)^2
    A = np.dot(quad, quad)
    B = 2 * np.dot(lin, quad)
    C = np.dot(lin, lin) - 2 * np.dot(b_hat, quad)
    D = -2 * np.dot(b_hat, lin)

    def d1(b):
        return 4 * A * b ** 3 + 3 * B * b ** 2 + 2 * C * b + D

    def d2(b):
        return 12 * A * b ** 2 + 6 * B * b + 2 * C

    scan = np.linspace(B0_MAX / n_scan, B0_MAX, n_scan)
    if init_b0 is not None and 0 < init_b0 < B0_MAX:
        scan = np.sort(np.append(scan, init_b0))
    vals = np.array([_b0_objective(b, b_hat, lin, quad) for b in scan])
    i = int(np.argmin(vals))
    b = scan[i]
    for _ in range(100):
        h = d2(b)
        if h <= 0:
            break
        step = d1(b) / h
        b_new = min(max(b - step, scan[0]), B0_MAX)
        if abs(b_new - b) <= 1e-15 * max(1.0, b):
            b = b_new
            break
        b = b_new
    if _b0_objective(b, b_hat, lin, quad) > vals[i]:
        b = scan[i]
    at_bound = bool(b <= scan[0] * (1 + 1e-9) or b >= B0_MAX * (1 - 1e-9))
    return StageThreeFit(b0=float(b), objective=_b0_objective(b, b_hat, lin, quad), at_bound=at_bound)


def extract_parameters(s2: StageTwoFit, s3: StageThreeFit) -> CalibrationResult:
    diags = []
    if s2.at_bound:
        diags.append(f"kappa hit search bound {KAPPA_BOUNDS}")
    if s3.at_bound:
        diags.append(f"b0 has no interior minimum on (0, {B0_MAX}]")
    b0 = s3.b0
    return CalibrationResult(
        kappa_hat=s2.kappa,
        eta_bar_hat=b0,
        V3eps_hat=s2.a0 * b0 ** 3,
        V0delta_hat=s2.a1 * b0 ** 3,
        a0_hat=s2.a0,
        a1_hat=s2.a1,
        b0_hat=b0,
        stage2_objective=s2.objective,
        stage3_objective=s3.objective,
        diagnostics=tuple(diags),
    )


def calibrate(panel: QuotePanel, init_kappa: float = 0.5, init_b0: float | None = None,
              min_t0_days: int | None = None):
    """Run all three stages. Returns (CalibrationResult, StageOneFit)."""
    if min_t0_days is not None:
        panel = panel.filter_min_option_days(min_t0_days)
    s1 = stage1_smile_regression(panel)
    s2 = stage2_term_structure_fit(s1, init_kappa=init_kappa)
    if init_b0 is None:
        init_b0 = float(np.mean(s1.b_hat))
    s3 = stage3_level_fit(s1, s2, init_b0=init_b0)
    return extract_parameters(s2, s3), s1

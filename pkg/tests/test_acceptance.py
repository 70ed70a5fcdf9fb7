"""Acceptance criteria, one test each, at the stated tolerances.

Each test prints a PASS/FAIL line; the lines are repeated in the terminal
summary under "acceptance criteria".
"""

import time
from pathlib import Path

import numpy as np

from msvfutures import black76
from msvfutures.calibration import calibrate
from msvfutures.cli import main as cli_main
from msvfutures.cli import vanilla_from_config
from msvfutures.errors import MSVError
from msvfutures.futures_curve import H0, H_corrections, SpotDynamicsParams, h0, h_corrections
from msvfutures.ivol import iv_approx
from msvfutures.marketdata import GridSpec, save_panel, synth_panel
from msvfutures.pricing import GroupMarketParams, VanillaSpec, price_total
from msvfutures.simlab import Budget, ModelSpec, accuracy_sweep, implied_group_params, load_config
from msvfutures.simlab.sweep import loglog_slope
from msvfutures.weights import Tenor, lam, lam0, lam1, lam_sigma

from oracles import fd_greeks, lam_quad, rel_err

ROOT = Path(__file__).resolve().parents[1]
VALIDATION_CFG = ROOT / "configs" / "validation.cfg"

DESK = GroupMarketParams(0.1385, 0.21967, -1.76e-4, -1.27e-2)


def _random_tenors(rng, n):
    t = rng.uniform(0.0, 1.0, n)
    T0 = t + rng.uniform(1e-3, 3.0, n)
    T = T0 + np.where(rng.random(n) < 0.2, 0.0, rng.uniform(0.0, 2.0, n))
    return Tenor(t, T0, T)


def test_weights_identities(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    ten = _random_tenors(rng, 10_000)
    kap = 10 ** rng.uniform(-3, 1, 10_000)
    ident = float(np.max(rel_err(lam_sigma(ten, kap) ** 2, lam(ten, 2 * kap))))

    quad_err = 0.0
    for k in np.logspace(-3, 1, 25):
        for t, T0, T in ((0.0, 1.0, 1.0), (0.0, 1.0, 2.0), (0.3, 0.55, 0.6), (0.0, 0.25, 3.0), (1.0, 4.0, 4.5)):
            quad_err = max(quad_err, float(rel_err(lam(Tenor(t, T0, T), k), lam_quad(t, T0, T, k))))

    l0 = lam0(ten, kap)
    l1 = lam1(ten, kap)
    signs = bool(np.all(l0 > 0) and np.all(l1 >= 0))
    elapsed = time.perf_counter() - start
    ok = ident <= 1e-14 and quad_err <= 1e-10 and signs and elapsed < 1.0
    verdict("1 weight identities", ok,
            f"identity {ident:.2e} (<=1e-14), quadrature {quad_err:.2e} (<=1e-10), "
            f"min lam0 {l0.min():.2e} > 0, min lam1 {l1.min():.2e} >= 0, {elapsed:.2f}s (<1s)")


def test_black_engine(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    n = 10_000
    F = rng.uniform(20, 200, n)
    K = F * np.exp(rng.uniform(np.log(0.5), np.log(2.0), n))
    T0 = rng.uniform(0.05, 3.0, n)
    vol = rng.uniform(0.05, 0.8, n)
    r = rng.uniform(0.0, 0.1, n)
    c = black76.black_call(F, K, vol, T0, r)
    p = black76.black_put(F, K, vol, T0, r)
    parity = float(np.max(np.abs(c - p - np.exp(-r * T0) * (F - K))))
    # quote the out-of-the-money side: deep in-the-money prices round to intrinsic and carry no vol
    otm = K >= F

    greek_err, underflow = 0.0, 0
    for m in np.linspace(0.5, 2.0, 7):
        for s in np.linspace(0.05, 0.8, 6):
            for t in np.linspace(0.05, 3.0, 6):
                got = (black76.vega(100.0, 100.0 * m, s, t), black76.d2_operator(100.0, 100.0 * m, s, t),
                       black76.d1d2_operator(100.0, 100.0 * m, s, t))
                style = "call" if m >= 1 else "put"
                if black76.black_price(style, 100.0, 100.0 * m, s, t) == 0.0:
                    # the out-of-the-money price underflows, so every Greek must too
                    underflow += 1
                    if any(g != 0.0 for g in got):
                        greek_err = np.inf
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    want = fd_greeks(100.0, 100.0 * m, s, t)
                for g, w in zip(got, want):
                    e = float(rel_err(g, w))
                    greek_err = max(greek_err, e if np.isfinite(e) else np.inf)

    iv_c = black76.implied_vol(c[otm], F[otm], K[otm], T0[otm], r[otm], style="call")
    iv_p = black76.implied_vol(p[~otm], F[~otm], K[~otm], T0[~otm], r[~otm], style="put")
    round_trip = float(max(np.max(np.abs(iv_c - vol[otm])), np.max(np.abs(iv_p - vol[~otm]))))
    elapsed = time.perf_counter() - start
    ok = parity <= 1e-12 and greek_err <= 1e-6 and round_trip <= 1e-8 and elapsed < 10.0
    verdict("2 Black engine", ok,
            f"parity {parity:.2e} (<=1e-12), Greeks vs FD {greek_err:.2e} (<=1e-6, {underflow} of 252 points "
            f"underflow to zero), "
            f"IV round trip {round_trip:.2e} (<=1e-8), {elapsed:.2f}s (<10s)")


def test_futures_curve_inversion(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    inv_err = 0.0
    # h0 flattens like exp(-kappa tau) in u, so recovering u costs a factor exp(kappa tau) in
    # rounding; the grid keeps kappa*tau <= 5. u is a log-price, so its absolute error is the
    # relative error of the price it encodes.
    for _ in range(200):
        kappa = 10 ** rng.uniform(-2, np.log10(2.5))
        params = SpotDynamicsParams(kappa=kappa, m=rng.uniform(-1, 5), eta_bar=rng.uniform(0.05, 0.8),
                                    seasonality=lambda t, a=rng.uniform(-0.2, 0.2): a * np.sin(2 * np.pi * t))
        t = rng.uniform(0, 1, 50)
        T = t + rng.uniform(0, min(3.0, 5.0 / kappa), 50)
        u = rng.uniform(-1, 6, 50)
        x = h0(t, u, params, T)
        inv_err = max(inv_err, float(np.max(np.abs(H0(t, x, params, T) - u))))
        xs = np.exp(rng.uniform(-1, 6, 50))
        inv_err = max(inv_err, float(np.max(rel_err(h0(t, H0(t, xs, params, T), params, T), xs))))

    base = dict(kappa=0.7, m=np.log(80.0), eta_bar=0.35)
    V3b, V1b = -0.08, 0.12
    t, T, u = 0.0, 1.5, np.log(95.0)
    ladder = (1e-2, 1e-3, 1e-4)
    resid = []
    for e in ladder:
        p = SpotDynamicsParams(V3=np.sqrt(e) * V3b, V1=np.sqrt(e) * V1b, **base)
        h10, h01 = h_corrections(t, u, p, T)
        x = h0(t, u, p, T) + h10 + h01
        H10, H01 = H_corrections(t, x, p, T)
        resid.append(abs(float(H0(t, x, p, T) + H10 + H01 - u)))
    slope = loglog_slope([2 * e for e in ladder], resid)
    elapsed = time.perf_counter() - start
    ok = inv_err <= 1e-12 and slope is not None and 0.8 <= slope <= 1.2 and elapsed < 5.0
    verdict("3 futures-curve inversion", ok,
            f"inversion residual {inv_err:.2e} (<=1e-12), composite residuals "
            f"{', '.join(f'{v:.2e}' for v in resid)}, slope {slope:.3f} (in [0.8,1.2]), {elapsed:.2f}s (<5s)")


def _iv_gap(gmp):
    """sup over the lmmr/T0 grid of |implied_vol(price_total) - iv_approx|; inf if a price cannot be inverted."""
    worst = 0.0
    F = 100.0
    for T0 in (0.25, 0.5, 1.0):
        T = T0
        for x in np.linspace(-0.5, 0.5, 41):
            K = F * np.exp(x * T0)
            style = "call" if K >= F else "put"
            price = price_total(F, VanillaSpec(style, K, T0, T), gmp).total
            try:
                iv = float(black76.implied_vol(price, F, K, T0, style=style))
            except MSVError:
                return float("inf")
            worst = max(worst, abs(iv - float(iv_approx(x, T0, T, gmp, check=False))))
    return worst


def test_iv_expansion_consistency(verdict):
    start = time.perf_counter()
    full = _iv_gap(DESK)
    half = _iv_gap(GroupMarketParams(DESK.kappa, DESK.eta_bar, DESK.V3eps / 2, DESK.V0delta / 2))
    ratio = full / half if np.isfinite(full) and np.isfinite(half) and half > 0 else float("nan")
    elapsed = time.perf_counter() - start
    ok = full <= 5e-4 and 3.0 <= ratio <= 5.0 and elapsed < 30.0
    verdict("4 IV-expansion consistency", ok,
            f"sup gap {full:.3e} (<=5e-4), halved {half:.3e}, ratio {ratio:.3f} (in [3,5]), {elapsed:.2f}s (<30s)")


def test_calibration_round_trip(verdict):
    start = time.perf_counter()
    noiseless = []
    cases = (
        (DESK, GridSpec(((121, 91), (151, 121), (211, 181), (301, 271), (395, 365), (760, 730)))),
        (GroupMarketParams(0.6, 0.5, -0.025, 0.03125),
         GridSpec(tuple((d, d) for d in (120, 150, 380, 470, 630, 1380)))),
    )
    for truth, grid in cases:
        res, _ = calibrate(synth_panel(truth, grid))
        noiseless.append((abs(res.kappa_hat / truth.kappa - 1), abs(res.eta_bar_hat / truth.eta_bar - 1),
                          abs(res.V3eps_hat - truth.V3eps), abs(res.V0delta_hat - truth.V0delta)))
    nl = np.max(np.array(noiseless), axis=0)
    ok_noiseless = nl[0] <= 1e-4 and nl[1] <= 1e-6 and nl[2] <= 1e-8 and nl[3] <= 1e-8

    truth, grid = cases[1]
    noisy = []
    for seed in range(10):
        res, _ = calibrate(synth_panel(truth, grid, noise_sd=0.002, seed=seed))
        noisy.append((abs(res.kappa_hat / truth.kappa - 1), abs(res.eta_bar_hat / truth.eta_bar - 1)))
    nz = np.max(np.array(noisy), axis=0)
    ok_noisy = nz[0] <= 0.15 and nz[1] <= 0.02
    elapsed = time.perf_counter() - start
    # twelve calibrations; the budget is per calibration
    per_run = elapsed / 12
    ok = ok_noiseless and ok_noisy and per_run < 10.0
    verdict("5 calibration round trip", ok,
            f"noiseless kappa {nl[0]:.1e} (<=1e-4), eta_bar {nl[1]:.1e} (<=1e-6), V3 {nl[2]:.1e}, V0 {nl[3]:.1e} "
            f"(<=1e-8); noisy worst of 10 seeds kappa {nz[0]:.3f} (<=0.15), eta_bar {nz[1]:.4f} (<=0.02); "
            f"{per_run:.2f}s per calibration (<10s)")


def test_desk_scale_validation(verdict):
    start = time.perf_counter()
    spec, extras = load_config(VALIDATION_CFG)
    vanilla = vanilla_from_config(spec, extras)
    res = accuracy_sweep(spec, vanilla, [(0.25, 0.25), (0.05, 0.05), (0.01, 0.01)],
                         Budget(n_outer=200_000, n_inner=10_000), seed=2024)
    elapsed = time.perf_counter() - start
    last = res.rows[-1]
    se_ok = last.error_se < 0.3 * last.abs_error
    ok = se_ok and not res.any_inconclusive and res.slope is not None and 0.7 <= res.slope <= 1.3 \
        and elapsed <= 900
    rungs = "; ".join(f"eps=delta={r.eps:g}: |err| {r.abs_error:.4f} se {r.error_se:.4f}" for r in res.rows)
    verdict("6 desk-scale validation", ok,
            f"{rungs}; slope {res.slope:.3f} (in [0.7,1.3]), {elapsed:.0f}s (<=900s)")


def test_model_implied_parameters(verdict):
    start = time.perf_counter()
    worst = 0.0
    for m_y, nu, z in ((0.0, 0.5, 0.3), (-0.4, 0.2, 1.1), (0.3, 1.0, 0.05), (0.0, 1.5, 0.7)):
        spec = ModelSpec(kappa=1.0, eps=0.01, delta=0.01, m_y=m_y, nu=nu, z0=z, rho1=-0.5, rho2=-0.4)
        worst = max(worst, float(rel_err(implied_group_params(spec).eta_bar, z * np.exp(m_y + nu ** 2))))
    base = dict(kappa=1.0, eps=0.04, delta=0.02, nu=0.6, z0=0.4, nu_z=0.2)
    v3 = implied_group_params(ModelSpec(rho1=0.0, rho2=-0.5, **base)).V3eps
    v0 = implied_group_params(ModelSpec(rho1=-0.5, rho2=0.0, **base)).V0delta
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and v3 == 0.0 and v0 == 0.0 and elapsed < 1.0
    verdict("7 model-implied parameters", ok,
            f"eta_bar vs lognormal closed form {worst:.2e} (<=1e-10), V3eps(rho1=0) = {v3!r}, "
            f"V0delta(rho2=0) = {v0!r}, {elapsed:.2f}s (<1s)")


def _snapshot(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_determinism(verdict, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    panel = tmp_path / "panel.csv"
    save_panel(synth_panel(GroupMarketParams(0.6, 0.5, -0.025, 0.03125),
                           GridSpec(tuple((d, d) for d in (120, 150, 380, 470, 630, 1380))),
                           noise_sd=0.002, seed=4), panel)
    codes = []
    cal_args = ["calibrate", "--panel", "panel.csv", "--out", "cal"]
    codes.append(cli_main(cal_args))
    first_cal = _snapshot(tmp_path / "cal")
    codes.append(cli_main(["rerun", "cal/manifest.json"]))
    cal_same = first_cal == _snapshot(tmp_path / "cal")

    val_args = ["validate", "--model", str(VALIDATION_CFG), "--ladder", "0.25,0.05", "--paths", "4000",
                "--seed", "9", "--out", "val"]
    codes.append(cli_main(val_args))
    first_val = _snapshot(tmp_path / "val")
    codes.append(cli_main(["rerun", "val/manifest.json"]))
    val_same = first_val == _snapshot(tmp_path / "val")
    ok = cal_same and val_same and all(c in (0, 3) for c in codes)
    verdict("8 determinism", ok,
            f"calibrate outputs identical on replay: {cal_same}; validate outputs identical on replay: {val_same}; "
            f"exit codes {codes}")

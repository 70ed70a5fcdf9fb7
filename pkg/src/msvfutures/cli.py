"""Command-line front end: ``price``, ``surface``, ``calibrate``, ``validate`` and ``rerun``.

Exit codes: 0 success, 1 input or domain error, 2 usage error, 3 diagnostic failure.
Every command that writes an output directory also writes ``manifest.json``
there; ``rerun <manifest>`` replays it. Outputs carry no timestamps, so a
replay reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import warnings
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import black76, svg
from .calibration import calibrate
from .errors import CollinearityError, MSVError
from .futures_curve import SpotDynamicsParams, h0
from .ivol import iv_approx, lmmr
from .marketdata import load_panel
from .pricing import GroupMarketParams, VanillaSpec, price_total
from .simlab import Budget, accuracy_sweep, implied_group_params, load_config

EXIT_OK, EXIT_INPUT, EXIT_USAGE, EXIT_DIAGNOSTIC = 0, 1, 2, 3
SLOPE_BAND = (0.7, 1.3)


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _num(x) -> str:
    """Shortest round-trip text for a float; NaN prints as ``nan``."""
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_outputs(out: Path, files: dict[str, str], manifest: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _manifest(args, argv, inputs=(), seed=None) -> dict:
    return {
        "command": args.command,
        "argv": list(argv),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "parameters": {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "handler")},
        "seed": seed,
        "output_dir": str(args.out) if getattr(args, "out", None) else None,
        "tool_version": tool_version(),
    }


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _gmp(args) -> GroupMarketParams:
    return GroupMarketParams(args.kappa, args.eta_bar, args.v3, args.v0)


# ---------------------------------------------------------------- price

def cmd_price(args, argv) -> int:
    gmp = _gmp(args)
    spec = VanillaSpec(args.style, args.strike, args.t0, args.t, args.rate)
    pb = price_total(args.future_price, spec, gmp)
    text = _csv_text(("p0", "p10_eps", "p01_delta", "total"),
                     [[_num(pb.p0), _num(pb.p10_eps), _num(pb.p01_delta), _num(pb.total)]])
    sys.stdout.write(text)
    if args.out:
        _write_outputs(Path(args.out), {"price.csv": text}, _manifest(args, argv))
    return EXIT_OK


# ---------------------------------------------------------------- surface

def _iv_from_price(F, K, T0, T, gmp, rate):
    # invert the out-of-the-money side; far wings can leave the no-arbitrage band
    style = "call" if K >= F else "put"
    p = price_total(F, VanillaSpec(style, K, T0, T, rate), gmp).total
    try:
        return float(black76.implied_vol(p, F, K, T0, rate, style=style))
    except MSVError:
        return float("nan")


def cmd_surface(args, argv) -> int:
    gmp = _gmp(args)
    t0s = args.t0
    ts = args.t if args.t else [a + args.gap for a in t0s]
    if len(ts) != len(t0s):
        raise MSVError("--t must list one future maturity per --t0")
    if args.n_points < 1:
        raise MSVError("--n-points must be >= 1")
    grid = (np.array([args.lmmr_min]) if args.n_points == 1
            else np.linspace(args.lmmr_min, args.lmmr_max, args.n_points))
    F = args.future_price
    rows, series = [], []
    for T0, T in zip(t0s, ts):
        VanillaSpec("call", F, T0, T, args.rate)  # validates the tenor
        K = F * np.exp(grid * T0)
        x = lmmr(K, F, T0)
        iv = np.atleast_1d(iv_approx(x, T0, T, gmp))
        ivp = [_iv_from_price(F, k, T0, T, gmp, args.rate) for k in K]
        rows += [[_num(T0), _num(T), _num(k), _num(a), _num(b), _num(c)] for k, a, b, c in zip(K, x, iv, ivp)]
        series.append(svg.Series(f"T0={T0:g} model", tuple(x), tuple(iv)))
        series.append(svg.Series(f"T0={T0:g} price", tuple(x), tuple(ivp), style="points"))
    text = _csv_text(("T0", "T", "K", "lmmr", "iv_approx", "iv_from_price_total"), rows)
    if not args.out:
        sys.stdout.write(text)
        return EXIT_OK
    files = {"surface.csv": text}
    if args.svg:
        files["surface.svg"] = svg.chart(series, "Implied volatility smiles", "LMMR log(K/F)/T0", "implied vol")
    _write_outputs(Path(args.out), files, _manifest(args, argv))
    return EXIT_OK


# ---------------------------------------------------------------- calibrate

def cmd_calibrate(args, argv) -> int:
    panel = load_panel(args.panel, day_count=args.day_count, rate=args.rate)
    try:
        res, s1 = calibrate(panel, init_kappa=args.init_kappa, init_b0=args.init_b0,
                            min_t0_days=args.min_t0_days)
    except CollinearityError as e:
        print(f"collinearity: {e}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    used = panel.filter_min_option_days(args.min_t0_days) if args.min_t0_days is not None else panel
    gmp = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            gmp = res.group_params()
        except MSVError:
            pass

    result_csv = _csv_text(
        ("kappa", "eta_bar", "V3eps", "V0delta", "a0", "a1", "b0", "stage2_objective", "stage3_objective",
         "converged", "diagnostics"),
        [[_num(res.kappa_hat), _num(res.eta_bar_hat), _num(res.V3eps_hat), _num(res.V0delta_hat),
          _num(res.a0_hat), _num(res.a1_hat), _num(res.b0_hat), _num(res.stage2_objective),
          _num(res.stage3_objective), str(res.converged).lower(), "; ".join(res.diagnostics)]])

    fits = {(round(f.T0, 12), round(f.T, 12)): f for f in s1.smiles}
    report, series = [], []
    for sm in used.smiles:
        f = fits.get((round(sm.T0, 12), round(sm.T, 12)))
        if f is None:
            continue
        x = sm.lmmr()
        if gmp is not None:
            model = np.atleast_1d(iv_approx(x, sm.T0, sm.T, gmp, check=False))
            resid = sm.ivs - model
            rms = float(np.sqrt(np.mean(resid ** 2)))
            series.append(svg.Series(f"{sm.option_days}d/{sm.future_days}d", tuple(x), tuple(resid), "points"))
        else:
            rms = float("nan")
        report.append([sm.option_days, sm.future_days, _num(f.T0), _num(f.T), f.n, _num(f.slope),
                       _num(f.intercept), _num(f.residual_rms), _num(rms)])
    smiles_csv = _csv_text(("option_days", "future_days", "T0", "T", "n", "ols_slope", "ols_intercept",
                            "ols_rms", "model_rms"), report)
    files = {"calibration.csv": result_csv, "smiles.csv": smiles_csv,
             "residuals.svg": svg.chart(series, "Calibrated model residuals", "LMMR", "market IV - model IV")}
    _write_outputs(Path(args.out), files, _manifest(args, argv, inputs=[args.panel]))
    sys.stdout.write(result_csv)
    if not res.converged:
        for d in res.diagnostics:
            print(f"diagnostic: {d}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    return EXIT_OK


# ---------------------------------------------------------------- validate

OPTION_KEYS = ("t0", "t", "style", "strike", "moneyness", "inner_paths", "ny", "nz", "batches")


def vanilla_from_config(spec, extras) -> VanillaSpec:
    unknown = sorted(set(extras) - set(OPTION_KEYS))
    if unknown:
        raise MSVError(f"unknown config keys: {', '.join(unknown)}")
    T0 = float(extras.get("t0", 0.5))
    T = float(extras.get("t", T0 + 1.0 / 12.0))
    style = extras.get("style", "call")
    if "strike" in extras:
        K = float(extras["strike"])
    else:
        eta_bar = implied_group_params(spec).eta_bar
        params = SpotDynamicsParams(spec.kappa, spec.m, eta_bar, seasonality=spec.seasonality)
        K = float(extras.get("moneyness", 1.0)) * float(h0(0.0, spec.u0, params, T))
    return VanillaSpec(style, K, T0, T, spec.rate)


def _ladder(text: str) -> list[tuple[float, float]]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            e, d = item.split(":") if ":" in item else (item, item)
            out.append((float(e), float(d)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad ladder rung {item!r}") from None
    return out


def cmd_validate(args, argv) -> int:
    spec, extras = load_config(args.model)
    vanilla = vanilla_from_config(spec, extras)
    n_inner = args.inner or int(extras.get("inner_paths", 10_000))
    budget = Budget(n_outer=args.paths, n_inner=n_inner, ny=int(extras.get("ny", 25)),
                    nz=int(extras.get("nz", 5)), batches=int(extras.get("batches", 8)), workers=args.workers)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = accuracy_sweep(spec, vanilla, args.ladder, budget, seed=args.seed)
    slope = "" if res.slope is None else _num(res.slope)
    text = _csv_text(("eps", "delta", "mc_price", "mc_se", "approx_price", "abs_error", "error_se", "forward",
                      "strike", "inconclusive", "slope"),
                     [[_num(r.eps), _num(r.delta), _num(r.mc_price), _num(r.mc_se), _num(r.approx_price),
                       _num(r.abs_error), _num(r.error_se), _num(r.forward), _num(vanilla.strike),
                       str(r.inconclusive).lower(), slope] for r in res.rows])
    sys.stdout.write(text)
    _write_outputs(Path(args.out), {"validate.csv": text}, _manifest(args, argv, inputs=[args.model], seed=args.seed))
    code = EXIT_OK
    if res.any_inconclusive:
        print("diagnostic: standard error above 30% of the measured error on some rung; raise --paths",
              file=sys.stderr)
        code = EXIT_DIAGNOSTIC
    if res.slope is not None and not SLOPE_BAND[0] <= res.slope <= SLOPE_BAND[1]:
        print(f"diagnostic: error slope {res.slope:.3f} outside {list(SLOPE_BAND)}", file=sys.stderr)
        code = EXIT_DIAGNOSTIC
    return code


# ---------------------------------------------------------------- rerun

def cmd_rerun(args, argv) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        replay = list(manifest["argv"])
    except (OSError, ValueError, KeyError) as e:
        raise MSVError(f"unreadable manifest: {e}") from None
    for path, digest in manifest.get("inputs", {}).items():
        if not Path(path).exists() or _sha256(path) != digest:
            print(f"warning: input {path} differs from the manifest", file=sys.stderr)
    return main(replay)


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_gmp(p):
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--eta-bar", type=float, required=True)
    p.add_argument("--v3", type=float, default=0.0, help="V3eps (already scaled)")
    p.add_argument("--v0", type=float, default=0.0, help="V0delta (already scaled)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="msvf", description="First-order multiscale stochastic volatility pricing for futures options.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("price", help="first-order price breakdown of one option")
    p.add_argument("--future-price", type=float, required=True)
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--t0", type=float, required=True, help="option maturity (years)")
    p.add_argument("--t", type=float, required=True, help="future maturity (years)")
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--style", choices=("call", "put"), default="call")
    _add_gmp(p)
    p.add_argument("--out", help="also write price.csv and manifest.json here")
    p.set_defaults(handler=cmd_price)

    p = sub.add_parser("surface", help="first-order implied-vol smiles on an LMMR grid")
    _add_gmp(p)
    p.add_argument("--future-price", type=float, default=100.0)
    p.add_argument("--t0", type=_floats, required=True, help="comma-separated option maturities (years)")
    p.add_argument("--t", type=_floats, default=None, help="future maturities, one per --t0")
    p.add_argument("--gap", type=float, default=0.0, help="T - T0 when --t is omitted")
    p.add_argument("--lmmr-min", type=float, default=-0.5)
    p.add_argument("--lmmr-max", type=float, default=0.5)
    p.add_argument("--n-points", type=int, default=21)
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--out", help="output directory (CSV goes to stdout when omitted)")
    p.add_argument("--svg", action="store_true", help="also draw surface.svg")
    p.set_defaults(handler=cmd_surface)

    p = sub.add_parser("calibrate", help="three-stage fit of the group parameters to an option panel")
    p.add_argument("--panel", required=True)
    p.add_argument("--min-t0-days", type=int, default=None)
    p.add_argument("--init-kappa", type=float, default=0.5)
    p.add_argument("--init-b0", type=float, default=None)
    p.add_argument("--day-count", type=float, default=365.0)
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("validate", help="Monte Carlo accuracy ladder of the first-order price")
    p.add_argument("--model", required=True, help="key = value model config")
    p.add_argument("--ladder", type=_ladder, default=_ladder("0.25,0.05,0.01"),
                   help="rungs 'eps' or 'eps:delta', comma separated, decreasing")
    p.add_argument("--paths", type=int, default=200_000, help="outer paths per rung")
    p.add_argument("--inner", type=int, default=None, help="inner paths per grid node")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("rerun", help="replay the command recorded in a manifest.json")
    p.add_argument("manifest")
    p.set_defaults(handler=cmd_rerun)
    return ap


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _glue_negatives(argv: list[str]) -> list[str]:
    """Join ``--flag -1e-4`` into ``--flag=-1e-4``; argparse only knows plain negative decimals."""
    out: list[str] = []
    for tok in argv:
        if (out and tok.startswith("-") and _is_number(tok) and out[-1].startswith("--")
                and "=" not in out[-1]):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_glue_negatives(argv))
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.showwarning = _show_warning
            return args.handler(args, argv)
    except (MSVError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

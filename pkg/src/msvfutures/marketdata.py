"""Option-chain CSV ingestion into an implied-vol panel, and a synthetic panel generator.

CSV schema (exact header, comma separated)::

    future_days,future_price,option_days,strike,kind,value

``kind`` is one of ``iv``, ``call_price``, ``put_price``. Price quotes are
converted to Black implied vols at load time.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import black76
from .errors import DomainError, EmptyPanelError, NumericError, ParseError

log = logging.getLogger(__name__)

HEADER = ("future_days", "future_price", "option_days", "strike", "kind", "value")
KINDS = ("iv", "call_price", "put_price")


@dataclass(frozen=True)
class RawQuoteRow:
    future_days: int
    future_price: float
    option_days: int
    strike: float
    quote_kind: str
    quote_value: float


@dataclass(frozen=True)
class Smile:
    """Implied vols for one (future, option maturity) pair."""

    future_days: int
    option_days: int
    future_price: float
    strikes: np.ndarray
    ivs: np.ndarray
    day_count: float = 365.0

    @property
    def T(self) -> float:
        return self.future_days / self.day_count

    @property
    def T0(self) -> float:
        return self.option_days / self.day_count

    def lmmr(self):
        return np.log(self.strikes / self.future_price) / self.T0

    def __eq__(self, other):
        if not isinstance(other, Smile):
            return NotImplemented
        return (self.future_days == other.future_days and self.option_days == other.option_days
                and self.future_price == other.future_price and self.day_count == other.day_count
                and np.array_equal(self.strikes, other.strikes) and np.array_equal(self.ivs, other.ivs))


@dataclass(frozen=True)
class QuotePanel:
    smiles: tuple[Smile, ...]
    day_count: float = 365.0
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        validate_panel(self)

    def __len__(self):
        return len(self.smiles)

    @property
    def n_quotes(self) -> int:
        return sum(len(s.strikes) for s in self.smiles)

    def filter_min_option_days(self, min_days: int) -> "QuotePanel":
        kept = tuple(s for s in self.smiles if s.option_days >= min_days)
        if not kept:
            raise EmptyPanelError(f"no smile with option maturity >= {min_days} days")
        return replace(self, smiles=kept)


def validate_panel(panel: QuotePanel, min_strikes: int = 3) -> None:
    if not panel.smiles:
        raise EmptyPanelError("panel has no smiles")
    for s in panel.smiles:
        label = f"smile T={s.future_days}d T0={s.option_days}d"
        if not 0 < s.option_days <= s.future_days:
            raise DomainError(f"{label}: need 0 < option_days <= future_days")
        if not s.future_price > 0:
            raise DomainError(f"{label}: future price must be positive")
        if len(s.strikes) != len(s.ivs):
            raise DomainError(f"{label}: strikes and ivs differ in length")
        if np.any(~(s.strikes > 0)) or np.any(~(s.ivs > 0)):
            raise DomainError(f"{label}: strikes and ivs must be positive")
        if len(np.unique(s.strikes)) < min_strikes:
            raise DomainError(f"{label}: fewer than {min_strikes} distinct strikes")


def _parse_row(rec, lineno) -> RawQuoteRow:
    try:
        row = RawQuoteRow(
            future_days=int(rec[0]),
            future_price=float(rec[1]),
            option_days=int(rec[2]),
            strike=float(rec[3]),
            quote_kind=rec[4].strip(),
            quote_value=float(rec[5]),
        )
    except (ValueError, IndexError) as exc:
        raise ParseError(f"cannot parse row {rec!r}: {exc}", lineno) from None
    if row.quote_kind not in KINDS:
        raise ParseError(f"unknown quote kind {row.quote_kind!r}", lineno)
    return row


def read_rows(path) -> list[tuple[int, RawQuoteRow]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise ParseError(f"header must be {','.join(HEADER)}", 1)
        for rec in reader:
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(HEADER):
                raise ParseError(f"expected {len(HEADER)} fields, got {len(rec)}", reader.line_num)
            rows.append((reader.line_num, _parse_row(rec, reader.line_num)))
    return rows


def _row_to_iv(row: RawQuoteRow, day_count: float, rate: float) -> float:
    if row.quote_kind == "iv":
        if not row.quote_value > 0:
            raise DomainError("implied vol must be positive")
        return row.quote_value
    style = "call" if row.quote_kind == "call_price" else "put"
    return float(black76.implied_vol(row.quote_value, row.future_price, row.strike,
                                     row.option_days / day_count, rate, style=style))


def load_panel(path, day_count: float = 365.0, rate: float = 0.0, min_strikes: int = 3) -> QuotePanel:
    """Parse, convert and validate a quote CSV.

    Rows that are economically invalid (non-positive strike or price,
    option after future, price outside the no-arbitrage band) are dropped
    with a warning; malformed rows raise ParseError.
    """
    warns: list[str] = []
    groups: dict[tuple[int, int], dict] = {}
    for lineno, row in read_rows(path):
        problem = None
        if row.strike <= 0 or row.future_price <= 0:
            problem = "non-positive strike or future price"
        elif not (0 < row.option_days <= row.future_days):
            problem = "need 0 < option_days <= future_days"
        if problem is None:
            try:
                iv = _row_to_iv(row, day_count, rate)
            except (DomainError, NumericError) as exc:
                problem = str(exc)
        if problem is not None:
            warns.append(f"line {lineno}: dropped ({problem})")
            continue
        key = (row.future_days, row.option_days)
        g = groups.setdefault(key, {"F": row.future_price, "K": [], "iv": []})
        if g["F"] != row.future_price:
            raise ParseError(f"future price {row.future_price} disagrees with {g['F']} for "
                             f"future_days={row.future_days}", lineno)
        g["K"].append(row.strike)
        g["iv"].append(iv)
    smiles = []
    for (fd, od), g in sorted(groups.items()):
        K = np.array(g["K"])
        if len(np.unique(K)) < min_strikes:
            warns.append(f"smile T={fd}d T0={od}d: dropped (fewer than {min_strikes} distinct strikes)")
            continue
        order = np.argsort(K, kind="stable")
        smiles.append(Smile(fd, od, g["F"], K[order], np.array(g["iv"])[order], day_count))
    for w in warns:
        log.warning(w)
    if not smiles:
        raise EmptyPanelError(f"no usable smile in {path}")
    return QuotePanel(tuple(smiles), day_count, tuple(warns))


def save_panel(panel: QuotePanel, path) -> None:
    """Write a panel with kind=iv; floats use repr so reloading is exact."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for s in panel.smiles:
            for k, iv in zip(s.strikes, s.ivs):
                w.writerow([s.future_days, repr(float(s.future_price)), s.option_days,
                            repr(float(k)), "iv", repr(float(iv))])


@dataclass(frozen=True)
class GridSpec:
    """Maturities in days as (future_days, option_days) pairs, one future price per pair,
    and log-moneyness offsets in units of eta_bar*sqrt(T0)."""

    maturities: tuple[tuple[int, int], ...]
    future_prices: tuple[float, ...] | float = 100.0
    n_strikes: int = 41
    width: float = 2.0
    day_count: float = 365.0


def synth_panel(gmp, grid: GridSpec, noise_sd: float = 0.0, seed: int | None = None) -> QuotePanel:
    """Panel whose vols are exactly the first-order affine smile, plus optional Gaussian noise."""
    from .ivol import iv_approx

    rng = np.random.Generator(np.random.Philox(seed if seed is not None else 0))
    prices = grid.future_prices
    if np.isscalar(prices):
        prices = (float(prices),) * len(grid.maturities)
    smiles = []
    for (fd, od), F in zip(grid.maturities, prices):
        T, T0 = fd / grid.day_count, od / grid.day_count
        z = np.linspace(-grid.width, grid.width, grid.n_strikes)
        K = F * np.exp(z * gmp.eta_bar * np.sqrt(T0))
        iv = iv_approx(np.log(K / F) / T0, T0, T, gmp)
        if noise_sd > 0:
            iv = iv + noise_sd * rng.standard_normal(len(K))
        smiles.append(Smile(fd, od, float(F), K, np.asarray(iv, dtype=float), grid.day_count))
    return QuotePanel(tuple(smiles), grid.day_count)

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msvfutures import black76
from msvfutures.errors import DomainError
from msvfutures.pricing import (GroupMarketParams, VanillaSpec, price_correction_delta, price_correction_eps,
                                price_p0, price_total)
from msvfutures.weights import Tenor, lam0, lam1, lam3, sigma_bar

from oracles import fd_greeks

DESK = GroupMarketParams(0.1385, 0.21967, -1.76e-4, -1.27e-2)
ATM = VanillaSpec("call", 100.0, 1.0, 1.0833)


def test_p0_is_black_at_time_averaged_vol():
    sig = sigma_bar(Tenor(0.0, 1.0, 1.0833), 0.1385, 0.21967)
    assert price_p0(100.0, ATM, DESK) == pytest.approx(black76.black_call(100, 100, sig, 1.0), rel=1e-15)


def test_p0_ignores_corrections():
    other = GroupMarketParams(0.1385, 0.21967, 1e-3, 2e-3)
    assert price_p0(100.0, ATM, DESK) == price_p0(100.0, ATM, other)


def test_small_kappa_reduces_to_black_at_eta_bar():
    g = GroupMarketParams(1e-12, 0.3)
    assert price_p0(100.0, ATM, g) == pytest.approx(black76.black_call(100, 100, 0.3, 1.0), rel=1e-10)


def test_zero_corrections_give_pure_black():
    pb = price_total(95.0, VanillaSpec("put", 100.0, 0.5, 0.6), GroupMarketParams(0.3, 0.25))
    assert pb.p10_eps == 0.0 and pb.p01_delta == 0.0
    assert pb.total == pb.p0


def test_corrections_linear_in_V():
    g1 = GroupMarketParams(0.4, 0.3, 1e-3, -2e-3)
    g2 = GroupMarketParams(0.4, 0.3, 2e-3, -4e-3)
    spec = VanillaSpec("call", 110.0, 0.75, 1.0)
    assert price_correction_eps(100.0, spec, g2) == 2 * price_correction_eps(100.0, spec, g1)
    assert price_correction_delta(100.0, spec, g2) == 2 * price_correction_delta(100.0, spec, g1)


def test_eps_correction_zero_crossing():
    g = GroupMarketParams(0.4, 0.3, 1e-3)
    T0, T = 0.75, 1.0
    sig = sigma_bar(Tenor(0.0, T0, T), 0.4, 0.3)
    k0 = 100.0 * np.exp(-1.5 * sig ** 2 * T0)
    lo = price_correction_eps(100.0, VanillaSpec("call", k0 * 0.99, T0, T), g)
    hi = price_correction_eps(100.0, VanillaSpec("call", k0 * 1.01, T0, T), g)
    assert lo * hi < 0


@pytest.mark.parametrize("K", [70.0, 100.0, 140.0])
def test_corrections_against_finite_difference_operators(K):
    g = GroupMarketParams(0.4, 0.3, -2e-3, 3e-3)
    t, T0, T = 0.1, 0.9, 1.2
    ten = Tenor(t, T0, T)
    sig = sigma_bar(ten, 0.4, 0.3)
    _, d2, d1d2 = fd_greeks(100.0, K, sig, T0 - t)
    spec = VanillaSpec("call", K, T0, T)
    want_eps = (T0 - t) * lam3(ten, 0.4) * g.V3eps * (d2 + d1d2)
    want_delta = (T0 - t) * g.V0delta * (lam0(ten, 0.4) * d2 + lam1(ten, 0.4) * d1d2)
    assert price_correction_eps(100.0, spec, g, t) == pytest.approx(want_eps, rel=1e-6)
    assert price_correction_delta(100.0, spec, g, t) == pytest.approx(want_delta, rel=1e-6)


def test_delta_correction_when_future_expires_with_option():
    g = GroupMarketParams(0.4, 0.3, 0.0, 3e-3)
    spec = VanillaSpec("call", 105.0, 0.8, 0.8)
    ten = Tenor(0.0, 0.8, 0.8)
    sig = sigma_bar(ten, 0.4, 0.3)
    ops = black76.d2_operator(100, 105, sig, 0.8) + black76.d1d2_operator(100, 105, sig, 0.8)
    assert price_correction_delta(100.0, spec, g) == pytest.approx(0.8 * 3e-3 * lam0(ten, 0.4) * ops, rel=1e-13)


def test_put_call_parity_of_totals():
    g = GroupMarketParams(0.4, 0.3, -2e-3, 3e-3)
    for K in (80.0, 100.0, 125.0):
        c = price_total(100.0, VanillaSpec("call", K, 0.6, 0.9, 0.03), g).total
        p = price_total(100.0, VanillaSpec("put", K, 0.6, 0.9, 0.03), g).total
        assert c - p == pytest.approx(np.exp(-0.03 * 0.6) * (100.0 - K), abs=1e-10)


def test_desk_strike_curve_is_decreasing_and_convex():
    K = np.linspace(80, 120, 41)
    p = np.array([price_total(100.0, VanillaSpec("call", k, 1.0, 1.0833), DESK).total for k in K])
    assert np.all(np.diff(p) < 0)
    assert np.all(np.diff(p, 2) > -1e-8)


def test_valuation_after_expiry_rejected():
    with pytest.raises(DomainError):
        price_total(100.0, ATM, DESK, t=1.0)


@pytest.mark.parametrize("kw", [dict(style="digital", strike=100.0, T0=1, T=1), dict(style="call", strike=0.0, T0=1, T=1),
                                dict(style="call", strike=100.0, T0=1.0, T=0.5)])
def test_vanilla_validation(kw):
    with pytest.raises(DomainError):
        VanillaSpec(**kw)


def test_group_params_validation_and_credibility_warning():
    with pytest.raises(DomainError):
        GroupMarketParams(0.0, 0.2)
    with pytest.raises(DomainError):
        GroupMarketParams(0.5, -0.2)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        GroupMarketParams(0.5, 0.2, 0.0, 0.9 * 0.2 ** 3)
    assert any("unreliable" in str(w.message) for w in rec)


@settings(max_examples=100, deadline=None)
@given(K=st.floats(60, 160), T0=st.floats(0.1, 2.0), gap=st.floats(0, 1), V3=st.floats(-2e-3, 2e-3),
       V0=st.floats(-2e-3, 2e-3))
def test_total_is_sum_of_parts(K, T0, gap, V3, V0):
    g = GroupMarketParams(0.5, 0.3, V3, V0)
    pb = price_total(100.0, VanillaSpec("call", K, T0, T0 + gap), g)
    assert pb.total == pb.p0 + pb.p10_eps + pb.p01_delta

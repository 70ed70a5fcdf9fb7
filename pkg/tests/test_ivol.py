import numpy as np
import pytest

from msvfutures import black76
from msvfutures.errors import DomainError, ExpansionBreakdownError
from msvfutures.ivol import iv_approx, lmmr, smile_coefficients, smile_slope_intercept
from msvfutures.pricing import GroupMarketParams, VanillaSpec, price_total
from msvfutures.weights import Tenor, lam0, lam1, lam3, lam_sigma, sigma_bar

from oracles import lam_quad


def test_small_kappa_limit():
    c = smile_coefficients(0.5, 0.75, 1e-9)
    assert (c.b_bar, c.b_eps, c.a_eps) == pytest.approx((1.0, 1.5, 1.0), abs=1e-8)
    assert (c.b_delta, c.a_delta) == pytest.approx((0.0, 0.0), abs=1e-8)


def test_coefficients_from_quadrature_weights():
    k, T0, T = 0.1385, 0.25, 0.3333
    ls = np.sqrt(lam_quad(0, T0, T, 2 * k))
    l3 = lam_quad(0, T0, T, 3 * k)
    l0 = lam_quad(0, T0, T, k) - l3
    l1 = np.exp(-2 * k * (T - T0)) * lam_quad(0, T0, T, k) - l3
    c = smile_coefficients(T0, T, k)
    assert c.b_bar == pytest.approx(ls, rel=1e-12)
    assert c.b_eps == pytest.approx(1.5 * l3 / ls, rel=1e-12)
    assert c.b_delta == pytest.approx(l0 / ls + 0.5 * l1 / ls, rel=1e-10)
    assert c.a_eps == pytest.approx(l3 / ls ** 3, rel=1e-12)
    assert c.a_delta == pytest.approx(l1 / ls ** 3, rel=1e-10)


def test_future_expiring_with_option_uses_lam0():
    c = smile_coefficients(0.6, 0.6, 0.4)
    ten = Tenor(0.0, 0.6, 0.6)
    assert c.a_delta == pytest.approx(lam0(ten, 0.4) / lam_sigma(ten, 0.4) ** 3, rel=1e-14)


def test_flat_smile_without_corrections():
    g = GroupMarketParams(0.3, 0.25)
    x = np.linspace(-0.5, 0.5, 11)
    iv = iv_approx(x, 0.5, 0.6, g)
    assert np.allclose(iv, sigma_bar(Tenor(0.0, 0.5, 0.6), 0.3, 0.25), rtol=1e-15)


def test_affine_in_lmmr_and_level_identity():
    g = GroupMarketParams(0.3, 0.25, -1e-3, 2e-3)
    x = np.linspace(-0.5, 0.5, 21)
    iv = iv_approx(x, 0.5, 0.6, g)
    assert np.max(np.abs(np.diff(iv, 2))) < 1e-15
    c = smile_coefficients(0.5, 0.6, 0.3)
    want = g.V3eps / g.eta_bar * c.b_eps + g.V0delta / g.eta_bar * c.b_delta
    assert iv_approx(0.0, 0.5, 0.6, g) - sigma_bar(Tenor(0.0, 0.5, 0.6), 0.3, 0.25) == pytest.approx(want, rel=1e-10)


def test_slope_sign():
    for V3, V0 in ((-1e-3, -1e-3), (1e-3, 2e-3), (-1e-3, 1e-4)):
        g = GroupMarketParams(0.3, 0.25, V3, V0)
        c = smile_coefficients(0.5, 0.6, 0.3)
        slope, _ = smile_slope_intercept(0.5, 0.6, g)
        assert np.sign(slope) == np.sign(V3 * c.a_eps + V0 * c.a_delta)


def test_breakdown_guard():
    g = GroupMarketParams(0.3, 0.05, -1e-4, 0.0)
    with pytest.raises(ExpansionBreakdownError):
        iv_approx(np.array([0.0, 50.0]), 0.5, 0.6, g)
    assert iv_approx(50.0, 0.5, 0.6, g, check=False) < 0.005


def test_invalid_maturity():
    with pytest.raises(DomainError):
        smile_coefficients(0.0, 1.0, 0.5)


def test_lmmr_definition():
    assert lmmr(110.0, 100.0, 0.5) == pytest.approx(np.log(1.1) / 0.5)


def _gap(scale):
    g = GroupMarketParams(0.4, 0.3, -2e-3 * scale, -4e-3 * scale)
    worst = 0.0
    for T0 in (0.25, 0.5, 1.0):
        for x in np.linspace(-0.5, 0.5, 21):
            K = 100.0 * np.exp(x * T0)
            style = "call" if K >= 100.0 else "put"
            p = price_total(100.0, VanillaSpec(style, K, T0, T0 + 0.1), g).total
            iv = black76.implied_vol(p, 100.0, K, T0, style=style)
            worst = max(worst, abs(iv - iv_approx(x, T0, T0 + 0.1, g)))
    return worst


def test_price_and_smile_differ_at_second_order():
    # halving the corrections should cut the gap roughly fourfold
    a, b = _gap(0.125), _gap(0.0625)
    assert a < 2e-3
    assert 3.0 <= a / b <= 5.5

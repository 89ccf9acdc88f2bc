import math

import numpy as np
import pytest
from scipy import integrate

from cvqkd_pas.channel import ChannelParams, distance_for_eta, from_distance
from cvqkd_pas.classical_info import (
    awgn_capacity,
    gg02_mutual_information,
    mutual_information,
    p_b,
    p_b_given_a,
)
from cvqkd_pas.constellation import build_psk, build_qam, gg02_source, single_symbol
from cvqkd_pas.errors import UnsupportedError
from cvqkd_pas.kgr_optimizer import optimize_nu_mutual_info
from cvqkd_pas.numerics import GridPolicy, QuadratureGrid

IDEAL = from_distance(0.0)


def eta_channel(eta, eps=0.0):
    return ChannelParams(distance_for_eta(eta), 0.2, eps)


def test_quadrature_grid_weights():
    g = QuadratureGrid(-3.0, 5.0, 101)
    assert g.weights.sum() == pytest.approx(8.0, abs=1e-12)
    # Simpson is exact for cubics
    assert g.integrate(g.points**3 - g.points) == pytest.approx((5**4 - 3**4) / 4 - (25 - 9) / 2, rel=1e-13)
    with pytest.raises(ValueError):
        QuadratureGrid(0, 1, 100)


def test_p_b_given_a_peak():
    assert p_b_given_a(0.0, 0.0, IDEAL) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)
    ch = from_distance(37.0)
    x_a = 0.83
    assert p_b_given_a(2 * math.sqrt(ch.eta) * x_a, x_a, ch) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)


@pytest.mark.parametrize("eps", [0.0, 0.05])
def test_p_b_given_a_normalized(eps):
    ch = from_distance(20.0, epsilon=eps)
    val, _ = integrate.quad(lambda x: p_b_given_a(x, 1.3, ch), -np.inf, np.inf, epsabs=1e-12)
    assert val == pytest.approx(1.0, abs=1e-8)
    # variance is 1 + eta*eps
    var, _ = integrate.quad(
        lambda x: (x - 2 * math.sqrt(ch.eta) * 1.3) ** 2 * p_b_given_a(x, 1.3, ch), -np.inf, np.inf
    )
    assert var == pytest.approx(ch.sigma_eps_sq, rel=1e-9)


def test_p_b_single_symbol_and_symmetry():
    x = np.linspace(-6, 6, 41)
    np.testing.assert_allclose(p_b(x, single_symbol(0.0), IDEAL), p_b_given_a(x, 0.0, IDEAL), rtol=1e-15)
    c = build_qam(4, 3.0, 0.5)
    ch = from_distance(15.0)
    np.testing.assert_allclose(p_b(x, c, ch), p_b(-x, c, ch), rtol=1e-13)


def test_p_b_qam4_two_component_mixture():
    c = build_qam(2, 1.0, 0.0)
    x = np.linspace(-5, 5, 23)
    # x_A = +-sqrt(2)/2, Bob's means +-sqrt(2) at eta = 1
    m = math.sqrt(2.0)
    direct = 0.5 * (np.exp(-((x - m) ** 2) / 2) + np.exp(-((x + m) ** 2) / 2)) / math.sqrt(2 * math.pi)
    np.testing.assert_allclose(p_b(x, c, IDEAL), direct, rtol=1e-14)


def test_p_b_rejects_gg02():
    with pytest.raises(UnsupportedError):
        p_b(0.0, gg02_source(1.0), IDEAL)
    with pytest.raises(UnsupportedError):
        mutual_information(gg02_source(1.0), IDEAL)


def _mi_by_quad(c, ch):
    def neg_plogp(x):
        p = p_b(np.array([x]), c, ch)[0]
        return -p * math.log2(p) if p > 1e-300 else 0.0

    xs, _ = c.x_marginal
    s = 2 * math.sqrt(ch.eta)
    lo, hi = s * xs.min() - 12, s * xs.max() + 12
    h_b, _ = integrate.quad(neg_plogp, lo, hi, limit=400, epsabs=1e-13, epsrel=1e-13, points=list(s * xs))
    return h_b - 0.5 * math.log2(2 * math.pi * math.e * ch.sigma_eps_sq)


@pytest.mark.parametrize(
    "c, ch",
    [
        (build_qam(4, 1.0, 0.0), from_distance(10.0)),
        (build_qam(4, 3.0, 0.7), from_distance(50.0)),
        (build_qam(8, 5.0, 0.3), from_distance(0.0)),
        (build_psk(8, 2.0), from_distance(25.0)),
        (build_qam(4, 2.0, 0.7), from_distance(40.0, epsilon=0.05)),
    ],
)
def test_mutual_information_matches_adaptive_quadrature(c, ch):
    r = mutual_information(c, ch)
    assert r.i_ab == pytest.approx(_mi_by_quad(c, ch), abs=1e-9)
    assert r.i_ab == pytest.approx(r.h_b - r.h_b_given_a, abs=1e-12)


def test_mutual_information_zero_energy():
    assert mutual_information(build_qam(4, 1e-10, 0.0), IDEAL).i_ab < 1e-9


def test_mutual_information_capacity_at_low_snr():
    nbar = 0.05
    nu = optimize_nu_mutual_info(4, nbar, IDEAL)
    i = mutual_information(build_qam(4, nbar, nu), IDEAL).i_ab
    cap = 0.5 * math.log2(1 + 2 * nbar)
    assert cap - 0.01 <= i <= cap + 1e-9


def test_mutual_information_entropy_ceiling_at_high_energy():
    i = mutual_information(build_qam(4, 1e3, 0.0), IDEAL).i_ab
    assert i == pytest.approx(2.0, abs=0.02)


@pytest.mark.parametrize("d", [0.0, 10.0, 50.0, 100.0])
@pytest.mark.parametrize("nbar", [0.1, 1.0, 5.0, 20.0])
@pytest.mark.parametrize("M", [2, 4, 8])
def test_mutual_information_ceilings(M, nbar, d):
    ch = from_distance(d)
    for nu in (0.0, 0.5, 3.0):
        i = mutual_information(build_qam(M, nbar, nu), ch).i_ab
        assert 0 <= i <= min(math.log2(M), awgn_capacity(nbar, ch)) + 1e-9


@pytest.mark.parametrize("d", [10.0, 60.0])
@pytest.mark.parametrize("nbar", [0.3, 2.0, 8.0])
def test_shaping_never_hurts_mutual_information(nbar, d):
    ch = from_distance(d)
    nu = optimize_nu_mutual_info(4, nbar, ch)
    i2 = mutual_information(build_qam(4, nbar, nu), ch).i_ab
    i1 = mutual_information(build_qam(4, nbar, 0.0), ch).i_ab
    assert i2 >= i1


@pytest.mark.parametrize("c", [build_qam(4, 2.0, 0.0), build_qam(8, 20.0, 0.4), build_psk(16, 3.0)])
def test_quadrature_convergence(c):
    ch = from_distance(5.0)
    base = GridPolicy()
    a = mutual_information(c, ch, base).i_ab
    b = mutual_information(c, ch, base.doubled()).i_ab
    assert abs(a - b) < 1e-6


def test_gg02_mutual_information():
    assert gg02_mutual_information(1.0, eta_channel(0.5)) == pytest.approx(0.5, abs=1e-14)
    assert gg02_mutual_information(0.0, IDEAL) == 0.0
    assert gg02_mutual_information(5.0, eta_channel(0.1)) == pytest.approx(0.5, abs=1e-14)
    with pytest.raises(UnsupportedError):
        gg02_mutual_information(1.0, from_distance(10, epsilon=0.01))

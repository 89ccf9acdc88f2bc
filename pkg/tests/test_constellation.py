import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqkd_pas.constellation import (
    GG02,
    PSK,
    QAM_MB,
    QAM_UNIFORM,
    Lattice1D,
    build_psk,
    build_qam,
    gg02_source,
    mb_weights,
    solve_delta_mb,
    solve_delta_uniform,
)
from cvqkd_pas.errors import DomainError

levels = st.sampled_from([2, 4, 8, 16])
energies = st.floats(min_value=1e-3, max_value=200.0)
nus = st.floats(min_value=0.0, max_value=80.0)


@pytest.mark.parametrize(
    "M, nbar, expected",
    [(4, 2.5, 1.0), (2, 1.0, math.sqrt(2.0))],
)
def test_solve_delta_uniform_closed_form(M, nbar, expected):
    assert solve_delta_uniform(M, nbar) == pytest.approx(expected, abs=1e-15)


def test_solve_delta_uniform_zero_energy_limit():
    assert solve_delta_uniform(4, 1e-14) < 1e-6


@pytest.mark.parametrize("M, nbar", [(1, 1.0), (3, 1.0), (4, 0.0), (4, -1.0)])
def test_solve_delta_uniform_domain(M, nbar):
    with pytest.raises(DomainError):
        solve_delta_uniform(M, nbar)


@given(M=levels, nbar=energies)
def test_uniform_spacing_meets_energy_constraint(M, nbar):
    z = Lattice1D(M, solve_delta_uniform(M, nbar)).points
    assert np.mean(z**2) == pytest.approx(nbar / 2, rel=1e-12)


@given(M=levels, delta=st.floats(min_value=1e-3, max_value=10))
def test_lattice_symmetric_and_evenly_spaced(M, delta):
    pts = Lattice1D(M, delta).points
    assert len(pts) == M
    np.testing.assert_array_equal(pts, -pts[::-1])
    np.testing.assert_allclose(np.diff(pts), delta, atol=1e-12)


def test_mb_weights_limits():
    np.testing.assert_allclose(mb_weights(0.0, 4).weights, 0.25, atol=1e-15)
    w = mb_weights(200.0, 4).weights
    np.testing.assert_allclose(w, [0, 0.5, 0.5, 0], atol=1e-15)
    np.testing.assert_allclose(mb_weights(1.0, 2).weights, [0.5, 0.5], atol=1e-15)


def test_mb_weights_outer_levels_vanish_for_large_nu():
    w = mb_weights(61.0, 8).weights
    outer = np.r_[w[:3], w[5:]]
    assert outer.max() < 1e-12


def test_mb_weights_negative_nu_rejected():
    with pytest.raises(DomainError):
        mb_weights(-0.1, 4)


@given(M=levels, nu=nus)
def test_mb_weights_normalized_symmetric(M, nu):
    w = mb_weights(nu, M).weights
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(w, w[::-1])
    assert np.all(w >= 0)


def test_mb_weights_match_direct_boltzmann():
    # direct evaluation exp(-beta z^2)/Z on the lattice with an arbitrary delta
    nu, M, delta = 0.37, 8, 1.9
    beta = nu / delta**2
    z = Lattice1D(M, delta).points
    direct = np.exp(-beta * z**2)
    direct /= direct.sum()
    np.testing.assert_allclose(mb_weights(nu, M).weights, direct, rtol=1e-13)


def test_solve_delta_mb_reduces_to_uniform():
    delta, beta = solve_delta_mb(0.0, 4, 2.5)
    assert delta == pytest.approx(1.0, abs=1e-14)
    assert beta == 0.0


def test_solve_delta_mb_variance_recomputed():
    delta, beta = solve_delta_mb(2.0, 4, 1.0)
    z = Lattice1D(4, delta).points
    w = np.exp(-beta * z**2)
    w /= w.sum()
    assert np.dot(w, z**2) == pytest.approx(0.5, abs=1e-12)


@given(M=levels, nbar=energies, nu=nus)
def test_solve_delta_mb_energy_constraint(M, nbar, nu):
    delta, beta = solve_delta_mb(nu, M, nbar)
    z = Lattice1D(M, delta).points
    w = mb_weights(nu, M).weights
    assert np.dot(w, z**2) == pytest.approx(nbar / 2, rel=1e-10)
    assert beta * delta**2 == pytest.approx(nu, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("M", [2, 4, 8])
def test_delta_non_decreasing_in_nu(M):
    nu_grid = np.linspace(0, 80, 401)
    deltas = [solve_delta_mb(nu, M, 1.7)[0] for nu in nu_grid]
    assert np.all(np.diff(deltas) >= -1e-12)
    assert min(deltas) >= solve_delta_uniform(M, 1.7) * (1 - 1e-12)


def test_build_qam_qam4_closed_form():
    c = build_qam(2, 1.0, 0.0)
    assert c.kind == QAM_UNIFORM
    h = math.sqrt(2.0) / 2
    expected = {complex(sx * h, sy * h) for sx in (-1, 1) for sy in (-1, 1)}
    assert len(c) == 4
    for s in c.symbols:
        assert min(abs(s - e) for e in expected) < 1e-15
    np.testing.assert_allclose(c.probs, 0.25)


def test_build_qam16_corner_energy():
    c = build_qam(4, 2.5, 0.0)
    assert len(c) == 16
    assert np.max(np.abs(c.symbols) ** 2) == pytest.approx(4.5, abs=1e-12)


@given(M=levels, nbar=energies, nu=nus)
@settings(max_examples=60)
def test_build_qam_invariants(M, nbar, nu):
    c = build_qam(M, nbar, nu)
    assert c.kind == (QAM_UNIFORM if nu == 0 else QAM_MB)
    assert np.all(c.probs >= 0)
    assert c.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert c.energy() == pytest.approx(nbar, rel=1e-9)


def test_build_qam_product_probabilities():
    c = build_qam(4, 1.0, 0.8)
    w = mb_weights(0.8, 4).weights
    np.testing.assert_allclose(c.probs.reshape(4, 4), np.outer(w, w), rtol=1e-14)


def test_x_marginal_sums_over_y():
    c = build_qam(4, 1.0, 0.8)
    xs, px = c.x_marginal
    np.testing.assert_allclose(xs, Lattice1D(4, c.delta).points, rtol=1e-14)
    np.testing.assert_allclose(px, mb_weights(0.8, 4).weights, rtol=1e-14)


def test_build_psk_phases():
    c = build_psk(4, 1.0)
    assert c.kind == PSK
    np.testing.assert_allclose(c.symbols, np.exp(1j * np.pi * np.array([1, 3, 5, 7]) / 4), atol=1e-15)
    c = build_psk(2, 4.0)
    np.testing.assert_allclose(c.symbols, [2j, -2j], atol=1e-15)


@given(N=st.integers(min_value=2, max_value=128), nbar=energies)
def test_psk_constant_modulus(N, nbar):
    c = build_psk(N, nbar)
    np.testing.assert_allclose(np.abs(c.symbols) ** 2, nbar, rtol=1e-12)
    assert c.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert c.energy() == pytest.approx(nbar, rel=1e-9)


def test_psk_too_small():
    with pytest.raises(DomainError):
        build_psk(1, 1.0)


def test_gg02_descriptor():
    c = gg02_source(3.0)
    assert c.kind == GG02 and not c.is_discrete
    assert c.energy() == 3.0

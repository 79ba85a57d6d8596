import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nfbif import connectivity as conn
from nfbif.errors import AliasingError, ConfigError


def test_even_and_exchangeable(ring64):
    assert ring64.is_even()
    assert ring64.is_exchangeable()
    assert not conn.paper_tanh_ring(2.0, 64).is_exchangeable()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6))
def test_convolution_eigen_relation(ring64, k0, k1):
    k = (k0, k1)
    om = conn.omega_grid(k, 64, 1.0)
    lhs = ring64.convolve(om)
    rhs = conn.fourier_mode(ring64, k) / conn.theta(k) * om
    assert np.max(np.abs(lhs - rhs)) <= 1e-8 * max(1.0, np.max(np.abs(lhs)))


def test_theta_and_unit_norm():
    assert conn.theta((0, 0)) == 1.0
    assert conn.theta((3, 2)) == pytest.approx(2.0)
    assert conn.theta((0, 2)) == pytest.approx(math.sqrt(2))
    for k in [(0, 0), (0, 4), (3, 3), (1, 4)]:
        om = conn.omega_grid(k, 32, 1.0)
        assert math.sqrt(np.sum(om**2) / 32**2) == pytest.approx(1.0, abs=1e-12)


def test_parseval_bound(ring64):
    table = conn.fourier_modes(ring64, 10)
    total = float(np.sum(ring64.grid() ** 2) * ring64.cell_volume())
    assert float(np.sum(table**2)) <= total * (1 + 1e-12)


def test_mode_classes_radial(ring64):
    classes = conn.mode_table(ring64, 6)
    labels = [set(c.members) for c in classes[:3]]
    assert labels == [{(0, 4), (4, 0)}, {(1, 4), (4, 1)}, {(3, 3)}]
    ratios = [c.effective_ratio for c in classes]
    assert ratios == sorted(ratios, reverse=True)


def test_stretched_not_merged():
    W = conn.paper_tanh_ring(2.0, 64)
    classes = conn.mode_table(W, 6)
    assert all(c.card == 1 for c in classes)
    assert any(c.members == ((0, 4),) for c in classes)


def test_constant_potential():
    W = conn.Potential("cosine_sum", {"constant": 2.5}, L=1.0, d=2, n=16)
    classes = conn.mode_table(W, 3)
    nonzero = [c for c in classes if abs(c.w_tilde) > 1e-12]
    assert len(nonzero) == 1 and nonzero[0].members == ((0, 0),)
    assert nonzero[0].w_tilde == pytest.approx(2.5)


def test_four_comp_factor_quarter_shift():
    shifts = [[0, 0], [0.25, 0], [0, 0.25], [0.25, 0.25]]
    # cos(0) + cos(pi/2) + cos(0) + cos(pi/2) over 4
    assert conn.four_comp_factor((1, 0), shifts, 1.0) == 0.5
    assert conn.four_comp_factor((0, 0), np.zeros((4, 2)), 1.0) == 1.0


def test_norm_omega_sq():
    L = 1.0
    # int cos^4 over one axis with Theta normalisation
    assert conn.norm_omega_sq([(1,)], L) == pytest.approx(1.5)
    assert conn.norm_omega_sq([(1, 2)], L) == pytest.approx(2.25)


def test_aliasing_error(ring64):
    with pytest.raises(AliasingError):
        conn.omega_grid((40, 0), 64, 1.0)


def test_grid_table_roundtrip(tmp_path, ring64):
    path = tmp_path / "w.csv"
    conn.write_grid_csv(path, ring64.grid(), 1.0)
    W = conn.Potential("grid_table", {"path": str(path)}, L=1.0)
    assert W.n == 64 and W.d == 2
    assert np.array_equal(W.grid(), ring64.grid())
    with pytest.raises(ConfigError):
        conn.Potential("grid_table", {"path": str(path)}, L=2.0)


def test_h_stability(ring64):
    assert not conn.h_stability_check(ring64, 6)[0]
    neg = conn.Potential("cosine_sum", {"constant": -1.0, "terms": [{"k": [1, 0], "coeff": -2.0}]}, L=1.0, d=2, n=16)
    assert conn.h_stability_check(neg.negated(), 4)[0]


def test_unknown_kind():
    with pytest.raises(ConfigError):
        conn.Potential("nope")


def test_ball_and_dog_means():
    ball = conn.Potential("ball_indicator", {"amplitude": -3.0, "radius": 0.2}, n=64)
    # cell averaging approximates the disc area
    assert ball.mean() == pytest.approx(-3.0 * math.pi * 0.04, rel=2e-3)
    dog = conn.Potential("difference_of_gaussians", {"amplitude": 10.0, "rate1": 21.0, "rate2": 20.0}, n=64)

    def torus_gauss(a):
        return (math.sqrt(math.pi / a) * math.erf(math.sqrt(a) / 2)) ** 2

    assert dog.mean() == pytest.approx(10.0 * (torus_gauss(21.0) - torus_gauss(20.0)), rel=5e-4)

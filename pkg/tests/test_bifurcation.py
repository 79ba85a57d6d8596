import math

import numpy as np
import pytest
from scipy.linalg import null_space
from scipy.optimize import root

from nfbif import bifurcation as bif
from nfbif import connectivity as conn
from nfbif.errors import AliasingError, ConfigError, DomainError, NoCrossingError
from nfbif.homogeneous import GainFunction, ModelParams, kappa_c, mean_activity, solve_rho_bar_inf
from nfbif.oracle import frechet_fd_oracle


def test_psi_forms_agree(ring_params64):
    p = ring_params64
    for k in np.geomspace(kappa_c(p) * 1.05, 1e4, 25):
        assert bif.psi(p, k) == pytest.approx(bif.psi_raw(p, k), rel=1e-11)


def test_psi_domain(ring_params64):
    with pytest.raises(DomainError):
        bif.psi(ring_params64, kappa_c(ring_params64) * 0.5)


def test_psi_decreasing_for_convex_gain(cos1d_params):
    p = cos1d_params
    ks = np.geomspace(kappa_c(p) * (1 + 1e-6), 1e5, 200)
    vals = np.array([bif.psi(p, k) for k in ks])
    limit = bif.psi_limit(p)
    # strict where psi is resolvably above its limit; beyond, g rounds to 1
    live = vals - limit > 1e-12 * limit
    assert live.sum() > 50
    assert np.all(np.diff(vals[live]) < 0)
    assert np.all(np.diff(vals) <= 0) and vals.min() >= limit
    assert vals[0] < bif.psi_cap(p)


def test_relu_limits(cos1d_params):
    p = cos1d_params
    assert bif.psi_limit(p) == pytest.approx(1.0, rel=1e-6)
    assert bif.psi_cap(p) == pytest.approx(math.pi / (math.pi - 2), rel=1e-12)


def test_no_crossings_when_minus_w_h_stable():
    W = conn.Potential("cosine_sum", {"constant": -3.0, "terms": [{"k": [1], "coeff": -2.0}]}, L=1.0, d=1, n=32)
    p = bif.model_params(W, 3.0, GainFunction("relu"))
    assert conn.h_stability_check(W.negated(), 6)[0]
    points, rejections = bif.find_crossings(W, p, 6)
    assert points == []
    assert {r.reason for r in rejections} == {"below_limit"}
    with pytest.raises(NoCrossingError):
        bif.linear_stability_threshold(W, p, 6)


def test_crossings_match_dense_scan(cos1d, cos1d_params):
    p = cos1d_params
    points, _ = bif.find_crossings(cos1d, p, 6, kappa_max=1e5)
    assert [pt.mode.members for pt in points] == [((1,),), ((3,),), ((5,),)]
    ks = np.geomspace(kappa_c(p) * (1 + 1e-6), 1e5, 20000)
    vals = np.array([bif.psi(p, k) for k in ks])
    for pt in points:
        i = int(np.nonzero(np.diff(np.sign(vals - pt.mode.effective_ratio)))[0][0])
        lo, hi = ks[i], ks[i + 1]
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if (bif.psi(p, mid) - pt.mode.effective_ratio) * (bif.psi(p, lo) - pt.mode.effective_ratio) <= 0:
                hi = mid
            else:
                lo = mid
        assert pt.kappa_star == pytest.approx(0.5 * (lo + hi), rel=1e-8)
        assert pt.residual <= 1e-10


def test_first_crossing_is_max_ratio(ring64, ring_params64):
    points, _ = bif.find_crossings(ring64, ring_params64, 6, kappa_max=200)
    classes = conn.mode_table(ring64, 6)
    assert points[0].mode.members == classes[0].members
    assert bif.linear_stability_threshold(ring64, ring_params64, 6, 200) == points[0].kappa_star


def test_four_component_zero_shift_identical(ring64, ring_params64):
    one, _ = bif.find_crossings(ring64, ring_params64, 5, kappa_max=200)
    four, _ = bif.find_crossings(ring64, ring_params64, 5, kappa_max=200, shifts=np.zeros((4, 2)))
    assert [(a.mode.members, a.kappa_star) for a in one] == [(b.mode.members, b.kappa_star) for b in four]


def test_tie_flags_non_unique():
    terms = [{"k": [1, 0], "coeff": 4.2}, {"k": [0, 1], "coeff": 4.2}]
    W = conn.Potential("cosine_sum", {"constant": -3.0, "terms": terms}, L=1.0, d=2, n=16)
    p = bif.model_params(W, 3.0, GainFunction("relu"))
    points, _, _ = bif.analyse(W, p, 2, exchangeable="off", coefficients=False)
    assert len(points) == 2
    assert all(not pt.validation["unique_mode"] for pt in points)
    assert all(pt.kernel_dim == 2 for pt in points)


def test_fd_oracle_matches_closed_forms(cos1d, cos1d_params):
    p = cos1d_params
    for kappa in (5.0, 20.0, 80.0):
        s = solve_rho_bar_inf(p, kappa)
        for k in [(1,), (2,), (3,)]:
            ratio = conn.fourier_mode(cos1d, k) / conn.theta(k)
            lam = bif.eigenvalue(p, s, ratio)
            assert frechet_fd_oracle(cos1d, p, kappa, k, 1) == pytest.approx(lam, abs=1e-6)
            assert abs(frechet_fd_oracle(cos1d, p, kappa, k, 2)) < 1e-6


def _continuation_curvature(W, P, pt, zs=(0.002, 0.004)):
    """kappa''(0) from solving F(rho) = 0 along the branch at fixed amplitudes z."""
    n, dA = W.n, W.cell_volume()
    v = sum(conn.omega_grid(m, n, W.L) for m in pt.mode.members) / math.sqrt(pt.mode.card)
    Q = null_space(v[None, :])
    out = []
    guess = np.concatenate([[pt.kappa_star], np.zeros(n - 1)])
    for z in zs:
        def system(xx):
            k = xx[0]
            rho = solve_rho_bar_inf(P, k).rho_bar_inf + z * v + Q @ xx[1:]
            r = rho - mean_activity(P.phi(W.convolve(rho) + P.B), k, P.Ld)
            return np.concatenate([[np.sum(r * v) * dA], Q.T @ r])

        sol = root(system, guess, method="hybr", tol=1e-13)
        assert np.max(np.abs(system(sol.x))) < 1e-12
        guess = sol.x
        out.append(2 * (sol.x[0] - pt.kappa_star) / z**2)
    # kappa(z) = kappa* + kappa'' z^2 / 2 + O(z^4): Richardson on the two amplitudes
    return (4 * out[0] - out[1]) / 3


def test_full_curvature_matches_continuation():
    W = conn.Potential(
        "cosine_sum", {"constant": -3.0, "terms": [{"k": [1], "coeff": 3.2}, {"k": [3], "coeff": 2.1}]}, L=1.0, d=1, n=32
    )
    P = bif.model_params(W, 3.0, GainFunction("relu"))
    points, _, _ = bif.analyse(W, P, 4, kappa_max=1e4)
    for pt in points:
        brute = _continuation_curvature(W, P, pt)
        assert pt.coeffs.kappa_pp0_full == pytest.approx(brute, rel=2e-3)
        assert pt.coeffs.label_full == ("supercritical" if brute > 0 else "subcritical")


def test_coefficient_signs_and_exact_k1(cos1d, cos1d_params):
    points, _, _ = bif.analyse(cos1d, cos1d_params, 6, kappa_max=1e5)
    for pt in points:
        c = pt.coeffs
        assert pt.validation["validated"]
        assert c.c2 > 0 and c.k2 < 0 and c.k3 < 0 and c.k2_exact < 0
        assert c.a3 < 0 and c.a3 <= (math.pi - 4) / (math.pi - 2)
        assert c.k1_exact == pytest.approx(c.k1_fd, rel=1e-4)
        assert c.kappa_pp0 == pytest.approx(-c.k1 / (3 * c.k2))


def test_k2_exact_is_eigenvalue_slope(ring64, ring_params64):
    points, _ = bif.find_crossings(ring64, ring_params64, 5, kappa_max=200)
    p = ring_params64
    for pt in points[:3]:
        r = pt.mode.effective_ratio
        k, h = pt.kappa_star, 1e-4 * pt.kappa_star
        slope = (
            bif.eigenvalue(p, solve_rho_bar_inf(p, k + h), r) - bif.eigenvalue(p, solve_rho_bar_inf(p, k - h), r)
        ) / (2 * h)
        assert bif.k2_exact(p, solve_rho_bar_inf(p, k)) == pytest.approx(slope, rel=1e-6)


def test_missing_third_derivative():
    W = conn.Potential("cosine_sum", {"constant": -3.0, "terms": [{"k": [1], "coeff": 3.2}]}, L=1.0, d=1, n=32)
    phi = GainFunction("user_table", {"x": [-1, 0, 1, 2, 4, 8], "phi": [0, 0, 1, 2.2, 4.8, 10]})
    p = ModelParams(L=1.0, d=1, B=3.0, W0=W.mean(), phi=phi)
    points, _, _ = bif.analyse(W, p, 3, kappa_max=1e4)
    assert points and all(pt.coeffs is None for pt in points)


def test_pattern_presets():
    modes, normalized = bif.preset_modes("hex")
    grid = bif.pattern_field(modes, 64, 1.0, normalized)
    assert grid.shape == (64, 64)
    modes, normalized = bif.preset_modes("class_k", (0, 4))
    grid = bif.pattern_field(modes, 64, 1.0, normalized)
    assert math.sqrt(np.mean(grid**2)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(AliasingError):
        bif.pattern_field([((0, 20), 1.0)], 64)
    with pytest.raises(ConfigError):
        bif.preset_modes("nope")
    with pytest.raises(ConfigError):
        bif.preset_modes("mode_k")

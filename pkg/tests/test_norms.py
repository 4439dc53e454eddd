import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from knapp_cantor.geometry import f_l1_norm, f_l2_norm_sq, make_test_function
from knapp_cantor.norms import (KnappBox, TruncationError, WindowG, chain_lower_bound, choose_eta,
                                claim_I_nonneg, critical_p, f_hat_nu, g1, g1_hat, h1_hat, lemma_101_rhs,
                                lp_lower_direct, phase_bound_check, ratio_exponent, ratio_trend)
from knapp_cantor.params import derive_exponents, generate_sequences


def test_choose_eta():
    eta = choose_eta(2, 2)
    assert math.isclose((2 ** 4 - 1) * 6 * math.pi * 2 * eta, 0.5)
    with pytest.raises(ValueError):
        choose_eta(0, 2)


def test_box_geometry():
    box = KnappBox(0.01, 400, 2)
    assert np.allclose(box.half_widths(), [0.01 * 20, 0.01 * 400])
    assert math.isclose(box.volume(), (2 * 0.01) ** 2 * 400 ** 1.5)
    pts = box.sample(np.random.default_rng(0), 1000, 0.5)
    assert box.contains(pts, 0.5).all()


def test_g1_against_quad():
    from knapp_cantor._quad import plateau
    h = lambda v: plateau(v, 0.25, 0.5)
    for u in (0.0, 0.1, 0.3, 0.6, 0.95):
        ref = integrate.quad(lambda v: float(h(v) * h(v - u)), -0.5, 0.5, points=[-0.25, 0.25, u - 0.25, u + 0.25],
                             epsabs=1e-14, limit=200)[0]
        assert abs(g1(u)[0] - ref) < 1e-10
    assert g1(1.0)[0] == 0 and g1(1.3)[0] == 0


def test_g1_hat_is_square():
    x = np.linspace(0, 10, 41)
    assert np.allclose(g1_hat(x), h1_hat(x) ** 2, atol=1e-9)
    assert np.all(g1_hat(x) >= -1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_window_properties(d):
    box = KnappBox(choose_eta(2, d), 256, d)
    g = WindowG(box)
    H = box.half_widths()
    rng = np.random.default_rng(d)
    inner = box.sample(rng, 2000, 1 / 8)
    assert np.all(g(inner) >= box.volume(1 / 8))
    anywhere = box.sample(rng, 2000, 1.3)
    vals = g(anywhere)
    assert np.all(vals >= 0) and np.all(vals <= box.volume(0.5))
    assert np.all(vals[~box.contains(anywhere)] == 0)
    # numeric integral of g over R against the closed form
    from knapp_cantor.norms import _gl_box
    nodes, w = _gl_box(H, 12, 8)
    assert math.isclose((w * g(nodes)).sum(), g.integral(), rel_tol=1e-6)


def test_f_hat_at_zero(stages6, seq6):
    P, A, mu = stages6[2]
    f = make_test_function(P, A, seq6, 2)
    v = f_hat_nu(f, mu, 2, np.zeros((1, 2)))[0]
    assert abs(v - f_l1_norm(f, mu)) < 1e-7 * f_l1_norm(f, mu)


@pytest.mark.parametrize("l", [1, 2])
def test_knapp_plateau(stages6, seq6, l):
    P, A, mu = stages6[l]
    f = make_test_function(P, A, seq6, 2)
    box = KnappBox(choose_eta(2, 2), mu.N, 2)
    xi = box.sample(np.random.default_rng(l), 200, 1 / 8)
    vals = np.abs(f_hat_nu(f, mu, 2, xi))
    assert np.all(vals >= 0.5 * f_l1_norm(f, mu))


def test_phase_bound(stages6, seq6):
    P, A, mu = stages6[2]
    f = make_test_function(P, A, seq6, 2)
    worst, bound = phase_bound_check(f, KnappBox(choose_eta(2, 2), mu.N, 2), 4000)
    assert worst <= bound


def test_lp_chain(stages6, seq6):
    P, A, mu = stages6[1]
    f = make_test_function(P, A, seq6, 2)
    lp = lp_lower_direct(f, mu, 2, 4, 2)
    assert lp >= chain_lower_bound(f, mu, P, 2)
    assert lp > 0 and lemma_101_rhs(seq6, 1, 2, 2) > 0
    with pytest.raises(ValueError):
        lp_lower_direct(f, mu, 2, 5, 2)
    with pytest.raises(ValueError):
        lp_lower_direct(f, mu, 2, 4, 2, beta=0.9)


def test_critical_p():
    assert critical_p(derive_exponents(2, 1.5, 1.5)) == Fraction(10, 3)
    e = derive_exponents(2, 1.5, 1.5)
    assert abs(ratio_exponent(e, 10 / 3)) < 1e-12


def test_ratio_trend_modes(exp2):
    seq = generate_sequences(exp2, 5, n_schedule=(64, 72, 80, 88, 96))
    fast = ratio_trend(seq, range(1, 5), 2.0, 2)
    slow = ratio_trend(seq, range(1, 5), 6.0, 3)
    assert fast.monotone == "increasing" and fast.classification == "diverging"
    assert slow.monotone == "decreasing" and slow.classification == "converging"
    with pytest.raises(ValueError):
        ratio_trend(seq, range(1, 6), 2.0, 2)  # stage 5 needs n_6


def test_ratio_measured(stages6, seq6):
    rs = ratio_trend(seq6, [1, 2], 4.0, 2, mode="measured")
    assert len(rs.values) == 2 and all(v > 0 for v in rs.values)


def test_claim_diagonal(stages6, seq6):
    P, A, mu = stages6[1]
    f = make_test_function(P, A, seq6, 2)
    g = WindowG(KnappBox(choose_eta(2, 2), mu.N, 2))
    res = claim_I_nonneg([f.bumps[0]] * 4, g, mu, 2, 2)
    assert res.ok and res.delta_sum == 0
    with pytest.raises(ValueError):
        claim_I_nonneg([f.bumps[0]] * 6, g, mu, 2, 3)


def test_claim_truncation_guard(stages6, seq6):
    P, A, mu = stages6[1]
    f = make_test_function(P, A, seq6, 2)

    class Wide(WindowG):
        def __call__(self, xi):
            return np.ones(len(np.atleast_2d(xi)))

    with pytest.raises(TruncationError):
        claim_I_nonneg([f.bumps[0]] * 4, Wide(KnappBox(choose_eta(2, 2), mu.N, 2)), mu, 2, 2)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.05, 0.95), b=st.floats(0.05, 1.0), p=st.floats(1.0, 12.0))
def test_threshold_sign(a, b, p):
    e = derive_exponents(2, 1 + a, 1 + a * b)
    p0 = float(critical_p(e))
    k = ratio_exponent(e, p)
    if abs(p - p0) > 1e-9:
        assert (k > 0) == (p < p0)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(0.01, 1.0), seed=st.integers(0, 10 ** 6))
def test_window_nonneg_and_bounded(c, seed):
    box = KnappBox(choose_eta(2, 2), 96, 2)
    g = WindowG(box)
    v = g(box.sample(np.random.default_rng(seed), 50, 1.2 * c))
    assert np.all(v >= 0) and np.all(v <= box.volume(0.5))


def test_eta_reference():
    assert math.isclose(choose_eta(2, 2), 1 / (360 * math.pi))


def test_lemma_101_reference(tiny):
    assert math.isclose(lemma_101_rhs(tiny, 1, 2, 2), 8 ** -0.5 * 2 / 81, rel_tol=1e-12)


def test_exponent_arithmetic():
    e = derive_exponents(2, 1.5, 1.5)
    assert math.isclose(ratio_exponent(e, 2), 0.5)
    assert math.isclose(ratio_exponent(e, 6), -1.0)


def test_threshold_slope_is_subpolynomial(exp2):
    from knapp_cantor.norms import _slope, _subpoly_log
    seq = generate_sequences(exp2, 5, n_schedule=(64, 72, 80, 88, 96))
    rs = ratio_trend(seq, range(1, 5), 10 / 3, 2)
    logN = [math.log(seq.N[l]) for l in rs.stages]
    sub = _slope(logN, [_subpoly_log(seq, l, 2) for l in rs.stages])
    assert rs.classification == "threshold"
    assert abs(_slope(logN, rs.log_values)) <= abs(sub) + 1e-9


def test_lp_plateau_lower_bound(stages6, seq6):
    P, A, mu = stages6[1]
    f = make_test_function(P, A, seq6, 2)
    box = KnappBox(choose_eta(2, 2), mu.N, 2)
    lp = lp_lower_direct(f, mu, 2, 4, 2)
    assert lp >= 0.5 ** 4 * f_l1_norm(f, mu) ** 4 * box.volume(1 / 8)


def test_lp_eta_scaling(stages6, seq6):
    P, A, mu = stages6[1]
    f = make_test_function(P, A, seq6, 2)
    eta = choose_eta(2, 2)
    ratio = lp_lower_direct(f, mu, 2, 4, 2, eta=eta / 2) / lp_lower_direct(f, mu, 2, 4, 2, eta=eta)
    assert 2.0 ** -3 <= ratio <= 2.0 ** -1


def test_f_hat_zero_matches_bump_sum(stages6, seq6):
    from knapp_cantor.geometry import bump_nu_integral
    P, A, mu = stages6[2]
    f = make_test_function(P, A, seq6, 2)
    total = sum(bump_nu_integral(b, mu) for b in f.bumps)
    assert abs(f_hat_nu(f, mu, 2, np.zeros((1, 2)))[0] - total) < 1e-7 * total


@pytest.mark.parametrize("c", [1 / 8, 1 / 4, 1 / 2, 1])
def test_box_volume_identity(c):
    box = KnappBox(choose_eta(2, 3), 1536, 3)
    assert math.isclose(box.volume(c), 2 ** 3 * box.nominal_volume(c), rel_tol=1e-13)
    H = box.half_widths(c)
    assert math.isclose(box.volume(c), np.prod(2 * H), rel_tol=1e-15)

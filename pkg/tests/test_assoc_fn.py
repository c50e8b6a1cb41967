import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultraflat import assoc_fn as af
from ultraflat import weight_seq as ws
from ultraflat.errors import DomainError, NonQuasianalyticError, UncertifiedTailWarning
from ultraflat.weight_seq import FAILS, HOLDS

G1 = ws.gevrey(1.0, 128)
G2 = ws.gevrey(2.0, 128)
Q22 = ws.q_gevrey(2.0, 2.0, 64)
FAMILIES = [G1, G2, ws.gevrey(1.5, 96), Q22, ws.q_gevrey(math.e, 1.5, 48), ws.m_alpha_beta(1.0, 1.0, 96)]


def sup_oracle(seq, t):
    """max over the stored prefix of p ln t - ln M_p."""
    p = np.arange(seq.n + 1)
    return max(0.0, float(np.max(p * math.log(t) - seq.log_terms)))


def inner_grid(seq, k=60):
    return np.logspace(-1, math.log10(seq.domain_limit) - 1e-9, k)


# ---------------------------------------------------------------- nu


def test_nu_examples():
    assert af.nu(G1, 3.5) == 3
    assert af.nu(Q22, 10.0) == 2
    for seq in FAMILIES:
        assert af.nu(seq, 0.5 * math.exp(seq.log_quotients[0])) == 0


@pytest.mark.parametrize("seq", FAMILIES, ids=lambda s: s.label)
def test_nu_is_brute_force_count(seq):
    m = np.exp(seq.log_quotients)
    for lam in inner_grid(seq, 40):
        assert af.nu(seq, lam) == int(np.sum(m <= lam))
    # right-continuous at a knot
    assert af.nu(seq, m[3]) == 4


# ------------------------------------------------------------- omega


def test_omega_examples():
    assert af.omega(G1, math.e) == pytest.approx(2 - math.log(2), abs=1e-14)
    assert af.omega(G1, math.e) == pytest.approx(1.3068528194, abs=1e-9)
    for seq in FAMILIES:
        assert af.omega(seq, 0.99 * math.exp(seq.log_quotients[0])) == 0.0
    assert af.omega(ws.q_gevrey(2.0, 2.0, 64), 1.0) == 0.0


@pytest.mark.parametrize("seq", FAMILIES, ids=lambda s: s.label)
def test_omega_routes_and_oracle(seq):
    t = inner_grid(seq)
    sup = af.omega(seq, t)
    assert np.max(np.abs(sup - af.omega_integral_route(seq, t))) <= 1e-10 * max(1.0, sup.max())
    oracle = np.array([sup_oracle(seq, x) for x in t])
    assert np.allclose(sup, oracle, rtol=1e-12, atol=1e-12)
    assert np.all(np.diff(sup) >= -1e-12)


@pytest.mark.parametrize("seq", FAMILIES, ids=lambda s: s.label)
def test_omega_at_knots(seq):
    for p in (1, 5, seq.n // 2):
        lm = seq.log_quotients[p]
        assert af.omega(seq, math.exp(lm)) == pytest.approx(p * lm - seq.log_terms[p], rel=1e-11, abs=1e-11)


def test_omega_without_tail_is_domain_error():
    seq = ws.from_log_terms("bare", list(G1.log_terms))
    with pytest.raises(DomainError):
        af.omega(seq, 10 * seq.domain_limit)
    with pytest.raises(DomainError):
        af.nu(seq, 10 * seq.domain_limit)


def test_omega_tail_continues_prefix():
    t = G2.domain_limit
    short = ws.gevrey(2.0, 32)
    # the tail of the short prefix reproduces the long exact prefix
    grid = np.logspace(math.log10(short.domain_limit * 1.01), math.log10(t * 0.99), 25)
    assert np.allclose(af.omega(short, grid), af.omega(G2, grid), rtol=1e-12)


@pytest.mark.parametrize("B", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("seq", FAMILIES[:4], ids=lambda s: s.label)
def test_omega_shift_bound(seq, B):
    r = inner_grid(seq, 50) * math.exp(-B)
    lhs = af.omega(seq, math.exp(B) * r)
    rhs = af.omega(seq, r) + B * af.nu(seq, r)
    assert np.all(lhs >= rhs - 1e-10 * np.maximum(1, rhs))


@pytest.mark.parametrize("s", [0.5, 2.0, 3.0])
def test_omega_of_power(s):
    for base in (G1, Q22):
        ps = ws.power(base, s)
        t = np.logspace(0, 7, 40)
        assert np.allclose(af.omega(ps, t), s * af.omega(base, t ** (1 / s)), rtol=1e-11, atol=1e-10)


def test_convolution_adds_omega_and_multiplies_h():
    c = ws.convolve(G1, Q22)
    t = np.logspace(-1, 14, 50)
    assert np.allclose(af.omega(c, t), af.omega(G1, t) + af.omega(Q22, t), atol=1e-10, rtol=1e-12)
    x = 1.0 / t
    assert np.allclose(af.h(c, x), af.h(G1, x) * af.h(Q22, x), rtol=1e-12, atol=1e-300)


# ---------------------------------------------------------------- h


def test_h_examples():
    assert af.h(G1, 0.5) == pytest.approx(0.5, rel=1e-14)
    m0 = math.exp(G1.log_quotients[0])
    assert af.h(G1, 1 / m0) == 1.0 and af.h(G1, 5 / m0) == 1.0
    assert af.h(G1, 0.0) == 0.0


@pytest.mark.parametrize("seq", FAMILIES, ids=lambda s: s.label)
def test_h_identity_and_brute_inf(seq):
    t = 1.0 / inner_grid(seq)
    lh = af.log_h(seq, t)
    assert np.allclose(lh, -af.omega(seq, 1 / t), atol=1e-12, rtol=0)
    assert np.allclose(np.exp(lh), np.exp(af.log_h_inf(seq, t)), rtol=1e-12, atol=0)
    assert np.all(np.diff(np.exp(lh[::-1])) >= 0)


# ------------------------------------------------------------ recover


def test_recover_examples():
    assert af.recover_Mp(G1, 4) == pytest.approx(math.log(24), rel=1e-12)
    assert af.recover_Mp(Q22, 5) == pytest.approx(25 * math.log(2), rel=1e-12)


@pytest.mark.parametrize("seq", FAMILIES, ids=lambda s: s.label)
def test_recover_maximizer_location(seq):
    for p in (1, 2, 7, seq.n - 1):
        knot, search, t_max = af.recover_Mp(seq, p, both=True)
        assert knot == pytest.approx(seq.log_terms[p], rel=1e-9, abs=1e-9)
        lo, hi = seq.log_quotients[p - 1], seq.log_quotients[min(p, seq.n - 1)]
        assert lo - 1e-6 <= math.log(t_max) <= hi + 1e-6


# -------------------------------------------------------------- kappa


@pytest.mark.parametrize("y", [0.1, 1.0, 37.0, 1e5])
def test_kappa_of_constant(y):
    assert af.kappa(af.constant_profile(2.5), y).value == pytest.approx(2.5, rel=1e-9)


def test_kappa_linear_diverges():
    with pytest.raises(NonQuasianalyticError):
        af.kappa(lambda t: t, 1.0)


def test_kappa_without_tail_warns():
    with pytest.warns(UncertifiedTailWarning):
        af.kappa(lambda t: math.sqrt(t), 1.0)


@pytest.mark.parametrize("y", [0.5, 3.0, 40.0, 700.0])
def test_kappa_komatsu_relation(y):
    om = af.kappa(af.omega_profile(G2), y)
    nu_ = af.kappa(af.nu_profile(G2), y)
    assert abs(om.value - (af.omega(G2, y) + nu_.value)) <= 10 * (om.error + nu_.error) + 1e-7
    assert om.value == pytest.approx(af.kappa_omega_closed(G2, y), rel=1e-7)
    assert nu_.value == pytest.approx(af.kappa_nu_closed(G2, y), rel=1e-7)


def test_kappa_dominates_and_is_concave():
    prof = af.omega_profile(G2)
    y = np.linspace(1.0, 200.0, 25)
    k = np.array([af.kappa(prof, float(v)).value for v in y])
    assert np.all(k >= af.omega(G2, y) - 1e-9)
    assert np.all(np.diff(k, 2) <= 1e-6)


def test_kappa_closed_q_gevrey():
    y = 50.0
    assert af.kappa(af.omega_profile(Q22), y).value == pytest.approx(af.kappa_omega_closed(Q22, y), rel=1e-7)


# -------------------------------------------------------- q-Gevrey bounds


def test_q_bounds_examples():
    from ultraflat.tails import b_qs

    assert b_qs(math.e, 2.0) == pytest.approx(0.25, rel=1e-15)
    lo, hi = af.q_gevrey_omega_bounds(2.0, 2.0, 100.0)
    w = sup_oracle(Q22, 100.0)
    assert lo <= w <= hi
    for bad in (1.0, 0.5):
        with pytest.raises(DomainError):
            af.q_gevrey_omega_bounds(2.0, 2.0, bad)


@given(st.floats(1.5, 6.0), st.floats(1.2, 2.0), st.floats(0.01, 30.0))
def test_q_bounds_sandwich(q, sigma, lt):
    seq = ws.q_gevrey(q, sigma, 64)
    t = math.exp(lt)
    lo, hi = af.q_gevrey_omega_bounds(q, sigma, t)
    w = af.omega(seq, t)
    assert lo - 1e-9 * max(1, w) <= w <= hi + 1e-9 * max(1, w)


# ----------------------------------------------------------- duality


def test_mg_duality():
    g = af.mg_duality_check(G1, np.logspace(0, math.log10(G1.domain_limit) - 0.01, 200))
    assert g.passed and g.details["verdict"] == HOLDS
    seq = ws.q_gevrey(2.0, 2.0, 200)
    q = af.mg_duality_check(seq, np.logspace(0, math.log10(seq.domain_limit) - 0.01, 400))
    assert q.passed and q.details["verdict"] == FAILS
    assert q.constants["nu_doubling"] <= 2.0
    assert set(q.to_dict()) >= {"constants", "grids", "margins", "pass"}


def test_no_warnings_on_certified_tail():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        af.kappa(af.omega_profile(G2), 3.0)

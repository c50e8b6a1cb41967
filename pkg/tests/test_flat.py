import math

import numpy as np
import pytest

from ultraflat import assoc_fn as af
from ultraflat import flat as fl
from ultraflat import weight_seq as ws
from ultraflat.errors import ParameterError, PreconditionError, SectorError
from ultraflat.tails import b_qs

G2 = ws.gevrey(2.0, 128)
Q22 = ws.q_gevrey(2.0, 2.0, 64)
HALF = fl.flat_halfplane(G2)
S2 = fl.flat_q_gevrey_S2(2.0, 2.0)
R = np.logspace(-3, 1, 9)


def _symmetric(F, angles):
    for th in angles:
        a, b = F.eval(R, th), F.eval(R, -th)
        assert np.allclose(a, np.conj(b), rtol=1e-10, atol=1e-300)


def test_conjugate_symmetry_all_constructions():
    _symmetric(HALF, [0.3, 1.2])
    _symmetric(S2, [0.5, 2.5])
    _symmetric(fl.flat_q_gevrey_Sgamma(2.0, 2.0, 4.0), [1.0, 5.0])
    _symmetric(fl.flat_ramified(G2, 1.5), [0.4, 2.0])
    _symmetric(fl.reference_exp(1.0), [0.7])


def test_positive_axis_is_real_positive():
    for F in (HALF, S2, fl.flat_ramified(G2, 1.5)):
        v = F.eval(R, 0.0)
        assert np.all(np.abs(v.imag) <= 1e-12 * np.abs(v)) and np.all(v.real > 0)
        assert np.allclose(F.eval_positive_axis(R), v.real, rtol=1e-14)


def test_halfplane_upper_bound_is_h():
    # |G(z)| = exp(-P(i/z)) <= exp(-omega(1/|z|)) = h(|z|), so K3 = K4 = 1 work
    for th in np.linspace(-1.45, 1.45, 9):
        assert np.all(HALF.log_abs(R, th) <= af.log_h(G2, R) + 1e-9)


def test_halfplane_lower_bound_from_langenbruch():
    from ultraflat.harmonic import langenbruch_fit

    x = np.logspace(-3, 1, 30)
    C = langenbruch_fit(G2, 1 / x).constants["C"]
    assert np.all(np.log(HALF.eval_positive_axis(x)) >= -C + af.log_h(G2, x / C) - 1e-9)


def test_halfplane_precondition():
    with pytest.raises(PreconditionError):
        fl.flat_halfplane(ws.gevrey(0.9, 128))


def test_halfplane_routes_agree():
    quad = fl.flat_halfplane(G2, route="quadrature")
    r = np.array([0.05, 0.4, 3.0])
    for th in (0.0, 0.8, -1.3):
        assert np.allclose(quad.log_eval(r, th), HALF.log_eval(r, th), rtol=1e-6, atol=1e-6)


def test_ramified_s1_is_halfplane():
    F = fl.flat_ramified(G2, 0.8, s=1.0, gamma_est=2.0)
    for th in (0.0, 0.5, -1.2):
        assert np.allclose(F.log_eval(R, th), HALF.log_eval(R, th), rtol=1e-14, atol=1e-14)


def test_ramified_parameters():
    with pytest.raises(ParameterError):
        fl.flat_ramified(G2, 1.5, s=0.4, gamma_est=2.0)
    with pytest.raises(PreconditionError):
        fl.flat_ramified(G2, 2.5, gamma_est=2.0)
    F = fl.flat_ramified(G2, 1.5, gamma_est=2.0)
    assert 1 / 2 < F.construction["s"] < 2 / 3
    with pytest.raises(SectorError):
        F.eval(1.0, 0.76 * math.pi)


def test_ramified_gevrey_passes_verification():
    F = fl.flat_ramified(G2, 1.5, gamma_est=2.0)
    rep = fl.verify_flatness(F, G2, x_grid=np.logspace(-4, 1, 30), angles=fl.default_angles(F.sector, 11))
    assert rep.passed, rep.reason


def test_q_gevrey_S2_values():
    G = fl.flat_q_gevrey_S2(math.e, 2.0)
    assert G.eval_positive_axis(1.0) == pytest.approx(math.exp(-0.25 * math.log(2) ** 2), rel=1e-15)
    assert G.eval_positive_axis(1e8) == pytest.approx(1.0, abs=1e-15)
    x = np.logspace(0, 8, 20)
    assert np.all(np.diff(G.eval_positive_axis(x)) >= 0)
    with pytest.raises(SectorError):
        G.eval(1.0, 1.01 * math.pi)


def test_q_gevrey_Sgamma_degenerate_case():
    a = fl.flat_q_gevrey_Sgamma(2.0, 1.5, 2.0)
    b = fl.flat_q_gevrey_S2(2.0, 1.5)
    for th in (0.0, 1.0, -2.9):
        assert np.allclose(a.log_eval(R, th), b.log_eval(R, th), rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("q,sigma", [(2.0, 2.0), (3.0, 1.5), (math.e, 1.25)])
def test_q_gevrey_h_sandwich(q, sigma):
    s = sigma / (sigma - 1)
    seq = ws.q_gevrey(q, sigma, 128)
    b = b_qs(q, s)
    Q = q ** (s / (s - 1))
    t = np.logspace(-60, math.log10(q ** (-2 * s / (s - 1))), 40)
    t = t[1 / t <= seq.domain_limit]
    lh = af.log_h(seq, t)
    assert np.all(-b * np.log(1 / t) ** s <= lh + 1e-9 * np.abs(lh))
    assert np.all(lh <= math.log(Q) - b * np.log(1 / (Q * t)) ** s + 1e-9 * np.abs(lh))


@pytest.mark.parametrize("gamma", [None, 4.0])
def test_q_gevrey_passes_verification(gamma):
    F = fl.flat_q_gevrey_S2(2.0, 2.0) if gamma is None else fl.flat_q_gevrey_Sgamma(2.0, 2.0, gamma)
    rep = fl.verify_flatness(F, Q22)
    assert rep.passed, rep.reason
    assert rep.angular_coverage == pytest.approx(0.95)


def test_product_doubles_b():
    q, sigma = 2.0, 1.5
    s = sigma / (sigma - 1)
    sq = fl.flat_product(fl.flat_q_gevrey_S2(q, sigma), fl.flat_q_gevrey_S2(q, sigma))
    merged = fl.flat_q_gevrey_S2(q ** (2 ** (1 - sigma)), sigma)
    assert b_qs(q ** (2 ** (1 - sigma)), s) == pytest.approx(2 * b_qs(q, s), rel=1e-13)
    for th in (0.0, 1.1, -2.0):
        assert np.allclose(sq.log_eval(R, th), merged.log_eval(R, th), rtol=1e-12, atol=1e-12)


def test_product_verification_and_constants():
    F = fl.flat_q_gevrey_S2(2.0, 2.0)
    P = fl.flat_product(F, F)
    conv = ws.convolve(Q22, Q22)
    rep_f = fl.verify_flatness(F, Q22)
    rep_p = fl.verify_flatness(P, conv)
    assert rep_p.passed, rep_p.reason
    comb = fl.combine_constants(rep_f.constants, rep_f.constants)
    assert comb == {"K1": rep_f.K1**2, "K2": rep_f.K2, "K3": rep_f.K3**2, "K4": rep_f.K4}
    # the combined constants satisfy both bounds for the product
    x = fl.default_x_grid()
    for th in fl.default_angles(P.sector):
        assert np.all(P.log_abs(x, th) <= math.log(comb["K3"]) + af.log_h(conv, comb["K4"] * x) + 1e-9)
    assert np.all(P.log_abs(x, 0.0) >= math.log(comb["K1"]) + af.log_h(conv, comb["K2"] * x) - 1e-9)


def test_product_identity_and_mismatch():
    one = fl.constant_one(S2.sector)
    P = fl.flat_product(S2, one)
    for th in (0.0, 2.0):
        assert np.array_equal(P.log_eval(R, th), S2.log_eval(R, th))
    with pytest.raises(SectorError):
        fl.flat_product(S2, HALF)


def test_reference_exp():
    g1 = ws.gevrey(1.0, 256)
    rep = fl.verify_flatness(fl.reference_exp(0.5), g1)
    assert rep.passed, rep.reason
    # |exp(-1/z)| = exp(-cos(theta)/r): the scale constant has to grow like
    # 1/cos(theta) as the grid approaches the edge of S_1
    full = fl.reference_exp(1.0)
    for e in (0.45, 0.49, 0.499):
        fit = fl.verify_flatness(full, g1, angles=np.linspace(-e, e, 21) * math.pi)
        assert fit.K4 == pytest.approx(1 / math.cos(e * math.pi), rel=0.02)
    edge = fl.verify_flatness(full, g1, angles=np.linspace(-0.4999, 0.4999, 21) * math.pi)
    assert not edge.passed and "K3" in edge.reason


def test_positive_axis_monotone():
    x = np.logspace(-4, 1, 40)
    for F in (HALF, S2, fl.flat_ramified(G2, 1.5), fl.reference_exp()):
        v = F.eval_positive_axis(x)
        assert np.all(np.diff(v) >= -1e-15)


def test_report_dict():
    rep = fl.verify_flatness(S2, Q22)
    d = rep.to_dict()
    assert d["pass"] == rep.passed and set(d["constants"]) == {"K1", "K2", "K3", "K4"}
    assert (rep.worst_margin_lower >= 0 and rep.worst_margin_upper >= 0) == rep.passed

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ultraflat import weight_seq as ws
from ultraflat.errors import (
    CannotStrictifyError,
    DegeneratePrefixError,
    ParameterError,
    PrefixExhaustedError,
)


def families():
    return [ws.gevrey(1, 64), ws.gevrey(2, 64), ws.gevrey(1.5, 64), ws.q_gevrey(2, 2, 64),
            ws.q_gevrey(math.e, 1.5, 64), ws.m_alpha_beta(1, 1, 64), ws.m_alpha_beta(0, 1, 64),
            ws.m_alpha_beta(1, -1, 64)]


@pytest.mark.parametrize("seq", families(), ids=lambda s: s.label)
def test_representations_consistent(seq):
    assert seq.log_terms[0] == 0.0
    # closed-form terms and quotients agree to the last few ulps
    scale = np.maximum(1.0, np.abs(seq.log_terms[1:]))
    assert np.all(np.abs(np.diff(seq.log_terms) - seq.log_quotients) <= 1e-13 * scale)
    assert not seq.log_terms.flags.writeable


def test_gevrey_examples():
    assert ws.gevrey(1, 16).log_terms[4] == pytest.approx(math.log(24), rel=1e-15)
    assert math.exp(ws.gevrey(2, 16).log_quotients[3]) == pytest.approx(16, rel=1e-14)
    assert ws.check_property(ws.gevrey(1.5, 64), "lc").verdict == ws.HOLDS


def test_q_gevrey_examples():
    s = ws.q_gevrey(2, 2, 32)
    p = np.arange(33)
    assert np.allclose(s.log_terms, p**2 * math.log(2), rtol=1e-15, atol=0)
    assert math.exp(s.log_quotients[1]) == pytest.approx(8, rel=1e-14)


def test_q_gevrey_mg_diverges():
    c = ws.check_property(ws.q_gevrey(2, 2, 200), "mg")
    assert c.verdict == ws.FAILS
    vals = [v for _, v in c.trajectory]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_alpha_beta_examples():
    a = ws.m_alpha_beta(1, 0, 16)
    assert np.allclose(a.log_terms, ws.gevrey(1, 16).log_terms, rtol=1e-14, atol=1e-14)
    b = ws.m_alpha_beta(0, 1, 32)
    assert ws.check_property(b, "mg").verdict == ws.HOLDS
    assert ws.check_property(ws.m_alpha_beta(0, 1, 128), "snq").verdict == ws.FAILS
    r = ws.m_alpha_beta(1, -1, 32)
    assert np.all(np.diff(r.log_quotients) >= 0)
    # alpha = 0 with beta < 0 has decreasing raw quotients and needs the repair
    raw = np.log(np.log(math.e + np.arange(32) + 1.0)) * -1.0
    assert np.any(np.diff(raw) < 0)
    fixed = ws.m_alpha_beta(0, -1, 32)
    assert fixed.repaired and "lc-repaired" in fixed.label
    assert np.array_equal(fixed.log_quotients, np.maximum.accumulate(raw))


def test_combinators():
    g = ws.gevrey(1, 16)
    lf = np.array([math.lgamma(p + 1) for p in range(17)])
    assert np.allclose(ws.hat(g).log_terms[:17], 2 * lf, atol=1e-12)
    q3 = ws.power(ws.q_gevrey(2, 2, 32), 3)
    assert np.allclose(q3.log_terms, 3 * np.arange(33) ** 2 * math.log(2), rtol=1e-14)
    c = ws.check_seq(ws.gevrey(0.5, 16))
    assert np.allclose(np.exp(c.log_quotients), (np.arange(c.n) + 1.0) ** -0.5, rtol=1e-13)
    assert np.all(np.diff(c.log_quotients) < 0)


def _brute_convolution(a, b):
    n = min(a.size, b.size)
    return np.array([min(a[q] + b[p - q] for q in range(p + 1)) for p in range(n)])


def test_convolution_examples():
    g = ws.gevrey(1, 16)
    L = ws.convolve(g, g)
    assert math.exp(L.log_terms[4]) == pytest.approx(4, rel=1e-13)
    assert np.allclose(L.log_terms, _brute_convolution(g.log_terms, g.log_terms), atol=1e-12)
    q = ws.q_gevrey(3, 1.5, 40)
    Lq = ws.convolve(q, q)
    for k in range(31):
        j = k // 2
        e = 2 * j**1.5 if k % 2 == 0 else j**1.5 + (j + 1) ** 1.5
        assert Lq.log_terms[k] == pytest.approx(e * math.log(3), rel=1e-13, abs=1e-13)


@given(st.floats(0.3, 3), st.floats(0.3, 3), st.integers(8, 60))
def test_convolution_below_both(a1, a2, n):
    s1, s2 = ws.gevrey(a1, n), ws.gevrey(a2, n)
    L = ws.convolve(s1, s2)
    assert np.all(L.log_terms <= np.minimum(s1.log_terms, s2.log_terms) + 1e-12)
    assert np.allclose(L.log_terms, _brute_convolution(s1.log_terms, s2.log_terms), atol=1e-11)


def test_mg_gives_reverse_convolution_bound():
    g = ws.gevrey(1, 128)
    A = ws.check_property(g, "mg").fitted_constant
    L = ws.convolve(g, g)
    p = np.arange(L.n + 1)
    assert np.all(g.log_terms[: L.n + 1] <= p * math.log(A) + L.log_terms + 1e-12)


def test_certificates():
    c = ws.check_property(ws.gevrey(1, 64), "mg")
    assert c.verdict == ws.HOLDS and c.fitted_constant <= 2
    d = ws.check_property(ws.q_gevrey(2, 2, 64), "dc")
    p = np.arange(64)
    oracle = math.exp(np.max((2 * p + 1) * math.log(2) / (p + 1)))
    assert d.fitted_constant == pytest.approx(oracle, rel=1e-12)
    assert d.verdict == ws.HOLDS and d.fitted_constant < 4
    assert set(c.to_dict()) >= {"property", "verdict", "constant", "trajectory"}


@pytest.mark.parametrize("n", [128, 512])
def test_snq_matches_gamma1_of_hat(n):
    fams = (ws.q_gevrey(2, 2, n), ws.m_alpha_beta(0, 1, n), ws.gevrey(1, n), ws.gevrey(2, n),
            ws.m_alpha_beta(1, 1, n))
    for s in fams:
        snq = ws.check_property(s, "snq")
        g1 = ws.gamma_condition(ws.hat(s), 1.0, rule="stability")
        assert snq.verdict == g1.verdict, s.label


def test_borderline_rule_misses_loglog_divergence():
    # the ln ln N growth of M_{0,1} is below the harmonic borderline
    s = ws.hat(ws.m_alpha_beta(0, 1, 512))
    assert ws.gamma_condition(s, 1.0).verdict == ws.HOLDS
    assert ws.gamma_condition(s, 1.0, rule="stability").verdict == ws.FAILS


def test_gamma_fit_survives_huge_quotients():
    e = ws.gamma_estimate(ws.q_gevrey(2, 2, 2048))
    assert e.capped


def test_gamma_estimates():
    e = ws.gamma_estimate(ws.gevrey(1.5, 512))
    assert 1.4 <= e.value <= 1.6 and not e.capped
    q = ws.gamma_estimate(ws.q_gevrey(2, 2, 512))
    assert q.capped and str(q) == ">= 8"
    assert ws.gamma_condition(ws.gevrey(1, 512), 2.0).verdict == ws.FAILS
    base = ws.gamma_estimate(ws.gevrey(1, 512)).value
    sq = ws.gamma_estimate(ws.power(ws.gevrey(1, 512), 2)).value
    assert abs(sq - 2 * base) <= 0.15


def test_gamma_condition_partial_sum_oracle():
    # for m_p = p + 1 and beta = 2 the fitted constant at p = 0 is the partial sum
    s = ws.gevrey(1, 256)
    c = ws.gamma_condition(s, 2.0)
    vals = [v for _, v in c.trajectory]
    oracle = [sum((l + 1) ** -0.5 for l in range(k)) for k, _ in c.trajectory]
    assert all(v >= o * (1 - 1e-12) for v, o in zip(vals, oracle))
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_almost_increasing():
    assert ws.almost_increasing_constant([1, 2, 3]) == 1
    assert ws.almost_increasing_constant([2, 1, 4]) == 2
    p = np.arange(64) + 1.0
    assert ws.almost_increasing_constant(np.exp(ws.gevrey(1, 64).log_quotients) / p**0.5) == 1


@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=30))
def test_almost_increasing_brute(vals):
    brute = max(vals[i] / vals[j] for i in range(len(vals)) for j in range(i, len(vals)))
    assert ws.almost_increasing_constant(vals) == pytest.approx(brute, rel=1e-14)


def test_strictify():
    g = ws.gevrey(1, 16)
    assert np.array_equal(ws.strictify_quotients(g).log_quotients, g.log_quotients)
    s = ws.from_log_quotients("plateau", np.log([1, 1, 2, 3, 4, 5, 6, 7, 8, 9]))
    out = ws.strictify_quotients(s, 2.0)
    m = np.exp(out.log_quotients)
    assert np.all(np.diff(m) > 0)
    assert 1 < m[1] <= min(2.0, 2.0) and m[2] == 2
    ratio = m / np.exp(s.log_quotients)
    assert np.all(ratio >= 1) and np.all(ratio <= 2)
    with pytest.raises(CannotStrictifyError):
        ws.strictify_quotients(ws.from_log_quotients("flat", np.zeros(10)))


@given(st.lists(st.integers(0, 3), min_size=8, max_size=40), st.floats(1.1, 4))
def test_strictify_property(steps, cap):
    lq = np.cumsum(np.array(steps, dtype=float) * 0.3)
    if np.all(lq == lq[0]):
        lq[-1] += 0.3
    s = ws.from_log_quotients("h", lq)
    out = ws.strictify_quotients(s, cap)
    assert np.all(np.diff(out.log_quotients) > 0)
    d = out.log_quotients - lq
    assert np.all(d >= -1e-15) and np.all(d <= math.log(cap) + 1e-12)


def test_bang_R():
    g = ws.gevrey(1, 64)
    # sum_{k >= n} 1/((k+1)^2) with m_k = k + 1
    assert ws.bang_Rn(g, 0) == pytest.approx(math.pi**2 / 6, rel=1e-13)
    assert ws.bang_Rn(g, 1) == pytest.approx(math.pi**2 / 6 - 1, rel=1e-13)
    partial = sum(1 / (k + 1) ** 2 for k in range(5, 20000))
    assert ws.bang_Rn(g, 5) == pytest.approx(partial + 1 / 20000, rel=1e-8)
    R0 = ws.bang_Rn(g, 0)
    assert ws.bang_h(g, R0) == 0
    t = np.logspace(-1.5, 1, 50)
    idx = [ws.bang_h(g, v) for v in t]
    assert all(b <= a for a, b in zip(idx, idx[1:]))


def test_bang_R_without_tail_reports_bound():
    s = ws.from_log_quotients("custom", np.log(np.arange(1, 65, dtype=float)))
    val, bound = ws.bang_Rn(s, 0, with_bound=True)
    assert val < math.pi**2 / 6 < val + bound * 1.5
    with pytest.raises(PrefixExhaustedError):
        ws.bang_Rn(s, 100)


def test_validation():
    with pytest.raises(DegeneratePrefixError):
        ws.gevrey(1, 4)
    with pytest.raises(ParameterError):
        ws.q_gevrey(1, 2, 16)
    with pytest.raises(ParameterError):
        ws.q_gevrey(2, 2.5, 16)

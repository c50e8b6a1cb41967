"""Weight sequences stored as finite log-domain prefixes.

A sequence is kept as N log-quotients ln m_p together with the cumulative
log-terms ln M_p (length N + 1, so ln M_N is available too).  An optional
tail model extends it in closed form beyond the prefix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import (
    CannotStrictifyError,
    ConsistencyError,
    DegeneratePrefixError,
    DomainError,
    ParameterError,
    PrefixExhaustedError,
)
from .tails import (
    AlphaBetaTail,
    ConvolvedTail,
    GevreyTail,
    ParametricTail,
    QGevreyTail,
    TailModel,
)

MIN_PREFIX = 8

HOLDS = "holds-on-prefix"
FAILS = "fails-on-prefix"
INCONCLUSIVE = "inconclusive"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WeightSequence:
    label: str
    log_quotients: np.ndarray
    log_terms: np.ndarray = field(default=None)
    tail_model: TailModel | None = None
    repaired: bool = False

    def __post_init__(self):
        lq = np.asarray(self.log_quotients, dtype=float)
        if lq.ndim != 1 or lq.size < MIN_PREFIX:
            raise DegeneratePrefixError(
                f"prefix must hold at least {MIN_PREFIX} quotients, got {lq.size}"
            )
        if not np.all(np.isfinite(lq)):
            raise ParameterError("log-quotients must be finite")
        lt = self.log_terms
        if lt is None:
            lt = np.concatenate([[0.0], np.cumsum(lq)])
        else:
            lt = np.asarray(lt, dtype=float)
            if lt.size == lq.size:
                lt = np.concatenate([lt, [lt[-1] + lq[-1]]])
            if lt.size != lq.size + 1 or lt[0] != 0.0:
                raise ParameterError("log-terms must start at 0 and match the quotients")
        object.__setattr__(self, "log_quotients", _frozen(lq))
        object.__setattr__(self, "log_terms", _frozen(lt))

    @property
    def n(self) -> int:
        return self.log_quotients.size

    @property
    def quotients(self) -> np.ndarray:
        return np.exp(self.log_quotients)

    @property
    def is_lc(self) -> bool:
        return bool(np.all(np.diff(self.log_quotients) >= 0))

    @property
    def domain_limit(self) -> float:
        """Largest t at which prefix-only evaluation of omega is exact."""
        return float(np.exp(self.log_quotients[-1]))

    def extended_log_quotients(self, p) -> np.ndarray:
        """ln m_p for arbitrary p >= 0, switching to the tail model past the prefix."""
        p = np.atleast_1d(np.asarray(p, dtype=np.int64))
        out = np.empty(p.shape, dtype=float)
        inside = p < self.n
        out[inside] = self.log_quotients[p[inside]]
        if np.any(~inside):
            if self.tail_model is None:
                raise PrefixExhaustedError(f"{self.label}: index beyond prefix and no tail model")
            out[~inside] = self.tail_model.log_quotients(p[~inside].astype(float))
        return out

    def extended_log_terms(self, p) -> np.ndarray:
        """ln M_p for arbitrary p >= 0, continuing the prefix with tail quotients."""
        p = np.atleast_1d(np.asarray(p, dtype=np.int64))
        out = np.empty(p.shape, dtype=float)
        inside = p <= self.n
        out[inside] = self.log_terms[p[inside]]
        if np.any(~inside):
            if self.tail_model is None:
                raise PrefixExhaustedError(f"{self.label}: index beyond prefix and no tail model")
            far = p[~inside].astype(float)
            out[~inside] = self.log_terms[-1] + (
                self.tail_model.log_terms(far) - self.tail_model.log_terms(float(self.n))
            )
        return out

    def truncated(self, n: int) -> "WeightSequence":
        if n > self.n:
            raise ParameterError(f"cannot extend prefix of length {self.n} to {n}")
        return WeightSequence(
            self.label, self.log_quotients[:n], None, self.tail_model, self.repaired
        )

    def describe(self) -> dict:
        return {
            "label": self.label,
            "n": self.n,
            "tail_model": self.tail_model.describe() if self.tail_model else None,
            "repaired": self.repaired,
        }


@dataclass(frozen=True)
class PropertyCertificate:
    property: str
    verdict: str
    fitted_constant: float
    witness_index: int
    prefix: int
    trajectory: tuple = ()
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "verdict": self.verdict,
            "constant": self.fitted_constant,
            "witness": self.witness_index,
            "prefix": self.prefix,
            "trajectory": [list(t) for t in self.trajectory],
            "note": self.note,
        }


def _check_n(n: int) -> int:
    if int(n) != n or n < MIN_PREFIX:
        raise DegeneratePrefixError(f"prefix length must be an integer >= {MIN_PREFIX}, got {n}")
    return int(n)


# ---------------------------------------------------------------- families


def gevrey(alpha: float, n: int) -> WeightSequence:
    n = _check_n(n)
    if not alpha > 0:
        raise ParameterError("gevrey order must be positive")
    p = np.arange(n + 1, dtype=float)
    lt = alpha * special.gammaln(p + 1)
    lq = alpha * np.log1p(p[:-1])
    return WeightSequence(f"gevrey({alpha:g})", lq, lt, GevreyTail(float(alpha)))


def q_gevrey(q: float, sigma: float, n: int) -> WeightSequence:
    n = _check_n(n)
    if not q > 1:
        raise ParameterError("q must exceed 1")
    if not 1 < sigma <= 2:
        raise ParameterError("sigma must lie in (1, 2]")
    p = np.arange(n + 1, dtype=float)
    lnq = math.log(q)
    lt = p**sigma * lnq
    lq = ((p[:-1] + 1) ** sigma - p[:-1] ** sigma) * lnq
    return WeightSequence(f"q_gevrey({q:g},{sigma:g})", lq, lt, QGevreyTail(float(q), float(sigma)))


def m_alpha_beta(alpha: float, beta: float, n: int) -> WeightSequence:
    n = _check_n(n)
    if alpha < 0:
        raise ParameterError("alpha must be nonnegative")
    tail = AlphaBetaTail(float(alpha), float(beta))
    raw = tail.log_quotients(np.arange(n, dtype=float))
    fixed = np.maximum.accumulate(raw)
    repaired = bool(np.any(fixed != raw))
    label = f"alpha_beta({alpha:g},{beta:g})" + ("[lc-repaired]" if repaired else "")
    lt = None if repaired else tail.log_terms(np.arange(n + 1, dtype=float))
    if repaired and float(tail.log_quotients(float(n))) < fixed[-1]:
        # the raw tail restarts below the repaired prefix; no honest extension
        tail = None
    return WeightSequence(label, fixed, lt, tail, repaired)


def from_log_terms(label: str, log_terms: Sequence[float], tail_model: TailModel | None = None):
    lt = np.asarray(log_terms, dtype=float)
    if lt.size < MIN_PREFIX + 1:
        raise DegeneratePrefixError(f"need at least {MIN_PREFIX + 1} log-terms")
    if lt[0] != 0:
        raise ParameterError("ln M_0 must be 0")
    return WeightSequence(label, np.diff(lt), lt, tail_model)


def from_log_quotients(label: str, log_quotients, tail_model: TailModel | None = None):
    return WeightSequence(label, np.asarray(log_quotients, dtype=float), None, tail_model)


def hat(seq: WeightSequence) -> WeightSequence:
    p = np.arange(seq.n + 1, dtype=float)
    lt = seq.log_terms + special.gammaln(p + 1)
    tail = seq.tail_model.hat() if seq.tail_model else None
    return WeightSequence(f"hat({seq.label})", np.diff(lt), lt, tail)


def check_seq(seq: WeightSequence) -> WeightSequence:
    p = np.arange(seq.n + 1, dtype=float)
    lt = seq.log_terms - special.gammaln(p + 1)
    tail = seq.tail_model.check() if seq.tail_model else None
    return WeightSequence(f"check({seq.label})", np.diff(lt), lt, tail)


def power(seq: WeightSequence, s: float) -> WeightSequence:
    if not s > 0:
        raise ParameterError("power exponent must be positive")
    tail = seq.tail_model.power(s) if seq.tail_model else None
    return WeightSequence(
        f"({seq.label})^{s:g}", s * seq.log_quotients, s * seq.log_terms, tail, seq.repaired
    )


def convolve(seq1: WeightSequence, seq2: WeightSequence, tol: float = 1e-12) -> WeightSequence:
    """Convolution L_p = min_q M1_q M2_(p-q), cross-checked by merging quotients."""
    n = min(seq1.n, seq2.n)
    a, b = seq1.log_terms, seq2.log_terms
    lt = np.empty(n + 1)
    for p in range(n + 1):
        cand = a[: p + 1] + b[p::-1]
        lt[p] = cand[np.argmin(cand)]  # argmin returns the smallest q on ties
    if seq1.is_lc and seq2.is_lc:
        merged = np.sort(np.concatenate([seq1.log_quotients, seq2.log_quotients]))[:n]
        merged_lt = np.concatenate([[0.0], np.cumsum(merged)])
        gap = np.abs(merged_lt - lt)
        limit = tol * np.maximum(1.0, np.abs(lt))
        if np.any(gap > limit):
            p = int(np.argmax(gap - limit))
            raise ConsistencyError(
                f"convolution constructions disagree at p={p}: {lt[p]!r} vs {merged_lt[p]!r}"
            )
    tail = None
    if seq1.tail_model is not None and seq2.tail_model is not None:
        tail = ConvolvedTail(seq1, seq2)
    return WeightSequence(f"{seq1.label}*{seq2.label}", np.diff(lt), lt, tail)


# ---------------------------------------------------------- certificates


def _trajectory_prefixes(n: int) -> list[int]:
    sizes = sorted({max(MIN_PREFIX, n // 8), max(MIN_PREFIX, n // 4), max(MIN_PREFIX, n // 2), n})
    return sizes


def _stability_verdict(values: list[float], rel_tol: float = 1e-3, ratio: float = 0.75) -> str:
    """Classify a fitted-constant trajectory over growing prefixes.

    Stable when the last relative increment is tiny or the increments shrink
    geometrically; failing when it keeps increasing without slowing down.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3 or not np.all(np.isfinite(v)):
        return INCONCLUSIVE
    inc = np.diff(v)
    scale = np.maximum(np.abs(v[1:]), 1e-300)
    if abs(inc[-1]) <= rel_tol * scale[-1]:
        return HOLDS
    if inc[-2] > 0 and 0 < inc[-1] <= ratio * inc[-2]:
        return HOLDS
    if np.all(inc > 0):
        return FAILS
    return INCONCLUSIVE


def _fit_lc(seq):
    d = np.diff(seq.log_quotients)
    bad = np.nonzero(d < 0)[0]
    if bad.size:
        w = int(bad[np.argmin(d[bad])]) + 1
        return float(np.exp(-d.min())), w, FAILS
    return 1.0, 0, HOLDS


def _fit_dc(lq):
    vals = lq / np.arange(1, lq.size + 1)
    w = int(np.argmax(vals))
    return float(np.exp(vals[w])), w


def _fit_mg(lt):
    n = lt.size - 1
    best, wit = -np.inf, 0
    for k in range(1, n + 1):
        p = np.arange(0, k + 1)
        vals = (lt[k] - lt[p] - lt[k - p]) / k
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, wit = float(vals[i]), k
    return float(np.exp(best)), wit


def _log_tail_sums(x: np.ndarray) -> np.ndarray:
    """ln sum_{l >= p} exp(x_l) for every p, without overflow."""
    return np.logaddexp.accumulate(x[::-1])[::-1]


def _fit_snq(lq):
    n = lq.size
    log_tails = _log_tail_sums(-lq - np.log(np.arange(1, n + 1)))
    vals = np.exp(lq + log_tails)
    w = int(np.argmax(vals))
    return float(vals[w]), w


def _fit_nq(lq):
    n = lq.size
    terms = np.exp(-lq) / np.arange(1, n + 1)
    partial = float(terms.sum())
    return partial, n - 1


def check_property(seq: WeightSequence, prop: str) -> PropertyCertificate:
    """Fit the defining constant of a growth condition on the prefix.

    The verdict of dc, mg, nq and snq is decided from the trajectory of the
    fitted constant over the prefixes N/8, N/4, N/2, N.
    """
    prop = prop.lower()
    if prop == "lc":
        c, w, verdict = _fit_lc(seq)
        return PropertyCertificate("lc", verdict, c, w, seq.n)
    if prop.startswith("gamma"):
        beta = float(prop.split("(")[1].rstrip(")")) if "(" in prop else 1.0
        return gamma_condition(seq, beta)

    fitters = {
        "dc": lambda s: _fit_dc(s.log_quotients),
        "mg": lambda s: _fit_mg(s.log_terms),
        "snq": lambda s: _fit_snq(s.log_quotients),
        "nq": lambda s: _fit_nq(s.log_quotients),
    }
    if prop not in fitters:
        raise ParameterError(f"unknown property {prop!r}")
    traj = []
    for k in _trajectory_prefixes(seq.n):
        c, w = fitters[prop](seq.truncated(k))
        traj.append((k, c))
    c, w = fitters[prop](seq)
    verdict = _stability_verdict([t[1] for t in traj])
    note = ""
    if prop == "nq":
        lq = seq.log_quotients
        last_ratio = float(np.exp(-lq[-1]) / seq.n / c)
        note = f"last term / partial sum = {last_ratio:.3g}"
    if prop == "snq":
        note = "tail truncated at the prefix"
    return PropertyCertificate(prop, verdict, c, w, seq.n, tuple(traj), note)


def _gamma_fit(lq: np.ndarray, beta: float):
    """A = max_{p <= n/2} (m_p^(1/beta)/(p+1)) sum_{l=p}^{n-1} m_l^(-1/beta)."""
    n = lq.size
    x = -lq / beta
    log_tails = _log_tail_sums(x)
    upto = n // 2 + 1
    p = np.arange(upto)
    vals = np.exp(-x[:upto] + log_tails[:upto]) / (p + 1)
    w = int(np.argmax(vals))
    return float(vals[w]), w


def gamma_condition(seq: WeightSequence, beta: float, rule: str = "borderline") -> PropertyCertificate:
    """Fit the (gamma_beta) constant and judge it from the prefix trajectory.

    ``rule='borderline'`` (used by the estimator): a violating sequence makes
    the fitted A grow at least like the harmonic numbers (borderline case
    m_p^(1/beta) ~ p), so A(N)/A(N/2) is compared against H_N/H_(N/2).
    Divergence slower than that (e.g. like ln ln N) is invisible to it.
    ``rule='stability'`` applies the increment rule of check_property.
    """
    if not beta > 0:
        raise ParameterError("beta must be positive")
    if rule not in ("borderline", "stability"):
        raise ParameterError(f"unknown rule {rule!r}")
    n = seq.n
    traj = []
    for k in _trajectory_prefixes(n):
        a, _ = _gamma_fit(seq.log_quotients[:k], beta)
        traj.append((k, a))
    a_full, w = _gamma_fit(seq.log_quotients, beta)
    if rule == "stability":
        verdict = _stability_verdict([t[1] for t in traj])
        note = "increment rule on the prefix trajectory"
    else:
        a_half, _ = _gamma_fit(seq.log_quotients[: n // 2], beta)
        h = lambda k: float(special.digamma(k + 1) + np.euler_gamma)  # harmonic number
        border = h(n) / h(n // 2)
        verdict = HOLDS if a_full / a_half < border else FAILS
        note = f"doubling ratio {a_full / a_half:.4g} vs borderline {border:.4g}"
    return PropertyCertificate(f"gamma_beta({beta:g})", verdict, a_full, w, n, tuple(traj), note)


@dataclass(frozen=True)
class GammaEstimate:
    value: float
    capped: bool
    beta_max: float

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        return f">= {self.beta_max:g}" if self.capped else f"{self.value:.6g}"


def gamma_estimate(seq: WeightSequence, beta_max: float = 8.0, tol: float = 1e-3) -> GammaEstimate:
    """Largest beta in (0, beta_max] whose (gamma_beta) fit is stable."""
    holds = lambda b: gamma_condition(seq, b).verdict == HOLDS
    if holds(beta_max):
        return GammaEstimate(beta_max, True, beta_max)
    lo, hi = 0.0, beta_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return GammaEstimate(0.5 * (lo + hi), False, beta_max)


def almost_increasing_constant(values) -> float:
    """Return max over p <= q of values[p]/values[q]."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ParameterError("need at least one value")
    if np.any(v <= 0):
        raise ParameterError("values must be positive")
    suffix_min = np.minimum.accumulate(v[::-1])[::-1]
    return float(np.max(v / suffix_min))


def strictify_quotients(seq: WeightSequence, a_cap: float = 2.0) -> WeightSequence:
    """Make the quotients strictly increasing while staying within a_cap of them.

    Each constancy plateau of length L is replaced by a geometric ramp with
    ratio 1 + delta where (1 + delta)^(L - 1) = min(a_cap, sqrt(next jump)),
    so the ramp stays below the next quotient.
    """
    if not a_cap > 1:
        raise ParameterError("a_cap must exceed 1")
    lq = np.array(seq.log_quotients)
    if np.any(np.diff(lq) < 0):
        raise ParameterError("quotients must be nondecreasing")
    if np.all(lq == lq[0]):
        raise CannotStrictifyError("all quotients on the prefix are equal")
    out = lq.copy()
    n = lq.size
    start = 0
    cap = math.log(a_cap)
    while start < n:
        end = start
        while end + 1 < n and lq[end + 1] == lq[start]:
            end += 1
        length = end - start + 1
        if length > 1:
            if end + 1 < n:
                jump = lq[end + 1] - lq[end]
            elif seq.tail_model is not None:
                nxt = float(seq.tail_model.log_quotients(float(n)))
                jump = nxt - lq[end] if nxt > lq[end] else 2 * cap
            else:
                jump = 2 * cap
            total = min(cap, 0.5 * jump)
            step = total / (length - 1)
            out[start : end + 1] = lq[start] + step * np.arange(length)
        start = end + 1
    return WeightSequence(f"strict({seq.label})", out, None, seq.tail_model, seq.repaired)


# ----------------------------------------------------- the h-bar step index


def _R_all(seq: WeightSequence):
    """Vector of R_n for n = 0..N plus a truncation figure (0 with a tail model)."""
    lq = seq.log_quotients
    k = np.arange(seq.n)
    terms = np.exp(-lq) / (k + 1)
    bound = 0.0
    if seq.tail_model is not None:
        rest = _tail_R(seq, seq.n)
    else:
        # estimate assuming the last observed power-law growth of m_k persists
        q = max(seq.n // 4, 2)
        a = (lq[-1] - lq[-q]) / math.log(seq.n / (seq.n - q + 1))
        rest = 0.0
        bound = terms[-1] * seq.n / a if a > 0 else math.inf
    r = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]]) + rest
    return r, bound


def bang_Rn(seq: WeightSequence, n: int, with_bound: bool = False):
    """R_n = sum_{k >= n} 1/((k+1) m_k), prefix part plus tail-model part.

    Without a tail model the prefix-truncated sum is returned; ``with_bound``
    also returns an estimate of the neglected tail.
    """
    if n < 0:
        raise ParameterError("n must be nonnegative")
    r, bound = _R_all(seq)
    if n <= seq.n:
        val = float(r[n])
    elif seq.tail_model is not None:
        val = _tail_R(seq, n)
    else:
        raise PrefixExhaustedError(f"R_{n} needs quotients beyond the prefix")
    return (val, bound) if with_bound else val


def _tail_R(seq: WeightSequence, start: int) -> float:
    tm = seq.tail_model
    if isinstance(tm, GevreyTail):
        return float(special.zeta(tm.alpha + 1, start + 1))
    total = 0.0
    p = start
    chunk = 4096
    while True:
        idx = np.arange(p, p + chunk, dtype=float)
        terms = np.exp(-tm.log_quotients(idx)) / (idx + 1)
        total += terms.sum()
        p += chunk
        if terms[-1] * chunk <= 1e-17 * max(total, 1e-300):
            return total
        if p > 1e8:
            raise DomainError("tail of R_n does not converge within 1e8 terms")
        chunk *= 2


def bang_h(seq: WeightSequence, t: float) -> int:
    """Step index n with R_(n+1) < t <= R_n; 0 when t > R_0."""
    if t <= 0:
        raise ParameterError("t must be positive")
    r, _ = _R_all(seq)
    if t > r[0]:
        return 0
    if t <= r[-1]:
        raise PrefixExhaustedError(f"t={t:g} <= R_N={r[-1]:g}: step index beyond the prefix")
    # r is decreasing; the index is the largest n with t <= R_n
    return int(np.nonzero(t <= r)[0][-1])

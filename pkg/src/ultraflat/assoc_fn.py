"""Associated functions omega, h, nu and the concave majorant kappa.

Everything is exact on the prefix (piecewise closed forms).  Past the last
stored quotient the sequence's tail model takes over; without one a
DomainError is raised.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    ConsistencyError,
    DomainError,
    NonQuasianalyticError,
    ParameterError,
    UncertifiedTailWarning,
)
from .quadrature import QuadConfig, QuadResult, integrate
from .tails import ConvolvedTail, b_qs
from .weight_seq import FAILS, HOLDS, INCONCLUSIVE, WeightSequence, check_property


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _sorted_lq(seq: WeightSequence) -> np.ndarray:
    return seq.log_quotients if seq.is_lc else np.sort(seq.log_quotients)


def _beyond(seq: WeightSequence, t: np.ndarray) -> np.ndarray:
    return t >= seq.domain_limit


def _tail_or_raise(seq: WeightSequence, t: float):
    if seq.tail_model is None:
        raise DomainError(
            f"{seq.label}: t={t:g} beyond the prefix domain {seq.domain_limit:g} and no tail model"
        )
    return seq.tail_model


def nu(seq: WeightSequence, lam):
    """Counting function #{p : m_p <= lam}."""
    lam, scalar = _as_array(lam)
    if np.any(lam < 0):
        raise ParameterError("lambda must be nonnegative")
    out = np.zeros(lam.shape, dtype=np.int64)
    pos = lam > 0
    lq = _sorted_lq(seq)
    with np.errstate(divide="ignore"):
        out[pos] = np.searchsorted(lq, np.log(lam[pos]), side="right")
    far = pos & _beyond(seq, lam)
    if np.any(far):
        out[far] = _tail_or_raise(seq, float(lam[far][0])).nu_array(lam[far])
    return int(out[0]) if scalar else out


def _omega_prefix_sup(seq: WeightSequence, lt: np.ndarray) -> np.ndarray:
    if not seq.is_lc:
        # plain maximum over the prefix for non log-convex input
        p = np.arange(seq.n + 1)
        return np.maximum(0.0, np.max(p[None, :] * lt[:, None] - seq.log_terms[None, :], axis=1))
    k = np.searchsorted(seq.log_quotients, lt, side="right")
    return k * lt - seq.log_terms[k]


def _omega_prefix_integral(seq: WeightSequence, lt: np.ndarray) -> np.ndarray:
    """Sum over completed quotient intervals of (p+1) ln(min(t, m_(p+1))/m_p)."""
    lq = seq.log_quotients
    k = np.searchsorted(lq, lt, side="right")
    # completed[j] = sum_{p < j} (p+1) (lq[p+1] - lq[p])
    steps = np.arange(1, lq.size) * np.diff(lq)
    completed = np.concatenate([[0.0], np.cumsum(steps)])
    out = np.zeros(lt.shape)
    hit = k > 0
    j = k[hit] - 1
    out[hit] = completed[j] + k[hit] * (lt[hit] - lq[j])
    return out


def omega(seq: WeightSequence, t, check: bool = True):
    """Associated function sup_p ln(t^p / M_p).

    The sup route is returned; on the prefix the integral route is evaluated
    too and both must agree to 1e-10 (scaled by max(1, omega)).
    """
    t, scalar = _as_array(t)
    if np.any(t < 0):
        raise ParameterError("t must be nonnegative")
    out = np.zeros(t.shape)
    inner = (t > 0) & ~_beyond(seq, t)
    if np.any(inner):
        lt = np.log(t[inner])
        sup = _omega_prefix_sup(seq, lt)
        if check and seq.is_lc:
            integral = _omega_prefix_integral(seq, lt)
            gap = np.abs(sup - integral)
            if np.any(gap > 1e-10 * np.maximum(1.0, np.abs(sup))):
                raise ConsistencyError(f"omega routes disagree by {gap.max():.3g}")
        out[inner] = np.maximum(sup, 0.0)
    far = (t > 0) & _beyond(seq, t)
    if np.any(far):
        out[far] = _omega_far(seq, t[far])
    return float(out[0]) if scalar else out


def _omega_far(seq: WeightSequence, t: np.ndarray) -> np.ndarray:
    tail = _tail_or_raise(seq, float(t[0]))
    if isinstance(tail, ConvolvedTail):
        return tail.omega_array(t)
    k = tail.nu_array(t)
    # ln M_k continues the stored prefix, so repaired prefixes stay consistent
    return k * np.log(t) - seq.extended_log_terms(k)


def omega_integral_route(seq: WeightSequence, t):
    """The integral closed form alone (prefix domain only)."""
    t, scalar = _as_array(t)
    if np.any(_beyond(seq, t)):
        raise DomainError("integral route is only available on the prefix domain")
    out = np.zeros(t.shape)
    pos = t > 0
    out[pos] = _omega_prefix_integral(seq, np.log(t[pos]))
    return float(out[0]) if scalar else out


def log_h(seq: WeightSequence, t):
    """ln h(t) = -omega(1/t), with ln h(0) = -inf."""
    t, scalar = _as_array(t)
    if np.any(t < 0):
        raise ParameterError("t must be nonnegative")
    out = np.full(t.shape, -np.inf)
    pos = t > 0
    out[pos] = -omega(seq, 1.0 / t[pos])
    return float(out[0]) if scalar else out


def h(seq: WeightSequence, t):
    """h(t) = inf_p M_p t^p = exp(-omega(1/t)); h(0) = 0."""
    return np.exp(log_h(seq, t))


def log_h_inf(seq: WeightSequence, t):
    """ln of the brute-force infimum min_p M_p t^p over the stored prefix."""
    t, scalar = _as_array(t)
    out = np.full(t.shape, -np.inf)
    pos = t > 0
    p = np.arange(seq.n + 1)
    lt = np.log(t[pos])
    out[pos] = np.min(seq.log_terms[None, :] + p[None, :] * lt[:, None], axis=1)
    return float(out[0]) if scalar else out


def recover_Mp(seq: WeightSequence, p: int, both: bool = False):
    """Recover ln M_p as sup_t (p ln t - omega(t)) by two routes.

    Knot route: the maximizer is the knot t = m_(p-1).  Search route:
    golden-section search over ln t.  They must agree with the stored term
    to 1e-9 relative.
    """
    if not 0 <= p < seq.n:
        raise ParameterError(f"p must lie in [0, {seq.n})")
    target = float(seq.log_terms[p])
    lq = seq.log_quotients
    if p == 0:
        knot_t = math.exp(lq[0])
        knot = -omega(seq, knot_t)
        lo, hi = lq[0] - 2.0, lq[0]
    else:
        knot_t = math.exp(lq[p - 1])
        knot = p * lq[p - 1] - omega(seq, knot_t)
        lo, hi = lq[p - 1] - 1.0, lq[p] + 1.0
    search_u = _golden_max(lambda u: p * u - omega(seq, math.exp(u)), lo, hi)
    search = p * search_u - omega(seq, math.exp(search_u))
    scale = max(1.0, abs(target))
    for name, val in (("knot", knot), ("search", search)):
        if abs(val - target) > 1e-9 * scale:
            raise ConsistencyError(f"{name} route recovers {val!r}, stored ln M_{p} = {target!r}")
    if both:
        return knot, search, math.exp(search_u)
    return knot


def _golden_max(f, lo: float, hi: float, tol: float = 1e-13) -> float:
    """Golden-section search for the maximizer of a unimodal f on [lo, hi]."""
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


# ------------------------------------------------------------------ kappa


@dataclass(frozen=True)
class Profile:
    """A nondecreasing weight function sigma on [0, inf) with tail information.

    ``fn`` is vectorized; ``tail_integral(T)`` returns (value, halfwidth)
    enclosing the integral of sigma(t)/t^2 over [T, inf), or None.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    label: str = "sigma"
    tail_integral: Callable[[float], tuple] | None = None
    knots: Callable[[float, float], np.ndarray] | None = None
    seq: WeightSequence | None = field(default=None, compare=False)

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))


MAX_KNOTS = 400_000


def _seq_knots(seq: WeightSequence, cap: int = MAX_KNOTS):
    """Quotients in (lo, hi), thinned to at most ``cap`` roughly log-spaced ones."""

    def knots(lo: float, hi: float) -> np.ndarray:
        if hi <= lo:
            return np.zeros(0)
        k0, k1 = int(nu(seq, lo)), int(nu(seq, hi))
        idx = np.arange(k0, k1)
        if idx.size > cap:
            picks = np.unique(np.geomspace(k0 + 1, k1, cap).astype(np.int64) - 1)
            idx = picks[picks >= k0]
        return np.exp(seq.extended_log_quotients(idx))

    return knots


def omega_profile(seq: WeightSequence) -> Profile:
    tail = seq.tail_model.omega_tail_integral if seq.tail_model else None
    # omega is continuous, so a thinned set of kinks is enough as breakpoints
    return Profile(
        lambda t: omega(seq, t, check=False), f"omega[{seq.label}]", tail, _seq_knots(seq, 2000), seq
    )


def nu_profile(seq: WeightSequence) -> Profile:
    tail = seq.tail_model.nu_tail_integral if seq.tail_model else None
    return Profile(
        lambda t: nu(seq, t).astype(float), f"nu[{seq.label}]", tail, _seq_knots(seq), seq
    )


def constant_profile(c: float) -> Profile:
    return Profile(
        lambda t: np.full(np.shape(t), float(c)),
        f"const({c:g})",
        lambda T: (c / T, 0.0),
    )


def _as_profile(sigma) -> Profile:
    return sigma if isinstance(sigma, Profile) else Profile(np.vectorize(sigma, otypes=[float]))


def _check_decay(prof: Profile, t1: float, t2: float):
    s1 = float(prof(np.array([t1]))[0])
    s2 = float(prof(np.array([t2]))[0])
    if s2 > 0 and s2 * t1 >= 0.5 * max(s1, 1e-300) * t2:
        raise NonQuasianalyticError(
            f"{prof.label} grows at least linearly on [{t1:g}, {t2:g}]; kappa diverges"
        )


def kappa(sigma, y: float, quad: QuadConfig | None = None, span: float | None = None) -> QuadResult:
    """kappa(y) = integral over s >= 1 of sigma(y s)/s^2, with an error estimate.

    Computed as the integral over v in [0, ln(T/y)] of sigma(y e^v) e^(-v)
    plus y times the tail integral of sigma/t^2 beyond T.  With a tail model
    T is grown until the enclosure of that tail is below a tenth of the
    tolerance; without one a power-law extrapolation is used after checking
    that sigma grows sublinearly.
    """
    prof = _as_profile(sigma)
    quad = quad or QuadConfig(abs_tol=1e-10, rel_tol=1e-8)
    if y < 0:
        raise ParameterError("y must be nonnegative")
    if y == 0:
        return QuadResult(float(prof(np.array([0.0]))[0]), 0.0, 0)
    s_y = float(prof(np.array([y]))[0])
    budget = 0.1 * max(quad.abs_tol, quad.rel_tol * (1.0 + s_y))
    tail = None
    if span is not None:
        T = y * span
        if prof.tail_integral is not None:
            tail = prof.tail_integral(T)
    elif prof.tail_integral is not None:
        T = y * 1e3
        for _ in range(60):
            tail = prof.tail_integral(T)
            if y * tail[1] <= budget:
                break
            T *= 10.0
    else:
        T = y * 1e12
    pts = []
    if prof.knots is not None:
        pts = np.log(prof.knots(y, T) / y)
    cfg = quad
    if len(pts) + 1 > quad.max_intervals // 4:
        cfg = QuadConfig(quad.abs_tol, quad.rel_tol, 4 * (len(pts) + 1) + quad.max_intervals)
    res = integrate(lambda v: prof(y * np.exp(v)) * np.exp(-v), 0.0, math.log(T / y), cfg, points=pts)
    if tail is not None:
        return QuadResult(res.value + y * tail[0], res.error + y * tail[1], res.intervals)
    _check_decay(prof, T / 1e3, T)
    warnings.warn(
        f"{prof.label}: no tail model, kappa tail beyond t={T:.3g} is extrapolated, not enclosed",
        UncertifiedTailWarning,
        stacklevel=2,
    )
    # power-law extrapolation sigma(t) ~ sigma(T) (t/T)^a with a < 1
    s_lo, s_hi = prof(np.array([T / 1e3, T]))
    if s_hi <= 0:
        return res
    a = math.log(max(s_hi, 1e-300) / max(s_lo, 1e-300)) / math.log(1e3)
    extra = s_hi / T / (1 - a)
    return QuadResult(res.value + y * extra, res.error + y * extra, res.intervals)


def kappa_omega_closed(seq: WeightSequence, y: float) -> float:
    """kappa of omega by summation: nu(y) + omega(y) + y sum_{m_p > y} 1/m_p."""
    return nu(seq, y) + omega(seq, y) + y * _inv_quotients_above(seq, y)


def kappa_nu_closed(seq: WeightSequence, y: float) -> float:
    """kappa of nu by summation: nu(y) + y sum_{m_p > y} 1/m_p."""
    return nu(seq, y) + y * _inv_quotients_above(seq, y)


def _inv_quotients_above(seq: WeightSequence, y: float) -> float:
    k = int(nu(seq, y))
    lq = seq.log_quotients
    total = 0.0
    if k < seq.n:
        total += float(np.sum(np.exp(-lq[k:])))
        start = seq.n
    else:
        start = k
    if seq.tail_model is None:
        raise DomainError(f"{seq.label}: sum over all quotients needs a tail model")
    return total + seq.tail_model.inv_quotient_sum(start, 1.0)


# ------------------------------------------------------------ q-Gevrey


def q_gevrey_omega_bounds(q: float, sigma: float, t: float):
    """(b ln^s t - ln t, b ln^s t) with s = sigma/(sigma-1).

    The upper bound needs t > 1.  The lower bound formula is valid for
    t > q^(s/(s-1)); below that point the trivial lower bound 0 is returned.
    """
    if not q > 1 or not 1 < sigma <= 2:
        raise ParameterError("need q > 1 and sigma in (1, 2]")
    if not t > 1:
        raise DomainError("the bounds require t > 1")
    s = sigma / (sigma - 1)
    b = b_qs(q, s)
    lt = math.log(t)
    upper = b * lt**s
    lower = upper - lt if lt > s / (s - 1) * math.log(q) else 0.0
    return lower, upper


# ------------------------------------------------------ duality diagnostic


@dataclass
class FitReport:
    name: str
    constants: dict
    grids: dict
    margins: dict
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "constants": self.constants,
            "grids": self.grids,
            "margins": self.margins,
            "pass": self.passed,
            "details": self.details,
        }


def mg_duality_check(seq: WeightSequence, grid) -> FitReport:
    """Fit sup omega(t)/max(nu(t), 1) on growing portions of the grid.

    A bounded ratio corresponds to (mg); the verdict from the ratio
    trajectory is compared with the mg certificate.
    """
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid[-1] > seq.domain_limit:
        raise DomainError("grid must lie inside the prefix domain")
    ratio = omega(seq, grid) / np.maximum(nu(seq, grid), 1)
    cuts = [grid.size // 8, grid.size // 4, grid.size // 2, grid.size]
    traj = [(float(grid[c - 1]), float(ratio[:c].max())) for c in cuts if c > 0]
    vals = np.array([v for _, v in traj])
    logs = np.log([g for g, _ in traj])
    # bounded ratio: increments shrink; unbounded: roughly linear in ln t
    inc = np.diff(vals) / np.diff(logs)
    if inc.size >= 2 and inc[-1] <= 0.5 * max(inc[0], 1e-300) or np.all(inc <= 1e-12):
        verdict = HOLDS
    elif np.all(inc > 0):
        verdict = FAILS
    else:
        verdict = INCONCLUSIVE
    cert = check_property(seq, "mg")
    doubling = nu(seq, 2 * grid[grid * 2 <= seq.domain_limit]) / np.maximum(
        nu(seq, grid[grid * 2 <= seq.domain_limit]), 1
    )
    return FitReport(
        "mg_duality",
        {"sup_ratio": float(ratio.max()), "nu_doubling": float(doubling.max(initial=0.0))},
        {"t_min": float(grid[0]), "t_max": float(grid[-1]), "points": int(grid.size)},
        {"trajectory": traj},
        verdict == cert.verdict,
        {"verdict": verdict, "mg_certificate": cert.verdict},
    )

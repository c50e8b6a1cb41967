"""Harmonic extension of an even weight function into the upper half-plane.

Two independent routes are provided:

* quadrature of the Poisson integral and of the conjugate Poisson integral
  (normalized so that the conjugate vanishes on the imaginary axis);
* for associated functions of sequences, a closed-form series.  Since
  omega(t) = sum_p ln+(t/m_p), the extension is a sum of scaled copies of the
  extension of ln+|t|, which is expressible through the dilogarithm:
  P + iQ of ln+|t| at w equals -i (Li2(w) - Li2(-w))/pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .assoc_fn import FitReport, Profile, nu, omega, omega_profile
from .errors import DomainError, NonQuasianalyticError, NqViolationError, PreconditionError
from .quadrature import QuadConfig, QuadResult, integrate
from .weight_seq import HOLDS, WeightSequence, check_property, check_seq

# |w/m| below which the odd power series replaces the dilogarithm
SERIES_SWITCH = 0.5


def scaled_profile(prof: Profile, c: float) -> Profile:
    """t -> sigma(c t)."""
    tail = None
    if prof.tail_integral is not None:
        tail = lambda T: tuple(c * v for v in prof.tail_integral(c * T))
    knots = None
    if prof.knots is not None:
        knots = lambda lo, hi: prof.knots(c * lo, c * hi) / c
    return Profile(lambda t: prof.fn(c * np.asarray(t)), f"{prof.label}(x{c:g})", tail, knots)


def combined_profile(lam: float, p1: Profile, mu: float, p2: Profile) -> Profile:
    """lam sigma1 + mu sigma2 (lam, mu >= 0)."""
    tail = None
    if p1.tail_integral is not None and p2.tail_integral is not None:

        def tail(T):
            a, b = p1.tail_integral(T), p2.tail_integral(T)
            return lam * a[0] + mu * b[0], lam * a[1] + mu * b[1]

    def knots(lo, hi):
        parts = [p.knots(lo, hi) for p in (p1, p2) if p.knots is not None]
        return np.unique(np.concatenate(parts)) if parts else np.zeros(0)

    return Profile(
        lambda t: lam * p1.fn(t) + mu * p2.fn(t), f"{lam:g}*{p1.label}+{mu:g}*{p2.label}", tail, knots
    )


@dataclass(frozen=True)
class HarmonicEvaluator:
    """Poisson and conjugate Poisson integrals of a profile, by quadrature."""

    sigma: Profile
    quad: QuadConfig = QuadConfig()
    inner_factor: float = 50.0
    knot_cap: int = 4000

    def __post_init__(self):
        if self.sigma.tail_integral is None:
            raise PreconditionError(
                f"{self.sigma.label}: the harmonic extension needs a tail model for sigma"
            )

    # -- helpers
    def _knots(self, lo: float, hi: float) -> np.ndarray:
        if self.sigma.knots is None or hi <= lo:
            return np.zeros(0)
        k = self.sigma.knots(lo, hi)
        if k.size > self.knot_cap:
            k = k[np.unique(np.geomspace(1, k.size, self.knot_cap).astype(int) - 1)]
        return k

    def _cutoff(self, absz: float, budget: float, weight: float):
        """Grow T until the enclosed tail (times ``weight``) is within budget."""
        T = max(1e3 * absz, 1.0)
        for _ in range(80):
            val, half = self.sigma.tail_integral(T)
            c_lo = (T / (T + absz)) ** 4
            c_hi = (T / (T - absz)) ** 4
            width = weight * ((c_hi - c_lo) * abs(val) + (c_hi + c_lo) * half)
            if width <= budget:
                return T, val, half, c_lo, c_hi
            T *= 10.0
        raise NonQuasianalyticError(f"{self.sigma.label}: tail of sigma/t^2 not controllable")

    def _outer(self, f, a: float, b: float, cfg: QuadConfig) -> QuadResult:
        """Integral of f(t) over [a, b] in logarithmic coordinates."""
        if b <= a:
            return QuadResult(0.0, 0.0, 0)
        pts = np.log(self._knots(a, b))
        g = lambda u: f(np.exp(u)) * np.exp(u)
        return integrate(g, math.log(a), math.log(b), cfg, points=pts)

    def _budget(self, x: float, y: float) -> float:
        s = float(self.sigma(np.array([math.hypot(x, y)]))[0])
        return max(self.quad.abs_tol, self.quad.rel_tol * (1.0 + abs(s)))

    def poisson(self, x: float, y: float) -> QuadResult:
        """P(x + iy) = (|y|/pi) * integral of sigma(|t|)/((t-x)^2 + y^2) dt."""
        if y == 0:
            return QuadResult(float(self.sigma(np.array([abs(x)]))[0]), 0.0, 0)
        y = abs(y)
        absz = math.hypot(x, y)
        budget = self._budget(x, y)
        cfg = QuadConfig(0.25 * budget, 0.25 * self.quad.rel_tol, self.quad.max_intervals)
        R = self.inner_factor * absz
        sig = self.sigma
        # inner part: t = x + y tan(theta), |t - x| <= R
        th = math.atan(R / y)
        kn = self._knots(0.0, R + abs(x))
        tp = np.concatenate([kn, -kn])
        pts = np.arctan((tp - x) / y)
        inner = integrate(lambda a: sig(np.abs(x + y * np.tan(a))), -th, th, cfg, points=pts)
        inner = QuadResult(inner.value / math.pi, inner.error / math.pi, inner.intervals)
        # outer parts in logarithmic coordinates, up to the cutoff T
        T, val, half, c_lo, c_hi = self._cutoff(absz, 0.25 * budget, 2 * y / math.pi)
        right = self._outer(lambda t: sig(t) / ((t - x) ** 2 + y**2), x + R, T, cfg)
        left = self._outer(lambda t: sig(t) / ((t + x) ** 2 + y**2), R - x, T, cfg)
        scale = y / math.pi
        lo = 2 * scale * c_lo * (val - half)
        hi = 2 * scale * c_hi * (val + half)
        tail = QuadResult(0.5 * (lo + hi), 0.5 * (hi - lo), 0)
        outer = right + left
        return inner + QuadResult(scale * outer.value, scale * outer.error, outer.intervals) + tail

    def conjugate(self, x: float, y: float) -> QuadResult:
        """Q(x + iy) with the kernel (x-t)/((x-t)^2+y^2) + t/(1+t^2).

        Folding t -> -t cancels the correction term, leaving the integral
        over t > 0 of sigma(t) K(t) with K = 2x(|z|^2 - t^2)/(A B).
        """
        if y <= 0:
            raise DomainError("the conjugate is evaluated in the open upper half-plane")
        if x < 0:
            r = self.conjugate(-x, y)
            return QuadResult(-r.value, r.error, r.intervals)
        if x == 0:
            return QuadResult(0.0, 0.0, 0)
        absz = math.hypot(x, y)
        budget = self._budget(x, y)
        cfg = QuadConfig(0.25 * budget, 0.25 * self.quad.rel_tol, self.quad.max_intervals)
        R = self.inner_factor * absz
        sig = self.sigma

        def inner_f(a):
            tn = np.tan(a)
            t = x + y * tn
            jac = y / np.cos(a) ** 2
            return sig(t) * (-tn + (x + t) / ((x + t) ** 2 + y**2) * jac)

        a0 = math.atan(-x / y)
        a1 = math.atan(R / y)
        pts = np.arctan((self._knots(0.0, x + R) - x) / y)
        inner = integrate(inner_f, a0, a1, cfg, points=pts)

        def kern(t):
            return 2 * x * (absz**2 - t**2) / (((x - t) ** 2 + y**2) * ((x + t) ** 2 + y**2))

        T, val, half, c_lo, c_hi = self._cutoff(absz, 0.25 * budget, 2 * x / math.pi)
        outer = self._outer(lambda t: sig(t) * kern(t), x + R, T, cfg)
        # for t >= T: -2x c_hi/t^2 <= K(t) <= -2x c_lo (1 - |z|^2/T^2)/t^2
        lo = -2 * x * c_hi * (val + half)
        hi = -2 * x * c_lo * (1 - (absz / T) ** 2) * (val - half)
        tail = QuadResult(0.5 * (lo + hi), 0.5 * (hi - lo), 0)
        total = inner + outer + tail
        return QuadResult(total.value / math.pi, total.error / math.pi, total.intervals)

    def poisson_polar(self, r: float, theta: float) -> QuadResult:
        return self.poisson(r * math.cos(theta), r * math.sin(theta))


def evaluator(seq: WeightSequence, quad: QuadConfig | None = None) -> HarmonicEvaluator:
    if seq.tail_model is None:
        raise PreconditionError(f"{seq.label}: harmonic extension requires a tail model")
    return HarmonicEvaluator(omega_profile(seq), quad or QuadConfig())


def poisson(ev: HarmonicEvaluator, x: float, y: float) -> float:
    return float(ev.poisson(x, y).value)


def conjugate(ev: HarmonicEvaluator, x: float, y: float) -> float:
    return float(ev.conjugate(x, y).value)


# ---------------------------------------------------------- series route


def _dilog_odd(u: np.ndarray) -> np.ndarray:
    """(Li2(u) - Li2(-u))/pi."""
    return (special.spence(1 - u) - special.spence(1 + u)) / math.pi


MAX_SERIES_TERMS = 2_000_000


def inverse_power_sum(seq: WeightSequence, start: int, k: float, shift: float = 0.0) -> float:
    """Sum over p >= start of exp(-k (ln m_p - shift)), prefix first then the tail."""
    total = 0.0
    if start < seq.n:
        total += float(np.sum(np.exp(-k * (seq.log_quotients[start:] - shift))))
        start = seq.n
    if seq.tail_model is None:
        raise PreconditionError(f"{seq.label}: inverse power sums need a tail model")
    return total + seq.tail_model.inv_quotient_sum(start, k, shift)


def omega_extension(seq: WeightSequence, w) -> np.ndarray:
    """P + iQ of omega at points w of the open upper half-plane, by series.

    Quotients with m_p > 2|w| enter through the odd power series of the
    dilogarithm difference, whose coefficients are power sums of 1/m_p.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if np.any(w.imag <= 0):
        raise DomainError("omega_extension needs Im w > 0")
    out = np.empty(w.shape, dtype=complex)
    absw = np.abs(w)
    octave = np.floor(np.log2(absw)).astype(np.int64)
    for key in np.unique(octave):
        sel = octave == key
        wg = w[sel]
        top = float(np.abs(wg).max())
        cut = int(nu(seq, top / SERIES_SWITCH))
        if cut > MAX_SERIES_TERMS:
            raise DomainError(
                f"series route needs {cut} explicit terms at |w|={top:g}; use quadrature"
            )
        acc = np.zeros(wg.shape, dtype=complex)
        if cut > 0:
            m = np.exp(seq.extended_log_quotients(np.arange(cut)))
            rows = max(1, 2_000_000 // cut)
            for i in range(0, wg.size, rows):
                acc[i : i + rows] = _dilog_odd(wg[i : i + rows, None] / m[None, :]).sum(axis=1)
        lm = float(seq.extended_log_quotients(cut)[0])
        ratio = top * math.exp(-lm)
        kmax = 1
        while ratio**kmax / kmax**2 > 1e-18 and kmax < 400:
            kmax += 2
        u = wg * math.exp(-lm)
        for k in range(1, kmax + 1, 2):
            sk = inverse_power_sum(seq, cut, k, shift=lm)
            acc += (2 / math.pi) * u**k * sk / k**2
        out[sel] = -1j * acc
    return out


def _nq_precondition(seq: WeightSequence):
    """The check-sequence must satisfy (nq), i.e. sum 1/m_p < inf."""
    if seq.tail_model is not None:
        try:
            seq.tail_model.inv_quotient_sum(seq.n, 1.0)
        except NonQuasianalyticError as exc:
            raise NqViolationError(
                f"{seq.label}: check-sequence violates (nq): {exc}"
            ) from exc
        return
    cert = check_property(check_seq(seq), "nq")
    if cert.verdict != HOLDS:
        raise NqViolationError(f"{seq.label}: check-sequence (nq) verdict {cert.verdict}")


def _fit_C(P: np.ndarray, seq: WeightSequence, y: np.ndarray, c_lo=1.0, c_hi=1e6, per_decade=13):
    def ok(c):
        return bool(np.all(P <= omega(seq, c * y) + c))

    grid = np.logspace(math.log10(c_lo), math.log10(c_hi), int(per_decade * math.log10(c_hi / c_lo)) + 1)
    prev = None
    for c in grid:
        if ok(c):
            if prev is None:
                return c
            lo, hi = prev, c
            for _ in range(40):
                mid = math.sqrt(lo * hi)
                if ok(mid):
                    hi = mid
                else:
                    lo = mid
            return hi
        prev = c
    return math.inf


def langenbruch_fit(
    seq: WeightSequence,
    y_grid,
    route: str = "series",
    quad: QuadConfig | None = None,
) -> FitReport:
    """Smallest C with P(iy) <= omega(C y) + C on the grid.

    The fit is repeated on the leading quarter and half of the grid (by
    log-span) so that growth of C with the grid is visible.
    """
    _nq_precondition(seq)
    y = np.sort(np.asarray(y_grid, dtype=float))
    if route == "series":
        try:
            P = omega_extension(seq, 1j * y).real
            err = np.zeros_like(P)
        except DomainError:
            route = "quadrature"
    if route != "series":
        ev = evaluator(seq, quad)
        res = [ev.poisson(0.0, float(v)) for v in y]
        P = np.array([r.value for r in res])
        err = np.array([r.error for r in res])
    P_up = P + err
    traj = []
    lspan = np.log(y / y[0])
    for frac in (0.25, 0.5, 1.0):
        sel = lspan <= frac * lspan[-1] + 1e-12
        traj.append((float(y[sel][-1]), _fit_C(P_up[sel], seq, y[sel])))
    C = traj[-1][1]
    finite = math.isfinite(C)
    margin = omega(seq, C * y) + C - P_up if finite else np.full_like(P, -np.inf)
    return FitReport(
        "langenbruch",
        {"C": C},
        {"y_min": float(y[0]), "y_max": float(y[-1]), "points": int(y.size), "route": route},
        {"worst": float(margin.min()), "trajectory": traj},
        finite,
        {"P": P.tolist(), "P_error": err.tolist()},
    )

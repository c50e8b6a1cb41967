"""Closed-form descriptions of a weight sequence beyond its stored prefix.

A tail model knows ln M_p for every p, the counting function of the
quotients, the associated function, and (when available) rigorous
enclosures of the tail integrals of nu(t)/t^2 and omega(t)/t^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import DomainError, NonQuasianalyticError

_P_CAP = 2.0**52


class TailModel:
    """Base class.  Subclasses override ``log_terms`` at minimum."""

    kind = "custom"

    def log_terms(self, p):
        raise NotImplementedError

    def log_quotients(self, p):
        p = np.asarray(p, dtype=float)
        return self.log_terms(p + 1) - self.log_terms(p)

    def nu(self, t: float) -> int:
        """Number of quotients m_p <= t, by monotone search over p."""
        if t <= 0:
            return 0
        lt = math.log(t)
        if self.log_quotients(0) > lt:
            return 0
        hi = 1
        while self.log_quotients(hi) <= lt:
            hi *= 2
            if hi > _P_CAP:
                raise DomainError(f"counting function beyond p=2^52 at t={t:g}")
        lo = hi // 2
        # invariant: q(lo) <= lt < q(hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.log_quotients(mid) <= lt:
                lo = mid
            else:
                hi = mid
        return hi

    def omega(self, t: float) -> float:
        if t <= 0:
            return 0.0
        k = self.nu(t)
        return k * math.log(t) - float(self.log_terms(k))

    def nu_array(self, t: np.ndarray) -> np.ndarray:
        return np.array([self.nu(float(x)) for x in np.ravel(t)], dtype=np.int64).reshape(
            np.shape(t)
        )

    def inv_quotient_sum(self, start: int, k: float = 1.0, shift: float = 0.0) -> float:
        """Sum over p >= start of exp(-k (ln m_p - shift)), by direct summation."""
        total = 0.0
        p = int(start)
        chunk = 4096
        while p <= 1e8:
            idx = np.arange(p, p + chunk, dtype=float)
            terms = np.exp(-k * (self.log_quotients(idx) - shift))
            total += terms.sum()
            p += chunk
            if total == 0 and terms[-1] == 0:
                return total
            # local power-law decay rate, used to bound what is left
            rate = math.log(terms[-2] / terms[-1]) / math.log(idx[-1] / idx[-2]) if terms[-1] > 0 else math.inf
            if rate > 1.05:
                rest = terms[-1] * idx[-1] / (rate - 1)
                if rest <= 1e-14 * total:
                    return total + rest
            chunk *= 2
        raise NonQuasianalyticError(
            f"sum of m_p^(-{k}) does not converge within 1e8 terms for {self.describe()}"
        )

    def omega_tail_integral(self, T: float):
        """Return (value, halfwidth) enclosing the integral of omega/t^2 over [T, inf)."""
        return None

    def nu_tail_integral(self, T: float):
        return None

    def describe(self) -> dict:
        return {"kind": self.kind}

    # transforms used by the sequence combinators
    def power(self, s: float) -> "TailModel":
        return PowerTail(self, s)

    def hat(self) -> "TailModel":
        return ShiftedTail(self, 1.0)

    def check(self) -> "TailModel":
        return ShiftedTail(self, -1.0)


@dataclass(frozen=True)
class GevreyTail(TailModel):
    alpha: float
    kind = "gevrey"

    def log_terms(self, p):
        return self.alpha * special.gammaln(np.asarray(p, dtype=float) + 1)

    def log_quotients(self, p):
        return self.alpha * np.log1p(np.asarray(p, dtype=float))

    def nu(self, t: float) -> int:
        if t < 1:
            return 0
        lt = math.log(t)
        x = math.exp(lt / self.alpha)
        if x > _P_CAP:
            raise DomainError(f"counting function beyond p=2^52 at t={t:g}")
        k = int(math.floor(x))
        # fix rounding at exact integer crossings: nu = #{p >= 0: alpha ln(p+1) <= ln t}
        while k >= 1 and self.alpha * math.log(k) > lt:
            k -= 1
        while self.alpha * math.log(k + 1) <= lt:
            k += 1
        return k

    def nu_array(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=np.int64)
        pos = t >= 1
        lt = np.log(t[pos])
        x = np.exp(lt / self.alpha)
        if x.size and x.max() > _P_CAP:
            raise DomainError("counting function beyond p=2^52")
        k = np.floor(x)
        k = np.where((k >= 1) & (self.alpha * np.log(np.maximum(k, 1)) > lt), k - 1, k)
        k = np.where(self.alpha * np.log(k + 1) <= lt, k + 1, k)
        out[pos] = k.astype(np.int64)
        return out

    def inv_quotient_sum(self, start: int, k: float = 1.0, shift: float = 0.0) -> float:
        s = self.alpha * k
        if s <= 1:
            raise NonQuasianalyticError(f"sum of (p+1)^(-{s:g}) diverges")
        if s * math.log(start + 1) < 600:
            return float(special.zeta(s, start + 1)) * math.exp(k * shift)
        # Hurwitz zeta would underflow; sum the rescaled terms directly
        return super().inv_quotient_sum(start, k, shift)

    def _power_integral(self, T: float) -> float:
        # integral of t^(1/alpha - 2) over [T, inf)
        a = 1.0 / self.alpha
        if a >= 1:
            raise NonQuasianalyticError(f"gevrey({self.alpha:g}) is quasianalytic")
        return T ** (a - 1) / (1 - a)

    def nu_tail_integral(self, T: float):
        # t^(1/alpha) - 1 <= nu(t) <= t^(1/alpha) for t >= 1
        hi = self._power_integral(T)
        lo = hi - 1.0 / T
        return 0.5 * (hi + lo), 0.5 * (hi - lo)

    def omega_tail_integral(self, T: float):
        # alpha (t^(1/alpha) - 1) - ln t <= omega(t) <= alpha (t^(1/alpha) - 1)
        base = self.alpha * (self._power_integral(T) - 1.0 / T)
        lo = base - (math.log(T) + 1.0) / T
        return 0.5 * (base + lo), 0.5 * (base - lo)

    def describe(self) -> dict:
        return {"kind": "gevrey", "alpha": self.alpha}

    def power(self, s: float) -> TailModel:
        return GevreyTail(self.alpha * s)

    def hat(self) -> TailModel:
        return GevreyTail(self.alpha + 1)

    def check(self) -> TailModel:
        return GevreyTail(self.alpha - 1) if self.alpha > 1 else ShiftedTail(self, -1.0)


def b_qs(q: float, s: float) -> float:
    """Coefficient of ln^s t in the q-Gevrey associated function bounds."""
    return (1.0 / s) * ((s - 1) / (s * math.log(q))) ** (s - 1)


@dataclass(frozen=True)
class QGevreyTail(TailModel):
    q: float
    sigma: float
    kind = "q_gevrey"

    @property
    def s(self) -> float:
        return self.sigma / (self.sigma - 1)

    def log_terms(self, p):
        return np.asarray(p, dtype=float) ** self.sigma * math.log(self.q)

    def nu(self, t: float) -> int:
        if t <= 0:
            return 0
        lq = math.log(self.q)
        L = math.log(t) / lq
        if L < 1:
            return 0
        # (p+1)^sigma - p^sigma <= L  <=>  p <= p*, increasing in p
        guess = (L / self.sigma) ** (1.0 / (self.sigma - 1))
        if guess > _P_CAP:
            raise DomainError(f"counting function beyond p=2^52 at t={t:g}")
        k = max(int(guess) - 2, 0)
        lt = math.log(t)

        def quot(p):
            return ((p + 1) ** self.sigma - p**self.sigma) * lq

        while k > 0 and quot(k - 1) > lt:
            k -= 1
        while quot(k) <= lt:
            k += 1
        return k

    def omega(self, t: float) -> float:
        if t <= 1:
            return 0.0
        k = self.nu(t)
        return k * math.log(t) - k**self.sigma * math.log(self.q)

    def nu_array(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=np.int64)
        lq = math.log(self.q)
        pos = t > self.q
        lt = np.log(t[pos])
        guess = (lt / lq / self.sigma) ** (1.0 / (self.sigma - 1))
        if guess.size and guess.max() > _P_CAP:
            raise DomainError("counting function beyond p=2^52")
        k = np.maximum(np.floor(guess) - 2, 0)
        quot = lambda p: ((p + 1) ** self.sigma - p**self.sigma) * lq
        for _ in range(8):
            k = np.where((k > 0) & (quot(np.maximum(k - 1, 0)) > lt), k - 1, k)
        for _ in range(8):
            k = np.where(quot(k) <= lt, k + 1, k)
        out[pos] = k.astype(np.int64)
        return out

    def _log_moment(self, k: float, T: float) -> float:
        # integral of ln^k t / t^2 over [T, inf) = Gamma(k+1, ln T)
        return math.gamma(k + 1) * special.gammaincc(k + 1, math.log(T))

    def omega_tail_integral(self, T: float):
        b = b_qs(self.q, self.s)
        hi = b * self._log_moment(self.s, T)
        lo = hi - (math.log(T) + 1.0) / T
        return 0.5 * (hi + lo), 0.5 * (hi - lo)

    def nu_tail_integral(self, T: float):
        c = (self.sigma * math.log(self.q)) ** (-(self.s - 1))
        mid = c * self._log_moment(self.s - 1, T)
        return mid, 1.0 / T

    def describe(self) -> dict:
        return {"kind": "q_gevrey", "q": self.q, "sigma": self.sigma}

    def power(self, s: float) -> TailModel:
        return QGevreyTail(self.q**s, self.sigma)


class ParametricTail(TailModel):
    """Tail given by a vectorized function p -> ln M_p."""

    kind = "parametric"

    def __init__(self, log_term_fn: Callable, label: str = "parametric"):
        self._fn = log_term_fn
        self.label = label

    def log_terms(self, p):
        return self._fn(np.asarray(p, dtype=float))

    def describe(self) -> dict:
        return {"kind": "parametric", "label": self.label}


class AlphaBetaTail(ParametricTail):
    """ln M_p = alpha ln p! + beta sum_{m<=p} ln ln(e+m), with a growing cache."""

    def __init__(self, alpha: float, beta: float):
        self.alpha = alpha
        self.beta = beta
        self._cum = np.zeros(0)
        super().__init__(self._eval, f"alpha_beta({alpha:g},{beta:g})")

    def _cumulative(self, pmax: int) -> np.ndarray:
        if pmax >= self._cum.size:
            n = max(pmax + 1, 2 * self._cum.size, 1024)
            self._cum = np.cumsum(np.log(np.log(math.e + np.arange(n, dtype=float))))
        return self._cum

    def _eval(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p != np.floor(p)) or np.any(p < 0):
            raise DomainError("alpha_beta tail is defined for integer p >= 0 only")
        if p.size and p.max() > 5e7:
            raise DomainError("alpha_beta tail evaluated beyond p=5e7")
        cum = self._cumulative(int(p.max()) if p.size else 0)
        return self.alpha * special.gammaln(p + 1) + self.beta * cum[p.astype(np.int64)]

    def describe(self) -> dict:
        return {"kind": "alpha_beta", "alpha": self.alpha, "beta": self.beta}


class PowerTail(ParametricTail):
    def __init__(self, base: TailModel, s: float):
        self.base = base
        self.s = s
        super().__init__(lambda p: s * base.log_terms(p), "power")

    def nu(self, t: float) -> int:
        return self.base.nu(t ** (1.0 / self.s)) if t > 0 else 0

    def nu_array(self, t: np.ndarray) -> np.ndarray:
        return self.base.nu_array(np.asarray(t, dtype=float) ** (1.0 / self.s))

    def omega(self, t: float) -> float:
        return self.s * self.base.omega(t ** (1.0 / self.s)) if t > 0 else 0.0

    def describe(self) -> dict:
        return {"kind": "power", "s": self.s, "base": self.base.describe()}


class ShiftedTail(ParametricTail):
    """ln M_p shifted by sign * ln p!  (hat for +1, check for -1)."""

    def __init__(self, base: TailModel, sign: float):
        self.base = base
        self.sign = sign
        super().__init__(
            lambda p: base.log_terms(p) + sign * special.gammaln(np.asarray(p) + 1.0),
            "hat" if sign > 0 else "check",
        )

    def describe(self) -> dict:
        return {"kind": self.label, "base": self.base.describe()}


class ConvolvedTail(TailModel):
    """Tail of the convolution of two full sequences (prefix plus tail each).

    The associated function and the counting function are additive, so both
    are evaluated through the component sequences.
    """

    kind = "convolved"

    def __init__(self, left, right):
        self.left = left
        self.right = right

    def nu(self, t: float) -> int:
        from .assoc_fn import nu

        return int(nu(self.left, t)) + int(nu(self.right, t))

    def omega(self, t: float) -> float:
        from .assoc_fn import omega

        return float(omega(self.left, t)) + float(omega(self.right, t))

    def nu_array(self, t: np.ndarray) -> np.ndarray:
        from .assoc_fn import nu

        return nu(self.left, t) + nu(self.right, t)

    def omega_array(self, t: np.ndarray) -> np.ndarray:
        from .assoc_fn import omega

        return omega(self.left, t) + omega(self.right, t)

    def log_terms(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=np.int64))
        out = np.empty(p.shape, dtype=float)
        for i, pi in enumerate(p):
            q = np.arange(pi + 1)
            out[i] = np.min(
                self.left.extended_log_terms(q) + self.right.extended_log_terms(pi - q)
            )
        return out

    def _sum_tail(self, name: str, T: float):
        a = getattr(self.left.tail_model, name)(T) if self.left.tail_model else None
        b = getattr(self.right.tail_model, name)(T) if self.right.tail_model else None
        if a is None or b is None:
            return None
        return a[0] + b[0], a[1] + b[1]

    def omega_tail_integral(self, T: float):
        return self._sum_tail("omega_tail_integral", T)

    def nu_tail_integral(self, T: float):
        return self._sum_tail("nu_tail_integral", T)

    def describe(self) -> dict:
        return {"kind": "convolved", "left": self.left.label, "right": self.right.label}

    def power(self, s: float) -> TailModel:
        from .weight_seq import power

        return ConvolvedTail(power(self.left, s), power(self.right, s))

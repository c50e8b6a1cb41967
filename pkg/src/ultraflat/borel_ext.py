"""Moment kernels, the Borel-like transform and the truncated Laplace extension.

Moments and series coefficients are kept as logarithms of their moduli
(plus a unit phase for coefficients), since q^(p^2) overflows binary64
already for moderate p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConsistencyError, KernelDecayError, ParameterError, SectorError
from .flat import FlatFunction, FlatnessReport
from .quadrature import QuadConfig, integrate
from .weight_seq import WeightSequence

# lower limit of the s-integral: u = r e^s contributes below e^-45 relative
S_MIN = -45.0


@dataclass(frozen=True, eq=False)
class Kernel:
    """e(z) = G(1/z) for a flat function G."""

    flat: FlatFunction

    def log_eval(self, r, theta):
        r = np.asarray(r, dtype=float)
        return self.flat.log_eval(1.0 / r, -np.asarray(theta, dtype=float))

    def __call__(self, r, theta=0.0):
        return np.exp(self.log_eval(r, theta))

    def log_positive(self, t):
        t = np.asarray(t, dtype=float)
        return np.real(self.log_eval(t, np.zeros_like(t)))


def kernel_from_flat(F: FlatFunction) -> Kernel:
    if not F.sector.contains(0.0):
        raise SectorError("the flat function's sector must contain the positive axis")
    return Kernel(F)


@dataclass(frozen=True, eq=False)
class MomentKernel:
    kernel: Kernel
    log_moments: np.ndarray
    B1: float
    B2: float
    seq: WeightSequence | None
    quad: QuadConfig
    root_ratios: np.ndarray = field(default=None)

    @property
    def flat(self) -> FlatFunction:
        return self.kernel.flat

    @property
    def P(self) -> int:
        return self.log_moments.size - 1


def _log_moment(ker: Kernel, p: int, quad: QuadConfig, u_span=(-80.0, 700.0)) -> float:
    """ln of the integral of t^p e(t) over (0, inf), computed in u = ln t."""
    phi = lambda u: (p + 1) * u + ker.log_positive(np.exp(u))
    u = np.arange(u_span[0], u_span[1], 0.25)
    vals = phi(u)
    k = int(np.argmax(vals))
    top = vals[k]
    tail = vals[k:]
    below = np.nonzero((tail < top - 60) & (np.diff(np.append(tail, -np.inf)) < 0))[0]
    if below.size == 0:
        raise KernelDecayError(
            f"t^{p} e(t) does not decay on t <= e^{u_span[1]:g}; kernel not superpolynomially flat"
        )
    hi = u[k + below[0]]
    head = np.nonzero(vals[: k + 1] < top - 60)[0]
    lo = u[head[-1]] if head.size else u_span[0]
    # refine the peak before integrating the normalized integrand
    uu = np.linspace(max(lo, u[k] - 0.5), min(hi, u[k] + 0.5), 201)
    top = max(top, float(phi(uu).max()))
    res = integrate(lambda v: np.exp(phi(v) - top), lo, hi, quad, points=[u[k]])
    return top + math.log(res.value)


def moments(
    e: Kernel,
    P: int,
    quad: QuadConfig | None = None,
    seq: WeightSequence | None = None,
) -> MomentKernel:
    """Moments m(0..P) of the kernel and, given a sequence, the band [B1, B2].

    B1 and B2 are the extremes of (m(p)/(m(0) M_p))^(1/p) for 1 <= p <= P.
    """
    if P < 1:
        raise ParameterError("need at least the first moment")
    quad = quad or QuadConfig(abs_tol=1e-14, rel_tol=1e-11)
    lm = np.array([_log_moment(e, p, quad) for p in range(P + 1)])
    B1 = B2 = math.nan
    ratios = None
    if seq is not None:
        p = np.arange(1, P + 1)
        lM = seq.extended_log_terms(p)
        ratios = np.exp((lm[1:] - lm[0] - lM) / p)
        B1, B2 = float(ratios.min()), float(ratios.max())
    return MomentKernel(e, lm, B1, B2, seq, quad, ratios)


# ---------------------------------------------------------- formal series


@dataclass(frozen=True, eq=False)
class FormalSeries:
    """Coefficients a_p stored as ln|a_p| and a unit phase (zero: -inf)."""

    log_abs: np.ndarray
    phase: np.ndarray
    A: float
    seq: WeightSequence

    def __post_init__(self):
        if not self.A > 0:
            raise ParameterError("the type A must be positive")
        if self.log_abs.shape != self.phase.shape:
            raise ParameterError("coefficient arrays must match")

    @classmethod
    def from_coefficients(cls, coeffs, A: float, seq: WeightSequence) -> "FormalSeries":
        c = np.asarray(coeffs, dtype=complex)
        with np.errstate(divide="ignore"):
            la = np.log(np.abs(c))
        ph = np.where(c != 0, c / np.where(c != 0, np.abs(c), 1.0), 0.0)
        return cls(la, ph.astype(complex), float(A), seq)

    @property
    def length(self) -> int:
        return self.log_abs.size

    def coefficients(self) -> np.ndarray:
        # coefficients beyond binary64 come out as nan; use log_abs there
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(self.log_abs) * self.phase

    def scaled(self, factor: complex) -> "FormalSeries":
        mag = abs(factor)
        if mag == 0:
            return FormalSeries(np.full_like(self.log_abs, -np.inf), self.phase, self.A, self.seq)
        return FormalSeries(self.log_abs + math.log(mag), self.phase * (factor / mag), self.A, self.seq)


def alternating_Mp(seq: WeightSequence, count: int, A: float = 1.0) -> FormalSeries:
    """a_p = (-1)^p A^p M_p for p < count."""
    p = np.arange(count)
    la = seq.extended_log_terms(p) + p * math.log(A)
    ph = np.where(p % 2 == 0, 1.0, -1.0).astype(complex)
    return FormalSeries(la, ph, A, seq)


def log_series_norm(fs: FormalSeries) -> float:
    p = np.arange(fs.length)
    vals = fs.log_abs - p * math.log(fs.A) - fs.seq.extended_log_terms(p)
    return float(np.max(vals))


def series_norm(fs: FormalSeries) -> float:
    """sup_p |a_p| / (A^p M_p)."""
    return math.exp(log_series_norm(fs))


@dataclass(frozen=True)
class BorelTransform:
    log_abs: np.ndarray
    phase: np.ndarray

    def coefficients(self) -> np.ndarray:
        return np.exp(self.log_abs) * self.phase


def borel_transform(fs: FormalSeries, kernel: MomentKernel) -> BorelTransform:
    """Coefficients a_p / m(p), with the growth bound (norm/m(0)) (A/B1)^p checked."""
    if fs.length > kernel.P + 1:
        raise ParameterError(f"series has {fs.length} terms but only {kernel.P + 1} moments")
    p = np.arange(fs.length)
    lg = fs.log_abs - kernel.log_moments[: fs.length]
    if math.isfinite(kernel.B1):
        bound = log_series_norm(fs) - kernel.log_moments[0] + p * math.log(fs.A / kernel.B1)
        with np.errstate(invalid="ignore"):
            excess = np.where(np.isfinite(lg), lg - bound, -np.inf)
        if np.any(excess > 1e-9 * np.maximum(1.0, np.abs(bound))):
            raise ConsistencyError(
                f"Borel coefficients exceed the growth bound at p={int(np.argmax(excess))}"
            )
    return BorelTransform(lg, fs.phase.copy())


# ------------------------------------------------------------ extension


def truncation_order(ratio: float = 0.45, rel: float = 1e-12) -> int:
    """Terms needed so the geometric tail ratio^K/(1-ratio) is below rel."""
    return int(math.ceil(math.log(rel * (1 - ratio)) / math.log(ratio)))


@dataclass(frozen=True, eq=False)
class ExtensionOperator:
    """T(f)(z) = (1/z) integral over [0, R0] of e(u/z) g(u) du."""

    kernel: MomentKernel
    series: FormalSeries
    R0: float
    borel: BorelTransform
    quad: QuadConfig

    def _g(self, u: np.ndarray, start: int = 0) -> np.ndarray:
        """Truncated Borel series sum_{n >= start} g_n u^n, summed in log form."""
        u = np.asarray(u, dtype=float)
        n = np.arange(start, self.borel.log_abs.size)
        if n.size == 0:
            return np.zeros(u.shape, dtype=complex)
        with np.errstate(divide="ignore"):
            lu = np.log(u)
        expo = self.borel.log_abs[n][None, :] + n[None, :] * lu[:, None]
        top = np.max(np.where(np.isfinite(expo), expo, -np.inf), axis=1, keepdims=True)
        top = np.where(np.isfinite(top), top, 0.0)
        s = (np.exp(expo - top) * self.borel.phase[n][None, :]).sum(axis=1)
        return s * np.exp(top[:, 0])

    def _check_sector(self, theta: float):
        if not self.kernel.flat.sector.contains(theta):
            raise SectorError(f"theta={theta:g} outside the construction sector")

    def __call__(self, r: float, theta: float) -> complex:
        self._check_sector(theta)
        s_max = math.log(self.R0 / r)
        G = self.kernel.flat

        def integrand(s):
            return G.eval(np.exp(-s), np.full(s.shape, theta)) * self._g(r * np.exp(s)) * np.exp(s)

        res = integrate(integrand, S_MIN, s_max, self.quad)
        return complex(np.exp(-1j * theta) * res.value)

    def remainder(self, r: float, theta: float, p: int) -> complex:
        """f(z) - sum_{n<p} a_n z^n without cancellation.

        Uses a_n z^n = (1/z) integral over (0, inf) of e(u/z) g_n u^n du, so the
        remainder is the integral of the Borel tail from order p over [0, R0]
        minus the incomplete moments of the low orders over [R0, inf).
        """
        return self._remainder(r, theta, p, strict=True)[0]

    def remainder_bound(self, r: float, theta: float, p: int) -> tuple[complex, float]:
        """Remainder and its quadrature error estimate; never raises on accuracy.

        Near the sector edge the kernel oscillates and rounding limits the
        relative accuracy, so callers bound |remainder| by value + error.
        """
        return self._remainder(r, theta, p, strict=False)

    def _remainder(self, r, theta, p, strict):
        self._check_sector(theta)
        G = self.kernel.flat
        s_max = math.log(self.R0 / r)

        def head(s):
            return G.eval(np.exp(-s), np.full(s.shape, theta)) * self._g(r * np.exp(s), p) * np.exp(s)

        # remainders can be far below any fixed absolute floor
        quad = replace(self.quad, abs_tol=1e-300)
        res = integrate(head, S_MIN, s_max, quad, strict=strict)
        total, err = res.value, res.error
        if p > 0:
            # incomplete moments beyond R0: u = R0 e^v
            coeff = self.borel.coefficients()[:p]
            n = np.arange(p)

            def far(v):
                u = self.R0 * np.exp(v)
                lgz = G.log_eval(r / u, np.full(v.shape, theta))
                powers = np.exp(np.log(u)[:, None] * n[None, :] + np.real(lgz)[:, None])
                return np.exp(1j * np.imag(lgz)) * (powers @ coeff) * u / r

            vmax = 1.0
            while np.max(np.abs(far(np.array([vmax])))) > 1e-300 and vmax < 50:
                vmax += 1.0
            tail = integrate(far, 0.0, vmax, quad, strict=strict)
            total -= tail.value
            err += tail.error
        return complex(np.exp(-1j * theta) * total), float(err)


def extension_operator(
    fs: FormalSeries,
    kernel: MomentKernel,
    margin: float = 0.9,
    quad: QuadConfig | None = None,
    terms: int | None = None,
) -> ExtensionOperator:
    """Build T for the series; R0 = margin * B1 / (2A)."""
    if not math.isfinite(kernel.B1):
        raise ParameterError("the moment kernel carries no fitted B1")
    R0 = margin * kernel.B1 / (2 * fs.A)
    need = truncation_order(margin / 2) if terms is None else terms
    use = fs
    if fs.length > need:
        use = FormalSeries(fs.log_abs[:need], fs.phase[:need], fs.A, fs.seq)
    quad = quad or QuadConfig(abs_tol=1e-15, rel_tol=1e-12, max_intervals=20000)
    return ExtensionOperator(kernel, use, R0, borel_transform(use, kernel), quad)


def extend(fs: FormalSeries, kernel: MomentKernel, sector, z) -> complex:
    """Value of the extension at the polar point z = (r, theta)."""
    r, theta = z
    if sector is not None and not sector.contains(theta):
        raise SectorError(f"theta={theta:g} outside the sector")
    return extension_operator(fs, kernel)(r, theta)


# ----------------------------------------------------- asymptotic verifier


@dataclass
class AsymptoticReport:
    C: float
    c: float
    theoretical_c: float | None
    grid: dict
    table: list
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": "asymptotics",
            "C": self.C,
            "c": self.c,
            "theoretical_c": self.theoretical_c,
            "grid": self.grid,
            "worst_ratio_table": self.table,
            "pass": self.passed,
            "details": self.details,
        }


def theoretical_c(kernel: MomentKernel, report: FlatnessReport) -> float:
    return 2 * report.K4 * kernel.B2 / (report.K2 * kernel.B1)


def _bound(value) -> float:
    if isinstance(value, tuple):
        return abs(value[0]) + value[1]
    return abs(value)


def verify_asymptotics(
    f: Callable[[float, float], complex] | None,
    fs: FormalSeries,
    kernel: MomentKernel | None,
    sector_grid,
    p_max: int,
    remainder: Callable[[float, float, int], complex] | None = None,
    flatness: FlatnessReport | None = None,
    c_grid=None,
) -> AsymptoticReport:
    """Fit (C, c) with err_p(z) <= C (cA)^p M_p |z|^p on the grid, p <= p_max.

    err_p is taken from ``remainder(r, theta, p)`` when given (a pair
    (value, error) is read as the bound |value| + error), otherwise
    from f(z) minus the partial sum.  ln c is the least-squares slope of
    W_p = max_z [ln err_p - ln(A^p M_p |z|^p)] over the upper half of the
    orders, rounded up to the search grid; C is then the exact sup.
    """
    if p_max >= fs.length:
        raise ParameterError("p_max must be below the number of coefficients")
    pts = [(float(r), float(t)) for r, t in sector_grid]
    A = fs.A
    lM = fs.seq.extended_log_terms(np.arange(p_max + 1))
    coeffs = fs.coefficients()[:p_max] if remainder is None else None
    W = np.full(p_max + 1, -np.inf)
    for r, t in pts:
        if remainder is None:
            val = f(r, t)
            zn = (r * np.exp(1j * t)) ** np.arange(p_max)
            partial = np.concatenate([[0.0], np.cumsum(coeffs * zn)])
            errs = np.abs(val - partial)
        else:
            errs = np.array([_bound(remainder(r, t, p)) for p in range(p_max + 1)])
        with np.errstate(divide="ignore"):
            w = np.log(errs) - lM - np.arange(p_max + 1) * (math.log(A) + math.log(r))
        W = np.maximum(W, w)
    p = np.arange(p_max + 1)
    if not np.any(np.isfinite(W)):
        return AsymptoticReport(0.0, 1.0, None, {"points": len(pts), "p_max": p_max},
                                [], True, {"note": "remainders vanish identically"})
    c_grid = np.logspace(-3, 6, 9 * 13 + 1) if c_grid is None else np.asarray(c_grid)
    upper = p >= p_max // 2
    sel = upper & np.isfinite(W)
    slope = np.polyfit(p[sel], W[sel], 1)[0] if sel.sum() >= 2 else 0.0
    c = float(c_grid[np.searchsorted(c_grid, math.exp(slope))]) if math.exp(slope) <= c_grid[-1] else math.inf
    lnC = float(np.max(W - p * math.log(c))) if math.isfinite(c) else math.inf
    C = math.exp(lnC) if lnC < 700 else math.inf
    table = [{"p": int(k), "log_worst": float(W[k])} for k in p]
    th = None
    if flatness is not None and kernel is not None:
        th = theoretical_c(kernel, flatness)
    passed = math.isfinite(C) and math.isfinite(c)
    return AsymptoticReport(
        C, c, th, {"points": len(pts), "p_max": p_max,
                   "r_min": min(r for r, _ in pts), "r_max": max(r for r, _ in pts),
                   "max_abs_theta": max(abs(t) for _, t in pts)},
        table, passed,
    )

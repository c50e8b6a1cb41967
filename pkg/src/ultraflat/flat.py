"""Flat functions on sectors of the Riemann surface of the logarithm.

Points are polar pairs (r, theta) with theta unrestricted, so z^a is simply
(r^a, a theta).  Every flat function is stored through its logarithm, which
keeps values like exp(-10^6) representable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assoc_fn import log_h
from .errors import DomainError, ParameterError, PreconditionError, SectorError
from .harmonic import evaluator, omega_extension
from .tails import b_qs
from .weight_seq import WeightSequence, gamma_estimate, power

LOG_CAP = 50.0


@dataclass(frozen=True)
class Sector:
    opening_gamma: float

    def __post_init__(self):
        if not self.opening_gamma > 0:
            raise ParameterError("sector opening must be positive")

    @property
    def half_opening(self) -> float:
        return self.opening_gamma * math.pi / 2

    def contains(self, theta) -> np.ndarray:
        return np.abs(np.asarray(theta, dtype=float)) < self.half_opening


@dataclass(frozen=True, eq=False)
class FlatFunction:
    sector: Sector
    log_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    construction: dict = field(default_factory=dict)

    def log_eval(self, r, theta):
        """Principal logarithm of the value at the polar point(s) (r, theta)."""
        r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
        scalar = r.ndim == 0
        r, theta = np.atleast_1d(r), np.atleast_1d(theta)
        if np.any(r <= 0):
            raise DomainError("r must be positive")
        if not np.all(self.sector.contains(theta)):
            bad = theta[~self.sector.contains(theta)][0]
            raise SectorError(
                f"theta={bad:g} outside the sector |theta| < {self.sector.half_opening:g}"
            )
        out = np.asarray(self.log_fn(r, theta), dtype=complex)
        return complex(out[0]) if scalar else out

    def eval(self, r, theta):
        return np.exp(self.log_eval(r, theta))

    def log_abs(self, r, theta):
        return np.real(self.log_eval(r, theta))

    def eval_positive_axis(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(np.real(self.log_eval(x, np.zeros_like(x))))

    @property
    def label(self) -> str:
        return self.construction.get("kind", "flat")


def _require_sector_point(sector: Sector, theta: np.ndarray, what: str):
    if not np.all(sector.contains(theta)):
        raise SectorError(f"{what}: ramified angle leaves the sector")


# ------------------------------------------------------------ harmonic route


def flat_halfplane(
    seq: WeightSequence, assume_gamma: float | None = None, route: str = "series"
) -> FlatFunction:
    """G(z) = exp(-(P + iQ)(i/z)) on S_1, with P + iQ the extension of omega.

    ``route='series'`` uses the closed-form series, ``'quadrature'`` the
    Poisson integrals (slow, used for cross-checks).
    """
    if seq.tail_model is None:
        raise PreconditionError(f"{seq.label}: the harmonic route needs a tail model")
    g = assume_gamma if assume_gamma is not None else float(gamma_estimate(seq))
    if not g > 1:
        raise PreconditionError(f"{seq.label}: growth index {g:g} <= 1")

    if route == "series":

        def log_fn(r, theta):
            w = (1.0 / r) * np.exp(1j * (math.pi / 2 - theta))
            return -omega_extension(seq, w)

    elif route == "quadrature":
        ev = evaluator(seq)

        def log_fn(r, theta):
            out = np.empty(r.shape, dtype=complex)
            for i, (ri, ti) in enumerate(zip(r, theta)):
                x, y = math.sin(ti) / ri, math.cos(ti) / ri
                out[i] = -(ev.poisson(x, y).value + 1j * ev.conjugate(x, y).value)
            return out

    else:
        raise ParameterError(f"unknown route {route!r}")
    return FlatFunction(Sector(1.0), log_fn, {"kind": "harmonic", "seq": seq.label, "route": route})


def default_ramification(gamma: float, gamma_est: float) -> float:
    """s with gamma < 1/s < gamma_est: midpoint in reciprocal space, capped."""
    return 2.0 / (gamma + min(gamma_est, gamma + 2.0))


def flat_ramified(
    seq: WeightSequence, gamma: float, s: float | None = None, gamma_est: float | None = None
) -> FlatFunction:
    """F(z) = G(z^s)^(1/s) on S_gamma, with G the half-plane function of M^s."""
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    est = gamma_estimate(seq) if gamma_est is None else None
    g_est = float(est) if est is not None else float(gamma_est)
    if gamma >= g_est:
        raise PreconditionError(f"gamma={gamma:g} is not below the growth index estimate {g_est:g}")
    if s is None:
        s = default_ramification(gamma, g_est)
    if not (gamma < 1.0 / s < g_est):
        raise ParameterError(f"s={s:g} violates gamma < 1/s < {g_est:g}")
    inner_seq = seq if s == 1 else power(seq, s)
    inner = flat_halfplane(inner_seq, assume_gamma=g_est * s)
    sector = Sector(gamma)

    def log_fn(r, theta):
        _require_sector_point(inner.sector, s * theta, "flat_ramified")
        return inner.log_fn(r**s, s * theta) / s

    return FlatFunction(
        sector, log_fn, {"kind": "ramified", "seq": seq.label, "s": s, "gamma": gamma}
    )


def ramified_constants(constants: dict, s: float) -> dict:
    """Flatness constants of F = G(z^s)^(1/s) against M from those of G against M^s."""
    return {k: v ** (1.0 / s) for k, v in constants.items()}


# ------------------------------------------------------------ q-Gevrey route


def _log_g2(q: float, sigma: float, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    s = sigma / (sigma - 1)
    b = b_qs(q, s)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        inv_z = (1.0 / r) * np.exp(-1j * theta)
        L = np.log1p(inv_z)
        out = -b * np.exp(s * np.log(L))
    # r -> 0 sends Log(1+1/z) to infinity, where the function vanishes
    return np.where(np.isfinite(out), out, -np.inf + 0j)


def flat_q_gevrey_S2(q: float, sigma: float) -> FlatFunction:
    """exp(-b Log^s(1 + 1/z)) on S_2, principal branches throughout."""
    if not q > 1 or not 1 < sigma <= 2:
        raise ParameterError("need q > 1 and sigma in (1, 2]")
    return FlatFunction(
        Sector(2.0),
        lambda r, th: _log_g2(q, sigma, r, th),
        {"kind": "q_gevrey_S2", "q": q, "sigma": sigma},
    )


def flat_q_gevrey_Sgamma(q: float, sigma: float, gamma: float) -> FlatFunction:
    """(G_2(z^(2/gamma)))^((gamma/2)^s) on S_gamma, gamma >= 2."""
    if not gamma >= 2:
        raise ParameterError("gamma must be at least 2")
    if not q > 1 or not 1 < sigma <= 2:
        raise ParameterError("need q > 1 and sigma in (1, 2]")
    s = sigma / (sigma - 1)
    expo = (gamma / 2.0) ** s
    a = 2.0 / gamma

    def log_fn(r, theta):
        return expo * _log_g2(q, sigma, r**a, a * theta)

    return FlatFunction(
        Sector(gamma), log_fn, {"kind": "q_gevrey_Sgamma", "q": q, "sigma": sigma, "gamma": gamma}
    )


# ------------------------------------------------------------- misc routes


def reference_exp(opening: float = 1.0) -> FlatFunction:
    """exp(-1/z), the classical Gevrey-1 flat function."""
    return FlatFunction(
        Sector(opening),
        lambda r, th: -(1.0 / r) * np.exp(-1j * th),
        {"kind": "reference_exp"},
    )


def constant_one(sector: Sector) -> FlatFunction:
    return FlatFunction(sector, lambda r, th: np.zeros(np.shape(r), dtype=complex), {"kind": "one"})


def flat_product(F1: FlatFunction, F2: FlatFunction) -> FlatFunction:
    if F1.sector != F2.sector:
        raise SectorError(
            f"sector mismatch: {F1.sector.opening_gamma:g} vs {F2.sector.opening_gamma:g}"
        )
    return FlatFunction(
        F1.sector,
        lambda r, th: F1.log_fn(r, th) + F2.log_fn(r, th),
        {"kind": "product", "factors": [F1.construction, F2.construction]},
    )


def combine_constants(k: dict, j: dict) -> dict:
    """Flatness constants of a product from those of its factors."""
    return {
        "K1": k["K1"] * j["K1"],
        "K2": min(k["K2"], j["K2"]),
        "K3": k["K3"] * j["K3"],
        "K4": max(k["K4"], j["K4"]),
    }


# ---------------------------------------------------------- verification


@dataclass
class FlatnessReport:
    K1: float
    K2: float
    K3: float
    K4: float
    x_grid: dict
    sector_grid: dict
    worst_margin_lower: float
    worst_margin_upper: float
    passed: bool
    angular_coverage: float
    validation: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def constants(self) -> dict:
        return {"K1": self.K1, "K2": self.K2, "K3": self.K3, "K4": self.K4}

    def to_dict(self) -> dict:
        return {
            "name": "flatness",
            "constants": self.constants,
            "x_grid": self.x_grid,
            "sector_grid": self.sector_grid,
            "worst_margin_lower": self.worst_margin_lower,
            "worst_margin_upper": self.worst_margin_upper,
            "angular_coverage": self.angular_coverage,
            "validation": self.validation,
            "pass": self.passed,
            "reason": self.reason,
        }


def default_x_grid(points: int = 60) -> np.ndarray:
    return np.logspace(-6, 1, points)


def default_angles(sector: Sector, count: int = 21, pullback: float = 0.95) -> np.ndarray:
    return np.linspace(-pullback, pullback, count) * sector.half_opening


def _k_candidates(lo: float, hi: float, per_decade: int) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), int(round(per_decade * math.log10(hi / lo))) + 1)


def _refine(best: float, cands: np.ndarray, score, steps: int = 13) -> float:
    """One refinement pass on the neighbouring grid cells of the best candidate."""
    i = int(np.argmin(np.abs(np.log(cands) - math.log(best))))
    lo = cands[max(i - 1, 0)]
    hi = cands[min(i + 1, cands.size - 1)]
    fine = np.geomspace(lo, hi, 2 * steps + 1)
    vals = np.array([score(k) for k in fine])
    return float(fine[int(np.nanargmin(vals))])


def verify_flatness(
    F: FlatFunction,
    seq: WeightSequence,
    x_grid=None,
    angles=None,
    k_range=(1e-3, 1e3),
    per_decade: int = 13,
    log_cap: float = LOG_CAP,
) -> FlatnessReport:
    """Fit K1..K4 of the two flatness bounds on sampled grids.

    Upper bound:  |G(z)| <= K3 h(K4 |z|) on the sector grid.  Lower bound:
    K1 h(K2 x) <= G(x) on the positive axis.  In each bound the scale
    constant is searched on a log grid and the pair minimizing
    |ln K3| + |ln K4| (resp. |ln K1| + |ln K2|) is kept.  Passing requires |ln K| <= log_cap for
    every constant, nonnegative margins and all h-evaluations in domain.
    """
    x = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    th = default_angles(F.sector) if angles is None else np.asarray(angles, dtype=float)
    R, TH = np.meshgrid(x, th, indexing="ij")
    r_flat, th_flat = R.ravel(), TH.ravel()
    xg = {"min": float(x.min()), "max": float(x.max()), "points": int(x.size)}
    sg = {"radii": int(x.size), "angles": int(th.size), "max_abs_theta": float(np.abs(th).max())}
    coverage = float(np.abs(th).max() / F.sector.half_opening)
    log_G = np.real(F.log_eval(r_flat, th_flat))
    log_G_axis = np.real(F.log_eval(x, np.zeros_like(x)))
    cands = _k_candidates(*k_range, per_decade)

    try:
        def upper_lnK3(k4):
            return float(np.max(log_G - log_h(seq, k4 * r_flat)))

        def lower_lnK1(k2):
            return float(np.min(log_G_axis - log_h(seq, k2 * x)))

        # K3 is monotone in K4 (and K1 in K2), so we pick the pair closest to 1
        up_score = lambda k: abs(upper_lnK3(k)) + abs(math.log(k))
        lo_score = lambda k: abs(lower_lnK1(k)) + abs(math.log(k))
        s_up = np.array([up_score(k) for k in cands])
        s_lo = np.array([lo_score(k) for k in cands])
        k4 = _refine(float(cands[int(np.nanargmin(s_up))]), cands, up_score)
        k2 = _refine(float(cands[int(np.nanargmin(s_lo))]), cands, lo_score)
        lnK3, lnK1 = upper_lnK3(k4), lower_lnK1(k2)
        # margins in log form: ln(K3 h(K4 r)) - ln|G|, ln G - ln(K1 h(K2 x))
        m_up = lnK3 + log_h(seq, k4 * r_flat) - log_G
        m_lo = log_G_axis - lnK1 - log_h(seq, k2 * x)
        # validation on the log-midpoints of the grid
        xm = np.sqrt(x[1:] * x[:-1])
        thm = 0.5 * (th[1:] + th[:-1])
        Rm, THm = np.meshgrid(xm, thm, indexing="ij")
        v_up = lnK3 + log_h(seq, k4 * Rm.ravel()) - np.real(F.log_eval(Rm.ravel(), THm.ravel()))
        v_lo = np.real(F.log_eval(xm, np.zeros_like(xm))) - lnK1 - log_h(seq, k2 * xm)
    except DomainError as exc:
        return FlatnessReport(
            math.nan, math.nan, math.nan, math.nan, xg, sg, math.nan, math.nan, False, coverage,
            reason=f"inconclusive: {exc}",
        )
    logs = {"K1": lnK1, "K2": math.log(k2), "K3": lnK3, "K4": math.log(k4)}
    finite = all(math.isfinite(v) and abs(v) <= log_cap for v in logs.values())
    worst_up, worst_lo = float(m_up.min()), float(m_lo.min())
    passed = finite and worst_up >= 0 and worst_lo >= 0
    reason = "" if passed else (
        "constants not finite within cap: "
        + ", ".join(f"ln {k}={v:.4g}" for k, v in logs.items() if not (abs(v) <= log_cap))
    )
    with np.errstate(over="ignore"):
        consts = {k: math.exp(v) if v < 700 else math.inf for k, v in logs.items()}
    return FlatnessReport(
        consts["K1"], consts["K2"], consts["K3"], consts["K4"], xg, sg, worst_lo, worst_up,
        passed, coverage,
        validation={
            "worst_margin_lower": float(v_lo.min()),
            "worst_margin_upper": float(v_up.min()),
        },
        reason=reason,
    )

"""JSON specs for sequences, flat functions, series and grids.

A sequence spec names a family and its parameters, e.g.
``{"family": "q_gevrey", "q": 2, "sigma": 2, "n": 64}``; composite
families nest specs (``convolve`` takes ``left``/``right``).
"""
from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from . import flat as flat_mod
from . import weight_seq as ws
from .borel_ext import FormalSeries, alternating_Mp
from .errors import SpecError

DEFAULT_N = 64


def spec_hash(obj) -> str:
    """First 12 hex digits of the sha256 of the canonical JSON form."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _need(spec: dict, key: str, what: str):
    if key not in spec:
        raise SpecError(f"{what} spec is missing '{key}'")
    return spec[key]


def _num(spec: dict, key: str, what: str, default=None) -> float:
    val = spec.get(key, default)
    if val is None:
        raise SpecError(f"{what} spec is missing '{key}'")
    if isinstance(val, str):
        if val in ("e", "E"):
            return math.e
        try:
            return float(val)
        except ValueError:
            raise SpecError(f"{what}: '{key}' must be a number, got {val!r}") from None
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise SpecError(f"{what}: '{key}' must be a number, got {val!r}")
    return float(val)


def build_sequence(spec: dict, prefix_n: int | None = None) -> ws.WeightSequence:
    if not isinstance(spec, dict):
        raise SpecError("sequence spec must be an object")
    fam = _need(spec, "family", "sequence")
    n = int(prefix_n or spec.get("n", DEFAULT_N))
    what = f"sequence '{fam}'"
    if fam == "gevrey":
        return ws.gevrey(_num(spec, "alpha", what), n)
    if fam == "q_gevrey":
        return ws.q_gevrey(_num(spec, "q", what), _num(spec, "sigma", what), n)
    if fam in ("alpha_beta", "m_alpha_beta"):
        return ws.m_alpha_beta(_num(spec, "alpha", what), _num(spec, "beta", what), n)
    if fam == "log_terms":
        return ws.from_log_terms(spec.get("label", "custom"), _need(spec, "values", what))
    if fam == "log_quotients":
        return ws.from_log_quotients(spec.get("label", "custom"), _need(spec, "values", what))
    if fam == "convolve":
        left = build_sequence(_need(spec, "left", what), prefix_n)
        right = build_sequence(_need(spec, "right", what), prefix_n)
        return ws.convolve(left, right)
    if fam == "power":
        return ws.power(build_sequence(_need(spec, "base", what), prefix_n), _num(spec, "s", what))
    if fam == "hat":
        return ws.hat(build_sequence(_need(spec, "base", what), prefix_n))
    if fam == "check":
        return ws.check_seq(build_sequence(_need(spec, "base", what), prefix_n))
    raise SpecError(f"unknown sequence family {fam!r}")


def build_flat(spec: dict, prefix_n: int | None = None) -> flat_mod.FlatFunction:
    if not isinstance(spec, dict):
        raise SpecError("flat spec must be an object")
    route = _need(spec, "route", "flat")
    what = f"flat route '{route}'"
    if route == "q_gevrey_S2":
        return flat_mod.flat_q_gevrey_S2(_num(spec, "q", what), _num(spec, "sigma", what))
    if route == "q_gevrey_Sgamma":
        return flat_mod.flat_q_gevrey_Sgamma(
            _num(spec, "q", what), _num(spec, "sigma", what), _num(spec, "gamma", what)
        )
    if route == "halfplane":
        return flat_mod.flat_halfplane(build_sequence(_need(spec, "sequence", what), prefix_n))
    if route == "ramified":
        seq = build_sequence(_need(spec, "sequence", what), prefix_n)
        s = spec.get("s")
        return flat_mod.flat_ramified(seq, _num(spec, "gamma", what), None if s is None else float(s))
    if route == "reference_exp":
        return flat_mod.reference_exp(_num(spec, "opening", what, 1.0))
    if route == "product":
        return flat_mod.flat_product(
            build_flat(_need(spec, "left", what), prefix_n), build_flat(_need(spec, "right", what), prefix_n)
        )
    raise SpecError(f"unknown flat route {route!r}")


def build_series(spec: dict, seq: ws.WeightSequence) -> FormalSeries:
    if not isinstance(spec, dict):
        raise SpecError("series spec must be an object")
    A = _num(spec, "A", "series", 1.0)
    if "generator" in spec:
        if spec["generator"] != "alternating_Mp":
            raise SpecError(f"unknown series generator {spec['generator']!r}")
        return alternating_Mp(seq, int(spec.get("count", 48)), A)
    coeffs = _need(spec, "coefficients", "series")
    vals = []
    for c in coeffs:
        if isinstance(c, (list, tuple)) and len(c) == 2:
            vals.append(complex(float(c[0]), float(c[1])))
        elif isinstance(c, (int, float)):
            vals.append(complex(c))
        else:
            raise SpecError(f"series coefficient {c!r} is neither a number nor [re, im]")
    return FormalSeries.from_coefficients(vals, A, seq)


def log_grid(spec: dict | None, default: tuple, points: int | None = None, seed=None) -> np.ndarray:
    """Log-spaced grid {"min", "max", "points"}, optionally jittered by ``jitter``."""
    spec = spec or {}
    lo = float(spec.get("min", default[0]))
    hi = float(spec.get("max", default[1]))
    k = int(points or spec.get("points", default[2]))
    if not (0 < lo < hi) or k < 2:
        raise SpecError(f"bad grid {spec!r}")
    g = np.logspace(math.log10(lo), math.log10(hi), k)
    jitter = float(spec.get("jitter", 0.0))
    if jitter > 0:
        rng = np.random.default_rng(seed)
        step = math.log(hi / lo) / (k - 1)
        g[1:-1] *= np.exp(rng.uniform(-jitter, jitter, k - 2) * step)
    return g


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise SpecError(f"{path}: {exc.strerror}") from None
    if not isinstance(data, dict):
        raise SpecError(f"{path}: top level must be an object")
    return data

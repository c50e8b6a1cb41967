"""Command-line entry point: ``ultraflat <command> [--config FILE] [--out DIR] ...``.

Exit codes: 0 success, 1 verification failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import acceptance
from . import assoc_fn as af
from . import borel_ext as be
from . import flat as fl
from . import harmonic as hm
from . import weight_seq as ws
from .errors import ParameterError, SpecError, UltraflatError
from .quadrature import QuadConfig
from .specs import build_flat, build_sequence, build_series, load_json, log_grid, spec_hash

COMMANDS = ("sequence", "assoc", "harmonic", "flat", "moments", "extend", "verify-all", "convolve")


class VerificationFailure(Exception):
    pass


def default_config() -> dict:
    text = resources.files("ultraflat").joinpath("data/default_config.json").read_text()
    return json.loads(text)


def threads() -> int:
    raw = os.environ.get("ULTRAFLAT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise SpecError(f"ULTRAFLAT_THREADS must be an integer, got {raw!r}") from None


def _pmap(fn, items):
    n = threads()
    if n == 1:
        return list(map(fn, items))
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


class Run:
    """Resolved configuration plus output helpers for one command."""

    def __init__(self, command: str, cfg: dict, args):
        self.command = command
        self.cfg = cfg
        self.args = args
        self.out = Path(args.out)
        self.hash = spec_hash({"command": command, "config": cfg, "overrides": self.overrides()})
        want_json, want_csv = args.json, args.csv
        if not want_json and not want_csv:
            want_json = want_csv = True
        self.want_json, self.want_csv = want_json, want_csv

    def overrides(self) -> dict:
        a = self.args
        return {"tol_abs": a.tol_abs, "tol_rel": a.tol_rel, "prefix_n": a.prefix_n,
                "grid_points": a.grid_points, "seed": a.seed}

    def quad(self, default: QuadConfig) -> QuadConfig:
        a = self.args
        return QuadConfig(
            a.tol_abs if a.tol_abs is not None else default.abs_tol,
            a.tol_rel if a.tol_rel is not None else default.rel_tol,
            default.max_intervals,
        )

    def seq(self, key: str = "sequence"):
        if key not in self.cfg:
            raise SpecError(f"{self.command} config needs a '{key}' sequence spec")
        return build_sequence(self.cfg[key], self.args.prefix_n)

    def grid(self, key: str, default: tuple) -> np.ndarray:
        return log_grid(self.cfg.get(key), default, self.args.grid_points, self.args.seed)

    def write_json(self, report: dict, passed: bool):
        if not self.want_json:
            return
        payload = {"command": self.command, "spec_hash": self.hash, "version": __version__,
                   "config": self.cfg, "overrides": self.overrides(), "pass": bool(passed),
                   "report": acceptance._plain(report)}
        path = self.out / f"{self.command}.json"
        path.write_text(json.dumps(payload, indent=2, default=str) + "\n")

    def write_csv(self, header: list, rows, name: str | None = None):
        if not self.want_csv:
            return
        path = self.out / f"{name or self.command}.csv"
        with open(path, "w", newline="") as fh:
            fh.write(f"# spec_hash={self.hash} command={self.command}\n")
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# ------------------------------------------------------------- commands


def cmd_sequence(run: Run) -> bool:
    seq = run.seq()
    props = run.cfg.get("properties", ["lc", "dc", "mg", "snq", "nq"])
    certs = {p: ws.check_property(seq, p).to_dict() for p in props}
    report = {"sequence": seq.describe(), "certificates": certs}
    if run.cfg.get("gamma", True):
        est = ws.gamma_estimate(seq)
        report["gamma_estimate"] = {"value": est.value, "capped": est.capped, "display": str(est)}
    expect = run.cfg.get("expect", {})
    mismatched = {k: certs[k]["verdict"] for k, v in expect.items() if k in certs and certs[k]["verdict"] != v}
    report["expectation_mismatches"] = mismatched
    p = np.arange(seq.n)
    run.write_csv(["p", "log_m_p", "log_M_p"], zip(p, seq.log_quotients, seq.log_terms[:-1]))
    run.write_json(report, not mismatched)
    for k, c in certs.items():
        print(f"{k:>4}: {c['verdict']}  constant={c['constant']:.6g}")
    return not mismatched


def cmd_assoc(run: Run) -> bool:
    seq = run.seq()
    t = run.grid("t_grid", (1e-3, 1e3, 60))
    t = t[t < seq.domain_limit]
    w = af.omega(seq, t)
    wi = af.omega_integral_route(seq, t)
    n = af.nu(seq, t)
    u = 1.0 / t
    dual = np.abs(np.expm1(af.log_h_inf(seq, u) + w))
    rec = []
    for p in range(min(seq.n, 41)):
        knot = af.recover_Mp(seq, p)
        rec.append(abs(knot - seq.log_terms[p]) / max(1.0, abs(seq.log_terms[p])))
    report = {"sequence": seq.describe(), "points": int(t.size),
              "duality_max_error": float(dual.max()), "two_route_max_error": float(np.abs(w - wi).max()),
              "recovery_max_rel_error": float(max(rec))}
    passed = report["duality_max_error"] <= 1e-12 and report["two_route_max_error"] <= 1e-10
    run.write_csv(["t", "omega", "omega_integral", "nu", "log_h_at_inverse", "log_h_inf_at_inverse"],
                  zip(t, w, wi, n, -w, af.log_h_inf(seq, u)))
    run.write_json(report, passed)
    print(f"duality {report['duality_max_error']:.3g}, routes {report['two_route_max_error']:.3g}")
    return passed


def cmd_harmonic(run: Run) -> bool:
    seq = run.seq()
    y = run.grid("y_grid", (1e-2, 1e4, 20))
    ev = hm.evaluator(seq, run.quad(QuadConfig(1e-10, 1e-9)))
    prof = af.omega_profile(seq)

    def one(v):
        P, Q, K = ev.poisson(0.0, float(v)), ev.conjugate(0.0, float(v)), af.kappa(prof, float(v))
        return P, Q, K

    rows, passed = [], True
    for v, (P, Q, K) in zip(y, _pmap(one, y)):
        eps = P.error + K.error
        ok = K.value / math.pi - eps <= P.value <= K.value + eps
        passed &= ok
        rows.append((v, P.value, P.error, Q.value, K.value, K.value / math.pi, eps, int(ok)))
    report = {"sequence": seq.describe(), "sandwich_pass": passed}
    if run.cfg.get("langenbruch", True):
        fit = hm.langenbruch_fit(seq, y)
        report["langenbruch"] = fit.to_dict()
        passed &= fit.passed
    run.write_csv(["y", "P", "P_error", "Q", "kappa", "kappa_over_pi", "eps", "sandwich_ok"], rows)
    run.write_json(report, passed)
    print(f"sandwich {'ok' if report['sandwich_pass'] else 'violated'} on {len(rows)} points")
    return passed


def cmd_flat(run: Run) -> bool:
    if "flat" not in run.cfg:
        raise SpecError("flat config needs a 'flat' spec")
    F = build_flat(run.cfg["flat"], run.args.prefix_n)
    seq = run.seq()
    x = run.grid("x_grid", (1e-6, 10.0, 60))
    angles = np.linspace(-1, 1, int(run.cfg.get("angles", 21))) * float(run.cfg.get("pullback", 0.95))
    rep = fl.verify_flatness(F, seq, x, angles * F.sector.half_opening)
    K = rep.constants
    rows = []
    if math.isfinite(K["K1"]) and math.isfinite(K["K3"]):
        g = np.real(F.log_eval(x, np.zeros_like(x)))
        lo = math.log(K["K1"]) + af.log_h(seq, K["K2"] * x)
        hi = math.log(K["K3"]) + af.log_h(seq, K["K4"] * x)
        rows = zip(x, g, lo, hi)
    run.write_csv(["x", "log_G", "log_lower_bound", "log_upper_bound"], rows)
    run.write_json(rep.to_dict(), rep.passed)
    print("flatness " + ("pass " if rep.passed else "FAIL ") + " ".join(f"{k}={v:.4g}" for k, v in K.items()))
    return rep.passed


def cmd_moments(run: Run) -> bool:
    if "flat" not in run.cfg:
        raise SpecError("moments config needs a 'flat' spec")
    F = build_flat(run.cfg["flat"], run.args.prefix_n)
    seq = run.seq()
    P = int(run.cfg.get("P", 25))
    K = be.moments(be.kernel_from_flat(F), P, run.quad(QuadConfig(1e-14, 1e-11)), seq=seq)
    lM = seq.extended_log_terms(np.arange(P + 1))
    ratios = np.concatenate([[math.nan], K.root_ratios])
    run.write_csv(["p", "log_m_p", "log_M_p", "root_ratio"], zip(range(P + 1), K.log_moments, lM, ratios))
    report = {"P": P, "B1": K.B1, "B2": K.B2, "B2_over_B1": K.B2 / K.B1}
    passed = K.B1 <= K.B2 and math.isfinite(K.B2)
    run.write_json(report, passed)
    print(f"B1={K.B1:.6g} B2={K.B2:.6g}")
    return passed


def cmd_extend(run: Run) -> bool:
    cfg = run.cfg
    seq = run.seq()
    if "kernel" not in cfg or "series" not in cfg:
        raise SpecError("extend config needs 'kernel' and 'series' specs")
    F = build_flat(cfg["kernel"], run.args.prefix_n)
    if cfg.get("pipeline", True):
        est = ws.gamma_estimate(seq)
        if not est.capped and F.sector.opening_gamma >= est.value:
            print(
                f"refused: sector opening {F.sector.opening_gamma:g} >= growth index estimate {est}; "
                "the boundary case gamma = gamma(M) is left open",
                file=sys.stderr,
            )
            raise VerificationFailure
    fs = build_series(cfg["series"], seq)
    p_max = int(cfg.get("p_max", 15))
    need = max(fs.length - 1, be.truncation_order(0.45))
    K = be.moments(be.kernel_from_flat(F), need, seq=seq)
    T = be.extension_operator(fs, K, quad=run.quad(QuadConfig(1e-15, 1e-12, 20000)))
    g = cfg.get("grid", {})
    radii = int(run.args.grid_points or g.get("radii", 10))
    r = np.logspace(math.log10(g.get("r_min", 1e-4)), math.log10(g.get("r_max", 0.5)), radii)
    th = np.linspace(-1, 1, int(g.get("angles", 9))) * float(g.get("theta_fraction", 0.9)) * F.sector.half_opening
    pts = [(float(a), float(b)) for a in r for b in th]

    def one(z):
        val = T(*z)
        bounds = [T.remainder_bound(z[0], z[1], p) for p in range(p_max + 1)]
        return val, bounds

    results = _pmap(one, pts)
    table = {z: b for z, (_, b) in zip(pts, results)}
    rep = be.verify_asymptotics(None, fs, K, pts, p_max, remainder=lambda a, b, p: table[(a, b)][p],
                                flatness=fl.verify_flatness(F, seq))
    rows = [(z[0], z[1], v.real, v.imag, *[abs(b[0]) + b[1] for b in bnds])
            for z, (v, bnds) in zip(pts, results)]
    run.write_csv(["r", "theta", "re_f", "im_f"] + [f"err_{p}" for p in range(p_max + 1)], rows)
    report = rep.to_dict()
    report["R0"] = T.R0
    report["B1"], report["B2"] = K.B1, K.B2
    run.write_json(report, rep.passed)
    print(f"asymptotics {'pass' if rep.passed else 'FAIL'}: C={rep.C:.4g} c={rep.c:.4g} (theory {rep.theoretical_c})")
    return rep.passed


def cmd_convolve(run: Run) -> bool:
    left, right = run.seq("left"), run.seq("right")
    L = ws.convolve(left, right)
    t = run.grid("t_grid", (1e-2, 1e6, 60))
    t = t[t < L.domain_limit]
    w_err = np.abs(af.omega(L, t) - af.omega(left, t) - af.omega(right, t))
    u = 1.0 / t
    h_err = np.abs(np.expm1(af.log_h_inf(L, u) - af.log_h_inf(left, u) - af.log_h_inf(right, u)))
    report = {"sequence": L.describe(), "omega_additivity": float(w_err.max()),
              "h_multiplicativity": float(h_err.max()), "lc": ws.check_property(L, "lc").to_dict()}
    passed = report["omega_additivity"] <= 1e-10 and report["h_multiplicativity"] <= 1e-12
    p = np.arange(L.n)
    run.write_csv(["p", "log_l_p", "log_L_p"], zip(p, L.log_quotients, L.log_terms[:-1]))
    run.write_json(report, passed)
    print(f"omega additivity {report['omega_additivity']:.3g}, h multiplicativity {report['h_multiplicativity']:.3g}")
    return passed


def cmd_verify_all(run: Run) -> bool:
    ids = run.cfg.get("criteria", sorted(acceptance.CRITERIA))
    if run.args.criteria:
        ids = run.args.criteria
    bad = [i for i in ids if i not in acceptance.CRITERIA]
    if bad:
        raise SpecError(f"unknown criteria {bad}")
    results = acceptance.run_all(ids, _pmap)
    for r in results:
        print(r.line())
    summary = [{"criterion": r.id, "title": r.title, "pass": r.passed, "measured": r.measured,
                "expected": r.expected, "tolerance": r.tolerance, "checks": r.checks} for r in results]
    passed = all(r.passed for r in results)
    run.write_json({"criteria": summary}, passed)
    run.write_csv(["criterion", "title", "pass", "seconds"],
                  [(r.id, r.title, int(r.passed), round(r.seconds, 3)) for r in results])
    return passed


HANDLERS = {
    "sequence": cmd_sequence,
    "assoc": cmd_assoc,
    "harmonic": cmd_harmonic,
    "flat": cmd_flat,
    "moments": cmd_moments,
    "extend": cmd_extend,
    "verify-all": cmd_verify_all,
    "convolve": cmd_convolve,
}


# ----------------------------------------------------------------- main


def _criteria_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ultraflat", description="Weight sequences, flat functions and extension operators, evaluated and checked numerically.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config; a section named after the command is used if present")
    ap.add_argument("--out", default="ultraflat_out", help="output directory (default: %(default)s)")
    ap.add_argument("--tol-abs", type=float, help="absolute quadrature tolerance")
    ap.add_argument("--tol-rel", type=float, help="relative quadrature tolerance")
    ap.add_argument("--prefix-n", type=int, help="override the prefix length of every sequence")
    ap.add_argument("--grid-points", type=int, help="override the point count of the main grid")
    ap.add_argument("--seed", type=int, default=0, help="seed for optional grid jitter")
    ap.add_argument("--json", action="store_true", help="write the JSON report")
    ap.add_argument("--csv", action="store_true", help="write the CSV grid")
    ap.add_argument("--criteria", type=_criteria_list, help="verify-all: comma-separated criterion ids")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        for name in ("tol_abs", "tol_rel"):
            v = getattr(args, name)
            if v is not None and not v > 0:
                raise SpecError(f"--{name.replace('_', '-')} must be positive")
        if args.prefix_n is not None and args.prefix_n < ws.MIN_PREFIX:
            raise SpecError(f"--prefix-n must be at least {ws.MIN_PREFIX}")
        if args.grid_points is not None and args.grid_points < 2:
            raise SpecError("--grid-points must be at least 2")
        raw = load_json(args.config) if args.config else default_config()
        cfg = raw.get(args.command, raw) if isinstance(raw.get(args.command), dict) else raw
        cfg = copy.deepcopy(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise SpecError(f"output directory {out} is not writable")
        threads()
        runner = Run(args.command, cfg, args)
    except (SpecError, ParameterError) as exc:
        print(f"ultraflat: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ultraflat: config error: {exc}", file=sys.stderr)
        return 2
    try:
        ok = HANDLERS[args.command](runner)
    except VerificationFailure:
        return 1
    except (SpecError, ParameterError) as exc:
        print(f"ultraflat: config error: {exc}", file=sys.stderr)
        return 2
    except UltraflatError as exc:
        print(f"ultraflat: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

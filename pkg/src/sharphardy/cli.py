"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 invariant or expectation
violation, 3 solver not converged.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import deltacalc as dc
from . import hardyopt as ho
from .config import load_config
from .distfield import build_field, slice2d, write_pgm, write_raw
from .domains import convexity_report, make_domain
from .errors import ConfigurationError, DomainError, PreconditionError
from .parallel import set_threads

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_UNCONVERGED = 0, 1, 2, 3
IDENTITY_RATE = 1.28  # relative identity residual allowed per unit of grid spacing (1e-2 at 1/128)


# -- helpers --------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path, obj):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def write_history(path, history):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iter,value\n")
        for i, v in enumerate(history):
            fh.write(f"{i},{v!r}\n")


def _domain(cfg):
    params = {k: v for k, v in cfg.domain.items() if k != "kind"}
    try:
        return make_domain(cfg.domain["kind"], **params)
    except ConfigurationError as exc:
        if exc.line is not None:
            raise
        key = str(exc).split(":", 1)[0].strip()
        if key == "level-set expression":
            key = "expr"
        line, col = cfg.where("domain", key if ("domain", key) in cfg.positions else "kind")
        raise ConfigurationError(str(exc), line, col) from None
    except DomainError as exc:
        raise cfg.error("domain", "kind", str(exc)) from None


def _field(cfg, domain, ridge=True):
    try:
        return build_field(domain, cells=None if cfg.spacing else cfg.cells,
                           spacing=cfg.spacing, ridge=ridge)
    except ConfigurationError as exc:
        key = "spacing" if cfg.spacing else "cells"
        raise cfg.error("grid", key, str(exc)) from None


def _opts(cfg, field=None):
    h = cfg.solver_spacing
    if h is None and field is not None:
        h = field.grid.spacing
    return ho.SolverOptions(max_iter=cfg.max_iter, tol=cfg.tol, seed=cfg.seed, spacing=h)


def _report(cfg, domain, kind, value, extra):
    out = {"domain": domain.describe(), "grid": {"cells": cfg.cells, "spacing": cfg.spacing},
           "p": cfg.p, "kind": kind, "value": value, "seed": cfg.seed,
           "tolerances": {"solver": cfg.tol}, "flags": []}
    if cfg.q is not None:
        out["q"] = cfg.q
    out.update(extra)
    return out


# -- commands -------------------------------------------------------------

def cmd_analyze(cfg, out):
    domain = _domain(cfg)
    f = _field(cfg, domain)
    rep = convexity_report(domain)
    lap = dc.neg_laplacian_formula(f)
    rel, checked = dc.fd_agreement(lap, f)
    ie = dc.inf_equivalence(f, lap, rep)
    flags = list(f.flags) + list(lap.flags)
    violations = []
    if rel > 0.05:
        violations.append(f"formula and finite-difference Laplacian differ by {rel:.4f} relative")
    if not ie.agree:
        violations.append("inf of -Laplacian(delta) and inf of H disagree beyond tolerance")
    if lap.flags:
        violations.append("inconsistent curvature cells")
    g = f.grid
    exports = {"delta": f.delta, "neg_lap_formula": lap.neg_lap_formula,
               "neg_lap_fd": lap.neg_lap_fd, "singular_mask": f.singular_mask.astype(float),
               "h_field": f.h_field}
    for name, arr in exports.items():
        write_raw(out / f"{name}.raw", arr, g)
        write_pgm(out / f"{name}.pgm", slice2d(arr, cfg.slice_axis, cfg.slice_index),
                  slice2d(g.inside_mask, cfg.slice_axis, cfg.slice_index))
    report = {
        "domain": domain.describe(), "grid": g.describe(), "seed": cfg.seed, "kind": "analyze",
        "convexity": {"H0": rep.H0, "kappa0": rep.kappa0,
                      "weakly_mean_convex": rep.weakly_mean_convex,
                      "witness_point": rep.witness_point, "H_min_sampled": rep.H_min_sampled,
                      "margin": rep.margin, "tol": rep.tol},
        "weakly_mean_convex": rep.weakly_mean_convex,
        "inf_H": rep.H0,
        "inf_equivalence": {"inf_neg_lap": ie.inf_neg_lap, "inf_H": ie.inf_H,
                            "tolerance": ie.tolerance, "agree": ie.agree,
                            "verdict_mean_convex": ie.verdict_mean_convex},
        "laplacian": {"fd_max_relative_gap": rel, "checked_nodes": checked,
                      "inconsistent_nodes": lap.inconsistent_count},
        "eikonal_error": f.eikonal_error,
        "singular_nodes": int(f.singular_mask.sum()),
        "flags": flags, "violations": violations,
    }
    write_json(out / "report.json", report)
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_mu(cfg, out):
    domain = _domain(cfg)
    f = None
    if cfg.solver_spacing is None:
        f = _field(cfg, domain, ridge=False)
    opts = _opts(cfg, f)
    try:
        q = ho.estimate_mu(domain, f, cfg.p, opts)
    except PreconditionError as exc:
        raise cfg.error("domain", "kind", str(exc)) from None
    report = _report(cfg, domain, q.kind, q.value,
                     {"iterations": q.iterations, "converged": q.converged,
                      "upper_bound": q.upper_bound, "grid_resolution": q.grid_resolution,
                      "lower_bounds": {"sharp_constant": ho.hardy_constant(cfg.p)},
                      "flags": q.flags, "details": q.extras})
    write_json(out / "report.json", report)
    write_history(out / "history.csv", q.history)
    return EXIT_OK if q.converged else EXIT_UNCONVERGED


def cmd_lambda(cfg, out):
    domain = _domain(cfg)
    mode = cfg.lambda_mode
    if mode == "auto":
        mode = "analytic" if domain.analytic else "grid"
    rep = convexity_report(domain)
    bound = ho.lambda_curvature_bound(rep.H0, domain.n, cfg.p)
    extra = {"mode": mode, "H0": rep.H0, "weakly_mean_convex": rep.weakly_mean_convex}
    if not rep.weakly_mean_convex:
        extra["flags"] = [f"precondition: not weakly mean convex (H0 = {rep.H0:.6g})"]
        write_json(out / "report.json", _report(cfg, domain, "lambda_lower", None, extra))
        return EXIT_VIOLATION
    if mode == "analytic":
        try:
            a = ho.lambda_analytic(domain, cfg.p)
        except PreconditionError as exc:
            raise cfg.error("run", "lambda_mode", str(exc)) from None
        value = a.value
        extra.update({"witness_point": a.point, "witness_delta": a.delta, "samples": a.samples})
    else:
        f = _field(cfg, domain, ridge=False)
        lap = dc.neg_laplacian_formula(f)
        value = ho.lambda_lower_bound(f, lap, cfg.p, rep)
        extra["grid"] = f.grid.describe()
    tol = 1e-9 + 2 * rep.margin
    ok = value >= bound - tol
    extra.update({"lower_bounds": {"curvature_bound": bound}, "tolerances": {"bound": tol},
                  "contract_holds": ok})
    write_json(out / "report.json", _report(cfg, domain, "lambda_lower", value, extra))
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_table(cfg, out):
    domain = _domain(cfg)
    f = None
    if not domain.analytic or domain.volume() is None or domain.interior_radius() is None:
        f = _field(cfg, domain, ridge=False)
    lam = None
    if not domain.analytic:
        lap = dc.neg_laplacian_formula(f)
        good = lap.good_mask & np.isfinite(lap.neg_lap_formula) & (f.delta > 0)
        lam = float(np.min(ho.lambda_factor(lap.neg_lap_formula[good], f.delta[good], 2.0)))
    t = ho.remainder_table(domain, f, lam)
    write_json(out / "report.json", _report(cfg, domain, "remainder_table", None,
                                            {"table": t.to_dict(), "flags": t.flags}))
    return EXIT_OK


def cmd_verify(cfg, out):
    domain = _domain(cfg)
    f = _field(cfg, domain)
    rep = convexity_report(domain)
    lap = dc.neg_laplacian_formula(f)
    checks = {}
    bumps = dc.random_bumps(domain, f, cfg.trials, cfg.seed)
    res = dc.distributional_check(f, lap, bumps)
    worst = min(r.residual / r.max_phi for r in res)
    checks["distributional"] = {
        "pass": all(r.residual >= -max(1e-3 * r.max_phi, r.eps_quad) for r in res),
        "min_residual_over_max_phi": worst, "max_eps_quad": max(r.eps_quad for r in res)}
    trials = ho.bump_trials(f, cfg.trials, cfg.seed + 1)
    ident = [ho.identity_check_L2(t, f) for t in trials]
    id_tol = IDENTITY_RATE * f.grid.spacing
    checks["identity_L2"] = {"pass": all(r.relative <= id_tol for r in ident),
                             "max_relative_residual": max(r.relative for r in ident),
                             "tolerance": id_tol}
    ps = sorted({1.5, 2.0, 3.0, cfg.p})
    vi = {str(p): ho.vector_inequality_check(p, 100000, cfg.seed) for p in ps}
    checks["vector_inequality"] = {"pass": all(v == 0 for v in vi.values()), "violations": vi}
    if rep.H0 >= 0:
        g = dc.growth_estimate_check(f, lap, cfg.p, max(rep.H0, 0.0))
        checks["growth_estimate"] = {"pass": g == 0, "violations": g, "H0": rep.H0}
    else:
        ci = ho.corrected_inequality_check(domain, f, cfg.p, cfg.trials, cfg.seed + 2, rep)
        checks["corrected_inequality"] = {"pass": ci == 0, "violations": ci, "H0": rep.H0}
    ok = all(c["pass"] for c in checks.values())
    write_json(out / "report.json", _report(cfg, domain, "verify", None,
                                            {"checks": checks, "pass": ok, "grid": f.grid.describe(),
                                             "flags": f.flags + lap.flags}))
    return EXIT_OK if ok else EXIT_VIOLATION


# -- reproduction ---------------------------------------------------------

def _entry(name, value, expected, tol, relation="close"):
    if relation == "close":
        ok = value is not None and abs(value - expected) <= tol
    elif relation == "at_least":
        ok = value is not None and value >= expected - tol
    elif relation == "at_most":
        ok = value is not None and value <= expected + tol
    elif relation == "below":
        ok = value is not None and value < expected - tol
    else:
        ok = bool(value)
    return {"name": name, "value": value, "expected": expected, "tol": tol,
            "relation": relation, "ok": bool(ok)}


def _rep_ball(seed):
    items = []
    a = ho.lambda_analytic(make_domain("ball", R=1.0, dim=3))
    items.append(_entry("lambda analytic, ball n=2 R=1", a.value, 4.0, 1e-6))
    disk = make_domain("ball", R=1.0, dim=2)
    f = build_field(disk, cells=256, ridge=False)
    lam = ho.lambda_lower_bound(f, dc.neg_laplacian_formula(f))
    items.append(_entry("lambda grid 256, disk R=1", lam, 2.0, 0.04))
    return items


def _rep_critical_torus(seed):
    a = ho.lambda_analytic(make_domain("torus", r=1.0, R=2.0))
    return [_entry("lambda analytic, torus(1,2)", a.value, 1.0, 1e-6)]


def _rep_thick_torus(seed):
    T = make_domain("torus", r=1.0, R=3.0)
    rep = convexity_report(T)
    a = ho.lambda_analytic(T)
    return [_entry("H0, torus(1,3)", rep.H0, 0.5, 1e-3),
            _entry("lambda analytic, torus(1,3)", a.value, 1.5605836160048558, 1e-6),
            _entry("lambda >= (2/n) H0^2", a.value, ho.lambda_curvature_bound(0.5, 2), 1e-9, "at_least")]


def _rep_annulus_failure(seed):
    items, vals = [], []
    opts = ho.SolverOptions(seed=seed, spacing=2.0 / 256)
    for r_in in (0.2, 0.1, 0.05):
        q = ho.estimate_mu(make_domain("annulus", r_in=r_in, r_out=1.0), None, 2.0, opts)
        vals.append(q.value)
        items.append({"name": f"mu, annulus({r_in}, 1)", "value": q.value, "converged": q.converged,
                      "ok": True, "relation": "record"})
    items.append(_entry("mu strictly decreasing in r_in", bool(vals[0] > vals[1] > vals[2]), True, 0, "true"))
    items.append(_entry("mu below 1/4 at r_in = 0.05", vals[2], 0.25, 0.0, "below"))
    q = ho.estimate_mu(make_domain("annulus", r_in=0.01, r_out=1.0), None, 2.0, opts)
    items.append({"name": "mu, annulus(0.01, 1) (informational)", "value": q.value,
                  "ok": True, "relation": "record"})
    return items


def _rep_minimal_slab(seed):
    C = make_domain("catenoid_slab", c=1.0, thickness=2.0)
    k0 = 1.0 / (C.c * np.cosh(C.T / C.c) ** 2)
    a = ho.lambda_analytic(C)
    rng = np.random.default_rng(seed)
    s = rng.uniform(-C.T, C.T, 10000)
    k = C.kappa_s(s)
    t = rng.uniform(0, 1, 10000) / np.abs(k)
    ratio = k * k / (1 - k * k * t * t)
    pointwise = int(np.sum(ratio < k * k))
    return [_entry("pointwise k^2/(1-k^2 t^2) >= k^2 violations", pointwise, 0, 0),
            _entry("lambda analytic >= kappa0^2", a.value, k0 ** 2, 1e-9, "at_least")]


def _rep_square_sharpness(seed):
    sq = make_domain("box", sides="1 1")
    items, vals = [], []
    for N in (64, 128, 256):
        q = ho.estimate_mu(sq, None, 2.0, ho.SolverOptions(seed=seed, spacing=1.0 / N))
        vals.append(q.value)
        items.append(_entry(f"mu in [0.25, 0.32] at 1/{N}", q.value, 0.285, 0.035))
    items.append(_entry("mu non-increasing under refinement",
                        bool(vals[0] >= vals[1] >= vals[2]), True, 0, "true"))
    layer = ho.gk.make_layer(sq)
    qs = [ho.boundary_layer_quotient(sq, 0.5 + e, 2.0, None, layer) for e in (0.2, 0.1, 0.05, 0.01)]
    items.append(_entry("boundary-layer quotients decreasing",
                        bool(all(a > b for a, b in zip(qs, qs[1:])) and qs[-1] > 0.25), True, 0, "true"))
    items.append(_entry("boundary-layer quotient at eps = 0.01", qs[-1], 0.28, 0.0, "at_most"))
    return items


EXAMPLES = {
    "ball": _rep_ball,
    "critical-torus": _rep_critical_torus,
    "thick-torus": _rep_thick_torus,
    "annulus-failure": _rep_annulus_failure,
    "minimal-slab": _rep_minimal_slab,
    "square-sharpness": _rep_square_sharpness,
}


def cmd_reproduce(example, seed, out):
    items = EXAMPLES[example](seed)
    bad = [it["name"] for it in items if not it["ok"]]
    write_json(out / "report.json", {"kind": "reproduce", "example": example, "seed": seed,
                                     "quantities": items, "mismatches": bad, "pass": not bad})
    for name in bad:
        print(f"mismatch: {name}", file=sys.stderr)
    return EXIT_VIOLATION if bad else EXIT_OK


# -- entry point ----------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run configuration")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker thread cap")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap = argparse.ArgumentParser(prog="sharphardy", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("analyze", "distance field, curvature and Laplacian diagnostics"),
                      ("mu", "discrete Hardy constant"),
                      ("lambda", "curvature lower bound for the remainder constant"),
                      ("table", "remainder-constant table"),
                      ("verify", "distributional, identity and inequality checks")):
        sub.add_parser(name, parents=[common], help=hlp)
    rp = sub.add_parser("reproduce", parents=[common], help="run a pinned example")
    rp.add_argument("example", choices=sorted(EXAMPLES))
    return ap


COMMANDS = {"analyze": cmd_analyze, "mu": cmd_mu, "lambda": cmd_lambda,
            "table": cmd_table, "verify": cmd_verify}


def main(argv=None):
    args = build_parser().parse_args(argv)
    set_threads(args.threads)
    out = args.out
    try:
        with threadpool_limits(limits=1):
            if args.command == "reproduce":
                seed = 0 if args.seed is None else args.seed
                out.mkdir(parents=True, exist_ok=True)
                return cmd_reproduce(args.example, seed, out)
            if args.config is None:
                raise ConfigurationError("--config is required for this command")
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            out.mkdir(parents=True, exist_ok=True)
            return COMMANDS[args.command](cfg, out)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        set_threads(1)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: compute, check, john, search, curve.

Exit codes: 0 success or inequality holds, 2 input error, 3 evaluation
error, 4 violation candidate.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import bodies, functionals, john, search, verify
from .errors import DualVolError
from .quad import (DEFAULT_SAMPLES, SCHEMES, Estimate, default_rule_size,
                   default_scheme, gaussian_sample, omega, sample_gauges,
                   sphere_rule)
from .report import finish_manifest, make_manifest, write_csv, write_json

EXIT_OK, EXIT_INPUT, EXIT_EVAL, EXIT_VIOLATION = 0, 2, 3, 4

log = logging.getLogger("dualvol")


class InputError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _load_body(path):
    try:
        return bodies.load(path)
    except (OSError, ValueError, KeyError, TypeError, DualVolError) as exc:
        raise InputError(f"cannot read body file {path}: {exc}") from exc


def _q_values(args, n=None):
    qs = list(args.q or [])
    if args.q_range:
        a, b, h = args.q_range
        if not h > 0 or b < a:
            raise InputError("--q-range needs START <= STOP and STEP > 0")
        k = int(math.floor((b - a) / h + 1e-9))
        qs += [round(a + i * h, 12) for i in range(k + 1)]
    if not qs:
        raise InputError("no exponents given; use --q or --q-range")
    return qs


def _rule(args, n):
    """Shared sphere rule from the flags; None selects the default per-body rule."""
    scheme = args.scheme
    if scheme == "facet" or (scheme is None and args.rule_size is None):
        return None
    scheme = scheme or default_scheme(n)
    return sphere_rule(n, scheme, args.rule_size or default_rule_size(n), args.seed)


def _rule_meta(rule):
    return rule.describe() if rule is not None else {"scheme": "facet-or-default"}


def _config(args):
    return {k: v for k, v in vars(args).items() if k != "func"}


def _emit(args, name, header, rows, manifest, extra_json=None):
    """Write rows as CSV or JSON into --out (with manifest) or to stdout."""
    h = manifest["manifest_hash"]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.format == "csv":
            write_csv(out / f"{name}.csv", header, rows, h)
        else:
            write_json(out / f"{name}.json",
                       {"columns": header, "rows": rows, **(extra_json or {})}, h)
        return out
    if args.format == "csv":
        write_csv(sys.stdout, header, rows, h)
    else:
        json.dump({"columns": header, "rows": rows, **(extra_json or {}), "manifest_hash": h},
                  sys.stdout, indent=2, default=str)
        sys.stdout.write("\n")
    return None


# ------------------------------------------------------------------ commands

def cmd_compute(args):
    K = _load_body(args.body)
    n = K.dim
    qs = _q_values(args)
    forms = args.formulation or ["sphere"]
    t0 = time.perf_counter()
    rule = _rule(args, n) or functionals.default_rule(K)
    sample = None
    if any(f != "sphere" for f in forms):
        sample = gaussian_sample(n, args.samples, args.seed)
    manifest = make_manifest("compute", _config(args), {"seed": args.seed}, rule.describe())
    rows = []
    gauges = sample_gauges(K, sample) if sample is not None else None
    for form in forms:
        for q in qs:
            if form == "sphere":
                if q == 0:
                    vq = Estimate(omega(n), 0.0)
                    vb = functionals.normalized_dual_querm(K, 0.0, rule)
                    vb = Estimate(vb.value, vb.stderr)
                else:
                    r = functionals.dual_querm(K, q, rule)
                    vq = Estimate(r.value, r.stderr)
                    vb = functionals.normalize(vq, q, n)
            elif q == 0:
                # E(K) recovered from the Gaussian log-moment
                c0, c1 = functionals.entropy_constants(n)
                eg = functionals.gaussian_dual_entropy(K, sample, gauges)
                vq = Estimate(omega(n), 0.0)
                vb = functionals.normalize_entropy(
                    Estimate((eg.value - c1) / c0, eg.stderr / c0), n)
            else:
                if form == "gaussian":
                    r = functionals.gaussian_dual_moment(K, q, sample, gauges)
                else:
                    r = functionals.layer_cake_moment(K, q, sample, gauges=gauges)
                vq = Estimate(r.dual_volume, r.dual_volume_stderr)
                vb = functionals.normalize(vq, q, n)
            rows.append([q, form, vq.value, vq.stderr, vb.value, vb.stderr])
            print(f"q={q:g} [{form}] V_q={vq.value:.12g} +/- {vq.stderr:.3g}  "
                  f"normalized={vb.value:.12g} +/- {vb.stderr:.3g}", file=sys.stderr)
    header = ["q", "formulation", "dual_volume", "dual_volume_stderr",
              "normalized", "normalized_stderr"]
    out = _emit(args, "compute", header, rows, manifest, {"body_hash": bodies.body_hash(K)})
    if out:
        finish_manifest(manifest, t0, out)
    return EXIT_OK


def cmd_check(args):
    Ks = [_load_body(p) for p in args.bodies]
    need = 2 if args.name in ("bm", "logconcave") else 1
    if len(Ks) != need:
        raise InputError(f"check {args.name} takes {need} body file(s), got {len(Ks)}")
    n = Ks[0].dim
    if any(B.dim != n for B in Ks):
        raise InputError("bodies live in different dimensions")
    t0 = time.perf_counter()
    rule = _rule(args, n)
    manifest = make_manifest("check " + args.name, _config(args), {"seed": args.seed},
                             _rule_meta(rule))
    reports = []
    if args.name in ("bm", "logconcave", "rvip"):
        qs = _q_values(args)
        for q in qs:
            if args.name == "bm":
                reports.append(verify.check_bm(Ks[0], Ks[1], q, rule))
            elif args.name == "logconcave":
                for lam in args.lam:
                    reports.append(verify.check_bm_logconcave(Ks[0], Ks[1], lam, q, rule))
            else:
                reports.append(verify.check_reverse_isop(Ks[0], q, rule, args.auto_john))
    else:
        sample = gaussian_sample(n, args.samples, args.seed)
        for t in args.t:
            reports.append(verify.check_ss_tail(Ks[0], t, sample, args.auto_john))
    for r in reports:
        print(r.line())
    header = ["name", "q", "param", "lhs", "rhs", "margin", "uncertainty", "verdict"]
    rows = [[r.name, r.q if r.q is not None else "",
             r.params.get("lam", r.params.get("t", "")), r.lhs, r.rhs, r.margin,
             r.uncertainty, r.verdict.value] for r in reports]
    out = _emit(args, "check", header, rows, manifest,
                {"reports": [r.to_dict() for r in reports]})
    if out:
        finish_manifest(manifest, t0, out)
    return EXIT_VIOLATION if any(r.violation for r in reports) else EXIT_OK


def cmd_john(args):
    K = _load_body(args.body)
    if not K.symmetric:
        raise InputError("John position is computed for origin-symmetric bodies only")
    t0 = time.perf_counter()
    E = john.john_ellipsoid(K)
    T = john._inv_sqrt(E.matrix)
    Kj = bodies.linear_image(T, K)
    manifest = make_manifest("john", _config(args))
    h = manifest["manifest_hash"]
    contacts = None
    self_check = "skipped"
    if bodies.is_polytope(K):
        contacts = john.contact_points(Kj)
        # solve again from scratch on the explicit vertex form
        john.check_john_position(bodies.as_vpolytope(Kj))
        self_check = "passed"
    print(f"John ellipsoid after {E.iterations} iterations; volume {E.volume():.12g}")
    print("transform:\n" + np.array2string(T, precision=10))
    if contacts is not None:
        print(f"{len(contacts.directions)} contact pairs, isotropy residual {contacts.residual:.3g}")
    print(f"self-check: {self_check}")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    bodies.save(Kj, out / "john_body.json")
    write_json(out / "ellipsoid.json", {"ellipsoid": E.to_dict(), "transform": T.tolist(),
                                        "iterations": E.iterations,
                                        "body_hash": bodies.body_hash(K)}, h)
    rep = {"self_check": self_check, "john_body_hash": bodies.body_hash(Kj)}
    if contacts is not None:
        rep.update(contacts.to_dict())
    write_json(out / "contacts.json", rep, h)
    finish_manifest(manifest, t0, out)
    return EXIT_OK


def cmd_search(args):
    try:
        cfg = search.SearchConfig.load(args.config)
    except (OSError, ValueError, TypeError, DualVolError) as exc:
        raise InputError(f"bad search config {args.config}: {exc}") from exc
    t0 = time.perf_counter()
    manifest = make_manifest("search", {"config": cfg.to_dict(), "args": _config(args)},
                             {"seed": cfg.seed},
                             {"scheme": cfg.scheme or "facet", "size": cfg.rule_size,
                              "order": cfg.order})
    findings, archive = search.search_counterexamples(cfg)
    out = Path(args.out or "findings")
    search.write_findings(findings, archive, out, manifest["manifest_hash"])
    summary = search.summarize(findings)
    manifest["summary"] = summary
    finish_manifest(manifest, t0, out)
    print(json.dumps(summary, default=str))
    if cfg.mode == "regression" and summary["surviving"]:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_curve(args):
    K = _load_body(args.body)
    n = K.dim
    qs = _q_values(args)
    if min(qs) < -10 or max(qs) > n:
        raise InputError(f"q-range must lie within [-10, {n}]")
    t0 = time.perf_counter()
    rule = _rule(args, n)
    manifest = make_manifest("curve", _config(args), {"seed": args.seed}, _rule_meta(rule))
    rows = []
    for q in qs:
        r = verify.check_reverse_isop(K, q, rule, args.auto_john)
        rows.append([q, r.lhs, r.rhs, r.margin, r.uncertainty])
    out = _emit(args, "curve", ["q", "normalized_K", "normalized_cube", "margin", "uncertainty"],
                rows, manifest)
    if out:
        finish_manifest(manifest, t0, out)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--q", type=float, action="append",
                        help="exponent; repeat for several")
    common.add_argument("--q-range", type=float, nargs=3, metavar=("START", "STOP", "STEP"),
                        help="inclusive grid of exponents")
    common.add_argument("--scheme", choices=SCHEMES + ("facet",),
                        help="sphere rule (default: cone cubature for polytopes)")
    common.add_argument("--rule-size", type=int, help="rule size m")
    common.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                        help="Gaussian sample size (default %(default)s)")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--auto-john", action="store_true",
                        help="move bodies to John position before checking")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dualvol", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute", parents=[common], help="dual volumes of one body")
    c.add_argument("body")
    c.add_argument("--formulation", action="append",
                   choices=("sphere", "gaussian", "layercake"))
    c.set_defaults(func=cmd_compute)

    k = sub.add_parser("check", parents=[common], help="check one inequality")
    k.add_argument("name", choices=("bm", "logconcave", "rvip", "ss-tail"))
    k.add_argument("bodies", nargs="+")
    k.add_argument("--lam", type=float, nargs="+", default=[0.5])
    k.add_argument("--t", type=float, nargs="+", default=[1.0])
    k.set_defaults(func=cmd_check)

    j = sub.add_parser("john", parents=[common], help="John ellipsoid and position")
    j.add_argument("body")
    j.set_defaults(func=cmd_john)

    s = sub.add_parser("search", parents=[common], help="randomized counterexample search")
    s.add_argument("config")
    s.set_defaults(func=cmd_search)

    v = sub.add_parser("curve", parents=[common], help="normalized dual volume curve vs the cube")
    v.add_argument("body")
    v.set_defaults(func=cmd_curve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DualVolError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

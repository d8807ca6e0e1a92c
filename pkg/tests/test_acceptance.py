"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""
import json
import math
import time
from itertools import combinations

import numpy as np
import pytest
from scipy import integrate

from dualvol import bodies, functionals as fn, john, search, verify
from dualvol.quad import gaussian_sample, sphere_rule

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

SEARCH_SEED = 2024


def record(k, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {k:>2}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def suite_findings(**kw):
    cfg = search.SearchConfig(dim=3, seed=SEARCH_SEED, **kw)
    findings, archive = search.search_counterexamples(cfg)
    return cfg, findings, archive


def search_detail(findings):
    s = search.summarize(findings)
    return (f"{s['checks']} checks, {s['candidates']} candidates, {s['surviving']} surviving, "
            f"{s['errors']} errors, min margin {s['min_margin']:.3g}")


def test_c01_ball_normalization():
    B = bodies.ball(3)
    errs = {q: abs(fn.normalized_dual_querm(B, q).value - 1.0) for q in (-2, -1, 0, 0.5, 1, 2, 3)}
    worst = max(errs.values())
    record(1, worst <= 1e-9, f"max |normalized V_q(B_2^3) - 1| = {worst:.2e} (tol 1e-9)")


def test_c02_square_closed_form():
    oracle = 4 * integrate.quad(lambda t: 1 / math.cos(t), 0, math.pi / 4, epsabs=0, epsrel=1e-13)[0]
    closed = 4 * math.log(1 + math.sqrt(2))
    v = fn.dual_querm(bodies.cube(2), 1.0, sphere_rule(2, "trapezoid", 4096)).value
    err = abs(v - oracle)
    record(2, err <= 1e-5 and abs(oracle - closed) < 1e-12,
           f"V_1(B_inf^2) = {v:.10f}, oracle {oracle:.10f}, error {err:.2e} (tol 1e-5)")


def test_c03_volume_case():
    v3 = fn.dual_querm(bodies.cube(3), 3.0, sphere_rule(3, "fibonacci", 20_000)).value
    v2 = fn.dual_querm(bodies.cube(2), 2.0, sphere_rule(2, "trapezoid", 4096)).value
    rel3, err2 = abs(v3 - 8) / 8, abs(v2 - 4)
    record(3, rel3 <= 5e-3 and err2 <= 1e-6,
           f"V_3(B_inf^3) = {v3:.6f} (rel err {rel3:.2e}, tol 5e-3); "
           f"V_2(B_inf^2) = {v2:.9f} (err {err2:.2e}, tol 1e-6)")


def test_c04_formulation_equivalence():
    K = bodies.random_body(bodies.GeneratorSpec(3, 20), 42)
    S = gaussian_sample(3, 200_000, seed=0)
    g = bodies.gauge(K, S.points)
    worst = 0.0
    parts = []
    for q in (-1.0, 1.0, 1.5, 2.5):
        runs = {"sphere": fn.dual_querm(K, q), "gaussian": fn.gaussian_dual_moment(K, q, S, g),
                "layercake": fn.layer_cake_moment(K, q, S, gauges=g)}
        est = {k: (r.dual_volume, r.dual_volume_stderr) for k, r in runs.items()}
        for a, b in combinations(est, 2):
            z = abs(est[a][0] - est[b][0]) / math.hypot(est[a][1], est[b][1])
            worst = max(worst, z)
        parts.append(f"q={q:g}: {est['sphere'][0]:.5f}/{est['gaussian'][0]:.5f}/{est['layercake'][0]:.5f}")
    record(4, worst <= 3.0, f"max pairwise |diff|/combined stderr = {worst:.2f} (tol 3); " + "; ".join(parts))


def test_c05_constants():
    e1 = abs(fn.c_constant(2, 1.0) - fn.c_constant_quadrature(2, 1.0))
    e0 = abs(fn.c_constant(2, 0.0) - fn.c_constant_quadrature(2, 0.0))
    t1 = abs(fn.c_constant(2, 1.0) - (2 * math.pi) ** -0.5)
    t0 = abs(fn.c_constant(2, 0.0) - 1 / math.pi)
    rng = np.random.default_rng(55)
    spot = 0.0
    for _ in range(25):
        n = int(rng.integers(1, 7))
        q = float(rng.uniform(-5, n - 0.05))
        spot = max(spot, abs(fn.c_constant(n, q) - fn.c_constant_quadrature(n, q)))
    worst = max(e1, e0, t1, t0, spot)
    record(5, worst <= 1e-10, f"c(2,1), c(2,0) and 25 random (n<=6, q) spot checks: max error {worst:.1e} (tol 1e-10)")


def test_c06_brunn_minkowski_suite():
    _, f, _ = suite_findings(checker="bm", q_grid=(0.5, 1.0, 2.0, 3.0), trials=100)
    surviving = sum(x.survived for x in f)
    errors = sum(x.error is not None for x in f)
    _, fd, _ = suite_findings(checker="bm", q_grid=(0.5, 1.0, 2.0, 3.0), trials=25, pairs="dilate")
    # rhs = V(K)^{1/q} + V(2K)^{1/q} = 3 V(K)^{1/q}
    worst = max(abs(x.margin) / (x.report["rhs"] / 3) for x in fd)
    record(6, surviving == 0 and errors == 0 and worst <= 1e-9,
           f"random pairs: {search_detail(f)}; dilate pairs: max |margin|/scale = {worst:.1e} (tol 1e-9)")


def test_c07_logconcavity_suite():
    _, f, _ = suite_findings(checker="logconcave", q_grid=(1.0, 2.0), lambdas=(0.25, 0.5, 0.75), trials=50)
    ok = sum(x.survived for x in f) == 0 and all(x.error is None for x in f)
    record(7, ok, search_detail(f))


def test_c08_mvee():
    worst, mono, contain = 0.0, True, True
    for n in range(2, 7):
        P = np.vstack([np.eye(n), -np.eye(n)])
        E = john.mvee(P, eps=1e-7)
        worst = max(worst, np.abs(E.matrix - np.eye(n)).max())
    rng = np.random.default_rng(8)
    for n in range(2, 7):
        P = rng.standard_normal((6 * n, n)) @ rng.standard_normal((n, n))
        P = np.vstack([P, -P])
        E = john.mvee(P, eps=1e-7)
        obj = np.array(E.objective)
        mono &= bool(np.all(np.diff(obj) >= -1e-12 * np.abs(obj[1:])))
        lev = np.einsum("ij,jk,ik->i", P, np.linalg.inv(E.matrix), P)
        contain &= bool(lev.max() <= 1 + 1e-7)
    record(8, worst <= 1e-6 and mono and contain,
           f"+-e_i (n=2..6): max |M - I| = {worst:.1e} (tol 1e-6); objective monotone: {mono}; "
           f"containment: {contain}")


def test_c09_john_pipeline():
    cube_err = max(np.abs(john.john_ellipsoid(bodies.cube(n)).matrix - np.eye(n)).max() for n in (2, 3, 4))
    rerun, passed = 0.0, 0
    for s in range(20):
        K = bodies.random_body(bodies.GeneratorSpec(3, 20), 900 + s)
        V = bodies.as_vpolytope(john.to_john_position(K))
        john.check_john_position(V)
        passed += 1
        rerun = max(rerun, np.abs(john.john_ellipsoid(V).matrix - np.eye(3)).max())
    resid = max(max(john.contact_points(bodies.cube(n)).residual,
                    john.contact_points(bodies.cross_polytope(n, math.sqrt(n))).residual) for n in (2, 3, 4))
    record(9, cube_err <= 1e-5 and passed == 20 and rerun <= 1e-4 and resid <= 1e-8,
           f"cube |M - I| = {cube_err:.1e} (tol 1e-5); {passed}/20 pass the inscribed-ball check; "
           f"re-run |M - I| = {rerun:.1e} (tol 1e-4); isotropy residual = {resid:.1e} (tol 1e-8)")


def test_c10_reverse_isoperimetric_suite():
    _, f, _ = suite_findings(checker="rvip", q_grid=(-2.0, -1.0, 0.0, 1.0, 2.0, 3.0), trials=100)
    ok = sum(x.survived for x in f) == 0 and all(x.error is None for x in f)
    qs = (-2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
    cube = max(abs(verify.check_reverse_isop(bodies.cube(3), q).margin) for q in qs)
    R = bodies.random_rotation(3, np.random.default_rng(10))
    rot = max(abs(verify.check_reverse_isop(bodies.linear_image(R, bodies.cube(3)), q).margin) for q in qs)
    record(10, ok and cube <= 1e-6 and rot <= 1e-5,
           f"{search_detail(f)}; cube |margin| = {cube:.1e} (tol 1e-6); rotated cube {rot:.1e} (tol 1e-5)")


def test_c11_ss_tail_suite():
    _, f, arch = suite_findings(checker="ss-tail", levels=(0.5, 1.0, 2.0), samples=200_000, trials=100)
    runner = search._Runner(search.SearchConfig(dim=3, seed=SEARCH_SEED, checker="rvip", trials=100))
    same = set(arch) == {bodies.body_hash(runner.bodies_for(t)[0]) for t in range(100)}
    ok = sum(x.survived for x in f) == 0 and all(x.error is None for x in f)
    S = gaussian_sample(3, 200_000, seed=0)
    cube = [verify.check_ss_tail(bodies.cube(3), t, S).margin for t in (0.5, 1.0, 2.0)]
    record(11, ok and same and all(m == 0.0 for m in cube),
           f"{search_detail(f)}; same bodies as criterion 10: {same}; cube margins {cube} (exactly 0)")


def test_c12_entropy_consistency():
    K = bodies.random_body(bodies.GeneratorSpec(3, 20), 42)
    worst = 0.0
    for B in (bodies.cube(3), K):
        v0 = fn.normalized_dual_querm(B, 0.0).value
        for q in (1e-3, -1e-3):
            worst = max(worst, abs(fn.normalized_dual_querm(B, q).value - v0) / v0)
    S = gaussian_sample(3, 200_000, seed=0)
    c0, c1 = fn.entropy_constants(3)
    zmax = 0.0
    for B in (bodies.cube(3), K, bodies.ball(3, 2.0)):
        eg = fn.gaussian_dual_entropy(B, S)
        zmax = max(zmax, abs(eg.value - (c0 * fn.dual_entropy(B).value + c1)) / eg.stderr)
    record(12, worst <= 1e-3 and zmax <= 3,
           f"max |V_(+-1e-3) - V_0| / V_0 = {worst:.1e} (tol 1e-3); "
           f"E_gamma vs c0 E + c1: max z = {zmax:.2f} (tol 3)")


def test_c13_exploration_q_above_n(tmp_path, caplog):
    caplog.set_level("INFO", logger="dualvol.search")
    t0 = time.perf_counter()
    cfg, f, arch = suite_findings(checker="bm", q_grid=(4.0,), trials=200, mode="exploration")
    out = search.write_findings(f, arch, tmp_path, "acceptance")
    elapsed = time.perf_counter() - t0
    hashes = {x.body_hash_K for x in f} | {x.body_hash_L for x in f}
    archived = {p.stem for p in (out / "bodies").iterdir()}
    cands = [x for x in f if x.verdict == "ViolationCandidate"]
    decided = all(x.retest is not None for x in cands)
    logged = len([r for r in caplog.records if "retest" in r.getMessage()]) == len(cands)
    recs = [json.loads(line) for line in (out / "findings.jsonl").read_text().splitlines()]
    ok = (len(recs) == 200 and hashes <= archived and decided and logged and elapsed <= 600)
    record(13, ok,
           f"{search_detail(f)}; {len(archived)} bodies archived; "
           f"{len(cands)} candidates re-tested; runtime {elapsed:.1f}s (budget 600s)")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))

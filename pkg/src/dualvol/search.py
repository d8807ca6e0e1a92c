"""Randomized counterexample search over seeded random bodies.

Every trial draws its bodies from seeds derived from ``(cfg.seed, trial)``
so results do not depend on scheduling.  A ``ViolationCandidate`` is re-run
at an escalated resolution; only candidates that survive the re-test are
flagged as surviving.  Nothing here asserts a mathematical conclusion.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import bodies, verify
from .errors import DualVolError
from .quad import gaussian_sample, sample_gauges, sphere_rule
from .report import write_csv

log = logging.getLogger(__name__)

CHECKERS = ("bm", "logconcave", "rvip", "ss-tail")


@dataclass(frozen=True)
class SearchConfig:
    dim: int = 3
    q_grid: tuple = (1.0,)
    checker: str = "bm"
    family: str = "vpolytope"
    k: int = 20
    r_min: float = 0.05
    symmetric: bool = True
    trials: int = 100
    seed: int = 0
    escalation: int = 10
    pairs: str = "random"
    dilation: float = 2.0
    lambdas: tuple = (0.5,)
    levels: tuple = (1.0,)
    scheme: str | None = None
    rule_size: int | None = None
    order: int = 12
    samples: int = 200_000
    auto_john: bool = True
    mode: str = "regression"

    def __post_init__(self):
        for name in ("q_grid", "lambdas", "levels"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.checker not in CHECKERS:
            raise ValueError(f"checker must be one of {CHECKERS}")
        if self.pairs not in ("random", "dilate"):
            raise ValueError("pairs must be 'random' or 'dilate'")
        if self.mode not in ("regression", "exploration"):
            raise ValueError("mode must be 'regression' or 'exploration'")
        if self.trials < 0 or self.escalation < 1:
            raise ValueError("trials must be >= 0 and escalation >= 1")
        if not self.q_grid and self.checker != "ss-tail":
            raise ValueError("q_grid is empty")
        if self.checker in ("bm", "logconcave") and min(self.q_grid) <= 0:
            raise ValueError("Brunn-Minkowski checks need q > 0")
        if self.checker in ("rvip", "ss-tail") and not self.symmetric:
            raise ValueError("John position is only available for symmetric bodies")
        if self.pairs == "dilate" and not self.dilation > 0:
            raise ValueError("dilation must be positive")
        # validates family/k/dim
        self.generator()

    def generator(self) -> bodies.GeneratorSpec:
        return bodies.GeneratorSpec(self.dim, self.k, self.family, self.r_min, self.symmetric)

    @classmethod
    def from_dict(cls, d: dict) -> "SearchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SearchConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Finding:
    trial: int
    checker: str
    q: float | None
    param: float | None
    margin: float
    uncertainty: float
    verdict: str
    body_hash_K: str
    body_hash_L: str | None = None
    retest: dict | None = None
    survived: bool = False
    error: str | None = None
    report: dict = field(default_factory=dict, repr=False)

    @property
    def score(self) -> float:
        m, u = self.margin, self.uncertainty
        if self.retest is not None:
            m, u = self.retest["margin"], self.retest["uncertainty"]
        return m / max(u, 1e-300)


def trial_seeds(cfg: SearchConfig, trial: int) -> tuple[int, int, int]:
    s = np.random.SeedSequence([cfg.seed, trial]).generate_state(3)
    return int(s[0]), int(s[1]), int(s[2])


class _Runner:
    def __init__(self, cfg: SearchConfig):
        self.cfg = cfg
        self.rule = None
        self.rule_hi = None
        if cfg.scheme is not None:
            self.rule = sphere_rule(cfg.dim, cfg.scheme, cfg.rule_size, cfg.seed)
            m = self.rule.size if cfg.scheme != "trapezoid" else self.rule.size // 2
            self.rule_hi = sphere_rule(cfg.dim, cfg.scheme, m * cfg.escalation, cfg.seed + 1)

    def bodies_for(self, trial):
        cfg = self.cfg
        sk, sl, ss = trial_seeds(cfg, trial)
        K = bodies.random_body(cfg.generator(), sk)
        L = None
        if cfg.checker in ("bm", "logconcave"):
            L = (bodies.dilate(K, cfg.dilation) if cfg.pairs == "dilate"
                 else bodies.random_body(cfg.generator(), sl))
        return K, L, ss

    def checks(self, K, L, sample_seed, escalated=False):
        """Yield (q, param, thunk) for every check of one trial."""
        cfg = self.cfg
        rule = self.rule_hi if escalated else self.rule
        order = cfg.order + 2 * verify.LOWER_ORDER_GAP if escalated else cfg.order
        if cfg.checker == "bm":
            for q in cfg.q_grid:
                yield q, None, lambda q=q: verify.check_bm(K, L, q, rule, order)
        elif cfg.checker == "logconcave":
            for q in cfg.q_grid:
                for lam in cfg.lambdas:
                    yield q, lam, lambda q=q, lam=lam: verify.check_bm_logconcave(
                        K, L, lam, q, rule, order)
        elif cfg.checker == "rvip":
            for q in cfg.q_grid:
                yield q, None, lambda q=q: verify.check_reverse_isop(
                    K, q, rule, cfg.auto_john, order)
        else:
            N = cfg.samples * (cfg.escalation if escalated else 1)
            sample = gaussian_sample(cfg.dim, N, sample_seed + (1 if escalated else 0))
            gc = sample_gauges(bodies.cube(cfg.dim), sample)
            for t in cfg.levels:
                yield None, t, lambda t=t: verify.check_ss_tail(
                    K, t, sample, cfg.auto_john, gauges_cube=gc)

    def run_trial(self, trial):
        cfg = self.cfg
        archive = {}
        try:
            K, L, ss = self.bodies_for(trial)
        except DualVolError as exc:
            return [Finding(trial, cfg.checker, None, None, float("nan"), float("nan"),
                            "Error", "", error=f"{type(exc).__name__}: {exc}")], archive
        hk = bodies.body_hash(K)
        hl = bodies.body_hash(L) if L is not None else None
        archive[hk] = K.to_dict()
        if L is not None:
            archive[hl] = L.to_dict()
        out = []
        escalated = None
        for q, param, thunk in self.checks(K, L, ss):
            try:
                rep = thunk()
            except DualVolError as exc:
                out.append(Finding(trial, cfg.checker, q, param, float("nan"), float("nan"),
                                   "Error", hk, hl, error=f"{type(exc).__name__}: {exc}"))
                continue
            f = Finding(trial, cfg.checker, q, param, rep.margin, rep.uncertainty,
                        rep.verdict.value, hk, hl, report=rep.to_dict())
            if rep.violation:
                if escalated is None:
                    escalated = {(eq, ep): th for eq, ep, th in self.checks(K, L, ss, True)}
                rep2 = escalated[(q, param)]()
                f.retest = {"margin": rep2.margin, "uncertainty": rep2.uncertainty,
                            "verdict": rep2.verdict.value}
                f.survived = rep2.violation
                log.info("trial %d q=%s param=%s: candidate margin %.3g -> retest %.3g (%s)",
                         trial, q, param, rep.margin, rep2.margin,
                         "survives" if f.survived else "dies")
            out.append(f)
        return out, archive


def search_counterexamples(cfg: SearchConfig, threads: int | None = None):
    """Run all trials; returns (findings ranked most-suspicious first, body archive)."""
    if threads is None:
        threads = int(os.environ.get("DUALVOL_THREADS", "1") or 1)
    runner = _Runner(cfg)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(runner.run_trial, range(cfg.trials)))
    else:
        results = [runner.run_trial(t) for t in range(cfg.trials)]
    findings, archive = [], {}
    for fs, arch in results:
        findings.extend(fs)
        archive.update(arch)
    findings.sort(key=lambda f: (np.nan_to_num(f.score, nan=np.inf), f.trial,
                                 f.q if f.q is not None else 0.0,
                                 f.param if f.param is not None else 0.0))
    return findings, archive


SUMMARY_COLUMNS = ["trial", "q", "param", "margin", "uncertainty", "verdict",
                   "retest_margin", "retest_uncertainty", "survived",
                   "body_hash_K", "body_hash_L"]


def write_findings(findings, archive, outdir, manifest_hash: str | None = None) -> Path:
    out = Path(outdir)
    (out / "bodies").mkdir(parents=True, exist_ok=True)
    with open(out / "findings.jsonl", "w") as fh:
        for f in findings:
            rec = asdict(f)
            rec["score"] = f.score
            rec["manifest_hash"] = manifest_hash
            fh.write(json.dumps(rec, sort_keys=True, default=str) + "\n")
    rows = []
    for f in findings:
        rt = f.retest or {}
        rows.append([f.trial, f.q if f.q is not None else "", f.param if f.param is not None else "",
                     f.margin, f.uncertainty, f.verdict, rt.get("margin", ""),
                     rt.get("uncertainty", ""), f.survived, f.body_hash_K, f.body_hash_L or ""])
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, rows, manifest_hash)
    for h, d in sorted(archive.items()):
        with open(out / "bodies" / f"{h}.json", "w") as fh:
            fh.write(json.dumps(d, sort_keys=True) + "\n")
    return out


def summarize(findings) -> dict:
    verdicts = {}
    for f in findings:
        verdicts[f.verdict] = verdicts.get(f.verdict, 0) + 1
    finite = [f for f in findings if np.isfinite(f.margin)]
    return {"checks": len(findings), "verdicts": verdicts,
            "candidates": sum(f.verdict == "ViolationCandidate" for f in findings),
            "surviving": sum(f.survived for f in findings),
            "errors": sum(f.error is not None for f in findings),
            "min_margin": min((f.margin for f in finite), default=None)}

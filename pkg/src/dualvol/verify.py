"""Checkers for the dual Brunn-Minkowski, log-concavity, reverse isoperimetric
and Gaussian tail inequalities.

Each checker returns a :class:`CheckReport` whose ``margin`` is oriented so
that ``margin >= 0`` means the inequality holds on this instance.  Verdicts
follow a 3-sigma rule: a margin below ``-3 * uncertainty`` is a
``ViolationCandidate``.  The harness reports; it never concludes.

Uncertainty comes from the rule in use:

* stochastic sphere rule shared by every term: delta method over the
  batch-means covariance of the per-body integrals;
* default (``rule=None``) cone cubature per polytope: the gap to a rule four
  orders lower, a conservative bound on the cubature error;
* any other deterministic shared rule: round-off only, since shared nodes
  make the quadrature errors of the terms strongly correlated.

A round-off floor proportional to the size of both sides is always added.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bodies, functionals, john
from .bodies import ConvexBody
from .quad import (N_BATCHES, GaussianSample, SphereRule, batch_sums, facet_rule,
                   integrate_sphere, omega, sample_gauges, sphere_area)

ROUNDOFF = 1e-11
LOWER_ORDER_GAP = 4


class Verdict(str, enum.Enum):
    HOLDS = "Holds"
    HOLDS_WITHIN_NOISE = "HoldsWithinNoise"
    VIOLATION_CANDIDATE = "ViolationCandidate"


def verdict_for(margin: float, uncertainty: float) -> Verdict:
    if margin < -3.0 * uncertainty:
        return Verdict.VIOLATION_CANDIDATE
    if margin >= 0:
        return Verdict.HOLDS
    return Verdict.HOLDS_WITHIN_NOISE


@dataclass(frozen=True)
class CheckReport:
    name: str
    q: float | None
    lhs: float
    rhs: float
    margin: float
    uncertainty: float
    verdict: Verdict
    fingerprints: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def violation(self) -> bool:
        return self.verdict is Verdict.VIOLATION_CANDIDATE

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        return d

    def line(self) -> str:
        q = "" if self.q is None else f" q={self.q:g}"
        return (f"{self.name}{q}: lhs={self.lhs:.12g} rhs={self.rhs:.12g} "
                f"margin={self.margin:.6g} +/- {self.uncertainty:.3g} -> {self.verdict.value}")


def _report(name, q, lhs, rhs, margin, unc, bodies_by_role, **params):
    unc = unc + ROUNDOFF * (abs(lhs) + abs(rhs))
    fp = {role: bodies.body_hash(B) for role, B in bodies_by_role.items()}
    return CheckReport(name, q, float(lhs), float(rhs), float(margin), float(unc),
                       verdict_for(margin, unc), fp, params)


# ------------------------------------------------------------ sphere integrals

def _grad(f, x):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(len(x)):
        h = 1e-6 * max(abs(x[i]), 1e-300)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def _integrand(rho, q):
    return np.log(rho) if q == 0 else rho ** q


class SphereIntegrals:
    """Sphere integrals of rho^q (log rho at q = 0) for several bodies.

    With ``rule=None`` each polytope gets its own cone cubature; other bodies
    fall back to the default rule of their dimension, shared among them.
    """

    def __init__(self, bodies_list, rule: SphereRule | None = None, order: int = 12):
        self.bodies = list(bodies_list)
        n = self.bodies[0].dim
        if any(B.dim != n for B in self.bodies):
            raise ValueError("bodies live in different dimensions")
        self.dim = n
        self.shared = rule
        self.order = order
        self._hi, self._lo = [], []
        fallback = None
        for B in self.bodies:
            if rule is None and bodies.is_polytope(B):
                hi = facet_rule(B, order)
                lo = facet_rule(B, order - LOWER_ORDER_GAP)
                self._hi.append((hi, bodies.radial_unit(B, hi.nodes)))
                self._lo.append((lo, bodies.radial_unit(B, lo.nodes)))
            else:
                if rule is None:
                    fallback = fallback or functionals.default_rule(B)
                r = rule or fallback
                self._hi.append((r, bodies.radial_unit(B, r.nodes)))
                self._lo.append(None)

    def evaluate(self, q: float):
        """Integrals I_i and an error model (covariance matrix or abs-error vector)."""
        vals = np.array([integrate_sphere(r, _integrand(rho, q)).value for r, rho in self._hi])
        if any(r.stochastic for r, _ in self._hi):
            # every stochastic term shares one rule: batch-means covariance
            B = np.array([N_BATCHES * batch_sums(r, _integrand(rho, q)) if r.stochastic
                          else np.full(N_BATCHES, integrate_sphere(r, _integrand(rho, q)).value)
                          for r, rho in self._hi])
            return vals, np.cov(B) / N_BATCHES, None
        err = np.zeros(len(vals))
        for i, lo in enumerate(self._lo):
            if lo is not None:
                r, rho = lo
                err[i] = abs(vals[i] - integrate_sphere(r, _integrand(rho, q)).value)
        return vals, None, err

    def margin(self, q, f):
        """(value of f at the integrals, propagated uncertainty)."""
        vals, cov, err = self.evaluate(q)
        g = _grad(f, vals)
        if cov is not None:
            unc = math.sqrt(max(float(g @ np.atleast_2d(cov) @ g), 0.0))
        else:
            unc = float(np.abs(g) @ err)
        return vals, f(vals), unc

    def meta(self) -> dict:
        if self.shared is not None:
            return self.shared.describe()
        return {"scheme": "facet", "order": self.order}


# ------------------------------------------------------------ checkers

def check_bm(K: ConvexBody, L: ConvexBody, q: float, rule: SphereRule | None = None,
             order: int = 12) -> CheckReport:
    """V_q(K+L)^{1/q} >= V_q(K)^{1/q} + V_q(L)^{1/q}."""
    if not q > 0:
        raise ValueError("the Brunn-Minkowski check needs q > 0")
    n = K.dim
    S = bodies.minkowski_sum(K, L)
    si = SphereIntegrals([S, K, L], rule, order)

    def f(I):
        v = (I / n) ** (1.0 / q)
        return v[0] - v[1] - v[2]

    vals, margin, unc = si.margin(q, f)
    v = (vals / n) ** (1.0 / q)
    return _report("bm", q, v[0], v[1] + v[2], margin, unc, {"K": K, "L": L},
                   q_at_most_n=bool(q <= n), rule=si.meta())


def check_bm_logconcave(K: ConvexBody, L: ConvexBody, lam: float, q: float,
                        rule: SphereRule | None = None, order: int = 12) -> CheckReport:
    """log V_q((1-lam)K + lam L) >= (1-lam) log V_q(K) + lam log V_q(L)."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if not q > 0:
        raise ValueError("the log-concavity check needs q > 0")
    M = bodies.combination(K, L, lam)
    si = SphereIntegrals([M, K, L], rule, order)

    def f(I):
        lg = np.log(I)
        return lg[0] - (1.0 - lam) * lg[1] - lam * lg[2]

    vals, margin, unc = si.margin(q, f)
    lg = np.log(vals / K.dim)
    return _report("logconcave", q, lg[0], (1.0 - lam) * lg[1] + lam * lg[2], margin, unc,
                   {"K": K, "L": L}, lam=lam, rule=si.meta())


def check_homogeneity(K: ConvexBody, q: float, t: float, rule: SphereRule | None = None,
                      rtol: float = 1e-10) -> CheckReport:
    """V_q(tK) = t^q V_q(K), reported as margin = -|relative error|."""
    if not 0.1 <= t <= 10.0:
        raise ValueError("dilation factor must lie in [0.1, 10]")
    tK = bodies.dilate(K, t)
    if rule is None:
        rule = functionals.default_rule(K)
    a = functionals.dual_querm(tK, q, rule).value
    b = t ** q * functionals.dual_querm(K, q, rule).value
    rel = abs(a - b) / abs(b)
    return CheckReport("homogeneity", q, a, b, -rel, rtol, verdict_for(-rel, rtol),
                       {"K": bodies.body_hash(K)}, {"t": t, "relative_error": rel,
                                                    "rule": rule.describe()})


def _john_ready(K, auto_john):
    if auto_john:
        return john.to_john_position(K)
    john.check_john_position(K)
    return K


def check_reverse_isop(K: ConvexBody, q: float, rule: SphereRule | None = None,
                       auto_john: bool = False, order: int = 12) -> CheckReport:
    """Normalized dual volume of a John-positioned K is at most that of the cube."""
    Kj = _john_ready(K, auto_john)
    n = K.dim
    C = bodies.cube(n)
    si = SphereIntegrals([C, Kj], rule, order)
    if q == 0:
        def f(I):
            v = np.exp(I / sphere_area(n))
            return v[0] - v[1]
    else:
        def f(I):
            v = (I / (n * omega(n))) ** (1.0 / q)
            return v[0] - v[1]
    vals, margin, unc = si.margin(q, f)
    if q == 0:
        v = np.exp(vals / sphere_area(n))
    else:
        v = (vals / (n * omega(n))) ** (1.0 / q)
    return _report("rvip", q, v[1], v[0], margin, unc, {"K": K, "K_john": Kj},
                   q_at_most_n=bool(q <= n), auto_john=auto_john, rule=si.meta())


def check_ss_tail(K: ConvexBody, t: float, sample: GaussianSample,
                  auto_john: bool = False, gauges_cube=None) -> CheckReport:
    """gamma_n(gauge_K > t) >= gamma_n(gauge_cube > t), coupled on one sample."""
    if not t > 0:
        raise ValueError("level t must be positive")
    Kj = _john_ready(K, auto_john)
    gk = sample_gauges(Kj, sample)
    gc = sample_gauges(bodies.cube(K.dim), sample) if gauges_cube is None else gauges_cube
    a = (gk > t).astype(float)
    b = (gc > t).astype(float)
    d = a - b
    N = len(d)
    unc = float(d.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    margin = float(d.mean())
    return CheckReport("ss-tail", None, float(a.mean()), float(b.mean()), margin, unc,
                       verdict_for(margin, unc),
                       {"K": bodies.body_hash(K), "K_john": bodies.body_hash(Kj)},
                       {"t": t, "samples": N, "seed": sample.seed, "auto_john": auto_john})

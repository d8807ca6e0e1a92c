"""Quadrature on the unit sphere and Gaussian sampling in R^n.

Schemes
-------
trapezoid     n = 2, m equispaced angles pi*k/m on the half circle, mirrored
              (2m nodes in total).
fibonacci     n = 3, golden-angle spiral on the upper hemisphere, mirrored.
mc-antipodal  any n, uniform directions plus their antipodes.
facet         polytope-adapted cone cubature: each boundary simplex of a
              polytope is pushed radially onto the sphere and integrated with
              a collapsed Gauss-Legendre product rule.  On that polytope's
              cones rho is smooth, so the rule converges spectrally.

All rules store nodes in antipodal pairs: node ``i`` and ``i + m/2`` are exact
negatives of each other.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import BadScheme, NonFiniteIntegrand

N_BATCHES = 20
DEFAULT_RULE_SIZE = {2: 4096, 3: 20000}
DEFAULT_RULE_SIZE_HIGH = 100000
DEFAULT_SAMPLES = 200000
SCHEMES = ("trapezoid", "fibonacci", "mc-antipodal")


def omega(n: int) -> float:
    """Volume of the n-dimensional Euclidean unit ball."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return math.exp(0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1.0))


def sphere_area(n: int) -> float:
    return n * omega(n)


class Estimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class SphereRule:
    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    scheme: str
    seed: int | None = None
    batch: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def stochastic(self) -> bool:
        return self.batch is not None

    def describe(self) -> dict:
        return {"scheme": self.scheme, "dim": self.dim, "size": self.size,
                "seed": self.seed, **self.meta}


def default_rule_size(n: int) -> int:
    return DEFAULT_RULE_SIZE.get(n, DEFAULT_RULE_SIZE_HIGH)


def default_scheme(n: int) -> str:
    return {2: "trapezoid", 3: "fibonacci"}.get(n, "mc-antipodal")


def _mirror(half):
    return np.concatenate([half, -half])


def sphere_rule(n: int, scheme: str | None = None, m: int | None = None,
                seed: int = 0) -> SphereRule:
    """Quadrature rule with nodes in antipodal pairs; weights sum to n * omega_n.

    For ``trapezoid`` m counts half-circle angles; otherwise m is the total
    node count and must be even.
    """
    scheme = scheme or default_scheme(n)
    m = int(m or default_rule_size(n))
    if scheme not in SCHEMES:
        raise BadScheme(f"unknown scheme {scheme!r}")
    if scheme == "trapezoid":
        if n != 2:
            raise BadScheme("trapezoid rule is for n = 2 only")
        if m < 1:
            raise BadScheme("trapezoid rule needs at least one angle")
        th = math.pi * np.arange(m) / m
        nodes = _mirror(np.column_stack([np.cos(th), np.sin(th)]))
        return SphereRule(2, nodes, np.full(2 * m, math.pi / m), scheme)
    if m < 2 or m % 2:
        raise BadScheme(f"antipodal rules need an even node count, got {m}")
    area = sphere_area(n)
    half = m // 2
    if scheme == "fibonacci":
        if n != 3:
            raise BadScheme("fibonacci rule is for n = 3 only")
        k = np.arange(half)
        z = (k + 0.5) / half
        phi = 2.0 * math.pi * k / ((1.0 + math.sqrt(5.0)) / 2.0)
        s = np.sqrt(1.0 - z * z)
        nodes = _mirror(np.column_stack([s * np.cos(phi), s * np.sin(phi), z]))
        return SphereRule(3, nodes, np.full(m, area / m), scheme)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((half, n))
    g /= np.linalg.norm(g, axis=1)[:, None]
    batch = np.arange(half) % N_BATCHES
    return SphereRule(n, _mirror(g), np.full(m, area / m), scheme, seed,
                      np.concatenate([batch, batch]))


# ------------------------------------------------------------ adapted cubature

def _gauss_legendre01(p):
    x, w = np.polynomial.legendre.leggauss(p)
    return 0.5 * (x + 1.0), 0.5 * w


def simplex_rule(d: int, p: int):
    """Collapsed (Duffy) Gauss-Legendre rule on the unit d-simplex.

    Returns barycentric-free coordinates t (N, d) with t >= 0, sum(t) <= 1 and
    weights summing to 1/d!.
    """
    if d == 0:
        return np.zeros((1, 0)), np.ones(1)
    x, w = _gauss_legendre01(p)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    S = np.stack([g.ravel() for g in grids], axis=1)
    W = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij")), axis=0).ravel()
    T = np.empty_like(S)
    rem = np.ones(len(S))
    for i in range(d):
        T[:, i] = rem * S[:, i]
        if i < d - 1:
            W = W * (1.0 - S[:, i]) ** (d - 1 - i)
        rem = rem * (1.0 - S[:, i])
    return T, W


def _subdivide(S, dist, ratio):
    # longest-edge bisection until every simplex diameter <= ratio * plane distance
    n = S.shape[1]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    done_S, done_d = [], []
    while len(S):
        E = np.stack([np.linalg.norm(S[:, i] - S[:, j], axis=1) for i, j in pairs], axis=1)
        longest = E.argmax(axis=1)
        ok = E.max(axis=1) <= ratio * dist
        done_S.append(S[ok])
        done_d.append(dist[ok])
        S, dist, longest = S[~ok], dist[~ok], longest[~ok]
        if not len(S):
            break
        ii = np.array([pairs[k][0] for k in longest])
        jj = np.array([pairs[k][1] for k in longest])
        r = np.arange(len(S))
        mid = 0.5 * (S[r, ii] + S[r, jj])
        A = S.copy()
        A[r, ii] = mid
        B = S.copy()
        B[r, jj] = mid
        S = np.concatenate([A, B])
        dist = np.concatenate([dist, dist])
    return np.concatenate(done_S), np.concatenate(done_d)


def facet_rule(K, order: int = 12, ratio: float = 1.0) -> SphereRule:
    """Sphere rule adapted to the cone decomposition of a polytope K.

    Integrates f(u) du as  sum_F h_F * int_F f(x/|x|) |x|^{-n} dsigma(x),
    the radial projection of the triangulated boundary onto the sphere.
    """
    from .bodies import body_hash, hull_of

    hull = hull_of(K)
    n = K.dim
    f = len(hull.simplices)
    if hull.symmetric:
        f //= 2
    S, dist = _subdivide(hull.simplices[:f], hull.offsets[:f], ratio)
    T, W = simplex_rule(n - 1, order)
    v0 = S[:, 0, :]
    G = S[:, 1:, :] - v0[:, None, :]             # (f, n-1, n)
    gram = G @ np.transpose(G, (0, 2, 1))
    jac = np.sqrt(np.abs(np.linalg.det(gram)))
    X = v0[:, None, :] + np.einsum("qd,fdn->fqn", T, G)
    r = np.linalg.norm(X, axis=2)
    w = (dist * jac)[:, None] * W[None, :] / r ** n
    U = (X / r[:, :, None]).reshape(-1, n)
    w = w.ravel()
    meta = {"order": order, "ratio": ratio, "simplices": len(S), "body": body_hash(K)}
    if hull.symmetric:
        return SphereRule(n, _mirror(U), np.concatenate([w, w]), "facet", meta=meta)
    return SphereRule(n, U, w, "facet", meta=meta)


# ------------------------------------------------------------ integration

def _values(rule, f):
    vals = f(rule.nodes) if callable(f) else f
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (rule.size,):
        raise ValueError(f"integrand returned shape {vals.shape}, expected {(rule.size,)}")
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NonFiniteIntegrand(rule.nodes[i], vals[i])
    return vals


def batch_sums(rule: SphereRule, vals) -> np.ndarray:
    """Per-batch partial sums of w_i f_i (stochastic rules only)."""
    return np.bincount(rule.batch, weights=rule.weights * vals, minlength=N_BATCHES)


def integrate_sphere(rule: SphereRule, f: Callable | np.ndarray) -> Estimate:
    """sum_i w_i f(u_i), with a batch-means standard error for stochastic rules.

    ``f`` is either a vectorized callable on the (m, n) node array or the
    precomputed values at the nodes.
    """
    vals = _values(rule, f)
    value = math.fsum(rule.weights * vals)
    if not rule.stochastic:
        return Estimate(value, 0.0)
    est = N_BATCHES * batch_sums(rule, vals)
    return Estimate(value, float(est.std(ddof=1) / math.sqrt(N_BATCHES)))


def rule_to_csv(rule: SphereRule, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"u{i + 1}" for i in range(rule.dim)] + ["weight"])
        for u, wt in zip(rule.nodes, rule.weights):
            w.writerow([f"{x:.17g}" for x in u] + [f"{wt:.17g}"])


# ------------------------------------------------------------ Gaussian sampling

@dataclass(frozen=True)
class GaussianSample:
    dim: int
    points: np.ndarray = field(repr=False)
    seed: int

    @property
    def count(self) -> int:
        return len(self.points)


def gaussian_sample(n: int, N: int = DEFAULT_SAMPLES, seed: int = 0) -> GaussianSample:
    pts = np.random.default_rng(seed).standard_normal((int(N), n))
    pts.flags.writeable = False
    return GaussianSample(n, pts, seed)


def sample_gauges(K, sample: GaussianSample) -> np.ndarray:
    from .bodies import gauge

    if K.dim != sample.dim:
        raise ValueError("sample dimension does not match the body")
    return gauge(K, sample.points)


def gaussian_measure_mc(K, t, sample: GaussianSample, gauges=None) -> Estimate:
    """gamma_n(tK) estimated as the fraction of sample points with gauge <= t.

    ``t`` may be an array; the same points are reused for every level.
    """
    g = sample_gauges(K, sample) if gauges is None else gauges
    t = np.asarray(t, dtype=float)
    gs = np.sort(g)
    p = np.searchsorted(gs, t, side="right") / len(gs)
    se = np.sqrt(p * (1.0 - p) / len(gs))
    if p.ndim == 0:
        return Estimate(float(p), float(se))
    return Estimate(p, se)

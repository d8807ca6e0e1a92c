"""Dual quermassintegrals and dual entropies.

Three routes to the same numbers:

* sphere:    V_q(K) = (1/n) int_{S^{n-1}} rho_K(u)^q du
* gaussian:  int rho_K(x)^q dgamma_n(x) = c(n, q) V_q(K),   q < n
* layercake: the Gaussian moment rewritten as int_0^inf gamma_n(rho_K^q >= t) dt

Entropy counterparts are E(K) = int log rho_K du and
E_gamma(K) = int log rho_K dgamma_n = E(K) / (n omega_n) - E[log |X|].
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import bodies
from .errors import ExponentOutOfRange, GridTooCoarse
from .quad import (Estimate, GaussianSample, SphereRule, default_rule_size,
                   default_scheme, facet_rule, integrate_sphere, omega,
                   sample_gauges, sphere_area, sphere_rule)

__all__ = ["omega", "DualVolumeResult", "EntropyResult", "dual_querm",
           "normalized_dual_querm", "dual_entropy", "c_constant",
           "gaussian_dual_moment", "gaussian_dual_entropy", "entropy_constants",
           "layer_cake_moment", "default_rule"]


@dataclass(frozen=True)
class DualVolumeResult:
    """A dual-volume estimate.

    For the Gaussian and layer-cake formulations ``value`` is the Gaussian
    moment; ``scale`` is c(n, q), so ``dual_volume`` recovers V_q.
    """

    q: float
    value: float
    stderr: float
    formulation: str
    scale: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dual_volume(self) -> float:
        return self.value / self.scale

    @property
    def dual_volume_stderr(self) -> float:
        return self.stderr / self.scale

    def record(self, K=None) -> dict:
        d = asdict(self)
        d["rule_meta"] = d.pop("meta")
        if K is not None:
            d["body_hash"] = bodies.body_hash(K)
        return d


@dataclass(frozen=True)
class EntropyResult:
    value: float
    stderr: float
    formulation: str


def default_rule(K, order: int = 12) -> SphereRule:
    """Cone cubature for polytopes, the default sphere rule otherwise."""
    if bodies.is_polytope(K):
        return facet_rule(K, order)
    return sphere_rule(K.dim, default_scheme(K.dim), default_rule_size(K.dim))


def _rule_for(K, rule):
    if rule is None:
        return default_rule(K)
    if rule.dim != K.dim:
        raise ValueError(f"rule dimension {rule.dim} does not match body dimension {K.dim}")
    return rule


def radii(K, rule: SphereRule) -> np.ndarray:
    return bodies.radial_unit(K, rule.nodes)


def querm_from_radii(rho, q: float, rule: SphereRule) -> Estimate:
    n = rule.dim
    if q == 0:
        return Estimate(omega(n), 0.0)
    est = integrate_sphere(rule, rho ** q)
    return Estimate(est.value / n, est.stderr / n)


def entropy_from_radii(rho, rule: SphereRule) -> Estimate:
    return integrate_sphere(rule, np.log(rho))


def normalize(vq: Estimate, q: float, n: int) -> Estimate:
    """Normalized dual volume (V_q / omega_n)^{1/q} from V_q."""
    v = (vq.value / omega(n)) ** (1.0 / q)
    return Estimate(v, abs(v / (q * vq.value)) * vq.stderr)


def normalize_entropy(E: Estimate, n: int) -> Estimate:
    v = math.exp(E.value / sphere_area(n))
    return Estimate(v, v * E.stderr / sphere_area(n))


def dual_querm(K, q: float, rule: SphereRule | None = None) -> DualVolumeResult:
    if not math.isfinite(q):
        raise ExponentOutOfRange("q must be finite")
    rule = _rule_for(K, rule)
    if q == 0:
        est = Estimate(omega(K.dim), 0.0)
    else:
        est = querm_from_radii(radii(K, rule), q, rule)
    return DualVolumeResult(q, est.value, est.stderr, "sphere", meta=rule.describe())


def dual_entropy(K, rule: SphereRule | None = None) -> EntropyResult:
    rule = _rule_for(K, rule)
    est = entropy_from_radii(radii(K, rule), rule)
    return EntropyResult(est.value, est.stderr, "sphere")


def normalized_dual_querm(K, q: float, rule: SphereRule | None = None) -> DualVolumeResult:
    rule = _rule_for(K, rule)
    rho = radii(K, rule)
    if q == 0:
        est = normalize_entropy(entropy_from_radii(rho, rule), K.dim)
    else:
        est = normalize(querm_from_radii(rho, q, rule), q, K.dim)
    return DualVolumeResult(q, est.value, est.stderr, "sphere", meta=rule.describe())


# ---------------------------------------------------------------- constants

def _c_closed(n, q):
    a = n - q
    return math.exp(math.log(n) + (0.5 * a - 1.0) * math.log(2.0) + math.lgamma(0.5 * a)
                    - 0.5 * n * math.log(2.0 * math.pi))


def c_constant_quadrature(n: int, q: float) -> float:
    """n (2 pi)^{-n/2} int_0^inf r^{n-q-1} e^{-r^2/2} dr by adaptive quadrature."""
    if q >= n:
        raise ExponentOutOfRange(f"need q < n, got q={q}, n={n}")
    a = n - q - 1.0
    f = lambda r: math.exp(a * math.log(r) - 0.5 * r * r) if r > 0 else (1.0 if a == 0 else 0.0)
    # split at the mode to help the integrator with sharp peaks near the origin
    lo = integrate.quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)[0]
    hi = integrate.quad(f, 1.0, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]
    return n * (lo + hi) / (2.0 * math.pi) ** (0.5 * n)


@lru_cache(maxsize=None)
def _validated(n, q):
    closed = _c_closed(n, q)
    ref = c_constant_quadrature(n, q)
    if abs(closed - ref) > 1e-10 * max(1.0, abs(ref)):
        raise RuntimeError(f"c({n},{q}) closed form {closed!r} disagrees with quadrature {ref!r}")
    return closed


def c_constant(n: int, q: float) -> float:
    """Constant c with int rho^q dgamma_n = c * V_q; checked against quadrature on first use."""
    if q >= n:
        raise ExponentOutOfRange(f"need q < n, got q={q}, n={n}")
    return _validated(int(n), float(q))


def entropy_constants(n: int) -> tuple[float, float]:
    """(c0, c1) with E_gamma(K) = c0 E(K) + c1.

    c0 = 1/(n omega_n) and c1 = -E[log |X|] for X ~ gamma_n; the radial
    log-moment carries the full sphere-area factor n omega_n.
    """
    c0 = 1.0 / sphere_area(n)
    c1 = -0.5 * (special.digamma(0.5 * n) + math.log(2.0))
    return c0, float(c1)


# ---------------------------------------------------------------- Gaussian routes

def _moment_values(K, q, sample, gauges):
    g = sample_gauges(K, sample) if gauges is None else gauges
    return g ** (-q)


def _chi_moment(q, n, r2, upper=False):
    # E[r^{-q}; r^2/2 <  r2] (or >= r2 when upper) for r ~ chi_n
    a = 0.5 * (n - q)
    k = math.exp(-0.5 * q * math.log(2.0) + math.lgamma(a) - math.lgamma(0.5 * n))
    return k * (special.gammaincc(a, r2) if upper else special.gammainc(a, r2))


def gaussian_dual_moment(K, q: float, sample: GaussianSample, gauges=None,
                         core: float | str | None = "auto") -> DualVolumeResult:
    """Sample mean of rho_K(x)^q over Gaussian points.

    For 2q >= n the plain mean has infinite variance.  With ``core`` set to a
    Gaussian mass p (``"auto"`` picks 0.01 in that regime), points inside the
    ball of mass p get r^{-q} replaced by its conditional mean given r < r_p.
    Direction and radius are independent under gamma_n, so the estimator
    stays unbiased and its variance becomes finite.
    """
    n = K.dim
    c = c_constant(n, q)
    v = _moment_values(K, q, sample, gauges)
    if core == "auto":
        core = 0.01 if 2.0 * q >= n else None
    meta = {"samples": sample.count, "seed": sample.seed}
    if core:
        r2 = float(special.gammaincinv(0.5 * n, core))
        half_sq = 0.5 * np.einsum("ij,ij->i", sample.points, sample.points)
        inside = half_sq < r2
        rho_u = np.sqrt(2.0 * half_sq[inside]) * (v[inside] ** (1.0 / q))
        v = v.copy()
        v[inside] = rho_u ** q * (_chi_moment(q, n, r2) / core)
        meta["core_mass"] = core
    return DualVolumeResult(q, float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))),
                            "gaussian", c, meta)


def gaussian_dual_entropy(K, sample: GaussianSample, gauges=None) -> EntropyResult:
    g = sample_gauges(K, sample) if gauges is None else gauges
    v = -np.log(g)
    return EntropyResult(float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))), "gaussian")


def _radial_tail(rho, T, q, n):
    """E_r[(rho^q r^{-q} - T)^+] for r ~ chi_n, in closed form."""
    R2 = 0.5 * (rho * T ** (-1.0 / q)) ** 2
    upper = q < 0
    mass = special.gammaincc(0.5 * n, R2) if upper else special.gammainc(0.5 * n, R2)
    return rho ** q * _chi_moment(q, n, R2, upper) - T * mass


def layer_cake_moment(K, q: float, sample: GaussianSample, grid: int = 16384,
                      tol: float = 1e-4, cut: float = 0.999, gauges=None) -> DualVolumeResult:
    """Gaussian moment of rho_K^q as int_0^inf gamma_n({rho_K^q >= t}) dt.

    Level-set measures on [0, T] come from one shared sample (nested sets, so
    the estimated distribution function is monotone) and are integrated by
    the trapezoid rule on ``grid`` intervals.  Past T the contribution is the
    chi_n radial tail, exact per sample direction.  For q < 0 the level sets
    {rho^q >= t} are the sublevel sets {rho <= t^{1/q}}.
    """
    n = K.dim
    if q == 0:
        raise ExponentOutOfRange("layer-cake route needs q != 0; use the entropy for q = 0")
    c = c_constant(n, q)
    g = sample_gauges(K, sample) if gauges is None else gauges
    v = g ** (-q)
    T = float(np.quantile(v, cut))
    vs = np.sort(v)
    N = len(vs)

    def trap(m):
        t = np.linspace(0.0, T, m + 1)
        F = (N - np.searchsorted(vs, t, side="left")) / N
        h = T / m
        return h * (F.sum() - 0.5 * (F[0] + F[-1]))

    body = trap(grid)
    disc = abs(body - trap(grid // 2))
    rho_dirs = np.linalg.norm(sample.points, axis=1) / g
    tail = _radial_tail(rho_dirs, T, q, n)
    value = body + float(tail.mean())
    per = np.minimum(v, T) + tail
    stderr = float(per.std(ddof=1) / math.sqrt(N))
    if disc > tol * abs(value):
        raise GridTooCoarse(f"discretization error {disc:.3g} exceeds {tol:g} relative")
    return DualVolumeResult(q, value, math.hypot(stderr, disc), "layercake", c,
                            {"samples": sample.count, "seed": sample.seed, "grid": grid,
                             "t_max": T, "discretization": disc})


# import-time self-test of the closed form for c(n, q)
for _n in range(1, 7):
    for _q in (-2.0, -1.0, 0.0, 0.5, 1.0):
        if _q < _n:
            _validated(_n, _q)

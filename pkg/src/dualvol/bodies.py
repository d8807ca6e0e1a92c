"""Origin-symmetric convex bodies and their radial, support and gauge functions.

Every body is immutable.  Symmetric polytopes store one representative of each
``+/-`` pair and mirror at evaluation time, so ``rho(u) == rho(-u)`` holds by
construction rather than by luck of rounding.

Point arguments follow one convention throughout: a single vector of shape
``(n,)`` gives a float back, a stack of shape ``(m, n)`` gives an array ``(m,)``.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import lp
from .errors import (DegenerateSpan, GenerationFailed, SingularTransform,
                     UnsupportedComposition)

COND_LIMIT = 1e12
UNIT_TOL = 1e-12
DEGENERATE_TOL = 1e-14
AUTO_POLYTOPE_MAX_DIM = 6
_CHUNK = 4096


def _canonical_sign(V, tol=1e-9):
    """+1/-1 per row: the sign of the first coordinate whose magnitude exceeds tol."""
    V = np.atleast_2d(V)
    big = np.abs(V) > tol
    first = np.argmax(big, axis=1)
    s = np.sign(V[np.arange(len(V)), first])
    s[s == 0] = 1.0
    return s


def _rowwise(fn, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return float(fn(X[None, :])[0])
    out = np.empty(len(X))
    for i in range(0, len(X), _CHUNK):
        out[i:i + _CHUNK] = fn(X[i:i + _CHUNK])
    return out


@dataclass(frozen=True)
class Hull:
    """Triangulated boundary of a polytope that contains the origin.

    ``simplices`` has shape ``(f, n, n)``: f boundary simplices, each given by
    its n vertices.  ``normals`` are unit outward normals and ``offsets`` the
    (positive) distances of the supporting hyperplanes from the origin.
    ``planes``/``plane_offsets`` hold the deduplicated facet hyperplanes.
    """

    vertices: np.ndarray
    simplices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    planes: np.ndarray
    plane_offsets: np.ndarray
    symmetric: bool

    @property
    def inradius(self) -> float:
        return float(self.plane_offsets.min())

    @property
    def circumradius(self) -> float:
        return float(np.linalg.norm(self.vertices, axis=1).max())


def _dedupe_planes(N, d):
    key = np.round(np.hstack([N, d[:, None]]), 9)
    _, idx = np.unique(key, axis=0, return_index=True)
    idx = np.sort(idx)
    return N[idx], d[idx]


def build_hull(points, symmetric=True) -> Hull:
    """Convex hull of ``points`` (the full point set, both members of each pair)."""
    P = np.asarray(points, dtype=float)
    n = P.shape[1]
    if np.linalg.matrix_rank(P) < n:
        raise DegenerateSpan("points do not span R^n")
    try:
        h = ConvexHull(P)
    except QhullError as exc:
        raise DegenerateSpan(f"qhull failed: {exc}") from exc
    N = h.equations[:, :n]
    d = -h.equations[:, n]
    if np.any(d <= DEGENERATE_TOL):
        raise DegenerateSpan("origin is not strictly interior to the hull")
    S = P[h.simplices]
    if symmetric:
        keep = _canonical_sign(N) > 0
        S, N, d = S[keep], N[keep], d[keep]
        planes, poff = _dedupe_planes(N, d)
        S = np.concatenate([S, -S])
        N = np.concatenate([N, -N])
        d = np.concatenate([d, d])
    else:
        planes, poff = _dedupe_planes(N, d)
    V = P[h.vertices]
    return Hull(V, S, N, d, planes, poff, symmetric)


class ConvexBody:
    """Base class.  Subclasses implement ``_gauge`` and ``_support`` on (m, n) stacks."""

    kind = "abstract"
    symmetric = True
    dim: int

    def _gauge(self, X):
        raise NotImplementedError

    def _support(self, U):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        try:
            return f"<{type(self).__name__} dim={self.dim} hash={body_hash(self)}>"
        except AttributeError:  # partially constructed
            return f"<{type(self).__name__}>"


class HPolytope(ConvexBody):
    """{x : |<a_i, x>| <= b_i}; one row per +/- pair of facets."""

    kind = "hpolytope"

    def __init__(self, normals, offsets):
        A = np.atleast_2d(np.array(normals, dtype=float))
        b = np.array(offsets, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise ValueError("normals and offsets disagree in length")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
            raise ValueError("non-finite polytope data")
        if np.any(b <= 0):
            raise ValueError("offsets must be positive (origin strictly interior)")
        if np.linalg.matrix_rank(A) < A.shape[1]:
            raise DegenerateSpan("facet normals do not span R^n; body is unbounded")
        A.flags.writeable = False
        b.flags.writeable = False
        self.normals, self.offsets = A, b
        self.dim = A.shape[1]

    def _gauge(self, X):
        g = np.abs(X @ self.normals.T) / self.offsets
        return g.max(axis=1)

    @cached_property
    def polar_body(self) -> "VPolytope":
        return VPolytope(self.normals / self.offsets[:, None])

    def _support(self, U):
        return self.polar_body._gauge(U)

    def to_dict(self):
        return {"dim": self.dim, "type": self.kind,
                "normals": self.normals.tolist(), "offsets": self.offsets.tolist()}


class VPolytope(ConvexBody):
    """conv(+/-p_i) when symmetric, conv(p_i) otherwise."""

    kind = "vpolytope"

    def __init__(self, points, symmetric=True):
        P = np.atleast_2d(np.array(points, dtype=float))
        if not np.all(np.isfinite(P)):
            raise ValueError("non-finite points")
        if np.linalg.matrix_rank(P) < P.shape[1]:
            raise DegenerateSpan("points do not span R^n")
        P.flags.writeable = False
        self.points = P
        self.symmetric = bool(symmetric)
        self.dim = P.shape[1]

    @cached_property
    def full_points(self) -> np.ndarray:
        if self.symmetric:
            return np.vstack([self.points, -self.points])
        return self.points

    @cached_property
    def hull(self) -> Hull:
        return build_hull(self.full_points, self.symmetric)

    def _gauge(self, X):
        h = self.hull
        g = X @ h.planes.T
        if self.symmetric:
            g = np.abs(g)
        return (g / h.plane_offsets).max(axis=1)

    def _support(self, U):
        s = U @ self.points.T
        if self.symmetric:
            s = np.abs(s)
        return s.max(axis=1)

    def to_dict(self):
        d = {"dim": self.dim, "type": self.kind, "points": self.points.tolist()}
        if not self.symmetric:
            d["symmetric"] = False
        return d


class LpBall(ConvexBody):
    kind = "lpball"

    def __init__(self, dim, p, r=1.0):
        p = float(p)
        if not (p >= 1.0):
            raise ValueError("p must lie in [1, inf]")
        if not r > 0:
            raise ValueError("radius must be positive")
        self.dim, self.p, self.r = int(dim), p, float(r)

    @property
    def dual_exponent(self) -> float:
        if self.p == 1.0:
            return math.inf
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1.0)

    def _gauge(self, X):
        return np.linalg.norm(X, ord=self.p, axis=1) / self.r

    def _support(self, U):
        return self.r * np.linalg.norm(U, ord=self.dual_exponent, axis=1)

    def to_dict(self):
        p = "inf" if math.isinf(self.p) else self.p
        return {"dim": self.dim, "type": self.kind, "p": p, "r": self.r}


class Ellipsoid(ConvexBody):
    """{x : x^T M^{-1} x <= 1} for symmetric positive-definite M."""

    kind = "ellipsoid"

    def __init__(self, matrix):
        M = np.atleast_2d(np.array(matrix, dtype=float))
        if M.shape[0] != M.shape[1]:
            raise ValueError("ellipsoid matrix must be square")
        if np.abs(M - M.T).max() > 1e-12 * max(1.0, np.abs(M).max()):
            raise ValueError("ellipsoid matrix must be symmetric")
        M = 0.5 * (M + M.T)
        try:
            self._chol = np.linalg.cholesky(M)
        except np.linalg.LinAlgError as exc:
            raise ValueError("ellipsoid matrix must be positive definite") from exc
        M.flags.writeable = False
        self.matrix = M
        self.dim = M.shape[0]
        self._inv_chol = np.linalg.inv(self._chol)

    def _gauge(self, X):
        return np.linalg.norm(X @ self._inv_chol.T, axis=1)

    def _support(self, U):
        return np.linalg.norm(U @ self._chol, axis=1)

    def to_dict(self):
        return {"dim": self.dim, "type": self.kind, "matrix": self.matrix.tolist()}


class Sum(ConvexBody):
    """Minkowski sum; gauge evaluation requires both operands to reduce to V-form."""

    kind = "sum"

    def __init__(self, left, right):
        if left.dim != right.dim:
            raise ValueError("Minkowski sum of bodies in different dimensions")
        self.left, self.right = left, right
        self.dim = left.dim
        self.symmetric = left.symmetric and right.symmetric

    @cached_property
    def vpolytope(self) -> "VPolytope":
        return as_vpolytope(self)

    def _gauge(self, X):
        return self.vpolytope._gauge(X)

    def _support(self, U):
        return self.left._support(U) + self.right._support(U)

    def to_dict(self):
        return {"dim": self.dim, "type": self.kind,
                "left": self.left.to_dict(), "right": self.right.to_dict()}


class Image(ConvexBody):
    """T K for an invertible matrix T."""

    kind = "image"

    def __init__(self, transform, inner):
        T = np.atleast_2d(np.array(transform, dtype=float))
        if T.shape != (inner.dim, inner.dim):
            raise ValueError(f"transform shape {T.shape} does not match dim {inner.dim}")
        if not np.all(np.isfinite(T)) or np.linalg.cond(T) > COND_LIMIT:
            raise SingularTransform("transform is numerically singular")
        T.flags.writeable = False
        self.transform, self.inner = T, inner
        self.dim = inner.dim
        self.symmetric = inner.symmetric
        self._inv = np.linalg.inv(T)

    def _gauge(self, X):
        return self.inner._gauge(X @ self._inv.T)

    def _support(self, U):
        return self.inner._support(U @ self.transform)

    def to_dict(self):
        return {"dim": self.dim, "type": self.kind,
                "transform": self.transform.tolist(), "inner": self.inner.to_dict()}


# ---------------------------------------------------------------- evaluation

def _check_directions(U):
    nrm = np.linalg.norm(np.atleast_2d(U), axis=1)
    if np.any(np.abs(nrm - 1.0) > UNIT_TOL):
        raise ValueError("directions must be unit vectors")


def _safe_gauge(K, X):
    g = K._gauge(X)
    scale = np.linalg.norm(X, axis=1)
    if np.any(~(g > DEGENERATE_TOL * scale)) or not np.all(np.isfinite(g)):
        raise DegenerateSpan("degenerate direction: body is malformed (origin not interior)")
    return g


def gauge(K: ConvexBody, x):
    """Minkowski functional inf{t > 0 : x in tK}; zero at the origin."""

    def fn(X):
        out = np.zeros(len(X))
        nz = np.any(X != 0.0, axis=1)
        if nz.any():
            out[nz] = _safe_gauge(K, X[nz])
        return out

    return _rowwise(fn, x)


def radial_homog(K: ConvexBody, x):
    """Radial function extended with degree -1 homogeneity; +inf at the origin."""
    g = gauge(K, x)
    with np.errstate(divide="ignore"):
        r = np.divide(1.0, g)
    return float(r) if np.ndim(r) == 0 else r


def radial_unit(K: ConvexBody, u, method: str = "auto"):
    """rho_K(u) = max{t > 0 : t u in K} for unit u.

    ``method="lp"`` evaluates V-polytope-reducible bodies by solving one LP
    per direction instead of using hull facets.
    """
    _check_directions(u)
    if method == "auto":
        return _rowwise(lambda U: 1.0 / _safe_gauge(K, U), u)
    if method != "lp":
        raise ValueError(f"unknown method {method!r}")
    V = as_vpolytope(K)
    P = V.full_points

    def one(U):
        out = np.empty(len(U))
        for i, v in enumerate(U):
            # mirror to the canonical member of the +/- pair
            if V.symmetric:
                v = v * _canonical_sign(v, 0.0)[0]
            out[i] = lp.radial_vpolytope(P, v)
        return out

    return _rowwise(one, u)


def support(K: ConvexBody, u, method: str = "auto"):
    """h_K(u) = max over x in K of <x, u>."""
    _check_directions(u)
    if method == "lp":
        if not isinstance(K, HPolytope):
            raise ValueError("LP support evaluation is only wired for H-polytopes")
        return _rowwise(lambda U: np.array(
            [lp.support_hpolytope(K.normals, K.offsets, v) for v in U]), u)
    return _rowwise(K._support, u)


# -------------------------------------------------------------- constructors

def minkowski_sum(K: ConvexBody, L: ConvexBody) -> Sum:
    return Sum(K, L)


def linear_image(T, K: ConvexBody) -> ConvexBody:
    T = np.asarray(T, dtype=float)
    if isinstance(K, Image):
        return Image(T @ K.transform, K.inner)
    return Image(T, K)


def dilate(K: ConvexBody, t: float) -> ConvexBody:
    """tK for t > 0, keeping the representation type where possible."""
    if not t > 0:
        raise ValueError("dilation factor must be positive")
    if t == 1.0:
        return K
    if isinstance(K, VPolytope):
        return VPolytope(t * K.points, K.symmetric)
    if isinstance(K, HPolytope):
        return HPolytope(K.normals, t * K.offsets)
    if isinstance(K, LpBall):
        return LpBall(K.dim, K.p, t * K.r)
    if isinstance(K, Ellipsoid):
        return Ellipsoid(t * t * K.matrix)
    if isinstance(K, Sum):
        return Sum(dilate(K.left, t), dilate(K.right, t))
    if isinstance(K, Image):
        return Image(K.transform, dilate(K.inner, t))
    return linear_image(t * np.eye(K.dim), K)


def combination(K: ConvexBody, L: ConvexBody, lam: float) -> ConvexBody:
    """(1 - lam) K + lam L."""
    if lam == 0.0:
        return K
    if lam == 1.0:
        return L
    return Sum(dilate(K, 1.0 - lam), dilate(L, lam))


def _cube_vertices(n):
    # one representative per +/- pair: first coordinate fixed to +1
    rest = np.array(list(itertools.product([1.0, -1.0], repeat=n - 1))).reshape(-1, n - 1)
    return np.hstack([np.ones((len(rest), 1)), rest])


def as_vpolytope(K: ConvexBody) -> VPolytope:
    """Exact V-representation of a polytope-reducible body."""
    if isinstance(K, VPolytope):
        return K
    if isinstance(K, HPolytope):
        h = K.polar_body.hull
        return VPolytope(h.planes / h.plane_offsets[:, None])
    if isinstance(K, LpBall) and K.dim <= AUTO_POLYTOPE_MAX_DIM:
        if K.p == 1.0:
            return VPolytope(K.r * np.eye(K.dim))
        if math.isinf(K.p):
            return VPolytope(K.r * _cube_vertices(K.dim))
    if isinstance(K, Sum):
        P = as_vpolytope(K.left)
        Q = as_vpolytope(K.right)
        S = (P.points[:, None, :] + Q.points[None, :, :]).reshape(-1, K.dim)
        if P.symmetric and Q.symmetric:
            D = (P.points[:, None, :] - Q.points[None, :, :]).reshape(-1, K.dim)
            return VPolytope(np.vstack([S, D]))
        F = (P.full_points[:, None, :] + Q.full_points[None, :, :]).reshape(-1, K.dim)
        return VPolytope(F, symmetric=False)
    if isinstance(K, Image):
        V = as_vpolytope(K.inner)
        return VPolytope(V.points @ K.transform.T, V.symmetric)
    raise UnsupportedComposition(f"{type(K).__name__} does not reduce to a V-polytope")


def hull_of(K: ConvexBody) -> Hull:
    """Triangulated boundary of a polytope-reducible body."""
    if isinstance(K, VPolytope):
        return K.hull
    if isinstance(K, Sum):
        return K.vpolytope.hull
    return as_vpolytope(K).hull


def polytope_facets(K: ConvexBody):
    """Deduplicated facet hyperplanes (unit normals, offsets), one per +/- pair if symmetric."""
    if isinstance(K, HPolytope):
        nrm = np.linalg.norm(K.normals, axis=1)
        return K.normals / nrm[:, None], K.offsets / nrm
    if isinstance(K, Image):
        # facets of TK: <T^{-T} a, x> <= d
        N, d = polytope_facets(K.inner)
        N = N @ K._inv
        nrm = np.linalg.norm(N, axis=1)
        return N / nrm[:, None], d / nrm
    h = hull_of(K)
    return h.planes, h.plane_offsets


def polar(K: ConvexBody) -> ConvexBody:
    if isinstance(K, VPolytope) and K.symmetric:
        return HPolytope(K.points, np.ones(len(K.points)))
    if isinstance(K, HPolytope):
        return VPolytope(K.normals / K.offsets[:, None])
    raise UnsupportedComposition("polar is defined for symmetric H- and V-polytopes only")


def is_polytope(K: ConvexBody) -> bool:
    try:
        as_vpolytope(K)
    except UnsupportedComposition:
        return False
    return True


# ----------------------------------------------------------------- standard bodies

def cube(n: int, r: float = 1.0) -> HPolytope:
    return HPolytope(np.eye(n), np.full(n, float(r)))


def cross_polytope(n: int, r: float = 1.0) -> VPolytope:
    return VPolytope(r * np.eye(n))


def ball(n: int, r: float = 1.0) -> LpBall:
    return LpBall(n, 2.0, r)


def random_rotation(n: int, rng) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


# ----------------------------------------------------------------- generation

@dataclass(frozen=True)
class GeneratorSpec:
    dim: int
    k: int
    family: str = "vpolytope"
    r_min: float = 0.05
    symmetric: bool = True
    max_tries: int = 100

    def __post_init__(self):
        if self.family not in ("vpolytope", "hpolytope"):
            raise ValueError(f"unknown body family {self.family!r}")
        if self.dim < 2 or self.k < self.dim + 1:
            raise ValueError("need dim >= 2 and k >= dim + 1")
        if self.family == "hpolytope" and not self.symmetric:
            raise ValueError("non-symmetric generation is only available for V-polytopes")


def _draw(spec: GeneratorSpec, rng) -> ConvexBody:
    n, k = spec.dim, spec.k
    if spec.family == "hpolytope":
        A = rng.standard_normal((k, n))
        A /= np.linalg.norm(A, axis=1)[:, None]
        return HPolytope(A, rng.uniform(0.5, 1.5, size=k))
    P = rng.standard_normal((k, n))
    if spec.symmetric:
        return VPolytope(P)
    # heuristic position for non-symmetric probing: centroid of the hull vertices
    h = ConvexHull(P)
    return VPolytope(P - P[h.vertices].mean(axis=0), symmetric=False)


def random_body(spec: GeneratorSpec, seed: int) -> ConvexBody:
    """Deterministic random polytope containing the ball of radius ``spec.r_min``."""
    rng = np.random.default_rng(seed)
    for _ in range(spec.max_tries):
        try:
            K = _draw(spec, rng)
            _, d = polytope_facets(K)
        except (DegenerateSpan, QhullError, ValueError):
            continue
        if d.min() >= spec.r_min:
            return K
    raise GenerationFailed(f"no admissible body after {spec.max_tries} draws")


# ----------------------------------------------------------------- serialization

def body_from_dict(d: dict) -> ConvexBody:
    kind = d["type"]
    if kind == "hpolytope":
        K = HPolytope(d["normals"], d["offsets"])
    elif kind == "vpolytope":
        K = VPolytope(d["points"], d.get("symmetric", True))
    elif kind == "lpball":
        K = LpBall(d["dim"], float(d["p"]), d.get("r", 1.0))
    elif kind == "ellipsoid":
        K = Ellipsoid(d["matrix"])
    elif kind == "sum":
        K = Sum(body_from_dict(d["left"]), body_from_dict(d["right"]))
    elif kind == "image":
        K = Image(d["transform"], body_from_dict(d["inner"]))
    else:
        raise ValueError(f"unknown body type {kind!r}")
    if "dim" in d and int(d["dim"]) != K.dim:
        raise ValueError(f"declared dim {d['dim']} does not match data dim {K.dim}")
    return K


def dumps(K: ConvexBody) -> str:
    # float repr is the shortest string that round-trips (<= 17 significant digits)
    return json.dumps(K.to_dict(), sort_keys=True)


def loads(s: str) -> ConvexBody:
    return body_from_dict(json.loads(s))


def save(K: ConvexBody, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(K) + "\n")


def load(path) -> ConvexBody:
    with open(path) as fh:
        return loads(fh.read())


def body_hash(K: ConvexBody) -> str:
    return hashlib.sha256(dumps(K).encode()).hexdigest()[:16]

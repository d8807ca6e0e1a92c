"""John ellipsoids, John position and contact-point diagnostics.

The maximal inscribed ellipsoid of a symmetric polytope K is obtained through
polarity: the minimum-volume origin-centred ellipsoid enclosing the vertices
of K° is {y : y^T M y <= 1}, and its polar {x : x^T M^{-1} x <= 1} is the
John ellipsoid of K.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from . import bodies
from .bodies import ConvexBody, Ellipsoid, HPolytope, Image, LpBall
from .errors import (DegenerateSpan, DualVolError, IterationLimit, NoContacts,
                     NotInJohnPosition)

log = logging.getLogger(__name__)

MVEE_EPS = 1e-7
CONTACT_TOL = 1e-5
MAX_ITER = 200_000
POLISH_EVERY = 50


@dataclass(frozen=True)
class EllipsoidMatrix:
    """{x : x^T M^{-1} x <= 1} for symmetric positive-definite M."""

    matrix: np.ndarray
    iterations: int = 0
    objective: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("ellipsoid matrix must be square")
        if np.abs(M - M.T).max() > 1e-12 * max(1.0, np.abs(M).max()):
            raise ValueError("ellipsoid matrix must be symmetric")
        if np.linalg.eigvalsh(M).min() <= 0:
            raise ValueError("ellipsoid matrix must be positive definite")
        object.__setattr__(self, "matrix", 0.5 * (M + M.T))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def volume(self) -> float:
        from .quad import omega

        return omega(self.dim) * math.sqrt(np.linalg.det(self.matrix))

    def polar(self) -> "EllipsoidMatrix":
        return EllipsoidMatrix(np.linalg.inv(self.matrix))

    def body(self) -> Ellipsoid:
        return Ellipsoid(self.matrix)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "matrix": self.matrix.tolist()}

    @classmethod
    def from_dict(cls, d) -> "EllipsoidMatrix":
        return cls(np.array(d["matrix"], dtype=float))


def _pair_representatives(P):
    P = np.asarray(P, dtype=float)
    P = P * bodies._canonical_sign(P, 0.0)[:, None]
    _, idx = np.unique(np.round(P, 12), axis=0, return_index=True)
    return P[np.sort(idx)]


def _newton_face(P, u, logdet):
    """Newton step for log det on the face spanned by the active weights.

    Coordinate ascent crawls when the optimal weights are not unique; a
    damped Newton step on the active face fixes that.  Returns the new
    weights, or None when no step increases the objective.
    """
    S = np.flatnonzero(u > 0)
    Q = P[S]
    X = (Q.T * u[S]) @ Q
    G = Q @ np.linalg.solve(X, Q.T)
    g = np.diag(G).copy()
    H = G * G
    m = len(S)
    # maximize g.d - d.H.d / 2 subject to sum(d) = 0
    A = np.block([[H, np.ones((m, 1))], [np.ones((1, m)), np.zeros((1, 1))]])
    d = np.linalg.lstsq(A, np.append(g, 0.0), rcond=1e-12)[0][:m]
    neg = d < 0
    tmax = float(np.min(-u[S][neg] / d[neg])) if neg.any() else 1.0
    t = min(1.0, tmax)
    while t > 1e-12:
        v = u.copy()
        v[S] = np.maximum(u[S] + t * d, 0.0)
        v /= v.sum()
        try:
            L = np.linalg.cholesky((P.T * v) @ P)
        except np.linalg.LinAlgError:
            L = None
        if L is not None and 2.0 * np.log(np.diag(L)).sum() > logdet:
            return v
        t *= 0.5
    return None


def mvee(points, eps: float = MVEE_EPS, max_iter: int = MAX_ITER) -> EllipsoidMatrix:
    """Minimum-volume origin-centred ellipsoid enclosing a symmetric point set.

    Khachiyan's barycentric coordinate ascent on log det(sum_i u_i p_i p_i^T),
    with Wolfe-Atwood away steps for linear convergence and a periodic
    Newton step on the active face.  Coordinate steps are exact line searches
    and Newton steps are accepted only on ascent, so the dual objective
    never decreases.  Stops when
    max_i p_i^T X^{-1} p_i <= n (1 + eps) and returns M = kappa X, which
    contains every point exactly and is within (1 + eps)^n of the optimal
    volume.
    """
    P = _pair_representatives(points)
    k, n = P.shape
    if np.linalg.matrix_rank(P) < n:
        raise DegenerateSpan("points do not span R^n")
    u = np.full(k, 1.0 / k)
    X = (P.T * u) @ P
    history = []
    prev = -np.inf
    for it in range(max_iter):
        L = np.linalg.cholesky(X)
        logdet = 2.0 * np.log(np.diag(L)).sum()
        if logdet < prev - 1e-12 * max(1.0, abs(prev)):
            raise DualVolError(f"MVEE dual objective decreased at iteration {it}")
        prev = logdet
        history.append(logdet)
        Y = np.linalg.solve(L, P.T)
        g = np.einsum("ij,ij->j", Y, Y)
        jp = int(np.argmax(g))
        kp = g[jp]
        if kp <= n * (1.0 + eps):
            log.debug("mvee converged after %d iterations", it)
            return EllipsoidMatrix(kp * X, it, tuple(history))
        if it % POLISH_EVERY == POLISH_EVERY - 1:
            v = _newton_face(P, u, logdet)
            if v is not None:
                u = v
                X = (P.T * u) @ P
                continue
        active = np.flatnonzero(u > 0)
        jm = int(active[np.argmin(g[active])])
        km = g[jm]
        if kp / n - 1.0 >= 1.0 - km / n:
            j, beta = jp, (kp / n - 1.0) / (kp - 1.0)
        else:
            bmin = -u[jm] / (1.0 - u[jm])
            beta = bmin if km <= 1.0 else max((km / n - 1.0) / (km - 1.0), bmin)
            j = jm
        u *= 1.0 - beta
        u[j] += beta
        if beta < 0 and u[j] < 1e-15:
            u[j] = 0.0
        p = P[j]
        X = (1.0 - beta) * X + beta * np.outer(p, p)
    raise IterationLimit(f"MVEE did not reach eps={eps} in {max_iter} iterations")


def _polar_points(K):
    N, d = bodies.polytope_facets(K)
    return N / d[:, None]


def john_ellipsoid(K: ConvexBody, eps: float = MVEE_EPS) -> EllipsoidMatrix:
    """Maximal-volume ellipsoid inscribed in a symmetric body."""
    if not K.symmetric:
        raise ValueError("John ellipsoids are computed for origin-symmetric bodies only")
    if isinstance(K, Image):
        inner = john_ellipsoid(K.inner, eps)
        T = K.transform
        return EllipsoidMatrix(T @ inner.matrix @ T.T, inner.iterations, inner.objective)
    if isinstance(K, Ellipsoid):
        return EllipsoidMatrix(K.matrix)
    if isinstance(K, LpBall) and K.p == 2.0:
        return EllipsoidMatrix(K.r ** 2 * np.eye(K.dim))
    outer = mvee(_polar_points(K), eps)
    E = EllipsoidMatrix(np.linalg.inv(outer.matrix), outer.iterations, outer.objective)
    N, d = bodies.polytope_facets(K)
    h = np.sqrt(np.einsum("ij,jk,ik->i", N, E.matrix, N))
    if np.any(h > d * (1.0 + 1e-9)):
        raise DualVolError("John ellipsoid escapes the body; containment certificate failed")
    return E


def _inv_sqrt(M):
    w, V = np.linalg.eigh(M)
    return (V / np.sqrt(w)) @ V.T


def john_transform(K: ConvexBody, eps: float = MVEE_EPS) -> np.ndarray:
    """Symmetric T = M_john^{-1/2}, mapping the John ellipsoid of K to the unit ball."""
    return _inv_sqrt(john_ellipsoid(K, eps).matrix)


def to_john_position(K: ConvexBody, eps: float = MVEE_EPS) -> ConvexBody:
    return bodies.linear_image(john_transform(K, eps), K)


@dataclass(frozen=True)
class ContactData:
    """Contact directions (one per +/- pair) with isotropic weights.

    ``sum_i weights[i] * outer(u_i, u_i)`` approximates the identity; the
    Frobenius error of that fit is ``residual``.
    """

    directions: np.ndarray
    weights: np.ndarray
    residual: float

    def to_dict(self) -> dict:
        return {"directions": self.directions.tolist(), "weights": self.weights.tolist(),
                "residual": self.residual}


def isotropic_weights(U):
    """Nonnegative least squares for sum c_i u_i u_i^T = I."""
    n = U.shape[1]
    A = np.einsum("ki,kj->ijk", U, U).reshape(n * n, -1)
    c, _ = nnls(A, np.eye(n).ravel(), maxiter=50 * A.shape[1])
    resid = float(np.linalg.norm((U.T * c) @ U - np.eye(n)))
    return c, resid


def contact_points(K_john: ConvexBody, tol: float = CONTACT_TOL) -> ContactData:
    """Facet normals of a John-positioned polytope whose facets touch the unit sphere."""
    N, d = bodies.polytope_facets(K_john)
    hit = d <= 1.0 + tol
    if not hit.any():
        raise NoContacts(f"no facet within {tol:g} of the unit sphere (closest {d.min():.6g})")
    U = N[hit]
    if K_john.symmetric:
        U = _pair_representatives(U)
    c, resid = isotropic_weights(U)
    return ContactData(U, c, resid)


def z_infinity_polar(contacts: ContactData) -> HPolytope:
    """Z_inf^* = {x : |<x, u>| <= 1 for every contact direction u}."""
    U = np.asarray(contacts.directions, dtype=float)
    if np.linalg.matrix_rank(U) < U.shape[1]:
        raise DegenerateSpan("contact directions do not span R^n")
    return HPolytope(U, np.ones(len(U)))


def contained_in(K: ConvexBody, L: ConvexBody, directions, rtol: float = 1e-9) -> bool:
    """K subset of L, checked as rho_K <= rho_L on the given unit directions."""
    rk = bodies.radial_unit(K, directions)
    rl = bodies.radial_unit(L, directions)
    return bool(np.all(rk <= rl * (1.0 + rtol)))


def check_john_position(K: ConvexBody, inner_tol: float = 1e-5, john_tol: float = 1e-4,
                        eps: float = MVEE_EPS) -> None:
    """Raise NotInJohnPosition unless the unit ball is (numerically) K's John ellipsoid."""
    if bodies.is_polytope(K):
        _, d = bodies.polytope_facets(K)
        if d.min() < 1.0 - inner_tol:
            raise NotInJohnPosition(f"unit ball not inside K (inradius {d.min():.8g})")
        if d.min() > 1.0 + john_tol:
            raise NotInJohnPosition(f"unit ball does not touch the boundary (inradius {d.min():.8g})")
    try:
        M = john_ellipsoid(K, eps).matrix
    except (ValueError, DualVolError) as exc:
        raise NotInJohnPosition(str(exc)) from exc
    err = np.abs(M - np.eye(K.dim)).max()
    if err > john_tol:
        raise NotInJohnPosition(f"John ellipsoid differs from the unit ball by {err:.3g}")

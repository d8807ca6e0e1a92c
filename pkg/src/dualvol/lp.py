"""Dense two-phase tableau simplex for the small LPs behind polytope queries.

Problems are posed as

    maximize  c @ x   subject to  A @ x = b,  x[j] >= 0 unless free[j].

Pivoting is Dantzig's rule (lowest index on ties) until the objective stalls,
after which Bland's rule takes over for the rest of the run.  Every choice is
deterministic, so identical inputs reproduce identical pivot sequences.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import IterationLimit

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9
STALL_PIVOTS = 20


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpProblem:
    objective: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    free: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        A = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
        b = np.asarray(self.b_eq, dtype=float).ravel()
        if A.shape != (b.size, c.size):
            raise ValueError(f"A_eq has shape {A.shape}, expected {(b.size, c.size)}")
        if not np.all(np.isfinite(b)):
            raise ValueError("rhs must be finite")
        free = np.zeros(c.size, bool) if self.free is None else np.asarray(self.free, bool)
        if free.shape != c.shape:
            raise ValueError("free mask must match the objective length")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A_eq", A)
        object.__setattr__(self, "b_eq", b)
        object.__setattr__(self, "free", free)


@dataclass(frozen=True)
class LpSolution:
    status: Status
    objective: float = float("nan")
    x: np.ndarray | None = None
    pivots: tuple = field(default=(), repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Tableau:
    # Row-major tableau [A | b] with the reduced-cost row last (minimization form).

    def __init__(self, T, basis, max_iter):
        self.T = T
        self.basis = basis
        self.max_iter = max_iter
        self.iterations = 0
        self.pivots = []

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j
        self.pivots.append((r, j))

    def run(self, ncols):
        T = self.T
        bland = False
        best = T[-1, -1]
        stalled = 0
        while True:
            red = T[-1, :ncols]
            if bland:
                cand = np.flatnonzero(red < -FEAS_TOL)
                if cand.size == 0:
                    return Status.OPTIMAL
                j = int(cand[0])
            else:
                j = int(np.argmin(red))
                if red[j] >= -FEAS_TOL:
                    return Status.OPTIMAL
            col = T[:-1, j]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return Status.UNBOUNDED
            ratios = T[rows, -1] / col[rows]
            rmin = ratios.min()
            ties = rows[ratios <= rmin + PIVOT_TOL * max(1.0, abs(rmin))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            if self.iterations >= self.max_iter:
                raise IterationLimit(f"simplex exceeded {self.max_iter} pivots")
            self.pivot(r, j)
            self.iterations += 1
            # T[-1, -1] holds -objective; it must strictly increase to count as progress.
            if T[-1, -1] > best + PIVOT_TOL:
                best = T[-1, -1]
                stalled = 0
            else:
                stalled += 1
                if stalled >= STALL_PIVOTS:
                    bland = True


def solve(prob: LpProblem, max_iter: int | None = None) -> LpSolution:
    c, A, b, free = prob.objective, prob.A_eq, prob.b_eq, prob.free
    m, n0 = A.shape
    # split free variables x = x+ - x-
    fidx = np.flatnonzero(free)
    A = np.hstack([A, -A[:, fidx]])
    cmin = -np.concatenate([c, -c[fidx]])
    n = A.shape[1]
    if max_iter is None:
        max_iter = 50 * (m + n)

    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    tab = _Tableau(T, list(range(n, n + m)), max_iter)

    tab.run(n + m)
    scale = 1.0 + np.abs(b).max(initial=0.0)
    if -T[-1, -1] > FEAS_TOL * scale:
        return LpSolution(Status.INFEASIBLE, pivots=tuple(tab.pivots))

    # drive artificials out of the basis; rows that cannot be pivoted are redundant
    keep = []
    for r in range(m):
        if tab.basis[r] >= n:
            nz = np.flatnonzero(np.abs(T[r, :n]) > PIVOT_TOL)
            if nz.size:
                tab.pivot(r, int(nz[0]))
                keep.append(r)
        else:
            keep.append(r)
    rows = keep + [m]
    T = np.ascontiguousarray(np.delete(T[rows], np.s_[n:n + m], axis=1))
    basis = [tab.basis[r] for r in keep]
    cost = np.zeros(n + 1)
    cost[:n] = cmin
    for r, j in enumerate(basis):
        cost -= cmin[j] * T[r]
    T[-1] = cost
    tab2 = _Tableau(T, basis, max_iter)
    tab2.iterations = tab.iterations
    tab2.pivots = tab.pivots
    status = tab2.run(n)
    if status is Status.UNBOUNDED:
        return LpSolution(status, pivots=tuple(tab2.pivots))

    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    xs = x[:n0].copy()
    xs[fidx] -= x[n0:]
    return LpSolution(Status.OPTIMAL, float(c @ xs), xs, tuple(tab2.pivots))


def residual(prob: LpProblem, sol: LpSolution) -> float:
    """Relative primal feasibility residual of an optimal solution."""
    r = prob.A_eq @ sol.x - prob.b_eq
    return float(np.abs(r).max(initial=0.0) / (1.0 + np.abs(prob.b_eq).max(initial=0.0)))


def radial_vpolytope(points, u) -> float:
    """Largest t with t*u in conv(points).

    ``points`` is the full point list (both members of every +/- pair).
    """
    P = np.asarray(points, dtype=float)
    u = np.asarray(u, dtype=float)
    k, n = P.shape
    # variables: lambda_1..lambda_k >= 0, t >= 0
    A = np.zeros((n + 1, k + 1))
    A[:n, :k] = P.T
    A[:n, k] = -u
    A[n, :k] = 1.0
    b = np.zeros(n + 1)
    b[n] = 1.0
    c = np.zeros(k + 1)
    c[k] = 1.0
    sol = solve(LpProblem(c, A, b))
    if not sol.optimal:
        raise IterationLimit(f"radial LP ended with status {sol.status.value}")
    return sol.objective


def support_hpolytope(normals, offsets, u) -> float:
    """max <x, u> over {x : |<a_i, x>| <= b_i}, by LP."""
    N = np.asarray(normals, dtype=float)
    b = np.asarray(offsets, dtype=float)
    m, n = N.shape
    # x free, slacks s >= 0:  [N; -N] x + s = [b; b]
    A = np.hstack([np.vstack([N, -N]), np.eye(2 * m)])
    c = np.concatenate([np.asarray(u, float), np.zeros(2 * m)])
    free = np.concatenate([np.ones(n, bool), np.zeros(2 * m, bool)])
    sol = solve(LpProblem(c, A, np.concatenate([b, b]), free))
    if not sol.optimal:
        raise IterationLimit(f"support LP ended with status {sol.status.value}")
    return sol.objective

import numpy as np
import pytest

from dualvol import bodies, lp
from dualvol.errors import IterationLimit


def test_small_lp_optimum():
    # max x + y  s.t.  x + 2y + s1 = 4, 3x + y + s2 = 6
    prob = lp.LpProblem(np.array([1.0, 1.0, 0, 0]),
                        np.array([[1.0, 2, 1, 0], [3, 1, 0, 1]]), np.array([4.0, 6]))
    sol = lp.solve(prob)
    assert sol.optimal
    assert sol.objective == pytest.approx(2.8, abs=1e-12)
    np.testing.assert_allclose(sol.x[:2], [1.6, 1.2], atol=1e-12)
    assert lp.residual(prob, sol) < 1e-12


def test_infeasible_and_unbounded():
    inf = lp.LpProblem(np.array([1.0, 0]), np.array([[1.0, 1]]), np.array([-1.0]))
    assert lp.solve(inf).status is lp.Status.INFEASIBLE
    unb = lp.LpProblem(np.array([1.0, 0]), np.array([[1.0, -1]]), np.array([1.0]))
    assert lp.solve(unb).status is lp.Status.UNBOUNDED


def test_iteration_limit():
    prob = lp.LpProblem(np.array([1.0, 1.0, 0, 0]),
                        np.array([[1.0, 2, 1, 0], [3, 1, 0, 1]]), np.array([4.0, 6]))
    with pytest.raises(IterationLimit):
        lp.solve(prob, max_iter=0)


def test_deterministic_pivots():
    prob = lp.LpProblem(np.array([1.0, 1, 1, 0, 0, 0]),
                        np.hstack([np.ones((3, 3)), np.eye(3)]), np.ones(3))
    a, b = lp.solve(prob), lp.solve(prob)
    assert a.pivots == b.pivots
    np.testing.assert_array_equal(a.x, b.x)
    assert a.objective == pytest.approx(1.0)


def test_radial_square_and_cross():
    sq = bodies.as_vpolytope(bodies.cube(2)).full_points
    u = np.array([1.0, 1.0]) / np.sqrt(2)
    assert lp.radial_vpolytope(sq, u) == pytest.approx(np.sqrt(2), abs=1e-12)
    cr = bodies.cross_polytope(3).full_points
    u = np.ones(3) / np.sqrt(3)
    assert lp.radial_vpolytope(cr, u) == pytest.approx(1 / np.sqrt(3), abs=1e-12)


def test_support_hpolytope():
    N = np.eye(3)
    assert lp.support_hpolytope(N, np.ones(3), np.ones(3) / np.sqrt(3)) == pytest.approx(np.sqrt(3))


def test_lp_matches_hull(body42, rng):
    U = rng.standard_normal((25, 3))
    U /= np.linalg.norm(U, axis=1)[:, None]
    np.testing.assert_allclose(bodies.radial_unit(body42, U, method="lp"),
                               bodies.radial_unit(body42, U), rtol=1e-10)
    H = bodies.HPolytope(rng.standard_normal((8, 3)), rng.uniform(0.5, 1.5, 8))
    np.testing.assert_allclose(bodies.support(H, U, method="lp"), bodies.support(H, U),
                               rtol=1e-9)

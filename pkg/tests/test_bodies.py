import json

import numpy as np
import pytest

from dualvol import bodies
from dualvol.bodies import Ellipsoid, HPolytope, Image, LpBall, Sum, VPolytope
from dualvol.errors import DegenerateSpan, GenerationFailed, SingularTransform, UnsupportedComposition

SQ = np.array([[1.0, 1.0], [1.0, -1.0]])


def unit(rng, m, n):
    U = rng.standard_normal((m, n))
    return U / np.linalg.norm(U, axis=1)[:, None]


def test_radial_examples():
    C = bodies.cube(2)
    assert bodies.radial_unit(C, np.array([1.0, 0])) == 1.0
    assert bodies.radial_unit(C, np.array([1.0, 1]) / np.sqrt(2)) == pytest.approx(np.sqrt(2), abs=1e-15)
    assert bodies.radial_unit(VPolytope(SQ), np.array([1.0, 0])) == pytest.approx(1.0, abs=1e-15)
    assert bodies.radial_unit(VPolytope(SQ), np.array([1.0, 0]), method="lp") == pytest.approx(1.0, abs=1e-12)


def test_support_examples():
    C = bodies.cube(2)
    assert bodies.support(C, np.array([1.0, 0])) == pytest.approx(1.0)
    assert bodies.support(Sum(C, C), np.array([0.0, 1])) == pytest.approx(2.0)
    assert bodies.support(VPolytope(SQ), np.array([1.0, 1]) / np.sqrt(2)) == pytest.approx(np.sqrt(2))


def test_gauge_examples():
    assert bodies.gauge(bodies.cube(2), np.array([2.0, 0])) == pytest.approx(2.0)
    assert bodies.gauge(bodies.cube(4), np.zeros(4)) == 0.0
    assert bodies.gauge(Ellipsoid(4 * np.eye(2)), np.array([1.0, 0])) == pytest.approx(0.5)


def test_radial_homog_examples():
    x = np.array([2.0, 0, 0])
    assert bodies.radial_homog(bodies.ball(3), x) == pytest.approx(0.5)
    assert bodies.radial_homog(bodies.cube(2), np.array([1.0, 1])) == pytest.approx(1.0)
    assert bodies.radial_homog(bodies.cube(2), np.array([0.5, 0])) == pytest.approx(2.0)
    assert bodies.radial_homog(bodies.cube(2), np.zeros(2)) == np.inf


def test_rejects_non_unit_direction():
    with pytest.raises(ValueError):
        bodies.radial_unit(bodies.cube(2), np.array([1.0, 1.0]))


def test_minkowski_examples(rng):
    C = bodies.cube(2)
    assert bodies.radial_unit(bodies.minkowski_sum(C, C), np.array([1.0, 0])) == pytest.approx(2.0)
    # thin box plus its rotation is the box [-1.1, 1.1]^2
    box = HPolytope(np.eye(2), [1.0, 0.1])
    rot = HPolytope(np.eye(2), [0.1, 1.0])
    S = bodies.minkowski_sum(box, rot)
    exact = bodies.cube(2, 1.1)
    U = unit(rng, 200, 2)
    np.testing.assert_allclose(bodies.radial_unit(S, U), bodies.radial_unit(exact, U), rtol=1e-12)


def test_dilate_pair_sum(body42, rng):
    U = unit(rng, 300, 3)
    S = bodies.minkowski_sum(body42, bodies.dilate(body42, 2.0))
    np.testing.assert_allclose(bodies.radial_unit(S, U), 3 * bodies.radial_unit(body42, U), rtol=1e-12)


def test_linear_image(body42, rng):
    U = unit(rng, 100, 3)
    r = bodies.radial_unit(body42, U)
    np.testing.assert_allclose(bodies.radial_unit(bodies.linear_image(np.eye(3), body42), U), r, rtol=1e-14)
    np.testing.assert_allclose(bodies.radial_unit(bodies.linear_image(2 * np.eye(3), body42), U), 2 * r,
                               rtol=1e-14)
    with pytest.raises(SingularTransform):
        bodies.linear_image(np.diag([1.0, 1.0, 1e-14]), body42)


def test_polar_examples(body42, rng):
    P = bodies.polar(bodies.cube(3))
    assert isinstance(P, VPolytope)
    np.testing.assert_allclose(np.sort(np.abs(P.full_points).sum(1)), np.ones(6))
    U = unit(rng, 100, 3)
    np.testing.assert_allclose(bodies.radial_unit(bodies.polar(body42), U) * bodies.support(body42, U),
                               1.0, atol=1e-9)
    V = VPolytope(SQ)
    X = rng.standard_normal((50, 2))
    np.testing.assert_allclose(bodies.gauge(bodies.polar(bodies.polar(V)), X), bodies.gauge(V, X), rtol=1e-12)
    with pytest.raises(UnsupportedComposition):
        bodies.polar(bodies.ball(3))


def test_representation_equivalence(rng):
    H = bodies.cube(3)
    V = bodies.as_vpolytope(H)
    U = unit(rng, 1000, 3)
    np.testing.assert_allclose(bodies.radial_unit(H, U), bodies.radial_unit(V, U), atol=1e-9)
    np.testing.assert_allclose(bodies.support(H, U), bodies.support(V, U), atol=1e-9)
    B1 = LpBall(3, 1.0)
    np.testing.assert_allclose(bodies.radial_unit(B1, U), bodies.radial_unit(bodies.as_vpolytope(B1), U),
                               rtol=1e-12)


def test_symmetry_exact(body42, rng):
    U = unit(rng, 500, 3)
    for K in (body42, bodies.cube(3), Sum(body42, bodies.cube(3)),
              Image(bodies.random_rotation(3, rng), body42)):
        np.testing.assert_array_equal(bodies.radial_unit(K, U), bodies.radial_unit(K, -U))


def test_sum_support_additive(pair3, rng):
    K, L = pair3
    U = unit(rng, 200, 3)
    np.testing.assert_allclose(bodies.support(Sum(K, L), U),
                               bodies.support(K, U) + bodies.support(L, U), atol=1e-9)


def test_monotonicity(body42, rng):
    big = bodies.dilate(body42, 1.3)
    U = unit(rng, 200, 3)
    assert np.all(bodies.radial_unit(body42, U) <= bodies.radial_unit(big, U))


def test_unsupported_sum():
    S = Sum(bodies.ball(3), bodies.cube(3))
    with pytest.raises(UnsupportedComposition):
        bodies.radial_unit(S, np.array([1.0, 0, 0]))
    assert bodies.support(S, np.array([1.0, 0, 0])) == pytest.approx(2.0)


def test_malformed_body_fails_loudly():
    with pytest.raises(DegenerateSpan):
        VPolytope(np.array([[1.0, 0, 0], [0, 1, 0], [1, 1, 0]]))
    with pytest.raises(DegenerateSpan):
        HPolytope([[1.0, 0, 0], [0, 1, 0]], [1.0, 1.0])


def test_random_body_contract():
    spec = bodies.GeneratorSpec(3, 20)
    K1, K2 = bodies.random_body(spec, 5), bodies.random_body(spec, 5)
    assert bodies.dumps(K1) == bodies.dumps(K2)
    assert K1.full_points.shape == (40, 3)
    assert K1.hull.inradius >= spec.r_min
    X = 0.01 * np.random.default_rng(0).standard_normal((100, 3))
    assert np.all(bodies.gauge(K1, X) <= np.linalg.norm(X, axis=1) / spec.r_min)
    H = bodies.random_body(bodies.GeneratorSpec(3, 10, family="hpolytope"), 1)
    assert isinstance(H, HPolytope) and H.normals.shape == (10, 3)
    with pytest.raises(GenerationFailed):
        bodies.random_body(bodies.GeneratorSpec(3, 4, r_min=10.0, max_tries=3), 0)


def test_nonsymmetric_family_centered():
    K = bodies.random_body(bodies.GeneratorSpec(3, 12, symmetric=False), 3)
    assert not K.symmetric
    np.testing.assert_allclose(K.hull.vertices.mean(0), 0.0, atol=1e-12)


def test_json_round_trip(body42, tmp_path):
    items = [body42, bodies.cube(3), LpBall(3, np.inf, 2.0), LpBall(2, 3.5), Ellipsoid(np.diag([1.0, 4.0])),
             Sum(body42, bodies.cross_polytope(3)), Image(np.diag([1.0, 2, 3]), body42)]
    rng = np.random.default_rng(0)
    for K in items:
        path = tmp_path / "k.json"
        bodies.save(K, path)
        K2 = bodies.load(path)
        assert bodies.body_hash(K2) == bodies.body_hash(K)
        U = unit(rng, 20, K.dim)
        if bodies.is_polytope(K) or not isinstance(K, Sum):
            np.testing.assert_array_equal(bodies.radial_unit(K2, U), bodies.radial_unit(K, U))
    d = json.loads(bodies.dumps(LpBall(3, np.inf)))
    assert d["p"] == "inf"
    with pytest.raises(ValueError):
        bodies.loads('{"type": "hpolytope", "dim": 4, "normals": [[1, 0], [0, 1]], "offsets": [1, 1]}')

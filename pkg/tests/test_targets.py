import math

import numpy as np
import pytest

from nondiv.targets import (TargetError, catalog_lookup, geodesic_distance,
                            geodesic_shoot, parallel_transport)

TWO_PI = 2.0 * math.pi

CURVED = ("hyperbolic_plane", "hyperbolic_cylinder", "sphere")


def _sample_points(name, rng, count):
    if name == "hyperbolic_plane":
        return np.stack([rng.uniform(-2, 2, count), rng.uniform(0.3, 3.0, count)])
    if name == "hyperbolic_cylinder":
        return np.stack([rng.uniform(-1.5, 1.5, count), rng.uniform(0, TWO_PI, count)])
    if name == "sphere":
        return rng.uniform(-2, 2, (2, count))
    raise AssertionError(name)


def test_catalog_unknown_name():
    with pytest.raises(TargetError):
        catalog_lookup("klein_bottle")


def test_flat_targets_trivial_geometry(rng):
    for name, params in [("euclidean", {"dim": 3}), ("circle", {}),
                         ("flat_torus", {"dim": 2})]:
        t = catalog_lookup(name, params)
        pts = rng.standard_normal((t.dim, 7))
        assert np.abs(t.christoffel(pts)).max() == 0.0
        assert np.abs(t.curvature(pts)).max() == 0.0
        assert t.is_flat and t.curvature_sign == "flat"


def test_cylinder_christoffels_closed_form(rng):
    t = catalog_lookup("hyperbolic_cylinder")
    u = rng.uniform(-1.2, 1.2, 5)
    pts = np.stack([u, rng.uniform(0, TWO_PI, 5)])
    G = t.christoffel(pts)
    assert np.allclose(G[..., 0, 1, 1], -np.cosh(u) * np.sinh(u))
    assert np.allclose(G[..., 1, 0, 1], np.tanh(u))
    assert np.allclose(G[..., 1, 1, 0], np.tanh(u))
    G_rest = G.copy()
    G_rest[..., 0, 1, 1] = 0
    G_rest[..., 1, 0, 1] = 0
    G_rest[..., 1, 1, 0] = 0
    assert np.abs(G_rest).max() == 0.0


@pytest.mark.parametrize("name", CURVED)
def test_christoffel_metric_consistency(name, rng):
    # 2 g_il Gamma^l_jk = d_j g_ik + d_k g_ij - d_i g_jk by central differences
    t = catalog_lookup(name)
    eps = 1e-6
    pts = _sample_points(name, rng, 100)
    worst = 0.0
    for idx in range(pts.shape[1]):
        x = pts[:, idx]
        g = t.metric(x.reshape(-1, 1))[0]
        G = t.christoffel(x.reshape(-1, 1))[0]
        dg = np.zeros((t.dim,) * 3)
        for k in range(t.dim):
            xp, xm = x.copy(), x.copy()
            xp[k] += eps
            xm[k] -= eps
            dg[k] = (t.metric(xp.reshape(-1, 1))[0] - t.metric(xm.reshape(-1, 1))[0]) / (2 * eps)
        lhs = 2.0 * np.einsum("il,ljk->ijk", g, G)
        rhs = np.empty_like(lhs)
        for i in range(t.dim):
            for j in range(t.dim):
                for k in range(t.dim):
                    rhs[i, j, k] = dg[j][i, k] + dg[k][i, j] - dg[i][j, k]
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    assert worst < 5e-8  # central differences are O(eps^2) with curvature-size constants


@pytest.mark.parametrize("name,expected", [
    ("hyperbolic_plane", -1.0), ("hyperbolic_cylinder", -1.0), ("sphere", 1.0)])
def test_sectional_curvature_constant(name, expected, rng):
    t = catalog_lookup(name)
    pts = _sample_points(name, rng, 50)
    X = rng.standard_normal((2, 50))
    Y = rng.standard_normal((2, 50))
    K = t.sectional(pts, X, Y)
    assert np.abs(K - expected).max() < 1e-10


# ---------------------------------------------------------------------------
# distances


def test_circle_distance_with_hints():
    t = catalog_lookup("circle")
    assert geodesic_distance(t, [0.1], [0.2]) == pytest.approx(0.1)
    assert geodesic_distance(t, [0.1], [0.2], hint=[1]) == pytest.approx(0.9)
    assert geodesic_distance(t, [0.3], [0.3]) == 0.0


def test_hint_on_nonperiodic_component_rejected():
    t = catalog_lookup("hyperbolic_plane")
    with pytest.raises(TargetError):
        geodesic_distance(t, [0.0, 1.0], [0.0, 2.0], hint=[1, 0])


def test_hyperbolic_plane_axis_distance():
    t = catalog_lookup("hyperbolic_plane")
    assert geodesic_distance(t, [0.0, 1.0], [0.0, np.e]) == pytest.approx(1.0, abs=1e-12)


def test_cylinder_distance_matches_shooting(rng):
    t = catalog_lookup("hyperbolic_cylinder")
    from scipy.optimize import fsolve

    for _ in range(4):
        p = np.array([rng.uniform(-0.8, 0.8), rng.uniform(0, 2)])
        q = np.array([rng.uniform(-0.8, 0.8), rng.uniform(0, 2)])
        closed = geodesic_distance(t, p, q)

        def miss(v):
            return geodesic_shoot(t, p, v, nsteps=200)[-1] - q

        v0 = fsolve(miss, q - p)
        g = t.metric(p.reshape(2, 1))[0]
        length = math.sqrt(float(v0 @ g @ v0))
        assert closed == pytest.approx(length, abs=5e-9)


def test_cylinder_distance_with_winding_hint():
    t = catalog_lookup("hyperbolic_cylinder")
    p = np.array([0.0, 0.0])
    q = np.array([0.0, 1.0])
    assert geodesic_distance(t, p, q) == pytest.approx(1.0)
    # one extra winding of the connecting path
    assert geodesic_distance(t, p, q, hint=[0, 1]) == pytest.approx(TWO_PI - 1.0)


def test_sphere_distance():
    t = catalog_lookup("sphere")
    # chart center (south pole) to the equator circle |y| = 1
    assert geodesic_distance(t, [0.0, 0.0], [1.0, 0.0]) == pytest.approx(np.pi / 2)


def test_distance_symmetry_and_triangle(rng):
    for name in ("hyperbolic_plane", "hyperbolic_cylinder", "flat_torus"):
        t = catalog_lookup(name, {"dim": 2} if name == "flat_torus" else {})
        for _ in range(25):
            if name == "hyperbolic_plane":
                pts = np.stack([rng.uniform(-1, 1, 3), rng.uniform(0.5, 2.0, 3)])
            else:
                pts = rng.uniform(-1, 1, (2, 3))
            p, q, r = pts[:, 0], pts[:, 1], pts[:, 2]
            dpq = geodesic_distance(t, p, q)
            assert dpq == pytest.approx(geodesic_distance(t, q, p), rel=1e-12)
            assert dpq <= geodesic_distance(t, p, r) + geodesic_distance(t, r, q) + 1e-12


# ---------------------------------------------------------------------------
# parallel transport


def test_transport_flat_identity():
    t = catalog_lookup("flat_torus", {"dim": 2})
    curve = np.stack([np.linspace(0, 1, 20), np.linspace(0, 2, 20)], axis=1)
    v = np.array([0.3, -0.7])
    assert np.array_equal(parallel_transport(t, curve, v), v)


def test_transport_around_closed_geodesic():
    t = catalog_lookup("hyperbolic_cylinder")
    theta = np.linspace(0.0, TWO_PI, 100)
    curve = np.stack([np.zeros_like(theta), theta], axis=1)
    v = np.array([0.0, 1.0])
    out = parallel_transport(t, curve, v)
    assert np.abs(out - v).max() == 0.0  # Christoffels vanish identically on u = 0


def test_transport_preserves_norm(rng):
    t = catalog_lookup("hyperbolic_plane")
    for _ in range(5):
        s = np.linspace(0, 1, 80)
        curve = np.stack([0.8 * np.sin(3 * s) + rng.uniform(-0.5, 0.5),
                          1.5 + 0.6 * np.cos(2 * s)], axis=1)
        v = rng.standard_normal(2)

        def norm_sq(x, vec):
            g = t.metric(x.reshape(2, 1))[0]
            return float(vec @ g @ vec)

        out = parallel_transport(t, curve, v, substeps=8)
        assert abs(norm_sq(curve[-1], out) - norm_sq(curve[0], v)) < 1e-8

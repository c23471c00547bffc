import math

import numpy as np
import pytest

from nondiv.fields import MapField, linear_map, perturbed_linear_map, point_map
from nondiv.geometry import build_domain, lattice_affine_change, transform_operator
from nondiv.grid import PeriodicGrid
from nondiv.operators import (apply_linear, divergence_tension, drift_prediction,
                              invariant_measure, scalar_operator_matrix, tension)
from nondiv.targets import catalog_lookup

TWO_PI = 2.0 * math.pi
LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# tension


def test_constant_map_has_zero_tension_everywhere():
    for name, preset, tname in [("torus2d", "mixed", "hyperbolic_plane"),
                                ("hopf2d", "skew", "euclidean"),
                                ("ctorus1", "wavy", "sphere")]:
        dom = build_domain(name, 16, preset)
        t = catalog_lookup(tname, {"dim": 2} if tname == "euclidean" else {})
        base = [0.0, 1.0] if tname == "hyperbolic_plane" else [0.2, -0.3]
        f = point_map(dom.grid, t, base)
        assert np.abs(tension(dom, f)).max() == 0.0


def test_linear_map_standard_torus_flat_target_exact_kernel():
    dom = build_domain("torus2d", 32, "mixed")  # any A, B = 0
    t = catalog_lookup("flat_torus", {"dim": 2})
    f = linear_map(dom.grid, t, [[2, -1], [0, 3]])
    assert np.abs(tension(dom, f)).max() == 0.0


def test_1d_tension_hand_formula_and_dense_oracle():
    # domain coefficient A = 1/a with metric a(x) = 2 + sin(2 pi x)
    n = 16
    dom = build_domain("torus1d", n, "sine")
    t = catalog_lookup("circle")
    x = dom.grid.axis_coordinates(0)
    eps = 0.05
    f = MapField(dom.grid, t, (x + eps * np.sin(TWO_PI * x))[None], [[1]])
    tau = tension(dom, f)[0]

    # independent dense second-difference oracle on the periodic part
    h = dom.grid.spacing[0]
    D2 = np.zeros((n, n))
    for i in range(n):
        D2[i, i] = -2.0
        D2[i, (i + 1) % n] = 1.0
        D2[i, (i - 1) % n] = 1.0
    D2 /= h ** 2
    pert = eps * np.sin(TWO_PI * x)
    dense = dom.A[:, 0, 0] * (D2 @ pert)
    assert np.allclose(tau, dense, atol=1e-12)

    # hand formula with O(h^2) slack at 16 nodes
    a = 2.0 + np.sin(TWO_PI * x)
    continuum = -(TWO_PI ** 2) * eps * np.sin(TWO_PI * x) / a
    assert np.abs(tau - continuum).max() < 0.15 * np.abs(continuum).max()


def test_tension_rejects_chart_exit():
    from nondiv.targets import ChartExit
    dom = build_domain("torus2d", 16, "unit")
    t = catalog_lookup("hyperbolic_plane")
    f = point_map(dom.grid, t, [0.0, 1.0])
    f.values[1, 3, 4] = -0.2  # leaves v > 0
    with pytest.raises(ChartExit):
        tension(dom, f)


# ---------------------------------------------------------------------------
# scalar operator matrix


def test_unit_torus_matrix_is_five_point_laplacian():
    dom = build_domain("torus2d", 16, "unit")
    op = scalar_operator_matrix(dom)
    h2 = dom.grid.spacing[0] ** 2
    row = op.matrix.getrow(0)
    cols = dict(zip(row.indices.tolist(), row.data.tolist()))
    assert cols[0] == pytest.approx(-4.0 / h2)
    for nb in (dom.grid.neighbor_flat(0, 1)[0], dom.grid.neighbor_flat(0, -1)[0],
               dom.grid.neighbor_flat(1, 1)[0], dom.grid.neighbor_flat(1, -1)[0]):
        assert cols[nb] == pytest.approx(1.0 / h2)
    assert len(cols) == 5


def test_matrix_row_sums_vanish(rng):
    for name, preset in [("torus2d", "mixed"), ("hopf2d", "skew"), ("ctorus2", "skewed")]:
        dom = build_domain(name, 8 if name == "ctorus2" else 16, preset)
        op = scalar_operator_matrix(dom)
        sums = np.asarray(op.matrix.sum(axis=1)).ravel()
        scale = np.abs(op.matrix.data).max()
        assert np.abs(sums).max() <= 1e-13 * scale


def test_matrix_matches_apply(rng):
    dom = build_domain("hopf2d", 16, "skew")
    op = scalar_operator_matrix(dom)
    phi = rng.standard_normal(dom.grid.shape)
    via_matrix = (op.matrix @ phi.ravel()).reshape(dom.grid.shape)
    via_kernel = apply_linear(dom, phi)
    scale = np.abs(via_kernel).max()
    assert np.abs(via_matrix - via_kernel).max() <= 1e-12 * scale


def test_mixed_term_monomial_identity():
    # matrix applied to x^1 x^2 returns A^{12} + A^{21} away from the seam
    dom = build_domain("torus2d", 16, "sheared")
    op = scalar_operator_matrix(dom)
    X = dom.grid.coordinates()
    phi = X[0] * X[1]
    out = (op.matrix @ phi.ravel()).reshape(dom.grid.shape)
    expected = 2.0 * dom.A[..., 0, 1]
    interior = (slice(1, -1), slice(1, -1))
    assert np.abs(out[interior] - expected[interior]).max() < 1e-10


def test_coo_dump_roundtrip(tmp_path):
    import scipy.sparse as sp
    dom = build_domain("torus1d", 16, "sine")
    op = scalar_operator_matrix(dom)
    text = op.to_coo_text()
    rows = []
    for line in text.strip().splitlines():
        i, j, v = line.split()
        rows.append((int(i), int(j), float(v)))
    re = sp.coo_matrix(([r[2] for r in rows], ([r[0] for r in rows], [r[1] for r in rows])),
                       shape=op.matrix.shape).tocsr()
    assert np.abs((re - op.matrix)).max() == 0.0


# ---------------------------------------------------------------------------
# divergence-form comparison operator


def test_constant_coefficients_make_forms_coincide(rng):
    dom = build_domain("torus2d", 16, "sheared")  # constant metric with shear
    t = catalog_lookup("flat_torus", {"dim": 2})
    f = perturbed_linear_map(dom.grid, t, [[1, 0], [0, 1]], amplitude=0.1, seed=3)
    t1 = tension(dom, f)
    t2 = divergence_tension(dom, f)
    assert np.abs(t1 - t2).max() <= 1e-12 * max(1.0, np.abs(t1).max())


def test_variable_coefficients_split_the_forms():
    n = 64
    dom = build_domain("torus1d", n, "sine")
    t = catalog_lookup("euclidean", {"dim": 1})
    x = dom.grid.axis_coordinates(0)
    f = MapField(dom.grid, t, np.sin(TWO_PI * x)[None], [[0]])
    t1 = tension(dom, f)
    t2 = divergence_tension(dom, f)
    # discretization error of the trace form against its continuum value
    a = 2.0 + np.sin(TWO_PI * x)
    continuum = -(TWO_PI ** 2) * np.sin(TWO_PI * x) / a
    disc_err = np.abs(t1[0] - continuum).max()
    assert np.abs(t1 - t2).max() > 10.0 * disc_err


def test_divergence_flux_rows_telescope(rng):
    # sum_x w(x) (div-form linear part)(x) = 0 up to rounding
    dom = build_domain("torus2d", 16, "mixed")
    t = catalog_lookup("euclidean", {"dim": 1})
    f = MapField(dom.grid, t, rng.standard_normal((1,) + dom.grid.shape), [[0, 0]])
    out = divergence_tension(dom, f)
    total = float((dom.metric_det * out[0]).sum())
    scale = float(np.abs(out).max() * dom.metric_det.max() * dom.grid.num_nodes)
    assert abs(total) <= 1e-14 * scale


def test_kahler_reduction_ctorus1(rng):
    dom = build_domain("ctorus1", 16, "wavy")
    t = catalog_lookup("circle")
    for seed in range(5):
        f = perturbed_linear_map(dom.grid, t, [[1, 0]], amplitude=0.08, seed=seed)
        t1 = tension(dom, f)
        t2 = divergence_tension(dom, f)
        assert np.abs(t1 - t2).max() <= 1e-12 * max(1.0, np.abs(t1).max())


# ---------------------------------------------------------------------------
# invariant measure and drift


def test_uniform_measure_on_unit_torus():
    dom = build_domain("torus2d", 16, "unit")
    mu = invariant_measure(scalar_operator_matrix(dom))
    assert np.abs(mu - 1.0 / dom.grid.num_nodes).max() < 1e-14


def test_1d_measure_closed_form():
    dom = build_domain("torus1d", 64, "inv-sine")  # operator a(x) d2, a = 2 + sin
    mu = invariant_measure(scalar_operator_matrix(dom))
    a = dom.A[:, 0, 0]
    ref = (1.0 / a) / (1.0 / a).sum()
    assert np.abs(mu - ref).max() < 1e-13


def test_measure_orthogonality(rng):
    for name, preset, n in [("torus1d", "inv-sine", 64), ("hopf2d", "skew", 24)]:
        dom = build_domain(name, n, preset)
        op = scalar_operator_matrix(dom)
        mu = invariant_measure(op).ravel()
        for _ in range(10):
            phi = rng.standard_normal(dom.grid.num_nodes)
            lphi = op.matrix @ phi
            assert abs(mu @ lphi) <= 1e-10 * max(1.0, np.abs(lphi).max())


def test_measure_pushforward_under_affine_change():
    dom = build_domain("hopf2d", 16, "skew")
    mu = invariant_measure(scalar_operator_matrix(dom))
    lac = lattice_affine_change(dom.grid, perm=(0, 1), scales=(1.0, 1.0),
                                shift_cells=(3, 7))
    dom2 = transform_operator(dom, lac.change)
    mu2 = invariant_measure(scalar_operator_matrix(dom2))
    pushed = mu.ravel()[lac.old_flat_of_new].reshape(mu2.shape)
    assert np.abs(mu2 - pushed).max() < 1e-12


def test_drift_zero_cases():
    t = catalog_lookup("circle")
    dom = build_domain("torus2d", 16, "wavy")
    ref = linear_map(dom.grid, t, [[1, 0]])
    assert np.abs(drift_prediction(dom, ref)).max() == 0.0  # tension vanishes exactly

    dom2 = build_domain("hopf2d", 16, "conformal")
    ref2 = linear_map(dom2.grid, t, [[1, 0]])
    assert np.abs(drift_prediction(dom2, ref2)).max() < 1e-13


def test_drift_matches_measure_pairing_closed_form():
    dom = build_domain("hopf2d", 24, "skew")
    t = catalog_lookup("circle")
    ref = linear_map(dom.grid, t, [[1, 0]])
    mu = invariant_measure(scalar_operator_matrix(dom))
    c = drift_prediction(dom, ref, mu=mu)
    # reference tension is exactly B^s times the lift slope
    slope = 1.0 / LOG2
    expected = float((mu * dom.B[..., 0]).sum() * slope)
    assert c[0] == pytest.approx(expected, rel=1e-12)
    assert abs(c[0]) > 0.5


def test_drift_requires_flat_target():
    from nondiv.operators import OperatorError
    dom = build_domain("torus2d", 16, "unit")
    t = catalog_lookup("hyperbolic_cylinder")
    ref = linear_map(dom.grid, t, [[0, 0], [1, 0]])
    with pytest.raises(OperatorError):
        drift_prediction(dom, ref)


# ---------------------------------------------------------------------------
# consistency order (quick version; the acceptance suite runs 32->64->128)


def _tension_error_flat(n):
    dom = build_domain("torus2d", n, "wavy")
    t = catalog_lookup("flat_torus", {"dim": 2})
    X = dom.grid.coordinates()
    f = linear_map(dom.grid, t, [[1, 0], [0, 1]])
    p1 = 0.05 * np.sin(TWO_PI * (X[0] + 2 * X[1]))
    p2 = 0.07 * np.cos(TWO_PI * X[1])
    f.values[0] += p1
    f.values[1] += p2
    tau = tension(dom, f)
    # continuum Hessian entries of the perturbations
    s = np.sin(TWO_PI * (X[0] + 2 * X[1]))
    h11 = -0.05 * TWO_PI ** 2 * s
    h12 = -0.05 * 2 * TWO_PI ** 2 * s
    h22 = -0.05 * 4 * TWO_PI ** 2 * s
    tau1 = (dom.A[..., 0, 0] * h11 + 2 * dom.A[..., 0, 1] * h12
            + dom.A[..., 1, 1] * h22)
    tau2 = dom.A[..., 1, 1] * (-(TWO_PI ** 2) * p2)
    return max(np.abs(tau[0] - tau1).max(), np.abs(tau[1] - tau2).max())


def test_consistency_second_order_flat():
    e16, e32 = _tension_error_flat(16), _tension_error_flat(32)
    rate = np.log2(e16 / e32)
    assert rate > 1.8


def _tension_error_hopf(n):
    dom = build_domain("hopf2d", n, "skew", {"bump_kphi": 0})
    t = catalog_lookup("circle")
    sp = dom.grid.coordinates()
    f = linear_map(dom.grid, t, [[1, 0]])
    p = 0.05 * np.sin(TWO_PI * sp[0] / LOG2) * np.cos(sp[1])
    f.values[0] += p
    tau = tension(dom, f)[0]
    ws, wphi = TWO_PI / LOG2, 1.0
    ds = 0.05 * ws * np.cos(TWO_PI * sp[0] / LOG2) * np.cos(sp[1])
    dss = -(ws ** 2) * p
    dpp = -p
    continuum = (dom.A[..., 0, 0] * dss + dom.A[..., 1, 1] * dpp
                 + dom.B[..., 0] * (ds + 1.0 / LOG2))
    return np.abs(tau - continuum).max()


def test_consistency_first_order_with_drift():
    e16, e32 = _tension_error_hopf(16), _tension_error_hopf(32)
    rate = np.log2(e16 / e32)
    assert rate > 0.8

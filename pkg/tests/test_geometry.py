import dataclasses
import math

import numpy as np
import pytest

from nondiv.geometry import (DomainError, build_affine_torus, build_domain,
                             build_hermitian_torus, build_hopf_torus,
                             check_scale_invariance, default_grid, hopf_metric,
                             identity_change, lattice_affine_change,
                             torus_wave_change, transform_operator)
from nondiv.grid import PeriodicGrid
from nondiv.operators import apply_linear

TWO_PI = 2.0 * math.pi
LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# affine torus assembly


def test_identity_metric_gives_identity_coefficients():
    dom = build_domain("torus2d", 16, "unit")
    assert np.array_equal(dom.A, np.broadcast_to(np.eye(2), dom.A.shape))
    assert not dom.has_drift
    assert dom.kind == "affine"


def test_wavy_metric_inverts_nodewise():
    dom = build_domain("torus2d", 16, "wavy")
    x = dom.grid.coordinates()
    expect = 1.0 / (1.0 + 0.5 * np.sin(TWO_PI * x[0]))
    assert np.allclose(dom.A[..., 0, 0], expect, rtol=0, atol=1e-15)
    assert np.allclose(dom.A[..., 1, 1], 1.0)
    assert np.abs(dom.B).max() == 0.0


def test_scalar_metric_1d():
    dom = build_domain("torus1d", 32, "sine")
    x = dom.grid.axis_coordinates(0)
    assert np.allclose(dom.A[..., 0, 0], 1.0 / (2.0 + np.sin(TWO_PI * x)), atol=1e-16)


def test_non_spd_metric_rejected_with_location():
    g = PeriodicGrid((16,), (1.0,))

    def bad(x):
        return np.where(np.isclose(x[0], 0.5), -1.0, 1.0)

    with pytest.raises(DomainError, match=r"node \(8,\)"):
        build_affine_torus(bad, g)


# ---------------------------------------------------------------------------
# hopf torus


def test_hopf_conformal_is_flat_operator():
    dom = build_domain("hopf2d", 16, "conformal")
    assert np.allclose(dom.A, np.eye(2), atol=1e-14)
    assert np.abs(dom.B).max() < 1e-14


def test_hopf_skew_closed_forms():
    dom = build_domain("hopf2d", 16, "skew", {"skew": 0.3, "bump": 0.2})
    sp = dom.grid.coordinates()
    u = 0.2 * np.cos(TWO_PI * sp[0] / LOG2) * np.cos(sp[1])
    e = np.exp(-2.0 * u)
    assert np.allclose(dom.A[..., 0, 0], e / 1.3, atol=1e-13)
    assert np.allclose(dom.A[..., 1, 1], e / 0.7, atol=1e-13)
    assert np.abs(dom.A[..., 0, 1]).max() < 1e-13
    assert np.allclose(dom.B[..., 0], e * 0.6 / 0.91, atol=1e-13)
    assert np.abs(dom.B[..., 1]).max() < 1e-13


def test_hopf_generic_metric_has_drift_somewhere():
    dom = build_domain("hopf2d", 16, "skew")
    assert np.abs(dom.B).max() > 0.1


def test_hopf_annihilates_constants_exactly():
    dom = build_domain("hopf2d", 16, "skew")
    out = apply_linear(dom, np.full(dom.grid.shape, 2.25))
    assert np.abs(out).max() == 0.0


def test_hopf_grid_period_check():
    with pytest.raises(DomainError, match="log 2"):
        build_hopf_torus(hopf_metric("conformal", {}), PeriodicGrid((16, 16), (1.0, TWO_PI)))


def test_scale_invariance_rejection():
    def not_invariant(x):
        x = np.asarray(x)
        out = np.zeros(x.shape[1:] + (2, 2))
        out[..., 0, 0] = 1.0  # missing 1/|x|^2 factor
        out[..., 1, 1] = 1.0
        return out

    with pytest.raises(DomainError, match="scale invariant"):
        check_scale_invariance(not_invariant)


# ---------------------------------------------------------------------------
# hermitian tori


def test_ctorus1_block_structure():
    dom = build_domain("ctorus1", 16, "wavy")
    x = dom.grid.coordinates()
    lam = np.exp(0.4 * np.sin(TWO_PI * x[0]) * np.cos(TWO_PI * x[1]))
    assert np.allclose(dom.A[..., 0, 0], 0.25 / lam, atol=1e-15)
    assert np.allclose(dom.A[..., 1, 1], 0.25 / lam, atol=1e-15)
    assert np.abs(dom.A[..., 0, 1]).max() == 0.0
    assert np.allclose(dom.metric_det, lam)
    assert dom.kind == "hermitian"


def test_ctorus2_mixed_slots_carry_quarter_Q():
    dom = build_domain("ctorus2", 8, "skewed")
    q = 0.2 + 0.15j
    gam = np.array([[1.0, q], [np.conj(q), 1.0]])
    ginv = np.linalg.inv(gam)
    A0 = dom.A[0, 0, 0, 0]
    assert np.allclose(A0[:2, :2], ginv.real / 4)
    assert np.allclose(A0[2:, 2:], ginv.real / 4)
    assert np.allclose(A0[:2, 2:], -ginv.imag / 4)
    assert np.allclose(A0[2:, :2], ginv.imag / 4)
    assert np.abs(dom.B).max() == 0.0


def test_pluriharmonic_lift_annihilated_exactly():
    # Re(z^1), stored as the winding lift of a circle-valued map, is
    # exactly in the kernel of the assembled Hermitian trace
    from nondiv.fields import linear_map
    from nondiv.operators import tension
    from nondiv.targets import catalog_lookup

    dom = build_domain("ctorus2", 8, "skewed")
    f = linear_map(dom.grid, catalog_lookup("circle"), [[1, 0, 0, 0]])
    assert np.abs(tension(dom, f)).max() == 0.0


def test_hermitian_trace_symbol_on_single_mode():
    dom = build_domain("ctorus2", 8, "skewed")
    x = dom.grid.coordinates()
    phi = np.cos(TWO_PI * x[0])
    out = apply_linear(dom, phi)
    # a pure x^1 mode only sees the (x1, x1) coefficient
    lam = dom.A[0, 0, 0, 0][0, 0]
    h = dom.grid.spacing[0]
    symbol = (2.0 - 2.0 * np.cos(TWO_PI * h)) / h ** 2
    assert np.allclose(out, -lam * symbol * phi, atol=1e-12)


def test_non_hermitian_metric_rejected():
    def bad(x):
        x = np.asarray(x)
        out = np.zeros(x.shape[1:] + (2, 2), dtype=np.complex128)
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        out[..., 0, 1] = 0.5
        out[..., 1, 0] = 0.1  # not the conjugate
        return out

    with pytest.raises(DomainError, match="Hermitian"):
        build_hermitian_torus(bad, default_grid("ctorus2", 8))


def test_non_positive_hermitian_rejected():
    with pytest.raises(DomainError, match="positive"):
        build_hermitian_torus(
            lambda x: np.full(np.asarray(x).shape[1:], -1.0, dtype=np.complex128),
            default_grid("ctorus1", 16))


# ---------------------------------------------------------------------------
# coordinate changes


def test_identity_change_is_noop():
    dom = build_domain("torus2d", 16, "mixed")
    dom2 = transform_operator(dom, identity_change(2))
    assert np.array_equal(dom2.A, dom.A)
    assert np.array_equal(dom2.B, dom.B)
    assert np.allclose(dom2.metric_det, dom.metric_det)


def test_affine_change_has_no_hessian_term():
    # jacobian-only drift transform: B' = B . J for affine changes
    dom = build_domain("hopf2d", 16, "skew")
    lac = lattice_affine_change(dom.grid, perm=(0, 1), scales=(2.0, 0.5))
    dom2 = transform_operator(dom, lac.change)
    J = np.diag([2.0, 0.5])
    B_expected = np.einsum("ja,...a->...j", J, dom.B)
    reordered = B_expected.reshape(-1, 2)[lac.old_flat_of_new].reshape(dom2.B.shape)
    assert np.allclose(dom2.B, reordered, atol=1e-13)


def test_transform_preserves_spd():
    dom = build_domain("torus2d", 16, "mixed")
    lac = lattice_affine_change(dom.grid, perm=(1, 0), scales=(1.3, 0.4), signs=(-1, 1))
    dom2 = transform_operator(dom, lac.change)
    assert np.linalg.eigvalsh(dom2.A)[..., 0].min() > 0


def test_affine_commutation_exact():
    dom = build_domain("torus2d", 32, "mixed")
    X = dom.grid.coordinates()
    phi = np.sin(TWO_PI * X[0]) * np.cos(2 * TWO_PI * X[1]) + 0.3 * np.cos(TWO_PI * X[1])
    Lphi = apply_linear(dom, phi)
    rng = np.random.default_rng(7)
    for _ in range(5):
        lac = lattice_affine_change(
            dom.grid, perm=tuple(rng.permutation(2)),
            scales=rng.uniform(0.5, 2.0, 2), signs=rng.choice([-1.0, 1.0], 2),
            shift_cells=rng.integers(0, 32, 2))
        dom2 = transform_operator(dom, lac.change)
        psi = phi.ravel()[lac.old_flat_of_new].reshape(dom2.grid.shape)
        got = apply_linear(dom2, psi)
        expect = Lphi.ravel()[lac.old_flat_of_new].reshape(dom2.grid.shape)
        assert np.abs(got - expect).max() <= 1e-12 * max(1.0, np.abs(Lphi).max())


def test_nonlinear_change_creates_drift():
    dom = build_domain("torus2d", 32, "wavy")
    wave = torus_wave_change(dom.grid, axis=0, amplitude=0.04)
    dom2 = transform_operator(dom, wave)
    assert np.abs(dom2.B).max() > 0.5
    # dropping the second-derivative correction silently loses the drift
    flat_hessian = dataclasses.replace(
        wave, hessian=lambda x: np.zeros(np.asarray(x).shape[1:] + (2, 2, 2)))
    dom3 = transform_operator(dom, flat_hessian)
    assert np.abs(dom3.B).max() == 0.0


def test_wave_change_inverse_roundtrip():
    g = PeriodicGrid((32, 32), (1.0, 1.0))
    wave = torus_wave_change(g, axis=0, amplitude=0.05)
    x = g.coordinates()
    assert np.abs(wave.inverse(wave.forward(x)) - x).max() < 1e-13


def test_singular_jacobian_rejected_at_node():
    from nondiv.geometry import ChartChange, ChartError

    dom = build_domain("torus2d", 16, "unit")

    def jac(x):
        x = np.asarray(x)
        J = np.zeros(x.shape[1:] + (2, 2))
        J[..., 0, 0] = np.cos(TWO_PI * x[0])  # vanishes at x = 0.25
        J[..., 1, 1] = 1.0
        return J

    degenerate = ChartChange(
        forward=lambda x: np.asarray(x), inverse=lambda y: np.asarray(y),
        jacobian=jac, hessian=lambda x: np.zeros(np.asarray(x).shape[1:] + (2, 2, 2)))
    with pytest.raises(ChartError, match="singular jacobian"):
        transform_operator(dom, degenerate)

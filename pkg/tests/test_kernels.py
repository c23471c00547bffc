"""Backend parity and exactness of the stencil kernels."""

import numpy as np
import pytest

from nondiv import kernels
from nondiv.geometry import build_domain
from nondiv.grid import PeriodicGrid, layout_for, pad_components
from nondiv.stencil import build_coefficients

needs_compiled = pytest.mark.skipif(
    "compiled" not in kernels.available_backends(),
    reason="compiled kernels not built")


def _random_domain_setup(rng, name="torus2d", n=16, preset="mixed"):
    dom = build_domain(name, n, preset)
    lay = layout_for(dom.grid)
    ncomp = 2
    values = rng.standard_normal((ncomp,) + dom.grid.shape)
    offsets = rng.integers(-2, 3, (ncomp, dom.grid.ndim)).astype(float)
    padded = pad_components(values, offsets)
    return dom, lay, padded, values


@needs_compiled
@pytest.mark.parametrize("name,n,preset", [
    ("torus1d", 32, "sine"),
    ("torus2d", 16, "mixed"),
    ("hopf2d", 16, "skew"),
    ("ctorus2", 8, "skewed"),
])
def test_linear_apply_backend_parity(name, n, preset, rng):
    dom = build_domain(name, n, preset)
    lay = layout_for(dom.grid)
    values = rng.standard_normal((2,) + dom.grid.shape)
    padded = pad_components(values, np.zeros((2, dom.grid.ndim)))
    out_np = np.empty_like(values)
    out_cy = np.empty_like(values)
    kernels.linear_apply(padded, dom.stencil, lay, out_np, backend="numpy")
    kernels.linear_apply(padded, dom.stencil, lay, out_cy, backend="compiled")
    scale = np.abs(out_np).max()
    assert np.abs(out_np - out_cy).max() <= 1e-13 * max(scale, 1.0)


@needs_compiled
def test_gradients_backend_parity(rng):
    dom, lay, padded, values = _random_domain_setup(rng)
    inv2h = np.ascontiguousarray(0.5 / dom.grid.spacing)
    g_np = np.empty((2, 2) + dom.grid.shape)
    g_cy = np.empty_like(g_np)
    kernels.gradients(padded, inv2h, lay, g_np, backend="numpy")
    kernels.gradients(padded, inv2h, lay, g_cy, backend="compiled")
    assert np.array_equal(g_np, g_cy)


@pytest.mark.parametrize("backend", ["numpy", "compiled"])
def test_constants_annihilated_exactly(backend, rng):
    if backend not in kernels.available_backends():
        pytest.skip("backend not built")
    dom = build_domain("hopf2d", 16, "skew")
    lay = layout_for(dom.grid)
    values = np.full((1,) + dom.grid.shape, -7.25)
    padded = pad_components(values, np.zeros((1, 2)))
    out = np.empty_like(values)
    kernels.linear_apply(padded, dom.stencil, lay, out, backend=backend)
    assert np.abs(out).max() == 0.0


@pytest.mark.parametrize("backend", ["numpy", "compiled"])
def test_winding_lift_in_kernel_exactly(backend):
    # exact winding representative on a standard torus: all second
    # differences cancel exactly including across the period seam
    if backend not in kernels.available_backends():
        pytest.skip("backend not built")
    grid = PeriodicGrid((32, 64), (1.0, 1.0))
    frac0 = np.arange(32) / 32
    frac1 = np.arange(64) / 64
    values = (3.0 * frac0[:, None] - 2.0 * frac1[None, :])[None]
    padded = pad_components(values, np.array([[3.0, -2.0]]))
    A = np.broadcast_to(np.eye(2), grid.shape + (2, 2)).copy()
    coeffs = build_coefficients(A, None, grid.spacing)
    out = np.empty_like(values)
    kernels.linear_apply(padded, coeffs, layout_for(grid), out, backend=backend)
    assert np.abs(out).max() == 0.0


def test_gradient_of_linear_lift_exact():
    grid = PeriodicGrid((16,), (1.0,))
    values = (np.arange(16) / 16)[None] * 4.0
    padded = pad_components(values, np.array([[4.0]]))
    out = np.empty((1, 1, 16))
    kernels.gradients(padded, np.array([8.0]), layout_for(grid), out)  # 1/(2h) = 8
    assert np.all(out == 4.0)


def test_monotone_weights_and_violation_count():
    # diagonally dominant inverse: all modified axis weights stay >= 0
    dom = build_domain("torus2d", 16, "sheared")
    assert dom.stencil.monotone_violations == 0
    assert dom.stencil.adiag.min() >= 0.0

    # force a violation: |A12| above the smaller diagonal entry
    grid = PeriodicGrid((16, 16), (1.0, 1.0))
    A = np.broadcast_to(np.array([[1.0, 1.2], [1.2, 2.0]]), grid.shape + (2, 2)).copy()
    coeffs = build_coefficients(A, None, grid.spacing)
    assert coeffs.monotone_violations == grid.num_nodes


def test_explicit_rate_matches_formula():
    dom = build_domain("hopf2d", 16, "skew")
    h = dom.grid.spacing
    rate = (2 * dom.A[..., 0, 0] / h[0] ** 2 + 2 * dom.A[..., 1, 1] / h[1] ** 2
            + np.abs(dom.B[..., 0]) / h[0] + np.abs(dom.B[..., 1]) / h[1])
    assert dom.stencil.explicit_rate == pytest.approx(rate.max(), rel=1e-15)

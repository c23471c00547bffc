import numpy as np
import pytest

from nondiv.grid import GridError, PeriodicGrid, layout_for, pad_components


def test_basic_properties():
    g = PeriodicGrid((16, 32), (1.0, 2.0))
    assert g.ndim == 2
    assert g.num_nodes == 512
    assert np.allclose(g.spacing, [1 / 16, 2 / 32])
    assert g.cell_volume == pytest.approx(1 / 16 * 1 / 16)


@pytest.mark.parametrize("extents,periods", [
    ((4,), (1.0,)),          # too small
    ((9, 16), (1.0, 1.0)),   # odd extent
    ((16,), (0.0,)),         # degenerate period
    ((16, 16), (1.0,)),      # length mismatch
])
def test_invalid_grids_rejected(extents, periods):
    with pytest.raises(GridError):
        PeriodicGrid(extents, periods)


def test_axis_coordinates_exact_for_power_of_two():
    g = PeriodicGrid((64,), (1.0,))
    x = g.axis_coordinates(0)
    # i/64 is exactly representable, so spacing differences are all equal
    d = np.diff(x)
    assert np.all(d == d[0])


def test_neighbor_flat_wraps():
    g = PeriodicGrid((8, 8), (1.0, 1.0))
    plus0 = g.neighbor_flat(0, +1).reshape(8, 8)
    assert plus0[7, 3] == g.flat_indices[0, 3]
    minus1 = g.neighbor_flat(1, -1).reshape(8, 8)
    assert minus1[2, 0] == g.flat_indices[2, 7]


def test_pad_components_periodic_wrap_and_offsets():
    g = PeriodicGrid((8, 10), (1.0, 1.0))
    rng = np.random.default_rng(0)
    v = rng.standard_normal((2, 8, 10))
    off = np.array([[1.5, 0.0], [0.0, -2.0]])
    p = pad_components(v, off)
    assert p.shape == (2, 10, 12)
    # interior copy
    assert np.array_equal(p[:, 1:-1, 1:-1], v)
    # axis 0 ghosts carry the lift jump
    assert np.allclose(p[0, 0, 1:-1], v[0, -1] - 1.5)
    assert np.allclose(p[0, -1, 1:-1], v[0, 0] + 1.5)
    assert np.allclose(p[1, 0, 1:-1], v[1, -1])
    # axis 1 ghosts
    assert np.allclose(p[1, 1:-1, 0], v[1, :, -1] - (-2.0))
    assert np.allclose(p[1, 1:-1, -1], v[1, :, 0] + (-2.0))
    # corner ghosts compose both offsets
    assert p[1, 0, 0] == pytest.approx(v[1, -1, -1] + 2.0)
    assert p[0, -1, -1] == pytest.approx(v[0, 0, 0] + 1.5)


def test_layout_pad_index_matches_strides():
    g = PeriodicGrid((8, 12), (1.0, 1.0))
    lay = layout_for(g)
    v = np.arange(8 * 12, dtype=float).reshape(1, 8, 12)
    p = pad_components(v, np.zeros((1, 2)))
    flat = p.reshape(-1)
    assert np.array_equal(flat[lay.pad_index], v.ravel())
    # +1 along the last axis is stride 1 in the padded layout
    assert lay.pad_strides[-1] == 1
    inner = flat[lay.pad_index + lay.pad_strides[0]].reshape(8, 12)
    assert inner[0, 0] == v[0, 1, 0]

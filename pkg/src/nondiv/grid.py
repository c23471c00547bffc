"""Periodic computational grids.

All fields in this package live on tensor-product periodic lattices: node
``i = (i_1, ..., i_d)`` sits at coordinates ``x_j = i_j * h_j`` and index
arithmetic wraps modulo the extent on every axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic lattice with per-axis extents and period lengths.

    Parameters
    ----------
    extents : tuple of int
        Node count per axis.  Every extent must be even and at least 8 so
        centered stencils stay symmetric across the period.
    periods : tuple of float
        Coordinate length of one period per axis; spacing is
        ``period / extent``.
    """

    extents: tuple[int, ...]
    periods: tuple[float, ...]

    def __post_init__(self):
        if len(self.extents) != len(self.periods):
            raise GridError("extents and periods must have equal length")
        if not self.extents:
            raise GridError("grid needs at least one axis")
        for n in self.extents:
            if n < 8:
                raise GridError(f"extent {n} < 8")
            if n % 2 != 0:
                raise GridError(f"extent {n} must be even")
        for p in self.periods:
            if not (p > 0):
                raise GridError(f"period {p} must be positive")
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))

    @property
    def ndim(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extents

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.extents))

    @cached_property
    def spacing(self) -> np.ndarray:
        return np.array([p / n for p, n in zip(self.periods, self.extents)])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Node coordinates along one axis.

        Computed as ``period * (i / n)`` so that power-of-two extents give
        exactly representable coordinates.
        """
        n = self.extents[axis]
        return self.periods[axis] * (np.arange(n) / n)

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``(ndim, *extents)``."""
        axes = [self.axis_coordinates(j) for j in range(self.ndim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def wrap_index(self, index: np.ndarray, axis: int) -> np.ndarray:
        return np.mod(index, self.extents[axis])

    @cached_property
    def flat_indices(self) -> np.ndarray:
        return np.arange(self.num_nodes).reshape(self.shape)

    def neighbor_flat(self, axis: int, step: int) -> np.ndarray:
        """Flat index of the node ``step`` lattice cells away along ``axis``."""
        return np.roll(self.flat_indices, -step, axis=axis).ravel()

    def refined(self, factor: int = 2) -> "PeriodicGrid":
        return PeriodicGrid(tuple(n * factor for n in self.extents), self.periods)


@dataclass(frozen=True)
class GridLayout:
    """Index bookkeeping shared by the stencil kernels.

    The kernels operate on arrays padded with one ghost layer per side so
    neighbor access never wraps.  ``pad_index`` maps each core node to its
    flat position in the padded array and ``pad_strides`` are the padded
    flat strides per axis.
    """

    grid: PeriodicGrid
    padded_shape: tuple[int, ...] = field(init=False)
    pad_strides: np.ndarray = field(init=False)
    pad_index: np.ndarray = field(init=False)

    def __post_init__(self):
        pshape = tuple(n + 2 for n in self.grid.shape)
        strides = np.empty(len(pshape), dtype=np.int64)
        acc = 1
        for j in range(len(pshape) - 1, -1, -1):
            strides[j] = acc
            acc *= pshape[j]
        core = np.ix_(*[np.arange(1, n + 1) for n in self.grid.shape])
        flat = np.arange(int(np.prod(pshape))).reshape(pshape)
        object.__setattr__(self, "padded_shape", pshape)
        object.__setattr__(self, "pad_strides", strides)
        object.__setattr__(self, "pad_index", np.ascontiguousarray(flat[core].ravel()))


_LAYOUT_CACHE: dict[tuple, GridLayout] = {}


def layout_for(grid: PeriodicGrid) -> GridLayout:
    key = (grid.extents, grid.periods)
    if key not in _LAYOUT_CACHE:
        _LAYOUT_CACHE[key] = GridLayout(grid)
    return _LAYOUT_CACHE[key]


def pad_components(values: np.ndarray, offsets: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Surround each component with one periodic ghost layer.

    ``values`` has shape ``(ncomp, *extents)`` and holds continuous lifts;
    ``offsets[c, j]`` is the amount the lift of component ``c`` jumps across
    one full period of axis ``j`` (winding number times target period, zero
    for genuinely periodic scalar fields).  Filling axis by axis also fills
    the corner ghosts with the correct compound offsets.
    """
    ncomp = values.shape[0]
    shape = values.shape[1:]
    d = len(shape)
    pshape = (ncomp,) + tuple(n + 2 for n in shape)
    if out is None:
        out = np.empty(pshape, dtype=values.dtype)
    core = (slice(None),) + tuple(slice(1, -1) for _ in range(d))
    out[core] = values
    for j in range(d):
        lo = [slice(1, -1)] * d
        hi = [slice(1, -1)] * d
        src_hi = [slice(1, -1)] * d
        src_lo = [slice(1, -1)] * d
        # already-filled axes (< j) contribute their ghosts to the slices
        for k in range(j):
            lo[k] = hi[k] = src_hi[k] = src_lo[k] = slice(None)
        lo[j] = slice(0, 1)
        src_hi[j] = slice(-2, -1)
        hi[j] = slice(-1, None)
        src_lo[j] = slice(1, 2)
        for c in range(ncomp):
            off = offsets[c, j]
            out[(c, *lo)] = out[(c, *src_hi)] - off
            out[(c, *hi)] = out[(c, *src_lo)] + off
    return out

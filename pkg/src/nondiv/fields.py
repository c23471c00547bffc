"""Grid-sampled maps into a target chart.

Circle-valued target components are stored as continuous lifts over one
fundamental domain together with integer winding numbers per domain axis;
crossing a domain period changes the lift by exactly
``winding * target period``.  Winding is data: it is declared once and
never recomputed by mod-reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import PeriodicGrid, pad_components
from .targets import TargetManifold

TWO_PI = 2.0 * math.pi


class FieldError(ValueError):
    pass


@dataclass
class MapField:
    grid: PeriodicGrid
    target: TargetManifold
    values: np.ndarray                # (dim, *grid.shape), continuous lifts
    winding: np.ndarray               # (dim, grid.ndim) integers

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        self.winding = np.asarray(self.winding, dtype=np.int64)
        expected = (self.target.dim,) + self.grid.shape
        if self.values.shape != expected:
            raise FieldError(f"values shape {self.values.shape}, expected {expected}")
        if self.winding.shape != (self.target.dim, self.grid.ndim):
            raise FieldError(
                f"winding shape {self.winding.shape}, expected {(self.target.dim, self.grid.ndim)}")
        for c, per in enumerate(self.target.periods):
            if per is None and np.any(self.winding[c]):
                raise FieldError(f"component {c} of {self.target.name} is not circle-valued; "
                                 "winding must vanish")

    @property
    def ncomp(self) -> int:
        return self.target.dim

    def lift_offsets(self) -> np.ndarray:
        """Jump of each component's lift across one period of each axis."""
        off = np.zeros((self.ncomp, self.grid.ndim))
        for c, per in enumerate(self.target.periods):
            if per is not None:
                off[c] = self.winding[c] * per
        return off

    def padded(self, out: np.ndarray | None = None) -> np.ndarray:
        return pad_components(self.values, self.lift_offsets(), out=out)

    def in_chart(self) -> bool:
        return self.target.chart_contains(self.values)

    def copy(self) -> "MapField":
        return MapField(self.grid, self.target, self.values.copy(), self.winding.copy())

    def same_class(self, other: "MapField") -> bool:
        """Same target, grid and winding data (same homotopy class)."""
        return (self.target.name == other.target.name
                and self.grid.extents == other.grid.extents
                and np.array_equal(self.winding, other.winding))


def _fractions(grid: PeriodicGrid) -> list[np.ndarray]:
    """Per-axis node fractions i/n (exact for power-of-two extents)."""
    return [np.arange(n) / n for n in grid.extents]


def _winding_ramp(grid: PeriodicGrid, target: TargetManifold, winding: np.ndarray) -> np.ndarray:
    fr = np.meshgrid(*_fractions(grid), indexing="ij")
    values = np.zeros((target.dim,) + grid.shape)
    for c, per in enumerate(target.periods):
        if per is None:
            continue
        for k in range(grid.ndim):
            w = int(winding[c, k])
            if w:
                values[c] += (w * per) * fr[k]
    return values


def linear_map(grid: PeriodicGrid, target: TargetManifold, winding,
               base=None) -> MapField:
    """Exact winding representative: lift is affine in the node fractions."""
    winding = np.asarray(winding, dtype=np.int64).reshape(target.dim, grid.ndim)
    values = _winding_ramp(grid, target, winding)
    if base is not None:
        base = np.asarray(base, dtype=np.float64).reshape(target.dim)
        values += base.reshape((target.dim,) + (1,) * grid.ndim)
    return MapField(grid, target, values, winding)


def point_map(grid: PeriodicGrid, target: TargetManifold, point) -> MapField:
    point = np.asarray(point, dtype=np.float64).reshape(target.dim)
    values = np.broadcast_to(point.reshape((target.dim,) + (1,) * grid.ndim),
                             (target.dim,) + grid.shape).copy()
    return MapField(grid, target, values, np.zeros((target.dim, grid.ndim), dtype=np.int64))


def fourier_bump(grid: PeriodicGrid, modes) -> np.ndarray:
    """Sum of cosine modes ``amp * cos(2 pi k . (i/n) + phase)`` on the grid.

    ``modes`` is an iterable of ``(kvec, amp, phase)``.  Integer wave
    vectors have exactly zero lattice mean, so perturbations built this way
    do not move the average of the map.
    """
    fr = np.meshgrid(*_fractions(grid), indexing="ij")
    out = np.zeros(grid.shape)
    for kvec, amp, phase in modes:
        arg = np.zeros(grid.shape)
        for k, kk in enumerate(kvec):
            if kk:
                arg += kk * fr[k]
        out += amp * np.cos(TWO_PI * arg + phase)
    return out


def random_modes(rng: np.random.Generator, ndim: int, amplitude: float,
                 count: int = 4, max_wavenumber: int = 3) -> list:
    modes = []
    for _ in range(count):
        kvec = rng.integers(-max_wavenumber, max_wavenumber + 1, size=ndim)
        while not np.any(kvec):
            kvec = rng.integers(-max_wavenumber, max_wavenumber + 1, size=ndim)
        amp = amplitude * rng.uniform(0.5, 1.0)
        phase = rng.uniform(0.0, TWO_PI)
        modes.append((kvec.tolist(), float(amp), float(phase)))
    return modes


def perturbed_linear_map(grid: PeriodicGrid, target: TargetManifold, winding,
                         amplitude: float = 0.01, seed: int = 0, base=None,
                         modes=None) -> MapField:
    """Winding representative plus a smooth seeded perturbation.

    The perturbation is at most four Fourier modes per component (drawn
    from the seed unless ``modes`` gives an explicit per-component list).
    """
    f = linear_map(grid, target, winding, base=base)
    rng = np.random.default_rng(seed)
    for c in range(target.dim):
        if modes is not None:
            comp_modes = modes.get(c, []) if isinstance(modes, dict) else modes[c]
        else:
            comp_modes = random_modes(rng, grid.ndim, amplitude)
        if comp_modes:
            f.values[c] += fourier_bump(grid, comp_modes)
    return f


def onto_geodesic_map(grid: PeriodicGrid, target: TargetManifold, winding_angle) -> MapField:
    """Map onto the closed geodesic ``u = 0`` of the hyperbolic cylinder.

    ``winding_angle`` is the winding vector of the angular component; the
    transverse component is identically zero, so the image is exactly the
    geodesic circle.
    """
    if target.name != "hyperbolic_cylinder":
        raise FieldError("onto-geodesic initial data needs the hyperbolic cylinder")
    winding = np.zeros((2, grid.ndim), dtype=np.int64)
    winding[1] = np.asarray(winding_angle, dtype=np.int64)
    return linear_map(grid, target, winding)

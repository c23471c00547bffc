"""Domain structures: periodic grids carrying invariant-operator coefficients.

A domain holds the second-order coefficient field ``A`` and first-order
field ``B`` of ``A^{jk} d2/dy^j dy^k + B^j d/dy^j`` in its computational
coordinates.  Affine tori use global affine coordinates (``A`` = inverse
metric, ``B = 0``); the Hopf torus uses log-polar computational coordinates
where a genuine first-order term appears; complex tori carry the real form
of the Hermitian trace.

Coefficients are always assembled from analytic evaluators sampled at the
nodes, never by numerically differentiating the metric, so assembly is
exact and all discretization error lives in the stencils.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable

import numpy as np

from .grid import PeriodicGrid
from .stencil import StencilCoefficients, build_coefficients

LOG2 = math.log(2.0)
TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    pass


class ChartError(ValueError):
    pass


@dataclass(frozen=True)
class AnalyticCoefficients:
    """Closed-form coefficient evaluators in computational coordinates.

    Each callable takes points of shape ``(d, ...)`` and returns node-major
    arrays: ``a_of -> (..., d, d)``, ``b_of -> (..., d)``,
    ``det_of -> (...)`` (the square-rooted metric determinant weight).
    """

    a_of: Callable[[np.ndarray], np.ndarray]
    b_of: Callable[[np.ndarray], np.ndarray]
    det_of: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DomainStructure:
    """Periodic grid plus invariant-operator coefficient fields.

    ``A`` is symmetric positive definite per node, shape ``(*shape, d, d)``;
    ``B`` has shape ``(*shape, d)``; ``metric_det`` is the positive weight
    used by the divergence-form comparison operator.
    """

    grid: PeriodicGrid
    kind: str  # "affine" | "hermitian"
    A: np.ndarray
    B: np.ndarray
    metric_det: np.ndarray
    analytic: AnalyticCoefficients | None = None
    label: str = ""

    @cached_property
    def stencil(self) -> StencilCoefficients:
        return build_coefficients(self.A, self.B if np.any(self.B) else None, self.grid.spacing)

    @property
    def has_drift(self) -> bool:
        return bool(np.any(self.B))


@dataclass(frozen=True)
class ChartChange:
    """Smooth change between coordinate systems with analytic derivatives.

    ``jacobian(x)[..., j, a] = dy^j/dx^a`` and
    ``hessian(x)[..., j, a, b] = d2 y^j / dx^a dx^b`` (symmetric in a, b).
    ``inverse`` is needed to sample transformed coefficients on the image
    grid; ``transform_grid`` maps the computational lattice.
    """

    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    transform_grid: Callable[[PeriodicGrid], PeriodicGrid] = lambda g: g
    name: str = "change"


def _first_bad_node(mask: np.ndarray) -> tuple:
    return tuple(int(v) for v in np.argwhere(mask)[0])


def _check_spd(gmat: np.ndarray, what: str) -> None:
    eig = np.linalg.eigvalsh(gmat)
    bad = eig[..., 0] <= 0.0
    if np.any(bad):
        raise DomainError(f"{what} not positive definite at node {_first_bad_node(bad)}")


def _as_matrix_field(values: np.ndarray, d: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if d == 1 and values.ndim >= 1 and values.shape[-1] != 1:
        values = values[..., np.newaxis, np.newaxis]
    return values


# ---------------------------------------------------------------------------
# builders


def build_affine_torus(metric_spec, grid: PeriodicGrid) -> DomainStructure:
    """Affine torus in global affine coordinates.

    ``A`` is the nodewise inverse of the metric and no first-order term
    arises (computational coordinates are the affine ones).  ``metric_spec``
    is either a callable on coordinates ``(d, ...) -> (..., d, d)`` (scalar
    valued in 1D) or a precomputed node-major array.
    """
    d = grid.ndim
    if callable(metric_spec):
        g = _as_matrix_field(metric_spec(grid.coordinates()), d)
        analytic_metric = metric_spec
    else:
        g = _as_matrix_field(metric_spec, d)
        analytic_metric = None
    if g.shape != grid.shape + (d, d):
        raise DomainError(f"metric field has shape {g.shape}, expected {grid.shape + (d, d)}")
    _check_spd(g, "metric")
    A = np.linalg.inv(g)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    det = np.sqrt(np.linalg.det(g))

    analytic = None
    if analytic_metric is not None:
        def a_of(x, _m=analytic_metric, _d=d):
            gm = _as_matrix_field(_m(x), _d)
            return np.linalg.inv(gm)

        def b_of(x, _d=d):
            x = np.asarray(x)
            return np.zeros(x.shape[1:] + (_d,))

        def det_of(x, _m=analytic_metric, _d=d):
            gm = _as_matrix_field(_m(x), _d)
            return np.sqrt(np.linalg.det(gm))

        analytic = AnalyticCoefficients(a_of, b_of, det_of)

    return DomainStructure(
        grid=grid, kind="affine", A=A, B=np.zeros(grid.shape + (d,)),
        metric_det=det, analytic=analytic, label="affine-torus",
    )


def _logpolar_frames(points: np.ndarray):
    """Jacobian and Hessian of (s, phi) = (log|x|, arg x) at_cartesian points."""
    x1, x2 = points[0], points[1]
    r2 = x1 * x1 + x2 * x2
    J = np.empty(x1.shape + (2, 2))
    J[..., 0, 0] = x1 / r2
    J[..., 0, 1] = x2 / r2
    J[..., 1, 0] = -x2 / r2
    J[..., 1, 1] = x1 / r2
    H = np.empty(x1.shape + (2, 2, 2))
    H[..., 0, 0, 0] = (r2 - 2 * x1 * x1) / r2 ** 2
    H[..., 0, 0, 1] = -2 * x1 * x2 / r2 ** 2
    H[..., 0, 1, 0] = H[..., 0, 0, 1]
    H[..., 0, 1, 1] = (r2 - 2 * x2 * x2) / r2 ** 2
    H[..., 1, 0, 0] = 2 * x1 * x2 / r2 ** 2
    H[..., 1, 0, 1] = (x2 * x2 - x1 * x1) / r2 ** 2
    H[..., 1, 1, 0] = H[..., 1, 0, 1]
    H[..., 1, 1, 1] = -2 * x1 * x2 / r2 ** 2
    return J, H


def _hopf_points_from_logpolar(sp: np.ndarray) -> np.ndarray:
    s, phi = sp[0], sp[1]
    r = np.exp(s)
    return np.stack([r * np.cos(phi), r * np.sin(phi)])


def check_scale_invariance(metric_spec, rtol: float = 1e-10, samples: int = 64) -> float:
    """Largest relative violation of ``g(2x) = g(x) / 4`` on sample points."""
    rng = np.random.default_rng(20240)
    r = rng.uniform(0.5, 2.0, samples)
    phi = rng.uniform(0.0, TWO_PI, samples)
    x = np.stack([r * np.cos(phi), r * np.sin(phi)])
    g1 = np.asarray(metric_spec(x))
    g2 = np.asarray(metric_spec(2.0 * x))
    scale = np.abs(g1).max()
    violation = float(np.abs(4.0 * g2 - g1).max() / scale)
    if violation > rtol:
        raise DomainError(f"metric is not scale invariant (violation {violation:.3e})")
    return violation


def build_hopf_torus(metric_spec, grid: PeriodicGrid) -> DomainStructure:
    """Quotient (R^2 minus 0) / (x -> 2x) in log-polar computational coordinates.

    The grid must have periods ``(log 2, 2 pi)`` in ``(s, phi)``.
    Coefficients follow the second-derivative transformation law applied to
    ``y = (log|x|, arg x)``:

        A^{jk} = ginv^{ab} (dy^j/dx^a)(dy^k/dx^b)
        B^j    = ginv^{ab} d2 y^j / dx^a dx^b

    both evaluated analytically at the nodes.  A conformal metric
    ``delta / |x|^2`` gives ``A = I`` and ``B = 0``; generically ``B != 0``
    and the operator has no divergence structure in any coordinates.
    """
    if grid.ndim != 2:
        raise DomainError("hopf torus is two dimensional")
    if not (math.isclose(grid.periods[0], LOG2, rel_tol=1e-12)
            and math.isclose(grid.periods[1], TWO_PI, rel_tol=1e-12)):
        raise DomainError(f"hopf grid needs periods (log 2, 2 pi), got {grid.periods}")
    check_scale_invariance(metric_spec)

    def coeffs_at(sp: np.ndarray):
        x = _hopf_points_from_logpolar(np.asarray(sp))
        g = np.asarray(metric_spec(x))
        ginv = np.linalg.inv(g)
        J, H = _logpolar_frames(x)
        A = np.einsum("...ja,...ab,...kb->...jk", J, ginv, J)
        B = np.einsum("...ab,...jab->...j", ginv, H)
        r2 = x[0] ** 2 + x[1] ** 2
        det = np.sqrt(np.linalg.det(g)) * r2  # metric determinant in (s, phi)
        return A, B, det

    nodes = grid.coordinates()
    A, B, det = coeffs_at(nodes)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    _check_spd(A, "assembled A")

    analytic = AnalyticCoefficients(
        a_of=lambda sp: coeffs_at(sp)[0],
        b_of=lambda sp: coeffs_at(sp)[1],
        det_of=lambda sp: coeffs_at(sp)[2],
    )
    return DomainStructure(
        grid=grid, kind="affine", A=A, B=B, metric_det=det,
        analytic=analytic, label="hopf-torus",
    )


def build_hermitian_torus(hermitian_metric, grid: PeriodicGrid) -> DomainStructure:
    """Complex torus C^m / Lambda with a Hermitian metric, m in {1, 2}.

    Real coordinates are ordered ``(x^1..x^m, y^1..y^m)`` with
    ``z^a = x^a + i y^a``.  Writing the inverse metric as ``P + iQ``
    (P symmetric, Q antisymmetric), the real coefficient matrix is

        A = 1/4 [[P, -Q], [Q, P]]

    so the Hermitian trace ``ginv^{ab} d2/dz^a dzbar^b`` acts on real
    components as ``A^{jk} d2_{jk}``; no first-order term appears.
    """
    d = grid.ndim
    if d not in (2, 4):
        raise DomainError("complex torus needs 2 or 4 real dimensions")
    m = d // 2
    x = grid.coordinates()
    g = np.asarray(hermitian_metric(x))
    if m == 1 and g.shape == grid.shape:
        g = g[..., np.newaxis, np.newaxis]
    g = g.astype(np.complex128)
    if g.shape != grid.shape + (m, m):
        raise DomainError(f"hermitian metric has shape {g.shape}, expected {grid.shape + (m, m)}")
    herm_defect = np.abs(g - np.conj(np.swapaxes(g, -1, -2))).max()
    if herm_defect > 1e-12 * max(1.0, np.abs(g).max()):
        raise DomainError(f"metric is not Hermitian (defect {herm_defect:.3e})")
    eig = np.linalg.eigvalsh(g)
    bad = eig[..., 0] <= 0.0
    if np.any(bad):
        raise DomainError(f"hermitian metric not positive at node {_first_bad_node(bad)}")

    ginv = np.linalg.inv(g)
    Pmat = ginv.real
    Qmat = ginv.imag
    A = np.zeros(grid.shape + (d, d))
    A[..., :m, :m] = 0.25 * Pmat
    A[..., m:, m:] = 0.25 * Pmat
    A[..., :m, m:] = -0.25 * Qmat
    A[..., m:, :m] = 0.25 * Qmat
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    det = np.abs(np.linalg.det(g))  # sqrt(det of the real-form metric)

    def a_of(pts, _hm=hermitian_metric, _m=m, _d=d):
        gm = np.asarray(_hm(pts))
        if _m == 1 and gm.shape == pts.shape[1:]:
            gm = gm[..., np.newaxis, np.newaxis]
        gi = np.linalg.inv(gm.astype(np.complex128))
        out = np.zeros(pts.shape[1:] + (_d, _d))
        out[..., :_m, :_m] = 0.25 * gi.real
        out[..., _m:, _m:] = 0.25 * gi.real
        out[..., :_m, _m:] = -0.25 * gi.imag
        out[..., _m:, :_m] = 0.25 * gi.imag
        return out

    def det_of(pts, _hm=hermitian_metric, _m=m):
        gm = np.asarray(_hm(pts))
        if _m == 1 and gm.shape == np.asarray(pts).shape[1:]:
            gm = gm[..., np.newaxis, np.newaxis]
        return np.abs(np.linalg.det(gm.astype(np.complex128)))

    analytic = AnalyticCoefficients(
        a_of=a_of,
        b_of=lambda pts: np.zeros(np.asarray(pts).shape[1:] + (d,)),
        det_of=det_of,
    )
    return DomainStructure(
        grid=grid, kind="hermitian", A=A, B=np.zeros(grid.shape + (d,)),
        metric_det=det, analytic=analytic, label=f"complex-torus-{m}",
    )


# ---------------------------------------------------------------------------
# coordinate changes


def transform_operator(domain: DomainStructure, change: ChartChange) -> DomainStructure:
    """Push the operator coefficients through a coordinate change.

    New coefficients on the transformed grid:

        A' = J A J^T                    (congruence, stays SPD)
        B' = B . J + contract(A, d2y)   (second-derivative correction)

    Requires analytic coefficient evaluators on the source domain so the
    pulled-back sample points need no interpolation.
    """
    if domain.analytic is None:
        raise ChartError("transform_operator needs a domain with analytic coefficient evaluators")
    new_grid = change.transform_grid(domain.grid)
    y = new_grid.coordinates()
    x = np.asarray(change.inverse(y))
    J = np.asarray(change.jacobian(x))
    detJ = np.linalg.det(J)
    singular = np.abs(detJ) < 1e-14
    if np.any(singular):
        raise ChartError(f"singular jacobian at node {_first_bad_node(singular)}")
    H = np.asarray(change.hessian(x))
    A = domain.analytic.a_of(x)
    B = domain.analytic.b_of(x)
    det = domain.analytic.det_of(x)

    A_new = np.einsum("...ja,...ab,...kb->...jk", J, A, J)
    A_new = 0.5 * (A_new + np.swapaxes(A_new, -1, -2))
    B_new = np.einsum("...ja,...a->...j", J, B) + np.einsum("...ab,...jab->...j", A, H)
    det_new = det / np.abs(detJ)

    def a_of(yy, _an=domain.analytic, _ch=change):
        xx = np.asarray(_ch.inverse(yy))
        Jx = np.asarray(_ch.jacobian(xx))
        return np.einsum("...ja,...ab,...kb->...jk", Jx, _an.a_of(xx), Jx)

    def b_of(yy, _an=domain.analytic, _ch=change):
        xx = np.asarray(_ch.inverse(yy))
        Jx = np.asarray(_ch.jacobian(xx))
        Hx = np.asarray(_ch.hessian(xx))
        return (np.einsum("...ja,...a->...j", Jx, _an.b_of(xx))
                + np.einsum("...ab,...jab->...j", _an.a_of(xx), Hx))

    def det_of(yy, _an=domain.analytic, _ch=change):
        xx = np.asarray(_ch.inverse(yy))
        Jx = np.asarray(_ch.jacobian(xx))
        return _an.det_of(xx) / np.abs(np.linalg.det(Jx))

    return DomainStructure(
        grid=new_grid, kind=domain.kind, A=A_new, B=B_new, metric_det=det_new,
        analytic=AnalyticCoefficients(a_of, b_of, det_of),
        label=f"{domain.label}|{change.name}",
    )


def identity_change(d: int) -> ChartChange:
    def _id(x):
        return np.asarray(x)

    def _jac(x):
        x = np.asarray(x)
        return np.broadcast_to(np.eye(d), x.shape[1:] + (d, d)).copy()

    def _hess(x):
        x = np.asarray(x)
        return np.zeros(x.shape[1:] + (d, d, d))

    return ChartChange(_id, _id, _jac, _hess, name="identity")


def affine_change(M: np.ndarray, b: np.ndarray,
                  transform_grid: Callable[[PeriodicGrid], PeriodicGrid] | None = None,
                  name: str = "affine") -> ChartChange:
    """y = M x + b with constant jacobian and vanishing hessian."""
    M = np.asarray(M, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = M.shape[0]
    Minv = np.linalg.inv(M)

    def fwd(x):
        x = np.asarray(x)
        return np.einsum("ja,a...->j...", M, x) + b.reshape((d,) + (1,) * (x.ndim - 1))

    def inv(y):
        y = np.asarray(y)
        return np.einsum("aj,j...->a...", Minv, y - b.reshape((d,) + (1,) * (y.ndim - 1)))

    def jac(x):
        x = np.asarray(x)
        return np.broadcast_to(M, x.shape[1:] + (d, d)).copy()

    def hess(x):
        x = np.asarray(x)
        return np.zeros(x.shape[1:] + (d, d, d))

    return ChartChange(fwd, inv, jac, hess,
                       transform_grid=transform_grid or (lambda g: g), name=name)


@dataclass(frozen=True)
class LatticeAffineChange:
    """Affine change that maps the computational lattice onto a lattice.

    ``y_q = scale_q * (sign_q * x_{perm(q)}) + cells_q * h'_q``; the shift is
    a whole number of transformed cells so every new node coincides with an
    old node.  ``old_flat_of_new`` gives the source flat index of each node
    of the transformed grid.
    """

    change: ChartChange
    new_grid: PeriodicGrid
    old_flat_of_new: np.ndarray


def lattice_affine_change(grid: PeriodicGrid, perm, scales, signs=None, shift_cells=None) -> LatticeAffineChange:
    d = grid.ndim
    perm = tuple(int(p) for p in perm)
    scales = np.asarray(scales, dtype=np.float64)
    signs = np.ones(d) if signs is None else np.asarray(signs, dtype=np.float64)
    shift_cells = np.zeros(d, dtype=np.int64) if shift_cells is None else np.asarray(shift_cells, dtype=np.int64)

    M = np.zeros((d, d))
    for q in range(d):
        M[q, perm[q]] = signs[q] * scales[q]
    new_extents = tuple(grid.extents[perm[q]] for q in range(d))
    new_periods = tuple(float(scales[q] * grid.periods[perm[q]]) for q in range(d))
    new_grid = PeriodicGrid(new_extents, new_periods)
    b = shift_cells * np.array(new_grid.spacing)

    change = affine_change(M, b, transform_grid=lambda g, _ng=new_grid: _ng,
                           name=f"lattice-affine{perm}")

    # node correspondence: y-index i_q maps to x-index on axis perm(q)
    idx = np.indices(new_extents)
    old_multi = [None] * d
    for q in range(d):
        n_q = new_extents[q]
        src = idx[q] - shift_cells[q]
        if signs[q] < 0:
            src = -src
        old_multi[perm[q]] = np.mod(src, n_q)
    flat = grid.flat_indices
    old_flat = flat[tuple(old_multi)]
    return LatticeAffineChange(change=change, new_grid=new_grid,
                               old_flat_of_new=old_flat.ravel())


def torus_wave_change(grid: PeriodicGrid, axis: int = 0, amplitude: float = 0.05) -> ChartChange:
    """Periodic nonlinear diffeomorphism ``y_a = x_a + amp sin(2 pi x_a / P_a)``.

    Nonlinear in one axis only, identity elsewhere; requires
    ``|amp| * 2 pi / P < 1`` so the map stays invertible.  The inverse is
    computed by Newton iteration to machine accuracy.
    """
    d = grid.ndim
    P = grid.periods[axis]
    w = TWO_PI / P
    if abs(amplitude) * w >= 1.0:
        raise ChartError("wave amplitude too large for a diffeomorphism")

    def fwd(x):
        y = np.array(x, dtype=np.float64, copy=True)
        y[axis] = x[axis] + amplitude * np.sin(w * x[axis])
        return y

    def inv(y):
        x = np.array(y, dtype=np.float64, copy=True)
        t = np.array(y[axis], dtype=np.float64, copy=True)
        for _ in range(60):
            f = t + amplitude * np.sin(w * t) - y[axis]
            df = 1.0 + amplitude * w * np.cos(w * t)
            step = f / df
            t -= step
            if np.abs(step).max() < 1e-15:
                break
        x[axis] = t
        return x

    def jac(x):
        x = np.asarray(x)
        J = np.zeros(x.shape[1:] + (d, d))
        for j in range(d):
            J[..., j, j] = 1.0
        J[..., axis, axis] = 1.0 + amplitude * w * np.cos(w * x[axis])
        return J

    def hess(x):
        x = np.asarray(x)
        H = np.zeros(x.shape[1:] + (d, d, d))
        H[..., axis, axis, axis] = -amplitude * w * w * np.sin(w * x[axis])
        return H

    return ChartChange(fwd, inv, jac, hess, name=f"wave(axis={axis},amp={amplitude})")


# ---------------------------------------------------------------------------
# builtin domain catalog


def _torus1d_metric(preset: str, params: dict):
    offset = float(params.get("offset", 2.0))
    amp = float(params.get("amp", 1.0))
    if preset == "unit":
        return lambda x: np.ones_like(np.asarray(x)[0])
    if preset == "sine":
        return lambda x: offset + amp * np.sin(TWO_PI * np.asarray(x)[0])
    if preset == "inv-sine":
        return lambda x: 1.0 / (offset + amp * np.sin(TWO_PI * np.asarray(x)[0]))
    raise DomainError(f"unknown torus1d preset {preset!r}")


def _torus2d_metric(preset: str, params: dict):
    if preset == "unit":
        def g(x):
            x = np.asarray(x)
            out = np.zeros(x.shape[1:] + (2, 2))
            out[..., 0, 0] = 1.0
            out[..., 1, 1] = 1.0
            return out
        return g
    if preset == "wavy":
        amp = float(params.get("amp", 0.5))

        def g(x):
            x = np.asarray(x)
            out = np.zeros(x.shape[1:] + (2, 2))
            out[..., 0, 0] = 1.0 + amp * np.sin(TWO_PI * x[0])
            out[..., 1, 1] = 1.0
            return out
        return g
    if preset == "sheared":
        off = float(params.get("off", 0.3))

        def g(x):
            x = np.asarray(x)
            out = np.zeros(x.shape[1:] + (2, 2))
            out[..., 0, 0] = 1.0
            out[..., 1, 1] = 1.0
            out[..., 0, 1] = off
            out[..., 1, 0] = off
            return out
        return g
    if preset == "mixed":
        a = float(params.get("a", 0.5))
        b = float(params.get("b", 0.25))

        def g(x):
            x = np.asarray(x)
            s = np.sin(TWO_PI * x[0]) * np.cos(TWO_PI * x[1])
            out = np.zeros(x.shape[1:] + (2, 2))
            out[..., 0, 0] = 1.0 + a * np.sin(TWO_PI * x[0]) ** 2
            out[..., 1, 1] = 1.0 + a * np.cos(TWO_PI * x[1]) ** 2
            out[..., 0, 1] = b * s
            out[..., 1, 0] = b * s
            return out
        return g
    raise DomainError(f"unknown torus2d preset {preset!r}")


def hopf_metric(preset: str, params: dict):
    """Scale-invariant metrics on R^2 minus the origin.

    ``conformal``: delta / |x|^2 (assembles to the flat operator).
    ``skew``: exp(2u) (I + c S(phi)) / |x|^2 with S the reflection across
    angle phi and u a periodic bump; produces a nonvanishing first-order
    term with B^s = 2 c exp(-2u) / (1 - c^2) and B^phi = 0.
    """
    if preset == "conformal":
        def g(x):
            x = np.asarray(x)
            r2 = x[0] ** 2 + x[1] ** 2
            out = np.zeros(x.shape[1:] + (2, 2))
            out[..., 0, 0] = 1.0 / r2
            out[..., 1, 1] = 1.0 / r2
            return out
        return g
    if preset == "skew":
        c = float(params.get("skew", 0.4))
        u0 = float(params.get("bump", 0.25))
        kphi = int(params.get("bump_kphi", 1))  # angular wavenumber of the bump
        if not (abs(c) < 1.0):
            raise DomainError("skew parameter must satisfy |c| < 1")

        def g(x):
            x = np.asarray(x)
            r2 = x[0] ** 2 + x[1] ** 2
            cos2 = (x[0] ** 2 - x[1] ** 2) / r2
            sin2 = 2.0 * x[0] * x[1] / r2
            s = 0.5 * np.log(r2)
            cphi = np.cos(kphi * np.arctan2(x[1], x[0])) if kphi else 1.0
            u = u0 * np.cos(TWO_PI * s / LOG2) * cphi
            e2u = np.exp(2.0 * u)
            out = np.empty(x.shape[1:] + (2, 2))
            out[..., 0, 0] = e2u * (1.0 + c * cos2) / r2
            out[..., 1, 1] = e2u * (1.0 - c * cos2) / r2
            out[..., 0, 1] = e2u * c * sin2 / r2
            out[..., 1, 0] = out[..., 0, 1]
            return out
        return g
    raise DomainError(f"unknown hopf2d preset {preset!r}")


def _ctorus1_metric(preset: str, params: dict):
    if preset == "flat":
        return lambda x: np.ones(np.asarray(x).shape[1:], dtype=np.complex128)
    if preset == "wavy":
        amp = float(params.get("amp", 0.4))

        def g(x):
            x = np.asarray(x)
            lam = np.exp(amp * np.sin(TWO_PI * x[0]) * np.cos(TWO_PI * x[1]))
            return lam.astype(np.complex128)
        return g
    raise DomainError(f"unknown ctorus1 preset {preset!r}")


def _ctorus2_metric(preset: str, params: dict):
    if preset == "flat":
        def g(x):
            x = np.asarray(x)
            out = np.zeros(x.shape[1:] + (2, 2), dtype=np.complex128)
            out[..., 0, 0] = 1.0
            out[..., 1, 1] = 1.0
            return out
        return g
    if preset == "skewed":
        q = complex(params.get("q", 0.2 + 0.15j))
        if abs(q) >= 1.0:
            raise DomainError("|q| must be < 1 for positivity")

        def g(x):
            x = np.asarray(x)
            out = np.zeros(x.shape[1:] + (2, 2), dtype=np.complex128)
            out[..., 0, 0] = 1.0
            out[..., 1, 1] = 1.0
            out[..., 0, 1] = q
            out[..., 1, 0] = np.conj(q)
            return out
        return g
    if preset == "nonkahler":
        amp = float(params.get("amp", 0.5))

        def g(x):
            # gamma_{1 1bar} depends on Re z^2 only: d gamma_{1 1bar}/dz^2 != 0
            # while gamma_{2 1bar} = 0, so the Kahler symmetry fails.
            x = np.asarray(x)
            out = np.zeros(x.shape[1:] + (2, 2), dtype=np.complex128)
            out[..., 0, 0] = np.exp(amp * np.sin(TWO_PI * x[1]))
            out[..., 1, 1] = 1.0
            return out
        return g
    raise DomainError(f"unknown ctorus2 preset {preset!r}")


DOMAIN_NAMES = ("torus1d", "torus2d", "hopf2d", "ctorus1", "ctorus2")

DOMAIN_PRESETS = {
    "torus1d": ("unit", "sine", "inv-sine"),
    "torus2d": ("unit", "wavy", "sheared", "mixed"),
    "hopf2d": ("conformal", "skew"),
    "ctorus1": ("flat", "wavy"),
    "ctorus2": ("flat", "skewed", "nonkahler"),
}


def default_grid(name: str, n: int | tuple[int, ...]) -> PeriodicGrid:
    if isinstance(n, int):
        counts = {"torus1d": 1, "torus2d": 2, "hopf2d": 2, "ctorus1": 2, "ctorus2": 4}
        if name not in counts:
            raise DomainError(f"unknown domain {name!r}")
        extents = (n,) * counts[name]
    else:
        extents = tuple(n)
    if name == "torus1d":
        return PeriodicGrid(extents, (1.0,))
    if name == "torus2d":
        return PeriodicGrid(extents, (1.0, 1.0))
    if name == "hopf2d":
        return PeriodicGrid(extents, (LOG2, TWO_PI))
    if name == "ctorus1":
        return PeriodicGrid(extents, (1.0, 1.0))
    if name == "ctorus2":
        return PeriodicGrid(extents, (1.0,) * 4)
    raise DomainError(f"unknown domain {name!r}")


def build_domain(name: str, extents, preset: str | None = None, params: dict | None = None) -> DomainStructure:
    """Instantiate a catalog domain by name, preset and grid extents."""
    params = dict(params or {})
    grid = default_grid(name, extents)
    if name == "torus1d":
        dom = build_affine_torus(_torus1d_metric(preset or "unit", params), grid)
    elif name == "torus2d":
        dom = build_affine_torus(_torus2d_metric(preset or "unit", params), grid)
    elif name == "hopf2d":
        dom = build_hopf_torus(hopf_metric(preset or "conformal", params), grid)
    elif name == "ctorus1":
        dom = build_hermitian_torus(_ctorus1_metric(preset or "flat", params), grid)
    elif name == "ctorus2":
        dom = build_hermitian_torus(_ctorus2_metric(preset or "flat", params), grid)
    else:
        raise DomainError(f"unknown domain {name!r}")
    return replace(dom, label=f"{name}:{preset or 'default'}")

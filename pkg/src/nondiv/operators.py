"""Discrete tension fields, the divergence-form comparison operator, and
the invariant-measure solvability oracle.

The non-divergence tension of a map ``f`` is

    tau^i = A^{jk} (d2_{jk} f^i + Gamma^i_ab(f) d_j f^a d_k f^b) + B^j d_j f^i

with centered second-order stencils for the Hessian (sign-split corner
scheme for mixed terms), centered differences inside the quadratic
Christoffel term, and one-sided differences for the drift.  The linear part
is a Markov jump generator whenever the mesh-ratio condition holds, which
makes the invariant measure (the positive left null vector) well posed;
its pairing with the tension of a reference map predicts the asymptotic
drift of non-convergent flows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .fields import MapField
from .geometry import DomainStructure
from .grid import layout_for, pad_components
from .targets import ChartExit

log = logging.getLogger(__name__)


class OperatorError(RuntimeError):
    pass


class Workspace:
    """Reusable buffers for repeated tension evaluations on one grid."""

    def __init__(self, domain: DomainStructure, ncomp: int):
        grid = domain.grid
        self.layout = layout_for(grid)
        self.padded = np.empty((ncomp,) + self.layout.padded_shape)
        self.out = np.empty((ncomp,) + grid.shape)
        self.grads = np.empty((ncomp, grid.ndim) + grid.shape)
        self.inv2h = np.ascontiguousarray(0.5 / grid.spacing)


def _workspace_for(domain: DomainStructure, field: MapField, ws: Workspace | None) -> Workspace:
    if ws is None:
        ws = Workspace(domain, field.ncomp)
    return ws


def apply_linear(domain: DomainStructure, values: np.ndarray,
                 offsets: np.ndarray | None = None, out: np.ndarray | None = None) -> np.ndarray:
    """Linear part ``A^{jk} d2_{jk} + B^j d_j`` on lifted components.

    ``values``: (ncomp, *shape); ``offsets``: per-component lift jumps
    across one period of each axis (defaults to genuinely periodic data).
    """
    grid = domain.grid
    values = np.asarray(values, dtype=np.float64)
    single = values.ndim == grid.ndim
    if single:
        values = values[np.newaxis]
    if offsets is None:
        offsets = np.zeros((values.shape[0], grid.ndim))
    layout = layout_for(grid)
    padded = pad_components(values, offsets)
    if out is None:
        out = np.empty_like(values)
    kernels.linear_apply(padded, domain.stencil, layout, out)
    return out[0] if single else out


def gradients(domain: DomainStructure, field: MapField, ws: Workspace | None = None) -> np.ndarray:
    """Centered gradients of the lifts, shape (ncomp, d, *shape)."""
    ws = _workspace_for(domain, field, ws)
    field.padded(out=ws.padded)
    return kernels.gradients(ws.padded, ws.inv2h, ws.layout, ws.grads)


def pullback_form(domain: DomainStructure, field: MapField,
                  grads: np.ndarray | None = None) -> np.ndarray:
    """A-weighted first fundamental form ``G^{ab} = A^{jk} d_j f^a d_k f^b``.

    Shared between the quadratic Christoffel term and the energy density.
    Shape (ncomp, ncomp, *shape).
    """
    if grads is None:
        grads = gradients(domain, field)
    return np.einsum("...jk,aj...,bk...->ab...", domain.A, grads, grads, optimize=True)


def tension(domain: DomainStructure, field: MapField, ws: Workspace | None = None,
            check_chart: bool = True) -> np.ndarray:
    """Non-divergence tension field, shape (ncomp, *shape).

    Pure second order plus drift on the lifts, plus the quadratic
    Christoffel term on curved targets.  Constants and, on standard affine
    tori with flat targets, exact winding representatives are annihilated
    exactly in floating point.
    """
    target = field.target
    if check_chart and not target.is_flat and not field.in_chart():
        raise ChartExit(f"map left the chart of {target.name}")
    ws = _workspace_for(domain, field, ws)
    field.padded(out=ws.padded)
    out = kernels.linear_apply(ws.padded, domain.stencil, ws.layout, ws.out)
    if not target.is_flat:
        grads = kernels.gradients(ws.padded, ws.inv2h, ws.layout, ws.grads)
        G = np.einsum("...jk,aj...,bk...->ab...", domain.A, grads, grads, optimize=True)
        Gam = target.christoffel(field.values)
        out += np.einsum("...iab,ab...->i...", Gam, G, optimize=True)
    return out


# ---------------------------------------------------------------------------
# sparse scalar operator and invariant measure


@dataclass(frozen=True)
class DiscreteOperator:
    """Sparse realization of the linear part on scalar fields.

    Row weights sum to zero (constants annihilated); off-center weights are
    nonnegative wherever the mesh-ratio condition holds, making the matrix
    a Markov jump generator there.
    """

    matrix: sp.csr_matrix
    grid_shape: tuple[int, ...]
    mesh_ratio_violations: int
    label: str = ""

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def to_coo_text(self) -> str:
        coo = self.matrix.tocoo()
        lines = [f"{i} {j} {v!r}" for i, j, v in zip(coo.row, coo.col, coo.data)]
        return "\n".join(lines) + "\n"


def scalar_operator_matrix(domain: DomainStructure) -> DiscreteOperator:
    """Assemble the sparse matrix of the linear operator on scalar fields."""
    grid = domain.grid
    coeffs = domain.stencil
    n = grid.num_nodes
    d = grid.ndim
    if coeffs.monotone_violations:
        log.warning("mesh-ratio condition violated at %d of %d nodes on %s",
                    coeffs.monotone_violations, n, domain.label or "domain")

    rows = []
    cols = []
    data = []
    center = np.zeros(n)

    def add_leg(col_index: np.ndarray, weight: np.ndarray):
        w = weight.ravel()
        rows.append(np.arange(n))
        cols.append(col_index)
        data.append(w)
        center[:] -= w

    for j in range(d):
        wp = coeffs.adiag[j] + coeffs.bpos[j]
        wm = coeffs.adiag[j] + coeffs.bneg[j]
        add_leg(grid.neighbor_flat(j, +1), wp)
        add_leg(grid.neighbor_flat(j, -1), wm)
    idx = grid.flat_indices
    for p in range(coeffs.num_pairs):
        j, k = coeffs.pairs[p]
        pp = np.roll(np.roll(idx, -1, axis=j), -1, axis=k).ravel()
        mm = np.roll(np.roll(idx, 1, axis=j), 1, axis=k).ravel()
        pm = np.roll(np.roll(idx, -1, axis=j), 1, axis=k).ravel()
        mp = np.roll(np.roll(idx, 1, axis=j), -1, axis=k).ravel()
        add_leg(pp, coeffs.cpos[p])
        add_leg(mm, coeffs.cpos[p])
        add_leg(pm, coeffs.cneg[p])
        add_leg(mp, coeffs.cneg[p])

    rows.append(np.arange(n))
    cols.append(np.arange(n))
    data.append(center)
    mat = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n)).tocsr()
    return DiscreteOperator(matrix=mat, grid_shape=grid.shape,
                            mesh_ratio_violations=coeffs.monotone_violations,
                            label=domain.label)


def invariant_measure(op: DiscreteOperator, tol: float = 1e-12, max_refine: int = 4) -> np.ndarray:
    """Positive left null vector of the operator, normalized to total mass 1.

    Solves the bordered system (one redundant balance equation replaced by
    pinning the last entry) with a sparse LU, then applies iterative
    refinement until the left-kernel residual is at machine level.
    """
    L = op.matrix
    n = L.shape[0]
    K = L.T.tocsc()
    K11 = K[:-1, :-1].tocsc()
    rhs = -K[:-1, -1].toarray().ravel()
    lu = spla.splu(K11)
    y = lu.solve(rhs)
    mu = np.concatenate([y, [1.0]])

    scale = float(np.abs(L).max())
    for _ in range(max_refine):
        r = K @ mu
        if np.abs(r).max() <= tol * scale * max(np.abs(mu).max(), 1e-300):
            break
        mu[:-1] -= lu.solve(r[:-1])

    total = mu.sum()
    if not np.isfinite(total) or total == 0.0:
        raise OperatorError("invariant measure solve failed (singular or non-finite)")
    mu /= total
    if mu.min() < -1e-12:
        raise OperatorError(f"invariant measure has negative entries (min {mu.min():.3e}); "
                            "operator is likely not a monotone generator")
    mu = np.maximum(mu, 0.0)
    mu /= mu.sum()
    return mu.reshape(op.grid_shape)


def drift_prediction(domain: DomainStructure, reference: MapField,
                     mu: np.ndarray | None = None) -> np.ndarray:
    """Invariant-measure pairing with the reference tension, per component.

    For a flat target the tension is linear in the lift, so this pairing is
    the exact rate at which the measure-weighted average of each lift
    component moves under the flow; a nonzero value is the obstruction to
    solving the harmonic equation in this homotopy class.
    """
    if not reference.target.is_flat:
        raise OperatorError("drift prediction needs a flat target (linear tension)")
    if mu is None:
        mu = invariant_measure(scalar_operator_matrix(domain))
    tau = tension(domain, reference)
    return tau.reshape(reference.ncomp, -1) @ mu.ravel()


# ---------------------------------------------------------------------------
# divergence-form comparison operator


def _face_avg(mpad: np.ndarray, d: int, moves: dict[int, int]) -> np.ndarray:
    core = mpad[tuple(slice(1, -1) for _ in range(d))]
    sl = [slice(1, -1)] * d
    for axis, m in moves.items():
        sl[axis] = slice(2, None) if m > 0 else slice(0, -2)
    return 0.5 * (core + mpad[tuple(sl)])


def divergence_tension(domain: DomainStructure, field: MapField) -> np.ndarray:
    """Divergence-form comparison operator

        (1/w) d_j ( w A^{jk} d_k f^i ) + A^{jk} Gamma^i_ab d_j f^a d_k f^b

    with ``w`` the stored metric determinant weight, discretized in flux
    form with face-averaged coefficients.  Mixed terms are split along the
    stencil diagonals matching ``sign(A^{jk})`` so that on constant
    coefficients this reproduces the non-divergence tension exactly; for
    variable coefficients the two operators genuinely differ unless the
    derivatives of the metric compensate (the divergence structure).
    """
    grid = domain.grid
    d = grid.ndim
    h = grid.spacing
    target = field.target
    if not target.is_flat and not field.in_chart():
        raise ChartExit(f"map left the chart of {target.name}")

    w = domain.metric_det
    Asym = 0.5 * (domain.A + np.swapaxes(domain.A, -1, -2))
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]

    # axis coefficients carry the same mesh-ratio reduction as the
    # non-divergence scheme so the constant-coefficient cases coincide
    m_axis = np.empty((d,) + grid.shape)
    for j in range(d):
        m_axis[j] = Asym[..., j, j]
    m_pos = np.empty((len(pairs),) + grid.shape)
    m_neg = np.empty((len(pairs),) + grid.shape)
    for p, (j, k) in enumerate(pairs):
        a = Asym[..., j, k]
        m_pos[p] = np.maximum(a, 0.0)
        m_neg[p] = np.maximum(-a, 0.0)
        absa = np.abs(a)
        m_axis[j] -= absa * (h[j] / h[k])
        m_axis[k] -= absa * (h[k] / h[j])
    m_axis *= w
    m_pos *= w
    m_neg *= w

    def padded_scalar(m):
        return pad_components(m[np.newaxis], np.zeros((1, d)))[0]

    fpad = field.padded()
    out = np.zeros((field.ncomp,) + grid.shape)

    def flux(mpad, moves_p: dict[int, int], scale: float):
        # [m_{+1/2}(f_+ - f_0) - m_{-1/2}(f_0 - f_-)] / (h_j h_k)
        moves_m = {a: -s for a, s in moves_p.items()}
        m_p = _face_avg(mpad, d, moves_p)
        m_m = _face_avg(mpad, d, moves_m)
        for c in range(field.ncomp):
            fc = fpad[c]
            core = fc[tuple(slice(1, -1) for _ in range(d))]
            sl_p = [slice(1, -1)] * d
            sl_m = [slice(1, -1)] * d
            for axis, mv in moves_p.items():
                sl_p[axis] = slice(2, None) if mv > 0 else slice(0, -2)
                sl_m[axis] = slice(0, -2) if mv > 0 else slice(2, None)
            vp = fc[tuple(sl_p)]
            vm = fc[tuple(sl_m)]
            out[c] += scale * (m_p * (vp - core) - m_m * (core - vm))

    for j in range(d):
        flux(padded_scalar(m_axis[j]), {j: +1}, 1.0 / h[j] ** 2)
    for p, (j, k) in enumerate(pairs):
        if np.any(m_pos[p]):
            flux(padded_scalar(m_pos[p]), {j: +1, k: +1}, 1.0 / (h[j] * h[k]))
        if np.any(m_neg[p]):
            flux(padded_scalar(m_neg[p]), {j: +1, k: -1}, 1.0 / (h[j] * h[k]))

    out /= w

    if not target.is_flat:
        G = pullback_form(domain, field)
        Gam = target.christoffel(field.values)
        out += np.einsum("...iab,ab...->i...", Gam, G, optimize=True)
    return out

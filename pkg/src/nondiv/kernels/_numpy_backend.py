"""Pure-numpy stencil kernels operating on ghost-padded arrays.

These mirror the compiled kernels in ``_stencil.pyx`` exactly (same stencil
algebra, different summation order).  All views are taken on the padded
array, so no index ever wraps.
"""

from __future__ import annotations

import numpy as np


def _view(padded: np.ndarray, d: int, moves: dict[int, int]) -> np.ndarray:
    sl = [slice(1, -1)] * d
    for axis, m in moves.items():
        sl[axis] = slice(2, None) if m > 0 else slice(0, -2)
    return padded[(slice(None), *sl)]


def linear_apply(padded, coeffs, layout, out):
    """Second-order coefficients times the Hessian plus upwinded drift.

    ``out[c] = sum_j adiag_j * d2_j f + sum_pairs corner terms
               + sum_j (bpos_j (f_+ - f) + bneg_j (f_- - f))``
    with all mesh factors already folded into the coefficient arrays.
    """
    d = layout.grid.ndim
    core = _view(padded, d, {})
    out[:] = 0.0
    for j in range(d):
        vp = _view(padded, d, {j: +1})
        vm = _view(padded, d, {j: -1})
        out += coeffs.adiag[j] * ((vp - core) + (vm - core))
        if coeffs.has_drift:
            out += coeffs.bpos[j] * (vp - core) + coeffs.bneg[j] * (vm - core)
    for p in range(coeffs.num_pairs):
        j, k = coeffs.pairs[p]
        vpp = _view(padded, d, {j: +1, k: +1})
        vmm = _view(padded, d, {j: -1, k: -1})
        vpm = _view(padded, d, {j: +1, k: -1})
        vmp = _view(padded, d, {j: -1, k: +1})
        out += coeffs.cpos[p] * ((vpp - core) + (vmm - core))
        out += coeffs.cneg[p] * ((vpm - core) + (vmp - core))
    return out


def gradients(padded, inv2h, layout, out):
    """Centered first differences: ``out[c, j] = (f_+ - f_-) / (2 h_j)``."""
    d = layout.grid.ndim
    for j in range(d):
        vp = _view(padded, d, {j: +1})
        vm = _view(padded, d, {j: -1})
        np.subtract(vp, vm, out=out[:, j])
        out[:, j] *= inv2h[j]
    return out

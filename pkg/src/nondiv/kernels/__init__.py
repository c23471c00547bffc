"""Stencil kernel backends.

The hot inner loops (Hessian contraction, upwinded drift, centered
gradients) exist twice: a compiled Cython extension and a pure-numpy
fallback.  The compiled backend is used when importable; set
``NONDIV_KERNELS=numpy`` or ``NONDIV_KERNELS=compiled`` to force a choice
(``compiled`` raises if the extension is missing).
"""

from __future__ import annotations

import os

import numpy as np

from . import _numpy_backend

try:
    from . import _stencil as _compiled
except ImportError:  # extension not built
    _compiled = None

_choice = os.environ.get("NONDIV_KERNELS", "auto")
if _choice not in ("auto", "numpy", "compiled"):
    raise RuntimeError(f"NONDIV_KERNELS must be auto|numpy|compiled, got {_choice!r}")
if _choice == "compiled" and _compiled is None:
    raise RuntimeError("NONDIV_KERNELS=compiled but the extension is not built")

_active = "numpy" if (_choice == "numpy" or _compiled is None) else "compiled"


def backend_name() -> str:
    return _active


def available_backends() -> tuple[str, ...]:
    return ("numpy", "compiled") if _compiled is not None else ("numpy",)


def linear_apply(padded, coeffs, layout, out, backend: str | None = None):
    """Apply the assembled linear operator to ghost-padded components.

    ``padded``: (ncomp, *padded_shape); ``out``: (ncomp, *shape).
    """
    which = backend or _active
    if which == "numpy":
        return _numpy_backend.linear_apply(padded, coeffs, layout, out)
    ncomp = padded.shape[0]
    n = layout.pad_index.shape[0]
    _compiled.linear_apply(
        padded.reshape(ncomp, -1),
        coeffs.adiag.reshape(coeffs.adiag.shape[0], n),
        coeffs.bpos.reshape(coeffs.bpos.shape[0], n),
        coeffs.bneg.reshape(coeffs.bneg.shape[0], n),
        coeffs.cpos.reshape(coeffs.num_pairs, n),
        coeffs.cneg.reshape(coeffs.num_pairs, n),
        coeffs.pairs,
        layout.pad_index,
        layout.pad_strides,
        coeffs.has_drift,
        out.reshape(ncomp, n),
    )
    return out


def gradients(padded, inv2h, layout, out, backend: str | None = None):
    """Centered gradients of ghost-padded components, ``out``: (ncomp, d, *shape)."""
    which = backend or _active
    if which == "numpy":
        return _numpy_backend.gradients(padded, inv2h, layout, out)
    ncomp = padded.shape[0]
    d = inv2h.shape[0]
    n = layout.pad_index.shape[0]
    _compiled.gradients(
        padded.reshape(ncomp, -1),
        np.ascontiguousarray(inv2h, dtype=np.float64),
        layout.pad_index,
        layout.pad_strides,
        out.reshape(ncomp, d, n),
    )
    return out

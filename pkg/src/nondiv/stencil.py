"""Monotone stencil coefficients for ``A^{jk} d2_{jk} + B^j d_j``.

Mixed second derivatives use the sign-split corner scheme: the coefficient
``a = (A^{jk} + A^{kj}) / 2`` is carried by the two diagonal neighbors
matching ``sign(a)`` and the axis coefficients are reduced by
``|a| h_j / h_k``, which keeps every off-center weight nonnegative exactly
when ``|A^{jk}| <= min(A^{jj} h_k / h_j, A^{kk} h_j / h_k)`` holds.  The
drift term is sign-split one-sided so the discrete operator stays the
generator of a Markov jump process.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StencilCoefficients:
    """Mesh-scaled per-node stencil weights, channel-first layout.

    ``adiag[j]`` multiplies the axis-``j`` second difference (already
    divided by ``h_j^2``); ``cpos[p]``/``cneg[p]`` multiply the diagonal /
    antidiagonal second difference of pair ``pairs[p]``; ``bpos``/``bneg``
    are the one-sided drift weights divided by ``h_j``.
    """

    pairs: np.ndarray          # (P, 2) int64
    adiag: np.ndarray          # (d, *shape)
    bpos: np.ndarray           # (d, *shape)
    bneg: np.ndarray           # (d, *shape)
    cpos: np.ndarray           # (P, *shape)
    cneg: np.ndarray           # (P, *shape)
    has_drift: bool
    explicit_rate: float       # max_x [2 sum_j A^jj/h_j^2 + sum_j |B^j|/h_j]
    monotone_violations: int   # nodes where some modified axis weight < 0

    @property
    def num_pairs(self) -> int:
        return int(self.pairs.shape[0])


def build_coefficients(A: np.ndarray, B: np.ndarray | None, spacing: np.ndarray) -> StencilCoefficients:
    """Preprocess coefficient fields into kernel-ready stencil weights.

    ``A`` has shape ``(*shape, d, d)`` (symmetrized here), ``B`` shape
    ``(*shape, d)`` or ``None`` for pure second-order operators.
    """
    d = A.shape[-1]
    shape = A.shape[:-2]
    h = np.asarray(spacing, dtype=np.float64)
    Asym = 0.5 * (A + np.swapaxes(A, -1, -2))

    pairs = np.array([(j, k) for j in range(d) for k in range(j + 1, d)], dtype=np.int64)
    pairs = pairs.reshape(-1, 2)
    P = pairs.shape[0]

    adiag = np.empty((d,) + shape)
    cpos = np.empty((P,) + shape)
    cneg = np.empty((P,) + shape)
    for j in range(d):
        adiag[j] = Asym[..., j, j]
    for p, (j, k) in enumerate(pairs):
        a = Asym[..., j, k]
        cpos[p] = np.maximum(a, 0.0) / (h[j] * h[k])
        cneg[p] = np.maximum(-a, 0.0) / (h[j] * h[k])
        absa = np.abs(a)
        adiag[j] -= absa * (h[j] / h[k])
        adiag[k] -= absa * (h[k] / h[j])
    violations = int(np.count_nonzero(np.any(adiag < 0.0, axis=0)))
    for j in range(d):
        adiag[j] /= h[j] ** 2

    rate = np.zeros(shape)
    for j in range(d):
        rate += 2.0 * Asym[..., j, j] / h[j] ** 2

    if B is None or not np.any(B):
        bpos = np.zeros((d,) + shape)
        bneg = np.zeros((d,) + shape)
        has_drift = False
    else:
        bpos = np.empty((d,) + shape)
        bneg = np.empty((d,) + shape)
        for j in range(d):
            bpos[j] = np.maximum(B[..., j], 0.0) / h[j]
            bneg[j] = np.maximum(-B[..., j], 0.0) / h[j]
            rate += np.abs(B[..., j]) / h[j]
        has_drift = True

    return StencilCoefficients(
        pairs=pairs,
        adiag=np.ascontiguousarray(adiag),
        bpos=np.ascontiguousarray(bpos),
        bneg=np.ascontiguousarray(bneg),
        cpos=np.ascontiguousarray(cpos),
        cneg=np.ascontiguousarray(cneg),
        has_drift=has_drift,
        explicit_rate=float(rate.max()),
        monotone_violations=violations,
    )

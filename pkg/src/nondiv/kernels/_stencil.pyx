# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels.

Same stencil algebra as ``_numpy_backend`` (differences against the center
value, so constants are annihilated exactly in floating point); loops run
over a ghost-padded flat array so neighbor access never wraps.
"""

import numpy as np

cimport numpy as cnp

ctypedef cnp.int64_t i64


def linear_apply(double[:, ::1] padded,
                 double[:, ::1] adiag,
                 double[:, ::1] bpos,
                 double[:, ::1] bneg,
                 double[:, ::1] cpos,
                 double[:, ::1] cneg,
                 i64[:, ::1] pairs,
                 i64[::1] pad_index,
                 i64[::1] strides,
                 bint has_drift,
                 double[:, ::1] out):
    cdef Py_ssize_t C = padded.shape[0]
    cdef Py_ssize_t N = out.shape[1]
    cdef Py_ssize_t d = adiag.shape[0]
    cdef Py_ssize_t P = cpos.shape[0]
    cdef Py_ssize_t c, i, j, q
    cdef i64 p, s, sj, sk
    cdef double v0, vp, vm, acc
    with nogil:
        for c in range(C):
            for i in range(N):
                p = pad_index[i]
                v0 = padded[c, p]
                acc = 0.0
                for j in range(d):
                    s = strides[j]
                    vp = padded[c, p + s]
                    vm = padded[c, p - s]
                    acc += adiag[j, i] * ((vp - v0) + (vm - v0))
                    if has_drift:
                        acc += bpos[j, i] * (vp - v0) + bneg[j, i] * (vm - v0)
                for q in range(P):
                    sj = strides[pairs[q, 0]]
                    sk = strides[pairs[q, 1]]
                    acc += cpos[q, i] * ((padded[c, p + sj + sk] - v0)
                                         + (padded[c, p - sj - sk] - v0))
                    acc += cneg[q, i] * ((padded[c, p + sj - sk] - v0)
                                         + (padded[c, p - sj + sk] - v0))
                out[c, i] = acc
    return out


def gradients(double[:, ::1] padded,
              double[::1] inv2h,
              i64[::1] pad_index,
              i64[::1] strides,
              double[:, :, ::1] out):
    cdef Py_ssize_t C = padded.shape[0]
    cdef Py_ssize_t N = out.shape[2]
    cdef Py_ssize_t d = inv2h.shape[0]
    cdef Py_ssize_t c, i, j
    cdef i64 p, s
    with nogil:
        for c in range(C):
            for j in range(d):
                s = strides[j]
                for i in range(N):
                    p = pad_index[i]
                    out[c, j, i] = (padded[c, p + s] - padded[c, p - s]) * inv2h[j]
    return out

"""Compiled inner loops for scanning a dense family stack.

Every routine here has a numpy twin in ``_kernels_py`` with the same
signature; ``famapprox.kernels`` picks one at import time.
"""
import numpy as np

from libc.math cimport sqrt, INFINITY
from libc.stdlib cimport malloc, free


def residual_norms(const double[:, ::1] target, const double[:, :, ::1] stack,
                   const double[:, ::1] pi, double bound=INFINITY):
    """||target - stack[k] @ pi||_F for every k.

    Rows of ``stack[k] @ pi`` are formed one at a time and the squared
    residual is abandoned as soon as it exceeds ``bound**2``; abandoned
    entries hold a partial value that is still strictly above ``bound``.
    Zero entries of ``stack[k]`` are skipped.
    """
    cdef Py_ssize_t k = stack.shape[0], n = stack.shape[1], n2 = stack.shape[2]
    cdef Py_ssize_t l = pi.shape[1]
    if pi.shape[0] != n2 or target.shape[0] != n or target.shape[1] != l:
        raise ValueError("shape mismatch in residual_norms")
    out = np.empty(k, dtype=np.float64)
    cdef double[::1] res = out
    cdef double bound2 = bound * bound if bound < INFINITY else INFINITY
    cdef double *row = <double *> malloc(max(l, 1) * sizeof(double))
    if row == NULL:
        raise MemoryError()
    cdef Py_ssize_t b, i, j, c
    cdef double s, v, d
    try:
        with nogil:
            for b in range(k):
                s = 0.0
                for i in range(n):
                    for c in range(l):
                        row[c] = 0.0
                    for j in range(n2):
                        v = stack[b, i, j]
                        if v != 0.0:
                            for c in range(l):
                                row[c] += v * pi[j, c]
                    for c in range(l):
                        d = target[i, c] - row[c]
                        s += d * d
                    if s > bound2:
                        break
                res[b] = sqrt(s)
    finally:
        free(row)
    return out


def frobenius_distances(const double[:, ::1] target, const double[:, :, ::1] images):
    """||target - images[k]||_F for every k, without a temporary stack."""
    cdef Py_ssize_t k = images.shape[0], a = images.shape[1], c = images.shape[2]
    if target.shape[0] != a or target.shape[1] != c:
        raise ValueError("shape mismatch in frobenius_distances")
    out = np.empty(k, dtype=np.float64)
    cdef double[::1] res = out
    cdef Py_ssize_t b, i, j
    cdef double s, d
    with nogil:
        for b in range(k):
            s = 0.0
            for i in range(a):
                for j in range(c):
                    d = target[i, j] - images[b, i, j]
                    s += d * d
            res[b] = sqrt(s)
    return out

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled edge-level kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def segment_sum(x, idx, Py_ssize_t n):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const cnp.int64_t[::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    out = np.zeros((n, xv.shape[1]), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t e, j, r
    cdef Py_ssize_t cols = xv.shape[1]
    with nogil:
        for e in range(xv.shape[0]):
            r = iv[e]
            for j in range(cols):
                ov[r, j] += xv[e, j]
    return out


def block_dot(a, b, Py_ssize_t blocks):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t rows = av.shape[0]
    cdef Py_ssize_t d = av.shape[1] // blocks
    out = np.empty((rows, blocks), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t e, m, k, base
    cdef double acc
    with nogil:
        for e in range(rows):
            for m in range(blocks):
                base = m * d
                acc = 0.0
                for k in range(d):
                    acc = acc + av[e, base + k] * bv[e, base + k]
                ov[e, m] = acc
    return out


def block_scale(x, p, Py_ssize_t blocks):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t rows = xv.shape[0]
    cdef Py_ssize_t cols = xv.shape[1]
    cdef Py_ssize_t d = cols // blocks
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t e, m, k, base
    cdef double w
    with nogil:
        for e in range(rows):
            for m in range(blocks):
                base = m * d
                w = pv[e, m]
                for k in range(d):
                    ov[e, base + k] = xv[e, base + k] * w
    return out


def softmax_rows(x):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t rows = xv.shape[0]
    cdef Py_ssize_t cols = xv.shape[1]
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    cdef double mx, total
    with nogil:
        for i in range(rows):
            mx = xv[i, 0]
            for j in range(1, cols):
                if xv[i, j] > mx:
                    mx = xv[i, j]
            total = 0.0
            for j in range(cols):
                ov[i, j] = exp(xv[i, j] - mx)
                total = total + ov[i, j]
            for j in range(cols):
                ov[i, j] = ov[i, j] / total
    return out


def softmax_rows_backward(y, g):
    cdef const double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:, ::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t rows = yv.shape[0]
    cdef Py_ssize_t cols = yv.shape[1]
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    cdef double dot
    with nogil:
        for i in range(rows):
            dot = 0.0
            for j in range(cols):
                dot = dot + gv[i, j] * yv[i, j]
            for j in range(cols):
                ov[i, j] = yv[i, j] * (gv[i, j] - dot)
    return out

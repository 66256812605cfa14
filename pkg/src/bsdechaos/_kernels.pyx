# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics match ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def node_moments(W, probs, dxc, cls, Py_ssize_t n_cls):
    cdef double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef double[::1] x = np.ascontiguousarray(dxc, dtype=np.float64)
    cdef long long[::1] c = np.ascontiguousarray(cls, dtype=np.int64)
    cdef Py_ssize_t n = w.shape[0], B = w.shape[1], a, b, l
    Y_arr = np.empty(n)
    Z_arr = np.zeros(n)
    d_arr = np.zeros((n, n_cls))
    pc_arr = np.zeros(n_cls)
    cdef double[::1] Y = Y_arr
    cdef double[::1] Z = Z_arr
    cdef double[:, ::1] d = d_arr
    cdef double[::1] pc = pc_arr
    cdef double var = 0.0, s, cov, dv
    for b in range(B):
        var += p[b] * x[b] * x[b]
        pc[c[b]] += p[b]
    for a in range(n):
        s = 0.0
        for b in range(B):
            s += p[b] * w[a, b]
        Y[a] = s
        cov = 0.0
        for b in range(B):
            dv = w[a, b] - s
            cov += p[b] * dv * x[b]
            d[a, c[b]] += p[b] * dv
        if var > 0:
            Z[a] = cov / var
        for l in range(n_cls):
            if pc[l] > 0:
                d[a, l] /= pc[l]
    return Y_arr, Z_arr, d_arr, var


def w2_sorted(xa, wa, xb, wb):
    cdef double[::1] xa_ = np.ascontiguousarray(xa, dtype=np.float64)
    cdef double[::1] wa_ = np.ascontiguousarray(wa, dtype=np.float64)
    cdef double[::1] xb_ = np.ascontiguousarray(xb, dtype=np.float64)
    cdef double[::1] wb_ = np.ascontiguousarray(wb, dtype=np.float64)
    cdef Py_ssize_t i = 0, j = 0, na = xa_.shape[0], nb = xb_.shape[0]
    cdef double ra = wa_[0], rb = wb_[0], total = 0.0, m, diff
    while i < na and j < nb:
        m = ra if ra < rb else rb
        diff = xa_[i] - xb_[j]
        total += m * diff * diff
        ra -= m
        rb -= m
        if ra <= 1e-15:
            i += 1
            if i < na:
                ra += wa_[i]
        if rb <= 1e-15:
            j += 1
            if j < nb:
                rb += wb_[j]
    return total

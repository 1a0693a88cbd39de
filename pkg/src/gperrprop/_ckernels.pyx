# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RBF kernels.

Same contract as :mod:`gperrprop._pykernels`. Squared distances are
accumulated from coordinate differences, one row at a time, so every
output entry is produced by a single deterministic expression.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def rbf_matrix(const double[:, ::1] A, const double[:, ::1] B, double length_scale):
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], d = A.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, diff
    cdef double scale = -0.5 / (length_scale * length_scale)
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] K = out
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                diff = A[i, k] - B[j, k]
                s += diff * diff
            K[i, j] = exp(scale * s)
    return out


def rbf_mean(const double[:, ::1] T, const double[:, ::1] X,
             const double[::1] alpha, double length_scale):
    cdef Py_ssize_t m = T.shape[0], n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, diff, acc
    cdef double scale = -0.5 / (length_scale * length_scale)
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] mu = out
    for i in range(m):
        acc = 0.0
        for j in range(n):
            s = 0.0
            for k in range(d):
                diff = T[i, k] - X[j, k]
                s += diff * diff
            acc += exp(scale * s) * alpha[j]
        mu[i] = acc
    return out


def rbf_mean_grad(const double[:, ::1] T, const double[:, ::1] X,
                  const double[::1] alpha, double length_scale):
    cdef Py_ssize_t m = T.shape[0], n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, diff, w, acc
    cdef double scale = -0.5 / (length_scale * length_scale)
    cdef double inv_ls2 = 1.0 / (length_scale * length_scale)
    mean_out = np.empty(m, dtype=np.float64)
    grad_out = np.zeros((m, d), dtype=np.float64)
    cdef double[::1] mu = mean_out
    cdef double[:, ::1] G = grad_out
    for i in range(m):
        acc = 0.0
        for j in range(n):
            s = 0.0
            for k in range(d):
                diff = T[i, k] - X[j, k]
                s += diff * diff
            w = exp(scale * s) * alpha[j]
            acc += w
            for k in range(d):
                G[i, k] -= (T[i, k] - X[j, k]) * w
        mu[i] = acc
        for k in range(d):
            G[i, k] *= inv_ls2
    return mean_out, grad_out

# Fused single-pass row kernels. Each function does in one C loop what the
# numpy lane does in several full-array passes; matmul stays with BLAS.

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()


def softmax_rows(double[:, ::1] x, double tau):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double mx, s, e
    for i in range(m):
        mx = x[i, 0]
        for j in range(1, n):
            if x[i, j] > mx:
                mx = x[i, j]
        s = 0.0
        for j in range(n):
            e = exp((x[i, j] - mx) / tau)
            out[i, j] = e
            s += e
        for j in range(n):
            out[i, j] /= s
    return out_arr


def softmax_rows_grad(double[:, ::1] y, double[:, ::1] g, double tau):
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double inner
    for i in range(m):
        inner = 0.0
        for j in range(n):
            inner += g[i, j] * y[i, j]
        for j in range(n):
            out[i, j] = y[i, j] * (g[i, j] - inner) / tau
    return out_arr


def log_softmax_rows(double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double mx, s
    for i in range(m):
        mx = x[i, 0]
        for j in range(1, n):
            if x[i, j] > mx:
                mx = x[i, j]
        s = 0.0
        for j in range(n):
            s += exp(x[i, j] - mx)
        s = log(s)
        for j in range(n):
            out[i, j] = x[i, j] - mx - s
    return out_arr


def log_softmax_rows_grad(double[:, ::1] y, double[:, ::1] g, double tau=1.0):
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double rowsum
    for i in range(m):
        rowsum = 0.0
        for j in range(n):
            rowsum += g[i, j]
        for j in range(n):
            out[i, j] = (g[i, j] - exp(y[i, j]) * rowsum) / tau
    return out_arr


def l2_normalize_rows(double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    norms_arr = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] norms = norms_arr
    cdef Py_ssize_t i, j
    cdef double s, r
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += x[i, j] * x[i, j]
        r = sqrt(s)
        norms[i] = r
        if r == 0.0:
            r = 1.0
        for j in range(n):
            out[i, j] = x[i, j] / r
    return out_arr, norms_arr


def l2_normalize_rows_grad(double[:, ::1] y, double[::1] norms, double[:, ::1] g):
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double inner
    for i in range(m):
        inner = 0.0
        for j in range(n):
            inner += g[i, j] * y[i, j]
        for j in range(n):
            out[i, j] = (g[i, j] - y[i, j] * inner) / norms[i]
    return out_arr


def sigmoid(double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double e
    for i in range(m):
        for j in range(n):
            if x[i, j] >= 0.0:
                out[i, j] = 1.0 / (1.0 + exp(-x[i, j]))
            else:
                e = exp(x[i, j])
                out[i, j] = e / (1.0 + e)
    return out_arr


def sigmoid_grad(double[:, ::1] y, double[:, ::1] g):
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            out[i, j] = g[i, j] * y[i, j] * (1.0 - y[i, j])
    return out_arr


def adam_update(double[:, ::1] param, double[:, ::1] grad,
                double[:, ::1] m, double[:, ::1] v,
                long t, double lr, double beta1, double beta2, double eps):
    cdef Py_ssize_t rows = param.shape[0], cols = param.shape[1]
    cdef double bc1 = 1.0 - beta1 ** t
    cdef double bc2 = 1.0 - beta2 ** t
    cdef Py_ssize_t i, j
    cdef double mh, vh
    for i in range(rows):
        for j in range(cols):
            m[i, j] = beta1 * m[i, j] + (1.0 - beta1) * grad[i, j]
            v[i, j] = beta2 * v[i, j] + (1.0 - beta2) * grad[i, j] * grad[i, j]
            mh = m[i, j] / bc1
            vh = v[i, j] / bc2
            param[i, j] -= lr * mh / (sqrt(vh) + eps)

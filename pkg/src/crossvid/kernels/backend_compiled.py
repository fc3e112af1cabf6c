"""Compiled kernel lane: fused Cython loops for the multi-pass row kernels.

matmul stays with numpy's BLAS (already compiled); everything else goes
through single-pass C loops in `_fused`.
"""

import numpy as np

from . import _fused, backend_numpy

NAME = "compiled"


def _c(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def matmul(a, b):
    return a @ b


def softmax_rows(x, tau):
    return _fused.softmax_rows(_c(x), tau)


def softmax_rows_grad(y, g, tau):
    return _fused.softmax_rows_grad(_c(y), _c(g), tau)


def log_softmax_rows(x):
    return _fused.log_softmax_rows(_c(x))


def log_softmax_rows_grad(y, g, tau=1.0):
    return _fused.log_softmax_rows_grad(_c(y), _c(g), tau)


def l2_normalize_rows(x):
    return _fused.l2_normalize_rows(_c(x))


def l2_normalize_rows_grad(y, norms, g):
    return _fused.l2_normalize_rows_grad(_c(y), _c(norms).ravel(), _c(g))


# numpy's maximum/boolean-multiply ufuncs are already single-pass SIMD;
# a scalar C loop only adds branch mispredictions here
relu = backend_numpy.relu
relu_grad = backend_numpy.relu_grad


def sigmoid(x):
    return _fused.sigmoid(_c(x))


def sigmoid_grad(y, g):
    return _fused.sigmoid_grad(_c(y), _c(g))


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    _fused.adam_update(param, _c(grad), m, v, int(t), lr, beta1, beta2, eps)

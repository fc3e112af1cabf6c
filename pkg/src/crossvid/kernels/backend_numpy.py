"""Pure numpy kernel lane.

Reference implementations of the hot kernels. The compiled lane must agree
with these to float64 round-off; tests and the benchmark treat this module
as the fallback that is always available.
"""

import numpy as np

NAME = "numpy"


def matmul(a, b):
    return a @ b


def softmax_rows(x, tau):
    z = x / tau
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_grad(y, g, tau):
    # dx = y * (g - <g, y>_row) / tau
    inner = (g * y).sum(axis=1, keepdims=True)
    return y * (g - inner) / tau


def log_softmax_rows(x):
    m = x.max(axis=1, keepdims=True)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    return z - lse


def log_softmax_rows_grad(y, g, tau=1.0):
    rowsum = g.sum(axis=1, keepdims=True)
    return (g - np.exp(y) * rowsum) / tau


def l2_normalize_rows(x):
    """Returns (normalized, row_norms); caller enforces the zero-norm contract."""
    norms = np.sqrt((x * x).sum(axis=1, keepdims=True))
    safe = np.where(norms > 0.0, norms, 1.0)
    return x / safe, norms[:, 0]


def l2_normalize_rows_grad(y, norms, g):
    inner = (g * y).sum(axis=1, keepdims=True)
    return (g - y * inner) / norms[:, None]


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(x, g):
    return g * (x > 0.0)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(y, g):
    return g * y * (1.0 - y)


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    """In-place Adam with bias correction; `t` is the 1-indexed step count."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)

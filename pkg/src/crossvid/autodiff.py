"""Define-by-run reverse-mode differentiation over dense float64 matrices.

Every op accepts DiffNode or plain ndarray arguments. If no argument is a
node the op computes the value directly (used by finite-difference checks
and inference, where no tape is wanted); otherwise it records a node whose
backward closure accumulates into its parents. Tapes are rebuilt each
training step; `backward` visits each node exactly once in reverse
topological order.
"""

import numpy as np

from . import kernels
from .errors import DegenerateInputError, ParameterError, ShapeError

NORM_EPS = 1e-12


def as_matrix(x):
    """Coerce to a 2-D float64 C-contiguous array."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={a.ndim}")
    return a


class DiffNode:
    __slots__ = ("value", "grad", "parents", "_backward")

    def __init__(self, value, parents=(), backward=None):
        self.value = value
        self.grad = None
        self.parents = parents
        self._backward = backward

    @classmethod
    def leaf(cls, value, check_finite=False):
        arr = as_matrix(value)
        if check_finite and not np.isfinite(arr).all():
            raise ShapeError("leaf matrix contains non-finite entries")
        return cls(arr)

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, g):
        # first contribution owns a copy; later ones add in place
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"DiffNode(shape={self.value.shape})"


def _is_node(x):
    return isinstance(x, DiffNode)


def value_of(x):
    return x.value if _is_node(x) else as_matrix(x)


def backward(root):
    """Seed d(root)/d(root)=1 and propagate; root must be 1x1."""
    if root.value.shape != (1, 1):
        raise ShapeError(f"backward root must be 1x1, got {root.value.shape}")
    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in visited:
                stack.append((p, False))
    root.accumulate(np.ones((1, 1)))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def _unary(x, fwd, make_bwd):
    xv = value_of(x)
    out = fwd(xv)
    if not _is_node(x):
        return out
    bwd = make_bwd(x, xv, out)
    node = DiffNode(out, (x,))
    node._backward = bwd
    return node


# ---------------------------------------------------------------------------
# structural / arithmetic ops


def matmul(a, b):
    av, bv = value_of(a), value_of(b)
    if av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {av.shape} x {bv.shape}")
    out = kernels.active.matmul(av, bv)
    if not (_is_node(a) or _is_node(b)):
        return out

    def bwd(g):
        if _is_node(a):
            a.accumulate(kernels.active.matmul(g, bv.T))
        if _is_node(b):
            b.accumulate(kernels.active.matmul(av.T, g))

    return DiffNode(out, tuple(p for p in (a, b) if _is_node(p)), bwd)


def transpose(x):
    return _unary(
        x,
        lambda v: np.ascontiguousarray(v.T),
        lambda node, xv, out: lambda g: node.accumulate(g.T),
    )


def add(a, b):
    """Elementwise add; `b` may be a 1-row bias broadcast over rows of `a`."""
    av, bv = value_of(a), value_of(b)
    broadcast = bv.shape[0] == 1 and av.shape[0] != 1 and bv.shape[1] == av.shape[1]
    if av.shape != bv.shape and not broadcast:
        raise ShapeError(f"add shape mismatch: {av.shape} vs {bv.shape}")
    out = av + bv
    if not (_is_node(a) or _is_node(b)):
        return out

    def bwd(g):
        if _is_node(a):
            a.accumulate(g)
        if _is_node(b):
            b.accumulate(g.sum(axis=0, keepdims=True) if broadcast else g)

    return DiffNode(out, tuple(p for p in (a, b) if _is_node(p)), bwd)


def scale(x, alpha):
    alpha = float(alpha)
    return _unary(
        x,
        lambda v: v * alpha,
        lambda node, xv, out: lambda g: node.accumulate(g * alpha),
    )


def sub(a, b):
    return add(a, scale(b, -1.0))


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    if av.shape != bv.shape:
        raise ShapeError(f"mul shape mismatch: {av.shape} vs {bv.shape}")
    out = av * bv
    if not (_is_node(a) or _is_node(b)):
        return out

    def bwd(g):
        if _is_node(a):
            a.accumulate(g * bv)
        if _is_node(b):
            b.accumulate(g * av)

    return DiffNode(out, tuple(p for p in (a, b) if _is_node(p)), bwd)


def concat_cols(parts):
    vals = [value_of(p) for p in parts]
    rows = vals[0].shape[0]
    for v in vals:
        if v.shape[0] != rows:
            raise ShapeError(f"concat_cols row mismatch: {[v.shape for v in vals]}")
    out = np.concatenate(vals, axis=1)
    if not any(_is_node(p) for p in parts):
        return out

    offsets = np.cumsum([0] + [v.shape[1] for v in vals])

    def bwd(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if _is_node(p):
                p.accumulate(g[:, lo:hi])

    return DiffNode(out, tuple(p for p in parts if _is_node(p)), bwd)


def concat_rows(parts):
    vals = [value_of(p) for p in parts]
    cols = vals[0].shape[1]
    for v in vals:
        if v.shape[1] != cols:
            raise ShapeError(f"concat_rows col mismatch: {[v.shape for v in vals]}")
    out = np.concatenate(vals, axis=0)
    if not any(_is_node(p) for p in parts):
        return out

    offsets = np.cumsum([0] + [v.shape[0] for v in vals])

    def bwd(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if _is_node(p):
                p.accumulate(g[lo:hi, :])

    return DiffNode(out, tuple(p for p in parts if _is_node(p)), bwd)


def slice_rows(x, start, stop):
    xv = value_of(x)
    if not (0 <= start < stop <= xv.shape[0]):
        raise ShapeError(f"slice_rows [{start}:{stop}] out of range for {xv.shape}")
    out = xv[start:stop].copy()
    if not _is_node(x):
        return out

    def bwd(g):
        full = np.zeros_like(xv)
        full[start:stop] = g
        x.accumulate(full)

    return DiffNode(out, (x,), bwd)


def tile_rows(x, reps):
    """Repeat the whole row block `reps` times: [r0 r1 r0 r1 ...]."""
    xv = value_of(x)
    out = np.tile(xv, (reps, 1))
    if not _is_node(x):
        return out

    m = xv.shape[0]

    def bwd(g):
        x.accumulate(g.reshape(reps, m, -1).sum(axis=0))

    return DiffNode(out, (x,), bwd)


def repeat_rows(x, reps):
    """Repeat each row `reps` times consecutively: [r0 r0 r1 r1 ...]."""
    xv = value_of(x)
    out = np.repeat(xv, reps, axis=0)
    if not _is_node(x):
        return out

    m = xv.shape[0]

    def bwd(g):
        x.accumulate(g.reshape(m, reps, -1).sum(axis=1))

    return DiffNode(out, (x,), bwd)


def reshape(x, rows, cols):
    xv = value_of(x)
    if rows * cols != xv.size:
        raise ShapeError(f"cannot reshape {xv.shape} to ({rows},{cols})")
    out = xv.reshape(rows, cols).copy()
    if not _is_node(x):
        return out

    def bwd(g):
        x.accumulate(g.reshape(xv.shape))

    return DiffNode(out, (x,), bwd)


def diag_part(x):
    """Main diagonal of a square matrix, as a column vector."""
    xv = value_of(x)
    if xv.shape[0] != xv.shape[1]:
        raise ShapeError(f"diag_part needs a square matrix, got {xv.shape}")
    out = np.ascontiguousarray(np.diag(xv)).reshape(-1, 1)
    if not _is_node(x):
        return out

    def bwd(g):
        full = np.zeros_like(xv)
        np.fill_diagonal(full, g[:, 0])
        x.accumulate(full)

    return DiffNode(out, (x,), bwd)


def row_dot(a, b):
    """Row-wise inner products, returned as a column vector."""
    av, bv = value_of(a), value_of(b)
    if av.shape != bv.shape:
        raise ShapeError(f"row_dot shape mismatch: {av.shape} vs {bv.shape}")
    out = (av * bv).sum(axis=1, keepdims=True)
    if not (_is_node(a) or _is_node(b)):
        return out

    def bwd(g):
        if _is_node(a):
            a.accumulate(g * bv)
        if _is_node(b):
            b.accumulate(g * av)

    return DiffNode(out, tuple(p for p in (a, b) if _is_node(p)), bwd)


def concept_gram(X, Y, k, b):
    """Within-sample cross-concept inner products.

    X and Y stack K concept matrices row-blockwise: row k*b + i holds sample
    i's concept k. Output row (k*b + i), column l is <X_(k,i), Y_(l,i)>; the
    pairing never crosses samples.
    """
    xv, yv = value_of(X), value_of(Y)
    if xv.shape != yv.shape or xv.shape[0] != k * b:
        raise ShapeError(
            f"concept_gram expects two ({k}*{b}, d/K) stacks, "
            f"got {xv.shape} and {yv.shape}")
    dk = xv.shape[1]
    x3 = xv.reshape(k, b, dk)
    y3 = yv.reshape(k, b, dk)
    out = np.einsum("kid,lid->kil", x3, y3).reshape(k * b, k)
    if not (_is_node(X) or _is_node(Y)):
        return out

    def bwd(g):
        g3 = g.reshape(k, b, k)
        if _is_node(X):
            X.accumulate(np.einsum("kil,lid->kid", g3, y3).reshape(k * b, dk))
        if _is_node(Y):
            Y.accumulate(np.einsum("kil,kid->lid", g3, x3).reshape(k * b, dk))

    return DiffNode(out, tuple(p for p in (X, Y) if _is_node(p)), bwd)


def sum_all(x):
    xv = value_of(x)
    out = np.array([[xv.sum()]])
    if not _is_node(x):
        return out

    def bwd(g):
        x.accumulate(np.full_like(xv, g[0, 0]))

    return DiffNode(out, (x,), bwd)


def mean_all(x):
    xv = value_of(x)
    return scale(sum_all(x), 1.0 / xv.size)


# ---------------------------------------------------------------------------
# nonlinear kernels


def relu(x):
    return _unary(
        x,
        lambda v: kernels.active.relu(v),
        lambda node, xv, out: lambda g: node.accumulate(
            kernels.active.relu_grad(xv, g)
        ),
    )


def sigmoid(x):
    return _unary(
        x,
        lambda v: kernels.active.sigmoid(v),
        lambda node, xv, out: lambda g: node.accumulate(
            kernels.active.sigmoid_grad(out, g)
        ),
    )


def softmax_rows(x, temperature=1.0):
    if temperature <= 0:
        raise ParameterError(f"softmax temperature must be > 0, got {temperature}")
    tau = float(temperature)
    return _unary(
        x,
        lambda v: kernels.active.softmax_rows(v, tau),
        lambda node, xv, out: lambda g: node.accumulate(
            kernels.active.softmax_rows_grad(out, g, tau)
        ),
    )


def log_softmax_rows(x):
    return _unary(
        x,
        lambda v: kernels.active.log_softmax_rows(v),
        lambda node, xv, out: lambda g: node.accumulate(
            kernels.active.log_softmax_rows_grad(out, g)
        ),
    )


def l2_normalize_rows(x, eps=NORM_EPS):
    xv = value_of(x)
    out, norms = kernels.active.l2_normalize_rows(xv)
    bad = np.flatnonzero(norms <= eps)
    if bad.size:
        raise DegenerateInputError(
            f"zero-norm row at index {int(bad[0])} in l2_normalize_rows"
        )
    if not _is_node(x):
        return out

    def bwd(g):
        x.accumulate(kernels.active.l2_normalize_rows_grad(out, norms, g))

    return DiffNode(out, (x,), bwd)

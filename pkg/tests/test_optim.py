"""Adam + warmup contracts, pinned against a hand-rolled scalar recurrence."""

import math

import numpy as np
import pytest

from crossvid.errors import ShapeError
from crossvid.optim import AdamState, adam_step, effective_lr


def test_zero_grad_is_fixed_point():
    p = np.array([[1.0, -2.0]])
    state = AdamState.for_param(p, base_lr=1e-3, warmup_steps=0)
    before = p.copy()
    adam_step(p, np.zeros_like(p), state)
    assert np.array_equal(p, before)
    assert state.step == 1


def test_three_steps_match_scalar_recurrence():
    """Oracle: the textbook Adam recurrence evaluated step by step."""
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    g = 0.3
    m = v = 0.0
    x_ref = 1.0
    for t in range(1, 4):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        x_ref -= lr * mhat / (math.sqrt(vhat) + eps)

    p = np.array([[1.0]])
    state = AdamState.for_param(p, base_lr=lr, warmup_steps=0)
    for _ in range(3):
        adam_step(p, np.array([[g]]), state)
    assert abs(p[0, 0] - x_ref) < 1e-12


def test_warmup_effective_lr():
    p = np.zeros((1, 1))
    state = AdamState.for_param(p, base_lr=2.0, warmup_steps=10)
    state.step = 5
    assert effective_lr(state) == pytest.approx(1.0)
    state.step = 10
    assert effective_lr(state) == pytest.approx(2.0)
    state.step = 50
    assert effective_lr(state) == pytest.approx(2.0)


def test_warmup_lr_strictly_increases():
    p = np.zeros((1, 1))
    state = AdamState.for_param(p, base_lr=1e-3, warmup_steps=7)
    lrs = []
    for _ in range(7):
        adam_step(p, np.ones_like(p), state)
        lrs.append(effective_lr(state))
    assert all(b > a for a, b in zip(lrs, lrs[1:]))
    assert lrs[-1] == pytest.approx(1e-3)


def test_shape_mismatch():
    p = np.zeros((2, 2))
    state = AdamState.for_param(p)
    with pytest.raises(ShapeError):
        adam_step(p, np.zeros((2, 3)), state)

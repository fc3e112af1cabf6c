"""Adam with linear learning-rate warmup."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ShapeError


@dataclass
class AdamState:
    """Per-parameter moment estimates plus the step counter.

    Effective lr at step t is base_lr * t / warmup_steps while t is inside
    the warmup window, base_lr afterwards (linear warmup from zero).
    """

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    base_lr: float = 1e-3
    warmup_steps: int = 100

    @classmethod
    def for_param(cls, param, base_lr=1e-3, warmup_steps=100):
        return cls(
            m=np.zeros_like(param),
            v=np.zeros_like(param),
            base_lr=base_lr,
            warmup_steps=warmup_steps,
        )


def effective_lr(state, step=None):
    t = state.step if step is None else step
    if state.warmup_steps > 0 and t < state.warmup_steps:
        return state.base_lr * t / state.warmup_steps
    return state.base_lr


def adam_step(param, grad, state):
    """One in-place Adam update with bias correction and warmup-scaled lr."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ShapeError(
            f"adam_step shape mismatch: param {param.shape}, grad {grad.shape}, "
            f"state {state.m.shape}"
        )
    state.step += 1
    lr = effective_lr(state)
    kernels.active.adam_update(
        param, grad, state.m, state.v, state.step, lr,
        state.beta1, state.beta2, state.eps,
    )
    return state

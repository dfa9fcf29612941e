"""Parameters, Adam, and the linear warmup-decay schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import ContractError

GROUPS = ("encoder", "memory", "mfa", "graph", "trigger", "classifier")


class Parameter(Tensor):
    """A trainable leaf tensor with a unique name and a training group."""

    __slots__ = ("name", "group")

    def __init__(self, data, name: str, group: str):
        if group not in GROUPS:
            raise ValueError(f"unknown parameter group {group!r}")
        super().__init__(data, requires_grad=True)
        self.name = name
        self.group = group

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, group={self.group!r}, shape={self.shape})"


def scheduled_lr(step: int, warmup_steps: int, total_steps: int, peak_lr: float) -> float:
    """Linear ramp from 0 to ``peak_lr`` then linear decay back to 0."""
    if not 0 < warmup_steps < total_steps:
        raise ValueError(f"need 0 < warmup_steps < total_steps, got {warmup_steps}, {total_steps}")
    step = min(max(step, 0), total_steps)
    if step <= warmup_steps:
        return peak_lr * step / warmup_steps
    return peak_lr * (total_steps - step) / (total_steps - warmup_steps)


@dataclass
class OptimizerState:
    peak_lr: float
    warmup_steps: int
    total_steps: int
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def current_lr(self) -> float:
        return scheduled_lr(self.step, self.warmup_steps, self.total_steps, self.peak_lr)


def adam_step(params, state: OptimizerState, lr: float | None = None) -> float:
    """Apply one Adam update to ``params`` and zero their gradients.

    The step counter advances first, so the scheduled rate is the one for
    step ``state.step`` (1-based). Passing ``lr`` overrides the schedule.
    Returns the learning rate that was used.
    """
    params = list(params)
    for p in params:
        if p.grad is None:
            raise ContractError(f"parameter {p.name!r} has no gradient")
    state.step += 1
    t = state.step
    if lr is None:
        lr = state.current_lr()
    b1, b2 = state.beta1, state.beta2
    for p in params:
        m = state.first_moment.get(p.name)
        v = state.second_moment.get(p.name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1 - b1) * p.grad
        v = b2 * v + (1 - b2) * p.grad * p.grad
        state.first_moment[p.name] = m
        state.second_moment[p.name] = v
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.grad = np.zeros_like(p.data)
    return lr


def clip_grad_norm(params, max_norm: float) -> float:
    """Rescale gradients in place so their joint L2 norm is at most ``max_norm``.

    Returns the norm before clipping. ``max_norm <= 0`` leaves gradients alone.
    """
    params = [p for p in params if p.grad is not None]
    norm = float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params)))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in params:
            p.grad = p.grad * scale
    return norm

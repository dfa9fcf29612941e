"""Category memories: normal read, inverse read, and gradient-driven write.

A memory keeps one slot per category. Reads attend between a sequence and
the slots through a learned bilinear form; writes nudge a slot along the
projected instance, scaled by the classification-loss gradient of that
category's score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError, EmptyInputError
from .optim import Parameter

INIT_STD = 0.02


@dataclass
class Memory:
    slots: Parameter
    kind: str
    category_names: list[str]

    @property
    def n_slots(self) -> int:
        return self.slots.shape[0]

    @property
    def slot_size(self) -> int:
        return self.slots.shape[1]

    def view(self, grad: bool = False) -> Tensor:
        """The slot matrix, either as the live parameter or as a constant."""
        return self.slots if grad else self.slots.detach()


@dataclass
class BilinearForm:
    weight: Parameter

    @classmethod
    def create(cls, name: str, h_in: int, h_slot: int, rng: np.random.Generator,
               group: str, scale: float | None = None) -> "BilinearForm":
        scale = 1.0 / np.sqrt(h_in) if scale is None else scale
        w = rng.normal(0.0, scale, size=(h_in, h_slot))
        return cls(Parameter(w, name, group))

    @classmethod
    def zeros(cls, name: str, h_in: int, h_slot: int, group: str = "mfa") -> "BilinearForm":
        return cls(Parameter(np.zeros((h_in, h_slot)), name, group))


def init_memory(n_cat: int, h_slot: int, seed, kind: str = "entity",
                category_names: list[str] | None = None) -> Memory:
    if n_cat < 1 or h_slot < 1:
        raise ValueError(f"memory needs n_cat >= 1 and h_slot >= 1, got {n_cat}, {h_slot}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    names = list(category_names) if category_names is not None else [f"{kind}_{i}" for i in range(n_cat)]
    if len(names) != n_cat:
        raise ValueError("category_names must align with slot rows")
    slots = Parameter(rng.normal(0.0, INIT_STD, size=(n_cat, h_slot)), f"memory.{kind}", "memory")
    return Memory(slots, kind, names)


def _check(seq: Tensor, mem: Memory, form: BilinearForm) -> None:
    h_in, h_slot = form.weight.shape
    if seq.ndim != 2 or seq.shape[1] != h_in or h_slot != mem.slot_size:
        raise DimensionError(
            f"input {seq.shape} / form {form.weight.shape} / memory {mem.slots.shape} do not line up")


def normal_attention(query: Tensor, mem: Memory, form: BilinearForm, grad_to_memory: bool = False) -> Tensor:
    """softmax over slots of ``query W slots^T``; one row per query."""
    _check(query, mem, form)
    slots = mem.view(grad_to_memory)
    return ad.softmax_rows(query @ form.weight @ slots.T)


def read_normal(query: Tensor, mem: Memory, form: BilinearForm, grad_to_memory: bool = False) -> Tensor:
    slots = mem.view(grad_to_memory)
    return normal_attention(query, mem, form, grad_to_memory) @ slots


def read_inverse(seq: Tensor, mem: Memory, form: BilinearForm,
                 grad_to_memory: bool = False) -> tuple[Tensor, Tensor]:
    """Slots attend over positions; the per-slot distributions are summed.

    Returns ``(weights, scaled_seq)`` where ``weights`` has one entry per
    position (summing to the slot count) and ``scaled_seq`` is ``seq`` with
    each row multiplied by its weight.
    """
    if seq.ndim == 2 and seq.shape[0] == 0:
        raise EmptyInputError("inverse read over an empty sequence")
    _check(seq, mem, form)
    slots = mem.view(grad_to_memory)
    per_slot = ad.softmax_rows((seq @ form.weight @ slots.T).T)
    weights = ad.reduce("sum", per_slot, 0)
    return weights, ad.scale_rows(seq, weights)


def write(mem: Memory, instance, form: BilinearForm, logit_grad, lr: float) -> None:
    """In-place slot update ``slot_c -= (instance W) * logit_grad[c] * lr``.

    ``instance`` may be one vector or a matrix of instances, with
    ``logit_grad`` shaped to match (one row of per-category gradients per
    instance); contributions from several instances are summed.
    """
    x = np.asarray(instance.data if isinstance(instance, Tensor) else instance, dtype=np.float64)
    g = np.asarray(logit_grad, dtype=np.float64)
    if x.ndim == 1:
        x, g = x[None, :], g[None, :]
    if g.shape != (x.shape[0], mem.n_slots):
        raise DimensionError(f"logit_grad shape {g.shape} does not match {x.shape[0]} x {mem.n_slots}")
    projected = x @ form.weight.data
    mem.slots.data -= lr * (g.T @ projected)


def entity_write_grad(probs: np.ndarray, gold: np.ndarray) -> np.ndarray:
    """Score gradient ``p - 1`` at each instance's gold class, zero elsewhere."""
    probs = np.atleast_2d(probs)
    out = np.zeros_like(probs)
    rows = np.arange(len(gold))
    out[rows, gold] = probs[rows, gold] - 1.0
    return out


def relation_write_grad(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """``p - y`` for every relation present in the targets, zero elsewhere."""
    probs = np.atleast_2d(probs)
    targets = np.atleast_2d(targets)
    return np.where(targets > 0, probs - targets, 0.0)

"""Small random fixtures shared by the test modules."""

import numpy as np

from memflow.autodiff import Tensor
from memflow.config import TrainConfig
from memflow.encoder import SubwordDecomposition
from memflow.memory import BilinearForm, Memory
from memflow.optim import Parameter


def leaf(rng, *shape, scale=1.0):
    return Tensor(rng.normal(0.0, scale, shape), requires_grad=True)


def memory(rng, n_slots, size, kind="entity", scale=1.0):
    """Slots drawn at unit scale so finite differences see a well-conditioned read."""
    slots = Parameter(rng.normal(0.0, scale, (n_slots, size)), f"memory.{kind}", "memory")
    return Memory(slots, kind, [f"{kind}_{i}" for i in range(n_slots)])


def form(rng, h_in, h_slot, name="form", scale=None):
    return BilinearForm.create(name, h_in, h_slot, rng, "mfa", scale)


def decomposition(rng, n_words, max_pieces=3):
    """A tokenization with random piece counts per word (sentence token at 0)."""
    spans, pos = [], 1
    for _ in range(n_words):
        k = int(rng.integers(1, max_pieces + 1))
        spans.append((pos, pos + k))
        pos += k
    return SubwordDecomposition(list(range(pos)), ["[CLS]"] + ["p"] * (pos - 1), spans)


def tiny_config(**changes):
    base = dict(hidden=4, encoder_layers=1, encoder_heads=1, memory_size=3, width_dim=2, max_span=3,
                vocab_size=50, semantic_k=2, stage1_epochs=1, stage2_epochs=1, dropout=0.0)
    base.update(changes)
    return TrainConfig(**base)

"""Memory flow attention at subword and word level."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import SubwordDecomposition, pool_words
from .memory import BilinearForm, Memory, read_inverse

LEVELS = ("subword", "word")
MEMORIES = ("entity", "relation")


@dataclass
class MfaConfig:
    enable_subword_level: bool = True
    enable_word_level: bool = True
    enable_entity_memory: bool = True
    enable_relation_memory: bool = True
    # (level, memory) -> form
    forms: dict[tuple[str, str], BilinearForm] = field(default_factory=dict)
    # level -> whether backprop through this level's reads reaches the slots
    memory_grad: dict[str, bool] = field(default_factory=lambda: {"subword": True, "word": True})
    # multiply each level's output by positions / slots so the mean weight is 1
    rescale: bool = False

    def __post_init__(self):
        any_level = self.enable_subword_level or self.enable_word_level
        any_memory = self.enable_entity_memory or self.enable_relation_memory
        if any_level and not any_memory:
            raise ValueError("memory flow attention enabled at some level but with no memory")

    def level_enabled(self, level: str) -> bool:
        return self.enable_subword_level if level == "subword" else self.enable_word_level

    def memory_enabled(self, kind: str) -> bool:
        return self.enable_entity_memory if kind == "entity" else self.enable_relation_memory


def mfa_single(seq: Tensor, mem: Memory, form: BilinearForm, grad_to_memory: bool = False) -> Tensor:
    return read_inverse(seq, mem, form, grad_to_memory)[1]


def mfa_multi(seq: Tensor, mem_r: Memory | None, mem_e: Memory | None,
              form_r: BilinearForm | None = None, form_e: BilinearForm | None = None,
              grad_to_memory: bool = False, trace: dict | None = None) -> Tensor:
    """Mean of the relation and entity flows; a missing memory is skipped.

    With neither memory given the sequence passes through untouched.
    ``trace``, when supplied, receives the per-position weights by memory kind.
    """
    outputs = []
    for kind, mem, form in (("relation", mem_r, form_r), ("entity", mem_e, form_e)):
        if mem is None:
            continue
        weights, scaled = read_inverse(seq, mem, form, grad_to_memory)
        if trace is not None:
            trace[kind] = weights.data.copy()
        outputs.append(scaled)
    if not outputs:
        return seq
    if len(outputs) == 1:
        return outputs[0]
    return (outputs[0] + outputs[1]) * 0.5


def _level(seq: Tensor, level: str, mems: dict[str, Memory], cfg: MfaConfig, trace: dict | None) -> Tensor:
    if not cfg.level_enabled(level):
        return seq
    picked = {k: mems[k] if cfg.memory_enabled(k) else None for k in MEMORIES}
    level_trace = {} if trace is not None else None
    out = mfa_multi(
        seq, picked["relation"], picked["entity"],
        cfg.forms.get((level, "relation")), cfg.forms.get((level, "entity")),
        grad_to_memory=cfg.memory_grad.get(level, False), trace=level_trace,
    )
    if trace is not None:
        trace[level] = level_trace
    if cfg.rescale and out is not seq:
        slots = [mems[k].n_slots for k in MEMORIES if picked[k] is not None]
        out = out * (seq.shape[0] / float(np.mean(slots)))
    return out


def apply_multilevel(E_d: Tensor, decomposition: SubwordDecomposition, mems: dict[str, Memory],
                     cfg: MfaConfig, trace: dict | None = None) -> tuple[Tensor, Tensor]:
    """Subword-level flow, max-pool to words, then word-level flow."""
    E_d_bar = _level(E_d, "subword", mems, cfg, trace)
    E_w = pool_words(E_d_bar, decomposition.word_spans)
    E_w_bar = _level(E_w, "word", mems, cfg, trace)
    return E_d_bar, E_w_bar


def attention_traces(E_d: Tensor, decomposition: SubwordDecomposition, mems: dict[str, Memory],
                     forms: dict[tuple[str, str], BilinearForm],
                     rescale: bool = False) -> dict[str, dict[str, np.ndarray]]:
    """Inverse-read weights for every (level, memory) pairing, regardless of flags."""
    cfg = MfaConfig(forms=forms, memory_grad={}, rescale=rescale)
    trace: dict = {}
    with ad.no_grad():
        apply_multilevel(E_d, decomposition, mems, cfg, trace)
    return trace

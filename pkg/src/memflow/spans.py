"""Span and span-pair encodings, the trigger sensor, and trigger extraction."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .memory import BilinearForm, Memory, read_normal

MAX_SPAN = 10
WIDTH_DIM = 25
TOP_K = 5


class Span(NamedTuple):
    begin: int
    end: int

    @property
    def width(self) -> int:
        return self.end - self.begin

    def overlaps(self, other: "Span") -> bool:
        return self.begin < other.end and other.begin < self.end


@dataclass
class TriggerRanking:
    words: list[tuple[str, float]]

    def top(self) -> list[str]:
        return [w for w, _ in self.words]


def enumerate_spans(n: int, max_width: int = MAX_SPAN) -> list[Span]:
    return [Span(b, e) for b in range(n) for e in range(b + 1, min(b + max_width, n) + 1)]


def encode_spans(spans: Sequence[Span], E_g: Tensor, width_embeddings: Tensor) -> Tensor:
    """Max-pooled word rows concatenated with a width embedding, one row per span.

    Widths beyond the embedding table share its last row.
    """
    pooled = ad.segment_max(E_g, [tuple(s) for s in spans])
    widths = np.minimum([s.end - s.begin for s in spans], width_embeddings.shape[0] - 1)
    return ad.concat([pooled, ad.take_rows(width_embeddings, widths)], axis=1)


def encode_span(span: Span, E_g: Tensor, width_embeddings: Tensor) -> Tensor:
    return encode_spans([span], E_g, width_embeddings)


def gap(a: Span, b: Span) -> tuple[int, int]:
    """Half-open range of words strictly between two disjoint spans."""
    first, second = (a, b) if a.begin <= b.begin else (b, a)
    return first.end, max(first.end, second.begin)


def local_context(pairs: Sequence[tuple[Span, Span]], E_g: Tensor) -> Tensor:
    """Max over the words between each pair; zero rows for adjacent spans."""
    return ad.segment_max(E_g, [gap(a, b) for a, b in pairs], empty="zero")


def pair_relation_read(head_enc: Tensor, tail_enc: Tensor, mem_r: Memory, form: BilinearForm,
                       grad_to_memory: bool = False) -> Tensor:
    return (read_normal(head_enc, mem_r, form, grad_to_memory)
            + read_normal(tail_enc, mem_r, form, grad_to_memory)) * 0.5


def trigger_attend(m_r: Tensor, E_g: Tensor, projection: Tensor | None = None) -> tuple[Tensor, Tensor]:
    """Softmax of ``m_r E_g^T`` over words and the weighted word sum.

    ``m_r`` holds one row per pair. ``projection`` maps it from memory space
    into word space first when the two sizes differ.
    """
    query = m_r @ projection if projection is not None else m_r
    weights = ad.softmax_rows(query @ E_g.T)
    return weights @ E_g, weights


def build_pair(head: Tensor, tail: Tensor, g_local: Tensor, g_trigger: Tensor) -> Tensor:
    return ad.concat([head, tail, g_local, g_trigger], axis=1)


def default_stopwords() -> frozenset[str]:
    text = resources.files("memflow").joinpath("stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def extract_triggers(words: Sequence[str], weights, k: int = TOP_K,
                     stopwords: Iterable[str] | None = None,
                     entity_positions: Iterable[int] = (),
                     entity_words: Iterable[str] = ()) -> TriggerRanking:
    """Rank words by trigger weight, dropping entity words and stopwords.

    Entity words are excluded by position and by surface form. Ties keep the
    earlier position first.
    """
    stop = default_stopwords() if stopwords is None else frozenset(s.lower() for s in stopwords)
    stop = stop | {e.lower() for e in entity_words}
    excluded = set(entity_positions)
    w = np.asarray(weights.data if isinstance(weights, Tensor) else weights, dtype=float).reshape(-1)
    order = sorted(range(len(words)), key=lambda i: (-w[i], i))
    ranked = [(words[i], float(w[i])) for i in order
              if i not in excluded and words[i].lower() not in stop]
    return TriggerRanking(ranked[:k])

"""Subword tokenizer and a small trainable self-attention encoder."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, CorpusError
from .optim import Parameter

CLS = "[CLS]"
UNK = "[UNK]"
SPECIALS = (CLS, UNK)
MIN_PIECE, MAX_PIECE = 2, 6
CHUNK = 3


class Vocab:
    """Subword inventory; ids follow list order, specials first."""

    def __init__(self, pieces: Sequence[str]):
        pieces = list(pieces)
        if tuple(pieces[: len(SPECIALS)]) != SPECIALS:
            pieces = list(SPECIALS) + [p for p in pieces if p not in SPECIALS]
        self.pieces = pieces
        self.index = {p: i for i, p in enumerate(pieces)}

    def __len__(self) -> int:
        return len(self.pieces)

    def __contains__(self, piece: str) -> bool:
        return piece in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.pieces == other.pieces

    def id(self, piece: str) -> int:
        return self.index.get(piece, self.index[UNK])

    def save(self, path) -> None:
        Path(path).write_text("".join(p + "\n" for p in self.pieces), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        text = Path(path).read_text(encoding="utf-8")
        return cls([line for line in text.split("\n") if line])


def build_vocab(sentences: Iterable[Sequence[str]], size: int = 2000) -> Vocab:
    """Keep the ``size`` most frequent 2-6 character substrings of the words."""
    counts: Counter[str] = Counter()
    for words in sentences:
        for word in words:
            w = word.strip().lower()
            for length in range(MIN_PIECE, MAX_PIECE + 1):
                for i in range(len(w) - length + 1):
                    counts[w[i:i + length]] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocab(list(SPECIALS) + [piece for piece, _ in ranked[:size]])


@dataclass
class SubwordDecomposition:
    subword_ids: list[int]
    pieces: list[str]
    word_spans: list[tuple[int, int]]
    cls_position: int = 0

    @property
    def n_subwords(self) -> int:
        """Number of real subwords (the sentence token excluded)."""
        return len(self.subword_ids) - 1


def split_word(word: str, vocab: Vocab) -> list[str]:
    w = word.strip().lower()
    pieces = []
    i = 0
    while i < len(w):
        for length in range(min(MAX_PIECE, len(w) - i), MIN_PIECE - 1, -1):
            if w[i:i + length] in vocab:
                pieces.append(w[i:i + length])
                i += length
                break
        else:
            pieces.append(w[i:i + CHUNK])
            i += CHUNK
    return pieces


def tokenize(words: Sequence[str], vocab: Vocab) -> SubwordDecomposition:
    ids = [vocab.id(CLS)]
    pieces = [CLS]
    spans = []
    for k, word in enumerate(words):
        if not word.strip():
            raise CorpusError(f"word {k} is empty")
        parts = split_word(word, vocab)
        begin = len(ids)
        pieces.extend(parts)
        ids.extend(vocab.id(p) for p in parts)
        spans.append((begin, len(ids)))
    return SubwordDecomposition(ids, pieces, spans)


def sinusoidal_positions(n: int, h: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(h)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / h)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


class EncoderParams:
    """Token embeddings plus ``n_layers`` pre-norm self-attention blocks."""

    def __init__(self, vocab_size: int, hidden: int, n_layers: int, n_heads: int,
                 rng: np.random.Generator):
        if hidden % n_heads:
            raise ValueError(f"hidden size {hidden} not divisible by {n_heads} heads")
        self.hidden = hidden
        self.n_heads = n_heads
        self.embedding = Parameter(rng.normal(0.0, 1.0, size=(vocab_size, hidden)), "encoder.embedding", "encoder")
        self.layers = []
        s = 1.0 / np.sqrt(hidden)
        for k in range(n_layers):
            name = f"encoder.layer{k}"
            layer = {
                "wq": Parameter(rng.normal(0.0, s, (hidden, hidden)), f"{name}.wq", "encoder"),
                "wk": Parameter(rng.normal(0.0, s, (hidden, hidden)), f"{name}.wk", "encoder"),
                "wv": Parameter(rng.normal(0.0, s, (hidden, hidden)), f"{name}.wv", "encoder"),
                "wo": Parameter(rng.normal(0.0, s, (hidden, hidden)), f"{name}.wo", "encoder"),
                "w1": Parameter(rng.normal(0.0, s, (hidden, 2 * hidden)), f"{name}.w1", "encoder"),
                "b1": Parameter(np.zeros(2 * hidden), f"{name}.b1", "encoder"),
                "w2": Parameter(rng.normal(0.0, s / np.sqrt(2), (2 * hidden, hidden)), f"{name}.w2", "encoder"),
                "b2": Parameter(np.zeros(hidden), f"{name}.b2", "encoder"),
            }
            self.layers.append(layer)

    def parameters(self) -> list[Parameter]:
        out = [self.embedding]
        for layer in self.layers:
            out.extend(layer.values())
        return out


def _self_attention(x: Tensor, layer: dict, n_heads: int) -> Tensor:
    h = x.shape[1]
    d = h // n_heads
    q, k, v = x @ layer["wq"], x @ layer["wk"], x @ layer["wv"]
    heads = []
    for i in range(n_heads):
        lo, hi = i * d, (i + 1) * d
        scores = ad.slice_cols(q, lo, hi) @ ad.slice_cols(k, lo, hi).T
        attn = ad.softmax_rows(scores * (1.0 / np.sqrt(d)))
        heads.append(attn @ ad.slice_cols(v, lo, hi))
    return ad.concat(heads, axis=1) @ layer["wo"]


def encode(sub: SubwordDecomposition, params: EncoderParams, train_mode: bool = False) -> tuple[Tensor, Tensor]:
    """Return the subword encodings ``(m, h)`` and the sentence vector ``(1, h)``."""
    ids = np.asarray(sub.subword_ids)
    vocab_size = params.embedding.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise ContractError(f"subword id out of range for vocabulary of {vocab_size}")
    x = ad.take_rows(params.embedding, ids) + sinusoidal_positions(len(ids), params.hidden)
    for layer in params.layers:
        x = x + _self_attention(ad.layer_norm(x), layer, params.n_heads)
        hidden = ad.leaky_relu(ad.layer_norm(x) @ layer["w1"] + layer["b1"])
        x = x + (hidden @ layer["w2"] + layer["b2"])
    x = ad.layer_norm(x)
    e_cls = ad.take_rows(x, [sub.cls_position])
    body = ad.take_rows(x, np.arange(1, len(ids)))
    return body, e_cls


def pool_words(E: Tensor, spans: Sequence[tuple[int, int]], offset: int = 1) -> Tensor:
    """Max-pool subword rows into one row per word.

    ``spans`` index the tokenized sequence that still includes the sentence
    token, so ``offset`` (default 1) maps them onto rows of ``E``.
    """
    shifted = [(b - offset, e - offset) for b, e in spans]
    for b, e in shifted:
        if e <= b:
            raise ContractError("word span covers no subwords")
    return ad.segment_max(E, shifted)

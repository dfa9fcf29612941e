"""Syntactic (relational GCN) and semantic graphs over words, fused per node."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import CorpusError, DimensionError
from .optim import Parameter

FUSION_MODES = ("weighted", "mean", "sum", "max", "semantic_only", "syntactic_only", "none")


@dataclass
class DependencyGraph:
    """Typed dependency edges. Each label ``l`` yields relation ``2l``
    (head -> dependent) and ``2l + 1`` (dependent -> head)."""

    n: int
    edges: list[tuple[int, int, str]]
    relation_vocab: dict[str, int]

    @classmethod
    def from_heads(cls, heads: Sequence[int], labels: Sequence[str], relation_vocab: dict[str, int]):
        edges = [(h, d, lab) for d, (h, lab) in enumerate(zip(heads, labels)) if h >= 0]
        return cls(len(heads), edges, relation_vocab)

    @property
    def n_relations(self) -> int:
        return 2 * len(self.relation_vocab)

    def adjacency(self) -> dict[int, np.ndarray]:
        """Row-normalised adjacency per relation with at least one edge."""
        raw: dict[int, np.ndarray] = {}
        for head, dep, label in self.edges:
            if label not in self.relation_vocab:
                raise CorpusError(f"dependency label {label!r} not in the label vocabulary")
            if not (0 <= head < self.n and 0 <= dep < self.n):
                raise CorpusError(f"dependency edge ({head}, {dep}) outside {self.n} words")
            r = 2 * self.relation_vocab[label]
            raw.setdefault(r, np.zeros((self.n, self.n)))[dep, head] = 1.0
            raw.setdefault(r + 1, np.zeros((self.n, self.n)))[head, dep] = 1.0
        out = {}
        for r in sorted(raw):
            a = raw[r]
            counts = a.sum(axis=1, keepdims=True)
            out[r] = np.divide(a, counts, out=np.zeros_like(a), where=counts > 0)
        return out


class GraphParams:
    def __init__(self, hidden: int, n_dep_labels: int, n_layers: int, rng: np.random.Generator):
        if n_layers < 1:
            raise ValueError("graph needs at least one layer")
        s = 1.0 / np.sqrt(hidden)
        self.layers = []
        for k in range(n_layers):
            name = f"graph.layer{k}"
            self.layers.append({
                "self": Parameter(rng.normal(0.0, s, (hidden, hidden)), f"{name}.rgcn_self", "graph"),
                "rel": [Parameter(rng.normal(0.0, s, (hidden, hidden)), f"{name}.rgcn_rel{r}", "graph")
                        for r in range(2 * n_dep_labels)],
                "sem": Parameter(rng.normal(0.0, s, (hidden, hidden)), f"{name}.semantic", "graph"),
                "fuse": Parameter(rng.normal(0.0, s, (hidden, hidden)), f"{name}.fusion", "graph"),
            })

    def parameters(self) -> list[Parameter]:
        out = []
        for layer in self.layers:
            out.extend([layer["self"], *layer["rel"], layer["sem"], layer["fuse"]])
        return out


def rgcn_layer(H: Tensor, adjacency: dict[int, np.ndarray], w_self: Tensor, w_rel: Sequence[Tensor]) -> Tensor:
    """leaky_relu(sum_r A_r H W_r + H W_0) with row-normalised A_r."""
    total = H @ w_self
    for r, a in adjacency.items():
        total = total + ad.matmul(ad.Tensor(a), H) @ w_rel[r]
    return ad.leaky_relu(total)


def semantic_adjacency(H: Tensor, w_sem: Tensor, sample_k: int, rng: np.random.Generator | None,
                       train_mode: bool) -> tuple[np.ndarray, Tensor]:
    """Similarity of leaky-projected nodes, softmax-normalised over kept neighbours.

    Returns ``(mask, alpha_bar)``; ``mask[i, j]`` marks ``j`` as kept for node
    ``i`` (self always kept). Training samples ``min(sample_k, n - 1)``
    neighbours per node without replacement; inference keeps all of them.
    """
    n = H.shape[0]
    proj = ad.leaky_relu(H @ w_sem)
    alpha = proj @ proj.T
    mask = np.eye(n, dtype=bool)
    if train_mode and n > 1:
        keep = min(sample_k, n - 1)
        for i in range(n):
            others = np.array([j for j in range(n) if j != i])
            mask[i, rng.choice(others, size=keep, replace=False)] = True
    else:
        mask[:] = True
    return mask, ad.softmax_rows(alpha, mask)


def semantic_layer(H: Tensor, alpha_bar: Tensor, w_sem: Tensor) -> Tensor:
    return alpha_bar @ (H @ w_sem)


def weighted_fuse(H_sem: Tensor, H_syn: Tensor, e_cls: Tensor, w_fuse: Tensor,
                  mode: str = "weighted") -> tuple[Tensor, Tensor | None]:
    """Combine the two graph outputs; returns ``(fused, node_weights)``.

    ``node_weights`` is ``n x 2`` (semantic, syntactic) in weighted mode,
    otherwise ``None``.
    """
    if H_sem.shape != H_syn.shape:
        raise DimensionError(f"graph outputs differ in shape: {H_sem.shape} vs {H_syn.shape}")
    if mode == "weighted":
        u = e_cls @ w_fuse
        scores = ad.concat([H_sem @ u.T, H_syn @ u.T], axis=1)
        w = ad.softmax_rows(scores)
        fused = (ad.scale_rows(H_sem, ad.reshape(ad.slice_cols(w, 0, 1), (-1,)))
                 + ad.scale_rows(H_syn, ad.reshape(ad.slice_cols(w, 1, 2), (-1,))))
        return fused, w
    if mode == "mean":
        return (H_sem + H_syn) * 0.5, None
    if mode == "sum":
        return H_sem + H_syn, None
    if mode == "max":
        n, h = H_sem.shape
        stacked = ad.concat([ad.reshape(H_sem, (1, n * h)), ad.reshape(H_syn, (1, n * h))], axis=0)
        return ad.reshape(ad.reduce("max", stacked, 0), (n, h)), None
    if mode == "semantic_only":
        return H_sem, None
    if mode == "syntactic_only":
        return H_syn, None
    raise ValueError(f"unknown fusion mode {mode!r}")


def project_words(H_fused: Tensor, E_w_bar: Tensor) -> Tensor:
    if H_fused.shape != E_w_bar.shape:
        raise DimensionError(f"project_words shape mismatch: {H_fused.shape} vs {E_w_bar.shape}")
    return (H_fused + E_w_bar) * 0.5


def graph_forward(E_w_bar: Tensor, graph: DependencyGraph, e_cls: Tensor, params: GraphParams,
                  mode: str = "weighted", sample_k: int = 4, rng: np.random.Generator | None = None,
                  train_mode: bool = False, trace: dict | None = None) -> Tensor:
    """Word encodings after graph fusion; ``mode="none"`` bypasses the module."""
    if mode not in FUSION_MODES:
        raise ValueError(f"unknown fusion mode {mode!r}")
    if mode == "none":
        return E_w_bar
    adjacency = graph.adjacency()
    H = E_w_bar
    for layer in params.layers:
        H_syn = rgcn_layer(H, adjacency, layer["self"], layer["rel"])
        _, alpha_bar = semantic_adjacency(H, layer["sem"], sample_k, rng, train_mode)
        H_sem = semantic_layer(H, alpha_bar, layer["sem"])
        H, weights = weighted_fuse(H_sem, H_syn, e_cls, layer["fuse"], mode)
        if trace is not None and weights is not None:
            trace.setdefault("fusion_weights", []).append(weights.data.copy())
    return project_words(H, E_w_bar)

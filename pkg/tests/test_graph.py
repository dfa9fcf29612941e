import numpy as np
import pytest
from hypothesis import given, strategies as st

from memflow.autodiff import Tensor
from memflow.errors import CorpusError, DimensionError
from memflow.graph import (FUSION_MODES, DependencyGraph, GraphParams, graph_forward, project_words, rgcn_layer,
                           semantic_adjacency, semantic_layer, weighted_fuse)

import oracles

LABELS = {"root": 0, "nsubj": 1, "obj": 2}


def random_instance(seed):
    rng = np.random.default_rng(seed)
    n, h = int(rng.integers(1, 7)), int(rng.integers(1, 6))
    heads = [-1] + [int(rng.integers(0, i)) for i in range(1, n)]
    labels = ["root"] + [("nsubj", "obj")[int(rng.integers(2))] for _ in range(1, n)]
    graph = DependencyGraph.from_heads(heads, labels, LABELS)
    H = rng.normal(size=(n, h))
    w_self = rng.normal(size=(h, h))
    w_rel = [rng.normal(size=(h, h)) for _ in range(graph.n_relations)]
    return rng, graph, H, w_self, w_rel


def test_adjacency_uses_two_relations_per_label_and_row_normalises():
    graph = DependencyGraph.from_heads([-1, 0, 0], ["root", "nsubj", "nsubj"], LABELS)
    adj = graph.adjacency()
    assert sorted(adj) == [2, 3]
    # relation 2: dependent receives from its head
    np.testing.assert_array_equal(adj[2], [[0, 0, 0], [1, 0, 0], [1, 0, 0]])
    # relation 3: the head averages over its two dependents
    np.testing.assert_array_equal(adj[3], [[0, 0.5, 0.5], [0, 0, 0], [0, 0, 0]])


def test_adjacency_rejects_bad_edges():
    with pytest.raises(CorpusError):
        DependencyGraph.from_heads([-1, 0], ["root", "amod"], LABELS).adjacency()
    with pytest.raises(CorpusError):
        DependencyGraph.from_heads([-1, 5], ["root", "obj"], LABELS).adjacency()


@pytest.mark.parametrize("seed", range(30))
def test_rgcn_layer_matches_oracle(seed):
    _, graph, H, w_self, w_rel = random_instance(seed)
    got = rgcn_layer(Tensor(H), graph.adjacency(), Tensor(w_self), [Tensor(w) for w in w_rel]).data
    want = oracles.rgcn_layer(H.tolist(), graph.edges, LABELS, w_self.tolist(), [w.tolist() for w in w_rel])
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-10)


@pytest.mark.parametrize("seed", range(30))
def test_semantic_layer_matches_oracle_at_inference(seed):
    rng, _, H, w_sem, _ = random_instance(seed)
    w_sem = w_sem * 0.5
    mask, alpha = semantic_adjacency(Tensor(H), Tensor(w_sem), 2, None, train_mode=False)
    assert mask.all()
    got = semantic_layer(Tensor(H), alpha, Tensor(w_sem)).data
    want, want_alpha = oracles.semantic_layer(H.tolist(), w_sem.tolist())
    np.testing.assert_allclose(alpha.data, want_alpha, rtol=0, atol=1e-10)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-10)


def test_semantic_sampling_keeps_self_plus_k():
    rng = np.random.default_rng(0)
    H, w = Tensor(rng.normal(size=(6, 3))), Tensor(rng.normal(size=(3, 3)))
    mask, alpha = semantic_adjacency(H, w, 2, np.random.default_rng(1), train_mode=True)
    assert (mask.sum(axis=1) == 3).all() and mask.diagonal().all()
    assert (alpha.data[~mask] == 0).all()
    np.testing.assert_allclose(alpha.data.sum(axis=1), 1.0, atol=1e-12)
    again, _ = semantic_adjacency(H, w, 2, np.random.default_rng(1), train_mode=True)
    np.testing.assert_array_equal(mask, again)


@given(st.integers(0, 2**32 - 1))
def test_fusion_weights_sum_to_one_per_node(seed):
    rng = np.random.default_rng(seed)
    n, h = int(rng.integers(1, 7)), int(rng.integers(1, 6))
    a, b, c = rng.normal(size=(n, h)), rng.normal(size=(n, h)), rng.normal(size=(1, h))
    fused, w = weighted_fuse(Tensor(a), Tensor(b), Tensor(c), Tensor(rng.normal(size=(h, h))))
    assert w.shape == (n, 2)
    assert np.abs(w.data.sum(axis=1) - 1.0).max() <= 1e-9
    np.testing.assert_allclose(fused.data, w.data[:, :1] * a + w.data[:, 1:] * b, atol=1e-12)


def test_fixed_fusion_modes():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    args = (Tensor(a), Tensor(b), Tensor(np.ones((1, 2))), Tensor(np.eye(2)))
    expected = {"mean": (a + b) / 2, "sum": a + b, "max": np.maximum(a, b), "semantic_only": a, "syntactic_only": b}
    for mode, want in expected.items():
        out, w = weighted_fuse(*args, mode=mode)
        np.testing.assert_allclose(out.data, want)
        assert w is None
    with pytest.raises(ValueError):
        weighted_fuse(*args, mode="concat")
    with pytest.raises(DimensionError):
        weighted_fuse(Tensor(a), Tensor(b[:2]), args[2], args[3])


def test_graph_forward_none_is_identity_and_projection_averages():
    rng = np.random.default_rng(3)
    graph = DependencyGraph.from_heads([-1, 0], ["root", "obj"], LABELS)
    params = GraphParams(4, len(LABELS), 1, rng)
    E = Tensor(rng.normal(size=(2, 4)))
    assert graph_forward(E, graph, Tensor(np.ones((1, 4))), params, "none") is E
    np.testing.assert_allclose(project_words(Tensor(np.ones((2, 4))), E).data, (1 + E.data) / 2)
    with pytest.raises(ValueError):
        graph_forward(E, graph, Tensor(np.ones((1, 4))), params, "bogus")


def test_graph_forward_records_fusion_weights():
    rng = np.random.default_rng(4)
    graph = DependencyGraph.from_heads([-1, 0, 1], ["root", "obj", "nsubj"], LABELS)
    params = GraphParams(4, len(LABELS), 2, rng)
    trace = {}
    out = graph_forward(Tensor(rng.normal(size=(3, 4))), graph, Tensor(rng.normal(size=(1, 4))), params,
                        trace=trace)
    assert out.shape == (3, 4)
    assert len(trace["fusion_weights"]) == 2
    for w in trace["fusion_weights"]:
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)


def test_every_fusion_mode_runs():
    rng = np.random.default_rng(5)
    graph = DependencyGraph.from_heads([-1, 0, 0], ["root", "obj", "nsubj"], LABELS)
    params = GraphParams(4, len(LABELS), 1, rng)
    E, c = Tensor(rng.normal(size=(3, 4))), Tensor(rng.normal(size=(1, 4)))
    outs = {m: graph_forward(E, graph, c, params, m).data for m in FUSION_MODES}
    assert all(o.shape == (3, 4) for o in outs.values())
    assert not np.allclose(outs["weighted"], outs["mean"])

"""Ablation switches change the pipeline at their own site and nowhere else."""

import numpy as np
import pytest

from memflow import autodiff as ad
from memflow.corpus import synthetic_splits
from memflow.encoder import encode, pool_words
from memflow.graph import FUSION_MODES, graph_forward
from memflow.mfa import MfaConfig, apply_multilevel
from memflow.spans import Span
from memflow.train import build_model, gold_candidates, joint_loss

from helpers import tiny_config

CORPUS = synthetic_splits(6, 2, seed=3)[0]
SENTENCE = CORPUS.sentences[0]


def make(**changes):
    model = build_model(CORPUS, tiny_config(hidden=8, encoder_heads=2, memory_size=4, **changes))
    for mem in model.memories():
        # unit-scale slots so that every read is visibly non-uniform
        mem.slots.data = np.random.default_rng(len(mem.category_names)).normal(size=mem.slots.shape)
    return model


def inputs(model):
    feats = model.featurize(SENTENCE)
    c = gold_candidates(SENTENCE, model.entity_labels, model.relation_types)
    spans = c.spans + [Span(0, 1)]
    pairs = c.pairs + [(1, 0)]
    return feats, spans, pairs, c.labels + [0], np.vstack([c.targets, np.zeros((1, len(model.relation_types)))])


def manual_words(model, feats, mfa_cfg, mode=None):
    """The word pipeline assembled by hand from the full model's parameters."""
    E_d, e_cls = encode(feats.sub, model.encoder)
    _, E_w_bar = apply_multilevel(E_d, feats.sub, model.memory, mfa_cfg)
    return graph_forward(E_w_bar, feats.graph, e_cls, model.graph, mode or model.cfg.fusion_mode,
                         model.cfg.semantic_k)


def assert_same_parameters(a, b):
    pa, pb = a.named_parameters(), b.named_parameters()
    assert pa.keys() == pb.keys()
    for name in pa:
        np.testing.assert_array_equal(pa[name].data, pb[name].data, err_msg=name)


FLAGS = {
    "subword_mfa": dict(enable_subword_level=False),
    "word_mfa": dict(enable_word_level=False),
    "entity_flow": dict(enable_entity_memory=False),
    "relation_flow": dict(enable_relation_memory=False),
}


@pytest.mark.parametrize("flag", sorted(FLAGS))
def test_mfa_ablation_matches_hand_built_pipeline(flag):
    full, ablated = make(), make(**{flag: False})
    assert_same_parameters(full, ablated)
    feats = full.featurize(SENTENCE)
    E_g_ablated, _ = ablated.encode_words(feats, stage=2)
    E_g_full, _ = full.encode_words(feats, stage=2)
    cfg = MfaConfig(forms=full.mfa_forms, **FLAGS[flag], rescale=full.cfg.mfa_rescale)
    np.testing.assert_array_equal(E_g_ablated.data, manual_words(full, feats, cfg).data)
    assert not np.allclose(E_g_ablated.data, E_g_full.data)


def test_all_mfa_off_is_plain_pooling():
    model = make(subword_mfa=False, word_mfa=False)
    feats = model.featurize(SENTENCE)
    E_d, e_cls = encode(feats.sub, model.encoder)
    want = graph_forward(pool_words(E_d, feats.sub.word_spans), feats.graph, e_cls, model.graph)
    np.testing.assert_array_equal(model.encode_words(feats, stage=2)[0].data, want.data)


@pytest.mark.parametrize("mode", [m for m in FUSION_MODES if m != "weighted"])
def test_fusion_mode_ablation(mode):
    full, ablated = make(), make(fusion_mode=mode)
    assert_same_parameters(full, ablated)
    feats = full.featurize(SENTENCE)
    trace_full, trace_ablated = {}, {}
    E_full = full.encode_words(feats, stage=2, trace=trace_full)[0].data
    E_abl = ablated.encode_words(feats, stage=2, trace=trace_ablated)[0].data
    # upstream of the graph module nothing moves
    for level in ("subword", "word"):
        for kind in ("entity", "relation"):
            np.testing.assert_array_equal(trace_full[level][kind], trace_ablated[level][kind])
    cfg = full.mfa_config(2)
    np.testing.assert_array_equal(E_abl, manual_words(full, feats, cfg, mode).data)
    assert "fusion_weights" in trace_full and "fusion_weights" not in trace_ablated
    assert not np.allclose(E_full, E_abl)


def test_trigger_sensor_ablation_zeroes_only_the_trigger_block():
    full, ablated = make(), make(trigger_sensor=False)
    feats, spans, pairs, _, _ = inputs(full)
    out_f = full.forward(feats, spans, pairs, stage=2)
    out_a = ablated.forward(feats, spans, pairs, stage=2)
    np.testing.assert_array_equal(out_f.entity_logits.data, out_a.entity_logits.data)
    h = full.cfg.hidden
    np.testing.assert_array_equal(out_f.pair_enc.data[:, :-h], out_a.pair_enc.data[:, :-h])
    assert (out_a.pair_enc.data[:, -h:] == 0).all()
    assert np.abs(out_f.pair_enc.data[:, -h:]).sum() > 0
    assert out_a.trigger_weights is None
    np.testing.assert_allclose(out_f.trigger_weights.data.sum(axis=1), 1.0, atol=1e-9)


def test_stage_one_bypasses_mfa_and_trigger_sensor():
    model = make()
    feats, spans, pairs, _, _ = inputs(model)
    bypass = make(subword_mfa=False, word_mfa=False, trigger_sensor=False)
    a = model.forward(feats, spans, pairs, stage=1)
    b = bypass.forward(feats, spans, pairs, stage=2)
    np.testing.assert_array_equal(a.relation_logits.data, b.relation_logits.data)
    assert a.trigger_weights is None


def loss_grads(model, feats, spans, pairs, labels, targets):
    for p in model.parameters():
        p.grad = None
    out = model.forward(feats, spans, pairs, stage=2)
    ad.backward(joint_loss(out.entity_logits, labels, out.relation_logits, targets))
    return {name: (None if p.grad is None else p.grad.copy()) for name, p in model.named_parameters().items()}


@pytest.mark.parametrize("flag,reads_memory", [
    ("trigger_sensor_grad", "memory.relation"),
    ("subword_mfa_grad", "memory.entity"),
    ("word_mfa_grad", "memory.entity"),
])
def test_gradient_flow_flags_only_change_slot_gradients(flag, reads_memory):
    full, ablated = make(), make(**{flag: False})
    args = inputs(full)
    g_full, g_abl = loss_grads(full, *args), loss_grads(ablated, *args)
    for name, g in g_full.items():
        if name.startswith("memory."):
            continue
        np.testing.assert_array_equal(g, g_abl[name], err_msg=name)
    assert not np.allclose(g_full[reads_memory], g_abl[reads_memory] if g_abl[reads_memory] is not None else 0.0)


def test_all_slot_gradients_off():
    model = make(trigger_sensor_grad=False, subword_mfa_grad=False, word_mfa_grad=False)
    grads = loss_grads(model, *inputs(model))
    assert grads["memory.entity"] is None and grads["memory.relation"] is None


def test_trainable_groups_by_stage():
    model = make()
    stage1 = {p.group for p in model.trainable(1)}
    stage2 = {p.group for p in model.trainable(2)}
    assert stage1 == {"encoder", "graph", "classifier"}
    assert stage2 == stage1 | {"mfa", "trigger"}
    assert "memory" not in stage2


def test_parameter_names_are_unique():
    model = make()
    assert len(model.named_parameters()) == len(model.parameters())


def test_entity_logits_give_distributions():
    model = make()
    feats = model.featurize(SENTENCE)
    out = model.forward(feats, feats.all_spans, [], stage=2)
    probs = ad.softmax_rows(out.entity_logits).data
    assert probs.shape == (len(feats.all_spans), len(model.entity_labels))
    assert np.abs(probs.sum(axis=1) - 1).max() <= 1e-9

"""The joint extractor: encoder, memories, MFA, graph fusion, trigger sensor, classifiers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import TrainConfig
from .corpus import Sentence
from .encoder import EncoderParams, SubwordDecomposition, Vocab, encode, tokenize
from .graph import DependencyGraph, GraphParams, graph_forward
from .memory import BilinearForm, Memory, init_memory
from .mfa import LEVELS, MEMORIES, MfaConfig, apply_multilevel, attention_traces
from .optim import Parameter
from .spans import (Span, build_pair, encode_spans, enumerate_spans, local_context,
                    pair_relation_read, trigger_attend)

NONE_LABEL = "None"


@dataclass
class Features:
    """Everything about a sentence that does not depend on parameters."""

    sentence: Sentence
    sub: SubwordDecomposition
    graph: DependencyGraph
    all_spans: list[Span]


@dataclass
class ForwardOutput:
    E_g: Tensor
    span_enc: Tensor
    entity_logits: Tensor
    pair_enc: Tensor | None = None
    relation_logits: Tensor | None = None
    trigger_weights: Tensor | None = None
    trace: dict = field(default_factory=dict)


class Model:
    def __init__(self, cfg: TrainConfig, vocab: Vocab, entity_types: Sequence[str],
                 relation_types: Sequence[str], dependency_labels: Sequence[str]):
        if not relation_types:
            raise ValueError("model needs at least one relation type")
        self.cfg = cfg
        self.vocab = vocab
        self.entity_labels = [NONE_LABEL, *entity_types]
        self.relation_types = list(relation_types)
        self.dependency_labels = list(dependency_labels)
        self.dep_index = {lab: i for i, lab in enumerate(self.dependency_labels)}
        # one stream per component so that toggling a module leaves the others' init alone
        streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(8)]
        h, hm = cfg.hidden, cfg.memory_size
        self.span_size = h + cfg.width_dim
        self.pair_size = 2 * self.span_size + 2 * h
        self.encoder = EncoderParams(len(vocab), h, cfg.encoder_layers, cfg.encoder_heads, streams[0])
        self.width_embeddings = Parameter(streams[1].normal(0.0, 0.1, (cfg.max_span + 1, cfg.width_dim)),
                                          "encoder.width_embeddings", "encoder")
        self.graph = GraphParams(h, len(self.dependency_labels), cfg.graph_layers, streams[2])
        self.memory = {
            "entity": init_memory(len(self.entity_labels), hm, streams[3], "entity", self.entity_labels),
            "relation": init_memory(len(self.relation_types), hm, streams[3], "relation", self.relation_types),
        }
        self.mfa_forms = {
            (level, kind): BilinearForm.create(f"mfa.{level}.{kind}", h, hm, streams[4], "mfa")
            for level in LEVELS for kind in MEMORIES
        }
        self.trigger_form = BilinearForm.create("trigger.read", self.span_size, hm, streams[5], "trigger")
        self.trigger_projection = Parameter(streams[5].normal(0.0, 1.0 / np.sqrt(hm), (hm, h)),
                                            "trigger.projection", "trigger")
        self.entity_form = BilinearForm.create("classifier.entity", self.span_size, hm, streams[6], "classifier")
        self.relation_form = BilinearForm.create("classifier.relation", self.pair_size, hm, streams[6],
                                                 "classifier")

    # ------------------------------------------------------------------ params

    def parameters(self) -> list[Parameter]:
        out = [*self.encoder.parameters(), self.width_embeddings, *self.graph.parameters()]
        out += [self.memory["entity"].slots, self.memory["relation"].slots]
        out += [f.weight for f in self.mfa_forms.values()]
        out += [self.trigger_form.weight, self.trigger_projection, self.entity_form.weight, self.relation_form.weight]
        return out

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def trainable(self, stage: int) -> list[Parameter]:
        """Optimizer parameters: stage 1 trains encoder, graph and classifiers,
        stage 2 adds MFA and the trigger sensor. Memory slots are never
        optimizer parameters; see :meth:`memories`."""
        if stage == 1:
            groups = {"encoder", "graph", "classifier"}
        else:
            groups = {"encoder", "graph", "classifier", "mfa", "trigger"}
        return [p for p in self.parameters() if p.group in groups]

    def memories(self) -> list[Memory]:
        return [self.memory["entity"], self.memory["relation"]]

    @property
    def inference_stage(self) -> int:
        return 2 if self.cfg.stage2_epochs > 0 else 1

    # ------------------------------------------------------------------ data

    def featurize(self, sentence: Sentence) -> Features:
        sub = tokenize(sentence.tokens, self.vocab)
        if sentence.deps:
            heads = [d.head for d in sentence.deps]
            labels = [d.label for d in sentence.deps]
        else:
            heads, labels = [-1] * len(sentence.tokens), ["root"] * len(sentence.tokens)
        graph = DependencyGraph.from_heads(heads, labels, self.dep_index)
        return Features(sentence, sub, graph, enumerate_spans(len(sentence.tokens), self.cfg.max_span))

    # ------------------------------------------------------------------ forward

    def mfa_config(self, stage: int) -> MfaConfig:
        cfg = self.cfg
        on = stage == 2
        return MfaConfig(
            enable_subword_level=on and cfg.subword_mfa,
            enable_word_level=on and cfg.word_mfa,
            enable_entity_memory=cfg.entity_flow,
            enable_relation_memory=cfg.relation_flow,
            forms=self.mfa_forms,
            memory_grad={"subword": cfg.subword_mfa_grad, "word": cfg.word_mfa_grad},
            rescale=cfg.mfa_rescale,
        )

    def encode_words(self, feats: Features, stage: int, train: bool = False,
                     graph_rng: np.random.Generator | None = None,
                     trace: dict | None = None) -> tuple[Tensor, Tensor]:
        """Word encodings after MFA and graph fusion, plus the sentence vector."""
        E_d, e_cls = encode(feats.sub, self.encoder, train)
        _, E_w_bar = apply_multilevel(E_d, feats.sub, self.memory, self.mfa_config(stage), trace)
        E_g = graph_forward(E_w_bar, feats.graph, e_cls, self.graph, self.cfg.fusion_mode,
                            self.cfg.semantic_k, graph_rng, train, trace)
        return E_g, e_cls

    def attention(self, feats: Features) -> dict[str, dict[str, np.ndarray]]:
        """Inverse-read weights at both levels for both memories.

        Subword-level arrays align with the subword pieces (sentence token
        excluded), word-level arrays with the words.
        """
        with ad.no_grad():
            E_d, _ = encode(feats.sub, self.encoder)
        return attention_traces(E_d, feats.sub, self.memory, self.mfa_forms, self.cfg.mfa_rescale)

    def forward(self, feats: Features, spans: Sequence[Span], pairs: Sequence[tuple[int, int]],
                stage: int, train: bool = False, rng: np.random.Generator | None = None,
                graph_rng: np.random.Generator | None = None, want_triggers: bool = False,
                trace: dict | None = None, E_g: Tensor | None = None) -> ForwardOutput:
        """Score candidate spans and ordered span pairs (indices into ``spans``).

        ``rng`` drives dropout and ``graph_rng`` the semantic-graph sampling;
        both only matter when ``train`` is set. A precomputed ``E_g`` skips
        the word-encoding pass.
        """
        cfg = self.cfg
        if E_g is None:
            E_g, _ = self.encode_words(feats, stage, train, graph_rng, trace)
        span_enc = encode_spans(spans, E_g, self.width_embeddings)
        ent_slots = self.memory["entity"].view(False)
        entity_logits = ad.dropout(span_enc, cfg.dropout, rng, train) @ self.entity_form.weight @ ent_slots.T
        out = ForwardOutput(E_g, span_enc, entity_logits, trace=trace if trace is not None else {})
        if not pairs:
            return out
        heads = ad.take_rows(span_enc, [i for i, _ in pairs])
        tails = ad.take_rows(span_enc, [j for _, j in pairs])
        g_local = local_context([(spans[i], spans[j]) for i, j in pairs], E_g)
        sensor_on = stage == 2 and cfg.trigger_sensor
        if sensor_on or want_triggers:
            m_r = pair_relation_read(heads, tails, self.memory["relation"], self.trigger_form,
                                     grad_to_memory=sensor_on and cfg.trigger_sensor_grad)
            g_trigger, weights = trigger_attend(m_r, E_g, self.trigger_projection)
            out.trigger_weights = weights
        if not sensor_on:
            g_trigger = Tensor(np.zeros((len(pairs), cfg.hidden)))
        pair_enc = build_pair(heads, tails, g_local, g_trigger)
        rel_slots = self.memory["relation"].view(False)
        out.pair_enc = pair_enc
        out.relation_logits = ad.dropout(pair_enc, cfg.dropout, rng, train) @ self.relation_form.weight @ rel_slots.T
        return out

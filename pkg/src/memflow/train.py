"""Memory-aware classifiers, candidate sampling, two-stage training, prediction."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import TrainConfig
from .corpus import Corpus, Sentence
from .encoder import build_vocab
from .errors import ContractError, CorpusError, TrainingDiverged
from .memory import BilinearForm, Memory, write
from .model import Features, Model
from .optim import OptimizerState, adam_step, clip_grad_norm
from .spans import Span, TriggerRanking, extract_triggers

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# classifiers and loss


def entity_probs(span_enc: Tensor, mem_e: Memory, form_e: BilinearForm, dropout: float = 0.0,
                 rng: np.random.Generator | None = None, train: bool = False) -> Tensor:
    """Softmax over every entity category (None included), one row per span."""
    x = ad.dropout(span_enc, dropout, rng, train)
    return ad.softmax_rows(x @ form_e.weight @ mem_e.view(False).T)


def relation_probs(pair_enc: Tensor, mem_r: Memory, form_r: BilinearForm, dropout: float = 0.0,
                   rng: np.random.Generator | None = None, train: bool = False) -> Tensor:
    """Independent sigmoid per relation category, one row per span pair."""
    x = ad.dropout(pair_enc, dropout, rng, train)
    return ad.sigmoid(x @ form_r.weight @ mem_r.view(False).T)


def joint_loss(entity_logits: Tensor, entity_labels: Sequence[int],
               relation_logits: Tensor | None = None, relation_targets: np.ndarray | None = None) -> Tensor:
    """Mean entity cross-entropy plus mean relation binary cross-entropy."""
    loss = ad.cross_entropy(entity_logits, entity_labels)
    if relation_logits is not None and relation_logits.shape[0] > 0:
        loss = loss + ad.binary_cross_entropy(relation_logits, relation_targets)
    return loss


# ---------------------------------------------------------------------------
# candidates


@dataclass
class Candidates:
    spans: list[Span]
    labels: list[int]
    pairs: list[tuple[int, int]]
    targets: np.ndarray  # len(pairs) x n_relation_types
    n_gold_spans: int = 0
    n_gold_pairs: int = 0


def gold_candidates(sentence: Sentence, entity_labels: Sequence[str], relation_types: Sequence[str]) -> Candidates:
    """Gold entity spans and gold span pairs with their labels."""
    label_of = {name: i for i, name in enumerate(entity_labels)}
    rel_of = {name: i for i, name in enumerate(relation_types)}
    spans, labels, where = [], [], {}
    for e in sentence.entities:
        s = Span(e.begin, e.end)
        if s in where:
            continue
        where[s] = len(spans)
        spans.append(s)
        labels.append(label_of[e.type])
    pair_rows: dict[tuple[int, int], np.ndarray] = {}
    for r in sentence.relations:
        h = where[Span(sentence.entities[r.head].begin, sentence.entities[r.head].end)]
        t = where[Span(sentence.entities[r.tail].begin, sentence.entities[r.tail].end)]
        row = pair_rows.setdefault((h, t), np.zeros(len(relation_types)))
        row[rel_of[r.type]] = 1.0
    pairs = list(pair_rows)
    targets = np.array([pair_rows[p] for p in pairs]).reshape(len(pairs), len(relation_types))
    return Candidates(spans, labels, pairs, targets, len(spans), len(pairs))


def sample_negatives(sentence: Sentence, all_spans: Sequence[Span], entity_labels: Sequence[str],
                     relation_types: Sequence[str], neg_entity_count: int, neg_relation_count: int,
                     rng: np.random.Generator) -> Candidates:
    """Gold items plus uniformly sampled negatives (label None / no relation).

    Negative pairs are ordered, non-overlapping pairs of gold entities that
    carry no gold relation.
    """
    c = gold_candidates(sentence, entity_labels, relation_types)
    gold = set(c.spans)
    pool = [s for s in all_spans if s not in gold]
    if pool and neg_entity_count:
        take = rng.choice(len(pool), size=min(neg_entity_count, len(pool)), replace=False)
        for k in sorted(take):
            c.spans.append(pool[k])
            c.labels.append(0)
    gold_pairs = set(c.pairs)
    neg_pairs = [(i, j) for i in range(c.n_gold_spans) for j in range(c.n_gold_spans)
                 if i != j and (i, j) not in gold_pairs and not c.spans[i].overlaps(c.spans[j])]
    if neg_pairs and neg_relation_count:
        take = rng.choice(len(neg_pairs), size=min(neg_relation_count, len(neg_pairs)), replace=False)
        extra = [neg_pairs[k] for k in sorted(take)]
        c.pairs.extend(extra)
        c.targets = np.vstack([c.targets, np.zeros((len(extra), len(relation_types)))])
    return c


# ---------------------------------------------------------------------------
# training


@dataclass
class EpochRecord:
    epoch: int
    stage: int
    loss: float
    lr: float
    steps: int
    writes: int

    def to_json(self) -> dict:
        return {"epoch": self.epoch, "stage": self.stage, "loss": self.loss, "lr": self.lr,
                "steps": self.steps, "writes": self.writes}


@dataclass
class TrainResult:
    model: Model
    history: list[EpochRecord] = field(default_factory=list)
    degraded: bool = False


def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("shuffle", "sample", "dropout", "graph")
    seqs = np.random.SeedSequence([seed, 1]).spawn(len(names))
    return {n: np.random.default_rng(s) for n, s in zip(names, seqs)}


def write_memories(model: Model, feats: Sequence[Features], cands: Sequence[Candidates],
                   stage: int, lr: float) -> int:
    """Write the batch's candidates into memory with post-step encodings.

    Each instance writes every category with the score gradient ``p - y``,
    normalised the way the joint loss averages it, so one write is a
    gradient step of size ``lr`` on the classification loss with respect
    to the slots. Returns the number of instances written.
    """
    if lr <= 0:
        return 0
    ent_x, ent_g, rel_x, rel_g = [], [], [], []
    n_batch = len(feats)
    with ad.no_grad():
        for f, c in zip(feats, cands):
            if not c.spans:
                continue
            out = model.forward(f, c.spans, c.pairs, stage, train=False)
            probs = ad.softmax_rows(out.entity_logits).data
            onehot = np.eye(len(model.entity_labels))[c.labels]
            ent_x.append(out.span_enc.data)
            ent_g.append((probs - onehot) / (len(c.spans) * n_batch))
            if c.pairs:
                rprobs = ad.sigmoid(out.relation_logits).data
                rel_x.append(out.pair_enc.data)
                rel_g.append((rprobs - c.targets) / (c.targets.size * n_batch))
    n = 0
    if ent_x:
        write(model.memory["entity"], np.vstack(ent_x), model.entity_form, np.vstack(ent_g), lr)
        n += sum(len(x) for x in ent_x)
    if rel_x:
        write(model.memory["relation"], np.vstack(rel_x), model.relation_form, np.vstack(rel_g), lr)
        n += sum(len(x) for x in rel_x)
    return n


def apply_read_gradients(model: Model, lr: float) -> None:
    """Plain gradient step on the slots from backprop through memory reads.

    Only reads whose gradient-flow flag is on contribute to ``grad``.
    """
    for mem in model.memories():
        if mem.slots.grad is not None:
            mem.slots.data -= lr * mem.slots.grad
            mem.slots.grad = np.zeros_like(mem.slots.data)


def build_model(corpus: Corpus, cfg: TrainConfig) -> Model:
    vocab = build_vocab((s.tokens for s in corpus.sentences), cfg.vocab_size)
    return Model(cfg, vocab, corpus.entity_types, corpus.relation_types, corpus.dependency_labels)


def train_two_stage(corpus: Corpus, cfg: TrainConfig, model: Model | None = None,
                    on_epoch: Callable[[EpochRecord, Model], None] | None = None) -> TrainResult:
    """Stage 1: encoder, graph and classifiers with MFA and the trigger sensor
    bypassed, memory filled by writes. Stage 2: everything enabled.

    One warmup-decay schedule and one set of Adam moments span both stages.
    """
    if not corpus.sentences:
        raise CorpusError("cannot train on an empty corpus")
    model = model or build_model(corpus, cfg)
    if cfg.degraded():
        log.warning("stage split %d/%d skips a stage; expect degraded results",
                    cfg.stage1_epochs, cfg.stage2_epochs)
    rngs = _streams(cfg.seed)
    feats = [model.featurize(s) for s in corpus.sentences]
    n = len(feats)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total = max(steps_per_epoch * cfg.total_epochs, 2)
    warmup = min(max(1, round(cfg.warmup_fraction * total)), total - 1)
    state = OptimizerState(cfg.peak_lr, warmup, total)
    result = TrainResult(model, degraded=cfg.degraded())
    every = model.parameters()
    for epoch in range(cfg.total_epochs):
        stage = 1 if epoch < cfg.stage1_epochs else 2
        params = model.trainable(stage)
        order = rngs["shuffle"].permutation(n)
        losses, writes, lr = [], 0, 0.0
        for start in range(0, n, cfg.batch_size):
            batch = [feats[i] for i in order[start:start + cfg.batch_size]]
            for p in every:
                p.zero_grad()
            total_loss = None
            batch_cands = []
            for f in batch:
                c = sample_negatives(f.sentence, f.all_spans, model.entity_labels, model.relation_types,
                                     cfg.neg_entity_count, cfg.neg_relation_count, rngs["sample"])
                batch_cands.append(c)
                if not c.spans:
                    continue
                out = model.forward(f, c.spans, c.pairs, stage, train=True,
                                    rng=rngs["dropout"], graph_rng=rngs["graph"])
                loss = joint_loss(out.entity_logits, c.labels, out.relation_logits, c.targets)
                total_loss = loss if total_loss is None else total_loss + loss
            if total_loss is None:
                continue
            total_loss = total_loss * (1.0 / len(batch))
            losses.append(total_loss.item())
            ad.backward(total_loss)
            clip_grad_norm(params, cfg.grad_clip)
            lr = adam_step(params, state)
            if stage == 2:
                apply_read_gradients(model, lr)
            writes += write_memories(model, batch, batch_cands, stage, lr)
        record = EpochRecord(epoch + 1, stage, float(np.mean(losses)) if losses else 0.0, lr,
                             state.step, writes)
        result.history.append(record)
        log.info("epoch %d stage %d loss %.4f lr %.2e", record.epoch, stage, record.loss, lr)
        if on_epoch is not None:
            on_epoch(record, model)
        if cfg.fail_fast and epoch == 4:
            _check_progress(result.history)
    return result


def _check_progress(history: Sequence[EpochRecord]) -> None:
    early = np.mean([r.loss for r in history[:2]])
    late = np.mean([r.loss for r in history[3:5]])
    if not late < early:
        raise TrainingDiverged(f"loss did not fall over the first 5 epochs ({early:.4f} -> {late:.4f})")


# ---------------------------------------------------------------------------
# prediction


@dataclass(frozen=True)
class PredEntity:
    begin: int
    end: int
    type: str
    probability: float

    @property
    def span(self) -> Span:
        return Span(self.begin, self.end)


@dataclass(frozen=True)
class PredRelation:
    type: str
    head: int
    tail: int
    probability: float


@dataclass
class Prediction:
    entities: list[PredEntity]
    relations: list[PredRelation]
    pairs: list[tuple[int, int]] = field(default_factory=list)
    trigger_weights: np.ndarray | None = None

    def to_json(self, tokens: Sequence[str] | None = None) -> dict:
        ents = []
        for e in self.entities:
            item = {"begin": e.begin, "end": e.end, "type": e.type, "probability": e.probability}
            if tokens is not None:
                item["text"] = " ".join(tokens[e.begin:e.end])
            ents.append(item)
        rels = [{"type": r.type, "head": r.head, "tail": r.tail, "probability": r.probability}
                for r in self.relations]
        return {"entities": ents, "relations": rels}


def predict(model: Model, sentence: Sentence, threshold: float | None = None,
            feats: Features | None = None, want_triggers: bool = False) -> Prediction:
    """Entities are spans whose argmax is not None; relations are ordered,
    non-overlapping entity pairs scoring at or above ``threshold``."""
    threshold = model.cfg.relation_threshold if threshold is None else threshold
    feats = feats or model.featurize(sentence)
    stage = model.inference_stage
    with ad.no_grad():
        out = model.forward(feats, feats.all_spans, [], stage)
        probs = ad.softmax_rows(out.entity_logits).data
        best = probs.argmax(axis=1)
        entities = [PredEntity(s.begin, s.end, model.entity_labels[k], float(probs[i, k]))
                    for i, (s, k) in enumerate(zip(feats.all_spans, best)) if k != 0]
        spans = [e.span for e in entities]
        pairs = [(i, j) for i in range(len(spans)) for j in range(len(spans))
                 if i != j and not spans[i].overlaps(spans[j])]
        relations = []
        weights = None
        if pairs:
            out = model.forward(feats, spans, pairs, stage, want_triggers=want_triggers, E_g=out.E_g)
            rprobs = ad.sigmoid(out.relation_logits).data
            for p, (i, j) in enumerate(pairs):
                for r, name in enumerate(model.relation_types):
                    if rprobs[p, r] >= threshold:
                        relations.append(PredRelation(name, i, j, float(rprobs[p, r])))
            if out.trigger_weights is not None:
                weights = out.trigger_weights.data
    return Prediction(entities, relations, pairs, weights)


def filter_relations(prediction: Prediction, threshold: float) -> Prediction:
    """The same prediction keeping only relations scoring at or above ``threshold``."""
    kept = [r for r in prediction.relations if r.probability >= threshold]
    return Prediction(prediction.entities, kept, prediction.pairs, prediction.trigger_weights)


def predict_corpus(model: Model, corpus: Corpus, threshold: float | None = None) -> list[Prediction]:
    return [predict(model, s, threshold) for s in corpus.sentences]


def relation_triggers(sentence: Sentence, prediction: Prediction, k: int = 5,
                      stopwords=None) -> list[TriggerRanking]:
    """Top-``k`` trigger words for each predicted relation, aligned with
    ``prediction.relations``. Needs a prediction made with ``want_triggers``."""
    if prediction.relations and prediction.trigger_weights is None:
        raise ContractError("prediction carries no trigger weights; pass want_triggers=True")
    row = {pair: p for p, pair in enumerate(prediction.pairs)}
    positions = [i for e in prediction.entities for i in range(e.begin, e.end)]
    out = []
    for rel in prediction.relations:
        out.append(extract_triggers(sentence.tokens, prediction.trigger_weights[row[(rel.head, rel.tail)]],
                                    k, stopwords, entity_positions=positions))
    return out

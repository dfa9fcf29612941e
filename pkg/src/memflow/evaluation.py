"""Entity and relation precision / recall / F1 under strict or boundary matching."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ContractError

REGIMES = ("strict", "boundary")
AVERAGING = ("micro", "macro")


@dataclass
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    n_pred: int = 0
    n_gold: int = 0

    @classmethod
    def from_counts(cls, tp: int, n_pred: int, n_gold: int) -> "PRF":
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_gold if n_gold else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, tp, n_pred, n_gold)

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "tp": self.tp, "n_pred": self.n_pred, "n_gold": self.n_gold}


@dataclass
class TaskScore:
    overall: PRF
    per_type: dict[str, PRF] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"overall": self.overall.to_json(),
                "per_type": {k: v.to_json() for k, v in sorted(self.per_type.items())}}


@dataclass
class EvalReport:
    regime: str
    averaging: str
    entity: TaskScore
    relation: TaskScore

    def to_json(self) -> dict:
        return {"regime": self.regime, "averaging": self.averaging,
                "entity": self.entity.to_json(), "relation": self.relation.to_json()}

    def to_table(self) -> str:
        rows = [("task", "type", "P", "R", "F1")]
        for task, score in (("entity", self.entity), ("relation", self.relation)):
            for name, prf in sorted(score.per_type.items()):
                rows.append((task, name, *(f"{v:.4f}" for v in (prf.precision, prf.recall, prf.f1))))
            o = score.overall
            rows.append((task, f"[{self.averaging}]", *(f"{v:.4f}" for v in (o.precision, o.recall, o.f1))))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        head = f"regime={self.regime} averaging={self.averaging}"
        body = "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)
        return head + "\n" + body


def _entity_items(entities) -> set:
    return {(e.begin, e.end, e.type) for e in entities}


def _relation_items(entities, relations, regime: str) -> set:
    out = set()
    for r in relations:
        h, t = entities[r.head], entities[r.tail]
        if regime == "strict":
            out.add(((h.begin, h.end, h.type), (t.begin, t.end, t.type), r.type))
        else:
            out.add(((h.begin, h.end), (t.begin, t.end), r.type))
    return out


def _score(gold_sets: list[set], pred_sets: list[set], type_of, averaging: str) -> TaskScore:
    tp, n_pred, n_gold = Counter(), Counter(), Counter()
    for gold, pred in zip(gold_sets, pred_sets):
        for item in pred:
            n_pred[type_of(item)] += 1
        for item in gold:
            n_gold[type_of(item)] += 1
        for item in gold & pred:
            tp[type_of(item)] += 1
    types = sorted(set(n_pred) | set(n_gold))
    per_type = {t: PRF.from_counts(tp[t], n_pred[t], n_gold[t]) for t in types}
    if averaging == "micro":
        overall = PRF.from_counts(sum(tp.values()), sum(n_pred.values()), sum(n_gold.values()))
    else:
        if per_type:
            k = len(per_type)
            overall = PRF(sum(v.precision for v in per_type.values()) / k,
                          sum(v.recall for v in per_type.values()) / k,
                          sum(v.f1 for v in per_type.values()) / k,
                          sum(tp.values()), sum(n_pred.values()), sum(n_gold.values()))
        else:
            overall = PRF(0.0, 0.0, 0.0)
    return TaskScore(overall, per_type)


def score(gold: Sequence, predicted: Sequence, regime: str = "strict", averaging: str = "micro") -> EvalReport:
    """Compare gold sentences with predictions.

    Both sequences hold objects exposing ``entities`` (with ``begin``, ``end``,
    ``type``) and ``relations`` (with ``head``/``tail`` indices into that
    entity list and ``type``). Relations are directed.
    """
    if regime not in REGIMES or averaging not in AVERAGING:
        raise ValueError(f"unknown regime/averaging {regime!r}/{averaging!r}")
    if len(gold) != len(predicted):
        raise ContractError(f"{len(gold)} gold sentences vs {len(predicted)} predictions")
    ent = _score([_entity_items(g.entities) for g in gold],
                 [_entity_items(p.entities) for p in predicted],
                 lambda item: item[2], averaging)
    rel = _score([_relation_items(g.entities, g.relations, regime) for g in gold],
                 [_relation_items(p.entities, p.relations, regime) for p in predicted],
                 lambda item: item[2], averaging)
    return EvalReport(regime, averaging, ent, rel)

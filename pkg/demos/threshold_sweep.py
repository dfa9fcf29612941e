"""Relation F1 as the decision threshold moves from 0 to 1.

Predictions are made once at threshold 0 and then filtered, which is how
``memflow eval --threshold-sweep`` works too. Run: python demos/threshold_sweep.py
"""

import numpy as np

from memflow import predict, preset, score, synthetic_splits, train_two_stage
from memflow.train import filter_relations

train, test, _, _ = synthetic_splits(50, 20, seed=0)
model = train_two_stage(train, preset("desk")).model

for name, split in (("train", train), ("test", test)):
    base = [predict(model, s, threshold=0.0) for s in split.sentences]
    print(f"[{name}] threshold  precision  recall  F1")
    for t in np.round(np.arange(0.0, 1.01, 0.1), 2):
        rel = score(split.sentences, [filter_relations(p, t) for p in base]).relation.overall
        print(f"        {t:9.1f}  {rel.precision:9.3f}  {rel.recall:6.3f}  {rel.f1:.3f}")

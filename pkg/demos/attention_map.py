"""Word-level memory flow weights for one sentence, before and after training.

Run: python demos/attention_map.py
"""

import numpy as np

from memflow import preset, synthetic_splits, train_two_stage
from memflow.train import build_model

train, test, _, _ = synthetic_splits(50, 20, seed=0)
cfg = preset("desk")
sentence = test.sentences[0]
entity_words = {i for e in sentence.entities for i in range(e.begin, e.end)}


def show(model, title):
    trace = model.attention(model.featurize(sentence))["word"]
    print(title)
    for i, word in enumerate(sentence.tokens):
        mark = "*" if i in entity_words else " "
        bars = "  ".join(f"{kind[:3]} {trace[kind][i]:5.2f} {'#' * int(round(4 * trace[kind][i]))}"
                         for kind in ("entity", "relation"))
        print(f"  {mark} {word:>12s}  {bars}")
    print(f"  mean weight: entity {np.mean(trace['entity']):.2f}, relation {np.mean(trace['relation']):.2f}\n")


show(build_model(train, cfg), "untrained (entity words marked *)")
show(train_two_stage(train, cfg).model, "trained")

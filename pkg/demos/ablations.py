"""Switch modules off one at a time and compare held-out relation F1.

Each variant reuses the same seed, so parameter initialisation is identical
and only the ablated site differs. Run: python demos/ablations.py
"""

from memflow import predict, preset, score, synthetic_splits, train_two_stage

train, test, _, _ = synthetic_splits(50, 20, seed=0)
variants = {
    "full model": {},
    "no subword flow": {"subword_mfa": False},
    "no word flow": {"word_mfa": False},
    "no entity memory flow": {"entity_flow": False},
    "no relation memory flow": {"relation_flow": False},
    "no trigger sensor": {"trigger_sensor": False},
    "mean fusion": {"fusion_mode": "mean"},
    "no graph": {"fusion_mode": "none"},
    "stage 2 only": {"stage1_epochs": 0, "stage2_epochs": 10},
}
print(f"{'variant':26s} {'entity F1':>9s} {'relation F1':>11s}")
for name, changes in variants.items():
    model = train_two_stage(train, preset("desk", **changes)).model
    rep = score(test.sentences, [predict(model, s) for s in test.sentences])
    print(f"{name:26s} {rep.entity.overall.f1:9.3f} {rep.relation.overall.f1:11.3f}")

"""Model checkpoints as canonical JSON.

Layout (keys sorted, no insignificant whitespace, UTF-8, trailing newline)::

    {"config": {...TrainConfig fields...},
     "dependency_labels": [...], "entity_types": [...], "relation_types": [...],
     "format": "memflow-checkpoint", "version": 1,
     "parameters": {"<name>": {"dtype": "float64", "shape": [r, c],
                               "data": "<base64 of little-endian float64, C order>"}},
     "vocab": ["[CLS]", "[UNK]", ...]}

Arrays are stored bit-exactly, so save -> load -> save yields identical bytes.
Memory slots are stored with the other parameters under ``memory.entity`` and
``memory.relation``. The master seed lives in the config.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .config import from_mapping
from .corpus import dumps
from .encoder import Vocab
from .errors import CompatibilityError, ConfigError
from .model import Model

FORMAT = "memflow-checkpoint"
VERSION = 1


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"dtype": "float64", "shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(entry: dict) -> np.ndarray:
    if entry.get("dtype") != "float64":
        raise CompatibilityError(f"unsupported array dtype {entry.get('dtype')!r}")
    raw = base64.b64decode(entry["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).astype(np.float64)


def to_dict(model: Model) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "config": model.cfg.to_json(),
        "vocab": list(model.vocab.pieces),
        "entity_types": model.entity_labels[1:],
        "relation_types": list(model.relation_types),
        "dependency_labels": list(model.dependency_labels),
        "parameters": {name: _encode_array(p.data) for name, p in model.named_parameters().items()},
    }


def from_dict(data: dict) -> Model:
    if data.get("format") != FORMAT:
        raise CompatibilityError("not a memflow checkpoint")
    if data.get("version") != VERSION:
        raise CompatibilityError(f"checkpoint version {data.get('version')} is not supported")
    try:
        cfg = from_mapping(data["config"])
        model = Model(cfg, Vocab(data["vocab"]), data["entity_types"], data["relation_types"],
                      data["dependency_labels"])
        stored = data["parameters"]
    except ConfigError as exc:
        raise CompatibilityError(f"checkpoint config is invalid: {exc}") from None
    except KeyError as exc:
        raise CompatibilityError(f"checkpoint lacks field {exc}") from None
    params = model.named_parameters()
    if set(stored) != set(params):
        missing = sorted(set(params) - set(stored))
        extra = sorted(set(stored) - set(params))
        raise CompatibilityError(f"parameter names differ (missing {missing}, unexpected {extra})")
    for name, p in params.items():
        value = _decode_array(stored[name])
        if value.shape != p.shape:
            raise CompatibilityError(f"parameter {name} has shape {value.shape}, expected {p.shape}")
        p.data = value
    return model


def save(model: Model, path) -> None:
    Path(path).write_text(dumps(to_dict(model)) + "\n", encoding="utf-8")


def load(path) -> Model:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CompatibilityError(f"cannot read checkpoint {path}: {exc}") from None
    if not isinstance(data, dict):
        raise CompatibilityError("checkpoint must hold a JSON object")
    return from_dict(data)


def check_corpus(model: Model, corpus) -> None:
    """Raise if the corpus uses labels the checkpoint was not trained with."""
    problems = []
    for field, known in (("entity_types", model.entity_labels[1:]), ("relation_types", model.relation_types)):
        unknown = sorted(set(getattr(corpus, field)) - set(known))
        if unknown:
            problems.append(f"{field} not in checkpoint: {unknown}")
    unknown = sorted({d.label for s in corpus.sentences for d in s.deps} - set(model.dependency_labels))
    if unknown:
        problems.append(f"dependency labels not in checkpoint: {unknown}")
    if problems:
        raise CompatibilityError("; ".join(problems))

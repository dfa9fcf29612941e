"""Corpus format, validation, and the synthetic generator with planted triggers.

On disk a corpus is UTF-8 JSON, either a bare array of sentence objects or
an object with label vocabularies and a ``sentences`` array::

    {"entity_types": [...], "relation_types": [...], "dependency_labels": [...],
     "sentences": [{"tokens": [...],
                    "entities": [{"type": "PER", "begin": 0, "end": 2}],
                    "relations": [{"type": "Work_For", "head": 0, "tail": 1}],
                    "deps": [{"head": -1, "label": "root"}, ...]}]}

Entity spans are word-level and half-open; relation ``head``/``tail`` index
the sentence's entity list; a dependency ``head`` of -1 marks the root.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorpusError, CorpusValidationError


@dataclass(frozen=True)
class Entity:
    type: str
    begin: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.begin, self.end)


@dataclass(frozen=True)
class Relation:
    type: str
    head: int
    tail: int


@dataclass(frozen=True)
class Dep:
    head: int
    label: str


@dataclass
class Sentence:
    tokens: list[str]
    entities: list[Entity] = field(default_factory=list)
    relations: list[Relation] = field(default_factory=list)
    deps: list[Dep] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "entities": [{"type": e.type, "begin": e.begin, "end": e.end} for e in self.entities],
            "relations": [{"type": r.type, "head": r.head, "tail": r.tail} for r in self.relations],
            "deps": [{"head": d.head, "label": d.label} for d in self.deps],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Sentence":
        return cls(
            tokens=list(obj["tokens"]),
            entities=[Entity(e["type"], int(e["begin"]), int(e["end"])) for e in obj.get("entities", [])],
            relations=[Relation(r["type"], int(r["head"]), int(r["tail"])) for r in obj.get("relations", [])],
            deps=[Dep(int(d["head"]), d["label"]) for d in obj.get("deps", [])],
        )


@dataclass
class Corpus:
    sentences: list[Sentence]
    entity_types: list[str]
    relation_types: list[str]
    dependency_labels: list[str]

    def __len__(self) -> int:
        return len(self.sentences)

    def to_json(self) -> dict:
        return {
            "entity_types": list(self.entity_types),
            "relation_types": list(self.relation_types),
            "dependency_labels": list(self.dependency_labels),
            "sentences": [s.to_json() for s in self.sentences],
        }

    def digest(self) -> str:
        return hashlib.sha256(dumps(self.to_json()).encode("utf-8")).hexdigest()

    def subset(self, sentences: list[Sentence]) -> "Corpus":
        return Corpus(sentences, list(self.entity_types), list(self.relation_types), list(self.dependency_labels))


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, no whitespace, UTF-8 characters kept."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


_SENTENCE_KEYS = {"tokens", "entities", "relations", "deps"}


def _raw_violations(i: int, obj) -> list[str]:
    if not isinstance(obj, dict):
        return [f"sentence {i}: not an object"]
    out = []
    extra = set(obj) - _SENTENCE_KEYS
    if extra:
        out.append(f"sentence {i}: unknown fields {sorted(extra)}")
    if "tokens" not in obj or not isinstance(obj["tokens"], list):
        out.append(f"sentence {i}: tokens: missing or not a list")
    for key in ("entities", "relations", "deps"):
        if key in obj and not isinstance(obj[key], list):
            out.append(f"sentence {i}: {key}: not a list")
    return out


def validate_sentence(i: int, s: Sentence, entity_types=None, relation_types=None,
                      dependency_labels=None, require_deps: bool = True) -> list[str]:
    out = []
    n = len(s.tokens)
    for k, tok in enumerate(s.tokens):
        if not isinstance(tok, str) or not tok.strip():
            out.append(f"sentence {i}: tokens[{k}]: empty token")
    for k, e in enumerate(s.entities):
        if not (0 <= e.begin < e.end <= n):
            out.append(f"sentence {i}: entities[{k}]: span [{e.begin}, {e.end}) outside {n} tokens")
        if entity_types is not None and e.type not in entity_types:
            out.append(f"sentence {i}: entities[{k}]: unknown type {e.type!r}")
    for k, r in enumerate(s.relations):
        for end in ("head", "tail"):
            idx = getattr(r, end)
            if not 0 <= idx < len(s.entities):
                out.append(f"sentence {i}: relations[{k}]: {end} entity index {idx} out of range")
        if relation_types is not None and r.type not in relation_types:
            out.append(f"sentence {i}: relations[{k}]: unknown type {r.type!r}")
    if s.deps or require_deps:
        if len(s.deps) != n:
            out.append(f"sentence {i}: deps: {len(s.deps)} entries for {n} tokens")
        else:
            roots = sum(d.head == -1 for d in s.deps)
            if n and roots != 1:
                out.append(f"sentence {i}: deps: {roots} roots, expected exactly one")
            for k, d in enumerate(s.deps):
                if not (d.head == -1 or 0 <= d.head < n) or d.head == k:
                    out.append(f"sentence {i}: deps[{k}]: invalid head {d.head}")
                if dependency_labels is not None and d.label not in dependency_labels:
                    out.append(f"sentence {i}: deps[{k}]: unknown label {d.label!r}")
    return out


def parse_corpus(data, require_deps: bool = True) -> Corpus:
    """Build and validate a corpus from decoded JSON."""
    header = {}
    if isinstance(data, dict):
        header = data
        raw = data.get("sentences")
        if not isinstance(raw, list):
            raise CorpusValidationError(["corpus: sentences: missing or not a list"])
    elif isinstance(data, list):
        raw = data
    else:
        raise CorpusValidationError(["corpus: expected a JSON array or object"])
    violations = []
    for i, obj in enumerate(raw):
        violations.extend(_raw_violations(i, obj))
    if violations:
        raise CorpusValidationError(violations)
    try:
        sentences = [Sentence.from_json(obj) for obj in raw]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusValidationError([f"corpus: malformed field: {exc}"]) from None
    ent = header.get("entity_types") or sorted({e.type for s in sentences for e in s.entities})
    rel = header.get("relation_types") or sorted({r.type for s in sentences for r in s.relations})
    dep = header.get("dependency_labels") or sorted({d.label for s in sentences for d in s.deps})
    for i, s in enumerate(sentences):
        violations.extend(validate_sentence(i, s, ent, rel, dep, require_deps))
    if violations:
        raise CorpusValidationError(violations)
    return Corpus(sentences, list(ent), list(rel), list(dep))


def load_corpus(path, require_deps: bool = True) -> Corpus:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed JSON in {path}: {exc}") from None
    return parse_corpus(data, require_deps)


def save_corpus(corpus: Corpus, path) -> None:
    Path(path).write_text(json.dumps(corpus.to_json(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# synthetic corpus

NAMES = {
    "PER": ["alice", "maria lopez", "john smith", "chen wei", "omar", "sofia ricci", "david", "emma stone",
            "lucas", "nina petrova", "kenji sato", "grace", "pablo ruiz", "hannah"],
    "ORG": ["acme", "globex corp", "initech", "united bank", "vandelay", "northwind", "stark labs",
            "umbrella inc", "hooli", "cyberdyne", "wayne group", "soylent"],
    "LOC": ["paris", "new york", "lima", "oslo", "cairo", "berlin", "san diego", "tokyo", "nairobi",
            "buenos aires", "madrid", "toronto"],
}

DEFAULT_RELATIONS = {
    "Work_For": ("PER", "ORG"),
    "Live_In": ("PER", "LOC"),
}

DEFAULT_TRIGGERS = {
    "Work_For": ["joined", "hired", "employs", "works"],
    "Live_In": ["lives", "resides", "settled", "dwells"],
}

# content words with no relational meaning; some are verbs so that the
# dependency label of a trigger is not unique to triggers
FILLER_VERBS = ["said", "confirmed", "noted", "announced", "reported", "visited", "praised"]
FILLER_CONTENT = ["yesterday", "officials", "reportedly", "recently", "local", "sources", "quietly",
                  "several", "months", "morning", "friends", "news", "briefly", "colleagues", "today",
                  "statement", "widely", "annual", "meeting", "press"]
FUNCTION_WORDS = ["the", "in", "of", "at", "with", "for", "and", "on", "by", "to"]
DEP_LABELS = ["root", "flat", "ent", "pred", "func", "mod"]


@dataclass
class SynthSpec:
    n_sentences: int = 70
    entity_types: tuple[str, ...] = ("PER", "ORG", "LOC")
    relation_types: tuple[str, ...] = ("Work_For", "Live_In")
    trigger_lexicon: dict[str, list[str]] = field(default_factory=lambda: dict(DEFAULT_TRIGGERS))
    relation_args: dict[str, tuple[str, str]] = field(default_factory=lambda: dict(DEFAULT_RELATIONS))
    seed: int = 0
    relation_fraction: float = 0.7

    def validate(self) -> None:
        if not self.entity_types or not self.relation_types:
            raise ValueError("synthetic corpus needs at least one entity and one relation type")
        for r in self.relation_types:
            if not self.trigger_lexicon.get(r):
                raise ValueError(f"relation {r!r} has no trigger words")
            if r not in self.relation_args:
                raise ValueError(f"relation {r!r} has no argument types")
            for t in self.relation_args[r]:
                if t not in self.entity_types:
                    raise ValueError(f"relation {r!r} uses undeclared entity type {t!r}")


def _names(etype: str) -> list[str]:
    return NAMES.get(etype) or [f"{etype.lower()}{i}" for i in range(10)]


def _fill(rng, count: int) -> list[tuple[str, str]]:
    out = []
    for _ in range(count):
        u = rng.random()
        if u < 0.35:
            out.append((FUNCTION_WORDS[rng.integers(len(FUNCTION_WORDS))], "func"))
        elif u < 0.55:
            out.append((FILLER_VERBS[rng.integers(len(FILLER_VERBS))], "pred"))
        else:
            out.append((FILLER_CONTENT[rng.integers(len(FILLER_CONTENT))], "mod"))
    return out


def _assemble(pieces) -> Sentence:
    """``pieces`` is a list of ("w", word, label) or ("e", words, type) items."""
    tokens, labels, entities = [], [], []
    for kind, value, tag in pieces:
        if kind == "e":
            words = value.split()
            entities.append(Entity(tag, len(tokens), len(tokens) + len(words)))
            tokens.extend(words)
            labels.extend(["ent"] + ["flat"] * (len(words) - 1))
        else:
            tokens.append(value)
            labels.append(tag)
    deps = [Dep(i - 1, "root" if i == 0 else lab) for i, lab in enumerate(labels)]
    return Sentence(tokens, entities, [], deps)


def _synth_sentence(rng, spec: SynthSpec) -> tuple[Sentence, str | None, str | None]:
    with_relation = rng.random() < spec.relation_fraction
    rel = spec.relation_types[rng.integers(len(spec.relation_types))]
    head_t, tail_t = spec.relation_args[rel]
    head = _names(head_t)[rng.integers(len(_names(head_t)))]
    tail_pool = [n for n in _names(tail_t) if n != head]
    tail = tail_pool[rng.integers(len(tail_pool))]
    extra = None
    if rng.random() < 0.4:
        others = [t for t in spec.entity_types if t not in (head_t,)]
        extra_t = others[rng.integers(len(others))]
        pool = [n for n in _names(extra_t) if n not in (head, tail)]
        extra = ("e", pool[rng.integers(len(pool))], extra_t)
    trigger = None
    middle = _fill(rng, int(rng.integers(1, 3)))
    pieces = [*[("w", w, lab) for w, lab in _fill(rng, int(rng.integers(1, 4)))], ("e", head, head_t)]
    placement = rng.random()
    if with_relation:
        lexicon = spec.trigger_lexicon[rel]
        trigger = lexicon[rng.integers(len(lexicon))]
    if trigger is not None and placement < 0.7:
        pieces += [("w", trigger, "pred"), *[("w", w, lab) for w, lab in middle]]
    else:
        pieces += [("w", w, lab) for w, lab in middle]
    pieces.append(("e", tail, tail_t))
    pieces += [("w", w, lab) for w, lab in _fill(rng, int(rng.integers(1, 4)))]
    if trigger is not None and placement >= 0.7:
        pieces += [("w", trigger, "pred"), *[("w", w, lab) for w, lab in _fill(rng, 1)]]
    if extra is not None:
        pieces += [("w", "with", "func"), extra, *[("w", w, lab) for w, lab in _fill(rng, 1)]]
    s = _assemble(pieces)
    if with_relation:
        s.relations.append(Relation(rel, 0, 1))
    return s, (rel if with_relation else None), trigger


def generate_synthetic(spec: SynthSpec | None = None) -> tuple[Corpus, list[str | None]]:
    """Template sentences; each relation instance comes with one planted trigger.

    Returns the corpus and, per sentence, the planted trigger (or ``None``).
    Sentences without a relation contain the same entity types but no
    trigger word, so only the trigger signals the relation.
    """
    spec = spec or SynthSpec()
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    sentences, triggers = [], []
    for _ in range(spec.n_sentences):
        s, _, trig = _synth_sentence(rng, spec)
        sentences.append(s)
        triggers.append(trig)
    corpus = Corpus(sentences, list(spec.entity_types), list(spec.relation_types), list(DEP_LABELS))
    return corpus, triggers


def synthetic_splits(n_train: int = 50, n_test: int = 20, seed: int = 0) -> tuple[Corpus, Corpus, list, list]:
    """Default desk-scale corpus: 3 entity types, 2 relation types."""
    corpus, triggers = generate_synthetic(SynthSpec(n_sentences=n_train + n_test, seed=seed))
    train = corpus.subset(corpus.sentences[:n_train])
    test = corpus.subset(corpus.sentences[n_train:])
    return train, test, triggers[:n_train], triggers[n_train:]

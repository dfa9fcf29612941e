import json

import pytest
from hypothesis import given, strategies as st

from memflow.corpus import (Corpus, SynthSpec, dumps, generate_synthetic, load_corpus, parse_corpus, save_corpus,
                            synthetic_splits)
from memflow.errors import CorpusError, CorpusValidationError
from memflow.spans import default_stopwords


def raw_sentence(**changes):
    obj = {"tokens": ["ann", "joined", "acme"],
           "entities": [{"type": "PER", "begin": 0, "end": 1}, {"type": "ORG", "begin": 2, "end": 3}],
           "relations": [{"type": "Work_For", "head": 0, "tail": 1}],
           "deps": [{"head": 1, "label": "nsubj"}, {"head": -1, "label": "root"}, {"head": 1, "label": "obj"}]}
    obj.update(changes)
    return obj


def test_parse_bare_array_infers_vocabularies():
    c = parse_corpus([raw_sentence()])
    assert c.entity_types == ["ORG", "PER"]
    assert c.relation_types == ["Work_For"]
    assert c.dependency_labels == ["nsubj", "obj", "root"]


def test_parse_header_object_keeps_declared_order():
    c = parse_corpus({"entity_types": ["PER", "ORG"], "relation_types": ["Work_For", "Live_In"],
                      "sentences": [raw_sentence()]})
    assert c.entity_types == ["PER", "ORG"] and c.relation_types == ["Work_For", "Live_In"]


@pytest.mark.parametrize("bad,fragment", [
    (dict(entities=[{"type": "PER", "begin": 2, "end": 5}]), "outside 3 tokens"),
    (dict(relations=[{"type": "Work_For", "head": 0, "tail": 4}]), "tail entity index 4"),
    (dict(tokens=["ann", " ", "acme"]), "empty token"),
    (dict(deps=[{"head": -1, "label": "root"}]), "1 entries for 3 tokens"),
    (dict(deps=[{"head": -1, "label": "root"}, {"head": -1, "label": "root"}, {"head": 1, "label": "obj"}]),
     "2 roots"),
    (dict(deps=[{"head": 0, "label": "x"}, {"head": -1, "label": "root"}, {"head": 1, "label": "obj"}]),
     "invalid head 0"),
    (dict(extra=1), "unknown fields"),
])
def test_validation_reports_each_violation(bad, fragment):
    with pytest.raises(CorpusValidationError) as err:
        parse_corpus([raw_sentence(**bad)])
    assert any(fragment in v for v in err.value.violations)


def test_declared_types_are_enforced():
    with pytest.raises(CorpusValidationError) as err:
        parse_corpus({"entity_types": ["PER"], "sentences": [raw_sentence()]})
    assert any("unknown type 'ORG'" in v for v in err.value.violations)


def test_deps_optional_when_not_required():
    c = parse_corpus([raw_sentence(deps=[])], require_deps=False)
    assert c.sentences[0].deps == []
    with pytest.raises(CorpusValidationError):
        parse_corpus([raw_sentence(deps=[])])


def test_load_errors(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(CorpusError):
        load_corpus(bad)
    with pytest.raises(CorpusValidationError):
        parse_corpus(42)


def test_save_load_round_trip(tmp_path):
    corpus, _ = generate_synthetic(SynthSpec(n_sentences=10, seed=2))
    path = tmp_path / "c.json"
    save_corpus(corpus, path)
    again = load_corpus(path)
    assert again.to_json() == corpus.to_json()
    assert again.digest() == corpus.digest()


def test_dumps_is_canonical():
    assert dumps({"b": 1, "a": "é"}) == '{"a":"é","b":1}'
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})


@given(st.integers(0, 2**16))
def test_synthetic_corpus_is_valid_and_plants_one_trigger_per_relation(seed):
    corpus, triggers = generate_synthetic(SynthSpec(n_sentences=15, seed=seed))
    parse_corpus(corpus.to_json())
    stop = default_stopwords()
    for s, trig in zip(corpus.sentences, triggers):
        assert len(s.relations) == (trig is not None)
        if trig is not None:
            rel = s.relations[0].type
            assert trig in SynthSpec().trigger_lexicon[rel]
            assert s.tokens.count(trig) == 1 and trig not in stop
        lexicon = {w for ws in SynthSpec().trigger_lexicon.values() for w in ws}
        assert sum(t in lexicon for t in s.tokens) == (trig is not None)


def test_synthetic_splits_defaults():
    train, test, tr_trig, te_trig = synthetic_splits()
    assert (len(train), len(test)) == (50, 20)
    assert len(train.entity_types) == 3 and len(train.relation_types) == 2
    assert len(tr_trig) == 50 and len(te_trig) == 20
    assert synthetic_splits()[0].digest() == train.digest()


def test_synth_spec_validation():
    with pytest.raises(ValueError):
        generate_synthetic(SynthSpec(relation_types=("Owns",)))
    with pytest.raises(ValueError):
        generate_synthetic(SynthSpec(entity_types=("PER",)))


def test_corpus_file_is_plain_json(tmp_path):
    corpus = Corpus([], ["PER"], ["R"], ["root"])
    save_corpus(corpus, tmp_path / "c.json")
    assert json.loads((tmp_path / "c.json").read_text(encoding="utf-8"))["sentences"] == []

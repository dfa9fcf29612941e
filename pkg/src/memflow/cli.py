"""Command-line interface.

Commands: ``synth``, ``train``, ``eval``, ``predict``, ``triggers`` and
``dump-attention``. Every JSON file or stream written here uses sorted keys.

Exit status:
    0  success
    2  bad command-line usage
    3  configuration error (unknown key, wrong type, inconsistent values)
    4  corpus error (unreadable, malformed or invalid corpus or input)
    5  compatibility error (checkpoint unreadable or mismatched with the corpus)
    6  training diverged (fail-fast check)
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import checkpoint as ckpt
from .config import PRESETS, TrainConfig, from_mapping
from .corpus import SynthSpec, dumps, generate_synthetic, load_corpus, save_corpus
from .errors import CompatibilityError, ConfigError, CorpusError, TrainingDiverged
from .evaluation import AVERAGING, REGIMES, score
from .train import filter_relations, predict, relation_triggers, train_two_stage

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_CORPUS, EXIT_COMPAT, EXIT_DIVERGED = 0, 2, 3, 4, 5, 6


# ---------------------------------------------------------------------------
# helpers


def _write_json(obj, out: str | None) -> None:
    text = dumps(obj) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("config overrides (take precedence over --config)")
    for f in dataclasses.fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        if isinstance(f.default, bool):
            group.add_argument(flag, dest=f"cfg_{f.name}", action=argparse.BooleanOptionalAction, default=None)
        else:
            group.add_argument(flag, dest=f"cfg_{f.name}", type=type(f.default), default=None,
                               metavar=type(f.default).__name__.upper())


def _resolve_config(args) -> TrainConfig:
    values = dict(PRESETS[args.preset])
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        values.update(loaded)
    for f in dataclasses.fields(TrainConfig):
        v = getattr(args, f"cfg_{f.name}")
        if v is not None:
            values[f.name] = v
    return from_mapping(values)


def parse_sweep(text: str) -> list[float]:
    """``lo:hi:step`` -> thresholds from lo to hi inclusive."""
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("sweep needs step > 0 and hi >= lo")
    n = int(round((hi - lo) / step)) + 1
    return [round(lo + k * step, 10) for k in range(n)]


def _entity_json(e, tokens) -> dict:
    return {"begin": e.begin, "end": e.end, "type": e.type, "text": " ".join(tokens[e.begin:e.end])}


def masked_weights(weights: np.ndarray, masked_positions) -> list[float] | None:
    """Zero the masked positions and renormalise the rest to sum 1.

    Returns ``None`` when every position is masked or the rest carries no weight.
    """
    w = np.asarray(weights, dtype=float).copy()
    w[list(masked_positions)] = 0.0
    total = w.sum()
    if total <= 0.0:
        return None
    return (w / total).tolist()


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = SynthSpec(n_sentences=args.n_train + args.n_test, seed=args.seed)
    corpus, triggers = generate_synthetic(spec)
    train = corpus.subset(corpus.sentences[:args.n_train])
    test = corpus.subset(corpus.sentences[args.n_train:])
    save_corpus(train, out / "train.json")
    save_corpus(test, out / "test.json")
    _write_json({"train": triggers[:args.n_train], "test": triggers[args.n_train:]}, str(out / "triggers.json"))
    print(f"wrote {len(train)} train / {len(test)} test sentences to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    corpus = load_corpus(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    metrics_path = out / "metrics.jsonl"
    metrics_path.write_text("", encoding="utf-8")

    def on_epoch(record, model):
        with metrics_path.open("a", encoding="utf-8") as fh:
            fh.write(dumps(record.to_json()) + "\n")
        print(f"epoch {record.epoch} stage {record.stage} loss {record.loss:.6f}", flush=True)

    result = train_two_stage(corpus, cfg, on_epoch=on_epoch)
    ckpt.save(result.model, out / "checkpoint.json")
    report = score(corpus.sentences, [predict(result.model, s) for s in corpus.sentences])
    manifest = {
        "version": __version__,
        "config": cfg.to_json(),
        "seeds": {"master": cfg.seed},
        "corpus": {"train": {"path": str(args.corpus), "sha256": corpus.digest(), "sentences": len(corpus)}},
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "degraded": result.degraded,
        "final_metrics": {"loss": result.history[-1].loss if result.history else None,
                          "train": report.to_json()},
    }
    _write_json(manifest, str(out / "manifest.json"))
    print(report.to_table())
    return EXIT_OK


def _load_pair(args, require_deps: bool = True) -> tuple:
    model = ckpt.load(args.checkpoint)
    corpus = load_corpus(getattr(args, "corpus", None) or args.input, require_deps=require_deps)
    ckpt.check_corpus(model, corpus)
    return model, corpus


def cmd_eval(args) -> int:
    model, corpus = _load_pair(args)
    regimes = list(REGIMES) if args.regime == "both" else [args.regime]
    # one pass at threshold 0 keeps every scored pair; higher thresholds filter it
    base = [predict(model, s, threshold=0.0) for s in corpus.sentences]
    if args.threshold_sweep:
        rows = []
        for regime in regimes:
            for t in args.threshold_sweep:
                rep = score(corpus.sentences, [filter_relations(p, t) for p in base], regime, args.averaging)
                rows.append({"regime": regime, "threshold": t, "relation_f1": rep.relation.overall.f1})
                print(f"{regime}\t{t:.4f}\t{rep.relation.overall.f1:.4f}")
        if args.out:
            _write_json({"sweep": rows}, args.out)
        return EXIT_OK
    t = model.cfg.relation_threshold if args.threshold is None else args.threshold
    reports = []
    for regime in regimes:
        rep = score(corpus.sentences, [filter_relations(p, t) for p in base], regime, args.averaging)
        reports.append(rep.to_json())
        print(rep.to_table())
    if args.out:
        _write_json({"threshold": t, "reports": reports}, args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    model, corpus = _load_pair(args, require_deps=False)
    out = []
    for s in corpus.sentences:
        p = predict(model, s, threshold=args.threshold)
        out.append({"tokens": list(s.tokens), **p.to_json(s.tokens)})
    _write_json(out, args.out)
    return EXIT_OK


def cmd_triggers(args) -> int:
    model, corpus = _load_pair(args, require_deps=False)
    stopwords = None
    if args.stopwords:
        try:
            lines = Path(args.stopwords).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read stopword file: {exc}") from None
        stopwords = [w.strip() for w in lines if w.strip() and not w.startswith("#")]
    out = []
    for s in corpus.sentences:
        p = predict(model, s, threshold=args.threshold, want_triggers=True)
        rels = []
        for rel, ranking in zip(p.relations, relation_triggers(s, p, args.k, stopwords)):
            rels.append({
                "head": _entity_json(p.entities[rel.head], s.tokens),
                "tail": _entity_json(p.entities[rel.tail], s.tokens),
                "relation": rel.type,
                "probability": rel.probability,
                "triggers": [{"word": w, "score": sc} for w, sc in ranking.words],
            })
        out.append({"tokens": list(s.tokens), "relations": rels})
    _write_json(out, args.out)
    return EXIT_OK


def cmd_dump_attention(args) -> int:
    model, corpus = _load_pair(args, require_deps=False)
    out = []
    for s in corpus.sentences:
        feats = model.featurize(s)
        if s.entities:
            source, ents = "gold", [(e.begin, e.end) for e in s.entities]
        else:
            source, ents = "predicted", [(e.begin, e.end) for e in predict(model, s, feats=feats).entities]
        word_mask = sorted({i for b, e in ents for i in range(b, e)})
        spans = [(b - 1, e - 1) for b, e in feats.sub.word_spans]
        sub_mask = sorted({j for i in word_mask for j in range(*spans[i])})
        traces = model.attention(feats)
        levels = {}
        for level, mask in (("subword", sub_mask), ("word", word_mask)):
            levels[level] = {kind: {"raw": np.asarray(w).tolist(), "masked": masked_weights(w, mask)}
                             for kind, w in traces[level].items()}
        out.append({
            "tokens": list(s.tokens),
            "pieces": feats.sub.pieces[1:],
            "word_pieces": [list(sp) for sp in spans],
            "entities": {"source": source, "spans": [list(e) for e in ents]},
            "attention": levels,
        })
    _write_json(out, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memflow", description="Joint entity and relation extraction.")
    p.add_argument("--version", action="version", version=f"memflow {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write the synthetic train/test corpus")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--n-train", type=int, default=50)
    s.add_argument("--n-test", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="run two-stage training")
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--config", help="JSON file with TrainConfig keys")
    t.add_argument("--preset", choices=sorted(PRESETS), default="default",
                   help="base values applied before --config")
    _add_config_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a corpus")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--regime", choices=[*REGIMES, "both"], default="strict")
    e.add_argument("--averaging", choices=list(AVERAGING), default="micro")
    e.add_argument("--threshold", type=float, default=None, help="relation threshold (default: from checkpoint)")
    e.add_argument("--threshold-sweep", type=parse_sweep, metavar="LO:HI:STEP")
    e.add_argument("--out", help="write the JSON report here")
    e.set_defaults(func=cmd_eval)

    for name, func, helptext in (("predict", cmd_predict, "entities and relations per sentence"),
                                 ("triggers", cmd_triggers, "top-k trigger words per predicted relation"),
                                 ("dump-attention", cmd_dump_attention, "memory flow attention weights")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--checkpoint", required=True)
        c.add_argument("--input", required=True, help="corpus JSON; only tokens are required")
        c.add_argument("--out", help="output file (default: stdout)")
        if name != "dump-attention":
            c.add_argument("--threshold", type=float, default=None)
        if name == "triggers":
            c.add_argument("--k", type=int, default=5)
            c.add_argument("--stopwords", help="file with one stopword per line")
        c.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        code, err = EXIT_CONFIG, exc
    except CompatibilityError as exc:
        code, err = EXIT_COMPAT, exc
    except CorpusError as exc:
        code, err = EXIT_CORPUS, exc
    except TrainingDiverged as exc:
        code, err = EXIT_DIVERGED, exc
    print(f"memflow: error: {err}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

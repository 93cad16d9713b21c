"""Command-line entry point: ``langsg <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .core import Vocabulary, load_dataset, load_vocabulary, save_dataset, save_vocabulary, write_jsonl
from .evaluator import EvalConfig
from .inference import TASKS
from .labeler import LossWeights, PairFilterConfig
from .matcher import CLOSED, OPEN
from .model import load_checkpoint
from .parser import DEFAULT_RULES, ParseRuleSet
from .pipeline import (
    StageError,
    graph_dot,
    load_graphs,
    load_labels,
    load_lexicon,
    run_eval,
    run_infer,
    run_label,
    run_parse,
    run_pipeline,
    run_stats,
    run_train,
    save_graphs,
)
from .synth import SynthConfig, synth_dataset

log = logging.getLogger("langsg")

_ABLATE = {"none": "none", "text": "mask_text", "visual": "mask_visual"}


def _common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--seed", type=int, help="random seed (default 0; pipeline: the config's seed)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for per-image work (default 1)")
    p.add_argument("--out", required=True, help=out_help)


def cmd_parse(a) -> int:
    rules = ParseRuleSet.from_json(a.rules) if a.rules else DEFAULT_RULES
    recs = run_parse(a.data, a.out, rules)
    n = sum(len(r.parsed_triplets or []) for r in recs)
    print(f"parsed {len(recs)} images, {n} triplets -> {a.out}")
    return 0


def cmd_label(a) -> int:
    recs = load_dataset(a.data)
    vocab = load_vocabulary(a.vocab) if a.vocab else None
    lex = load_lexicon(a.lexicon)
    vocab, rows = run_label(recs, vocab, lex, mode=a.mode, supervision=a.supervision, seed=a.seed,
                            pair_filter=PairFilterConfig(distance_ratio=a.distance_ratio),
                            min_obj_freq=a.min_obj_freq, min_pred_freq=a.min_pred_freq)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(rows, out / "labels.jsonl")
    save_vocabulary(vocab, out / "vocab.json")
    n_pos = sum(1 for r in rows for p in r["pairs"] if p[3] != 0)
    print(f"labeled {len(rows)} images, {n_pos} positive pairs -> {out}")
    return 0


def cmd_stats(a) -> int:
    recs = load_dataset(a.data)
    target = load_dataset(a.target) if a.target else recs
    stats = run_stats(recs, target, load_vocabulary(a.vocab), load_lexicon(a.lexicon))
    Path(a.out).write_text(json.dumps(stats, indent=1, sort_keys=True), encoding="utf-8")
    print(f"wrote statistics and loss weights -> {a.out}")
    return 0


def cmd_train(a) -> int:
    config = json.loads(Path(a.config).read_text(encoding="utf-8")) if a.config else {}
    train_section = dict(config.get("train", {}))
    train_section.setdefault("threads", a.threads)
    if a.negatives is not None:
        train_section["negatives_per_positive"] = a.negatives
    weights = None
    if a.weights:
        weights = LossWeights.from_json(json.loads(Path(a.weights).read_text(encoding="utf-8"))["weights"])
        train_section["weighted_loss"] = True
    config["train"] = train_section
    ckpt = run_train(load_dataset(a.data), load_labels(a.labels), load_vocabulary(a.vocab), config, a.out,
                     weights=weights, seed=a.seed)
    print(f"trained {ckpt.meta['epochs_done']} epochs, final loss {ckpt.meta['final_loss']:.6f} -> {a.out}")
    return 0


def cmd_infer(a) -> int:
    if a.mode == OPEN and not a.target_vocab:
        raise ValueError("--mode open needs --target-vocab")
    ckpt = load_checkpoint(a.ckpt)
    target = load_vocabulary(a.target_vocab) if a.mode == OPEN else None
    lex = load_lexicon(a.lexicon)
    recs = load_dataset(a.data)
    graphs = run_infer(ckpt, recs, task=a.task, ablate=_ABLATE[a.ablate], seed=a.seed, threads=a.threads,
                       target_vocab=target, lex=lex, use_max=a.max_transfer)
    save_graphs(graphs, a.out)
    if a.dot:
        vocab = target or Vocabulary.from_names(ckpt.object_names[1:], ckpt.predicate_names[1:])
        d = Path(a.dot)
        d.mkdir(parents=True, exist_ok=True)
        for image_id, g in graphs.items():
            (d / f"{image_id}.dot").write_text(graph_dot(image_id, g, vocab), encoding="utf-8")
    print(f"wrote {len(graphs)} graphs -> {a.out}")
    return 0


def cmd_eval(a) -> int:
    ks = tuple(int(k) for k in a.k.split(","))
    cfg = EvalConfig(mode=a.mode, ks=ks, iou_threshold=a.iou, aggregate=a.aggregate)
    names = load_vocabulary(a.vocab).predicate_names if a.vocab else None
    report = run_eval(load_graphs(a.pred), load_dataset(a.gt), cfg, names)
    Path(a.out).write_text(json.dumps(report.to_json(), indent=1, sort_keys=True), encoding="utf-8")
    print(report.to_table())
    return 0


def cmd_synth(a) -> int:
    cfg = SynthConfig(n_images=a.images, n_objects=a.objects, n_predicates=a.predicates,
                      triplets_per_image=a.triplets, objects_per_image=a.objects_per_image,
                      n_rules=a.rules, feature_noise=a.noise, box_jitter=a.jitter, d_vis=a.d_vis,
                      distractors=a.distractors, seed=a.seed)
    data = synth_dataset(cfg)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(data.records, out / "dataset.jsonl", cfg.d_vis)
    save_vocabulary(data.vocab, out / "vocab.json")
    (out / "lexicon.json").write_text(json.dumps(data.lexicon, indent=1, sort_keys=True), encoding="utf-8")
    (out / "synth_config.json").write_text(json.dumps(asdict(cfg), indent=1, sort_keys=True), encoding="utf-8")
    print(f"wrote {len(data.records)} synthetic images -> {out}")
    return 0


def cmd_pipeline(a) -> int:
    report = run_pipeline(a.config, a.out, seed=a.seed)
    for task, rep in report["eval"].items():
        cells = " ".join(f"{k}={v:.4f}" for k, v in rep["recall"].items())
        print(f"{task}: {cells}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="langsg", description="Scene graphs learned from image captions.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="extract caption triplets into a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--rules", help="JSON file overriding parser word lists")
    _common(p, "output dataset (JSON lines)")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("label", help="assign pseudo labels to region pairs")
    p.add_argument("--data", required=True, help="parsed dataset")
    p.add_argument("--vocab", help="vocabulary JSON (required in closed mode)")
    p.add_argument("--lexicon", help="concept lexicon JSON (default: bundled fixture)")
    p.add_argument("--mode", choices=(CLOSED, OPEN), default=CLOSED)
    p.add_argument("--supervision", choices=("weak", "full"), default="weak")
    p.add_argument("--distance-ratio", type=float, default=0.5)
    p.add_argument("--min-obj-freq", type=int, default=3)
    p.add_argument("--min-pred-freq", type=int, default=10)
    _common(p, "output directory (labels.jsonl, vocab.json)")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("stats", help="category frequencies and loss weights")
    p.add_argument("--data", required=True, help="parsed dataset")
    p.add_argument("--vocab", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--target", help="dataset with ground-truth graphs for target frequencies")
    _common(p, "output JSON")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train the Triplet Transformer")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--config", help="JSON with 'model', 'train', optional 'embeddings'")
    p.add_argument("--weights", help="stats JSON; enables the weighted loss")
    p.add_argument("--negatives", type=float, help="background pairs per positive (0 disables)")
    _common(p, "output directory (checkpoint.lsg, train_log.jsonl)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="generate scene graphs")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--task", choices=TASKS, default="sgdet")
    p.add_argument("--mode", choices=(CLOSED, OPEN), default=CLOSED)
    p.add_argument("--target-vocab", help="target vocabulary for open-set mapping")
    p.add_argument("--lexicon")
    p.add_argument("--max-transfer", action="store_true", help="open-set mapping by max instead of sum")
    p.add_argument("--ablate", choices=tuple(_ABLATE), default="none")
    p.add_argument("--dot", help="directory for one Graphviz file per image")
    _common(p, "output graphs (JSON lines)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="Recall@K / mean Recall@K")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mode", choices=TASKS, default="sgdet")
    p.add_argument("--k", default="20,50,100")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--aggregate", choices=("macro", "micro"), default="macro")
    p.add_argument("--vocab", help="vocabulary for predicate names in the report")
    _common(p, "output report JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth-data", help="write a synthetic dataset")
    p.add_argument("--images", type=int, default=20)
    p.add_argument("--objects", type=int, default=6)
    p.add_argument("--predicates", type=int, default=4)
    p.add_argument("--triplets", type=int, default=2, help="planted triplets per image")
    p.add_argument("--objects-per-image", type=int, default=3)
    p.add_argument("--rules", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--jitter", type=float, default=1.0)
    p.add_argument("--d-vis", type=int, default=16)
    p.add_argument("--distractors", type=int, default=0)
    _common(p, "output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="run every stage from one JSON config")
    p.add_argument("--config", required=True)
    _common(p, "output directory for all artifacts")
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is None and args.command != "pipeline":
        args.seed = 0
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""File-level stages shared by the CLI subcommands and the end-to-end pipeline."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path
from typing import Sequence


from .core import (
    ImageRecord,
    SceneGraph,
    Vocabulary,
    load_dataset,
    load_vocabulary,
    read_jsonl,
    save_dataset,
    save_vocabulary,
    write_jsonl,
)
from .evaluator import EvalConfig, EvalReport, evaluate
from .inference import infer_image, open_set_map
from .labeler import (
    LabeledPair,
    LossWeights,
    PairFilterConfig,
    assign_labels,
    ground_truth_counts,
    image_rng,
    labels_from_ground_truth,
    loss_weights_from_counts,
)
from .matcher import CLOSED, OPEN, CategoryMatcher, ConceptLexicon, build_open_vocabulary, \
    concept_frequencies, filter_triplets
from .model import (
    Checkpoint,
    ModelConfig,
    WordVocab,
    init_params,
    load_embedding_table,
    save_checkpoint,
)
from .parser import DEFAULT_RULES, ParseRuleSet, parse_record
from .synth import SynthConfig, synth_dataset
from .trainer import TrainConfig, TrainImage, train

log = logging.getLogger(__name__)

DETECTED, GT_REGIONS = "detected", "gt"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


def _require_file(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def load_lexicon(path: str | Path | None) -> ConceptLexicon:
    return ConceptLexicon.default() if path is None else ConceptLexicon.load(_require_file(path, "lexicon"))


# --- parse -----------------------------------------------------------------


def run_parse(data: str | Path, out: str | Path, rules: ParseRuleSet = DEFAULT_RULES) -> list[ImageRecord]:
    """Attach caption triplets to every record and write the result as a dataset file."""
    records = load_dataset(_require_file(data, "dataset"))
    parsed = [replace(rec, parsed_triplets=parse_record(rec, rules)) for rec in records]
    save_dataset(parsed, out, _d_vis(parsed))
    return parsed


def _d_vis(records: Sequence[ImageRecord]) -> int | None:
    for rec in records:
        if rec.regions:
            return int(rec.regions[0].feature.shape[0])
    return None


# --- label -----------------------------------------------------------------


def run_label(records: Sequence[ImageRecord], vocab: Vocabulary | None, lex: ConceptLexicon, *,
              mode: str = CLOSED, supervision: str = "weak", seed: int = 0,
              pair_filter: PairFilterConfig = PairFilterConfig(),
              min_obj_freq: int = 3, min_pred_freq: int = 10) -> tuple[Vocabulary, list[dict]]:
    """Labeled pairs per image, plus the vocabulary they index into.

    Weak supervision labels detected regions from caption triplets; full
    supervision labels ground-truth regions from the ground-truth graph.
    """
    if supervision == "full":
        if vocab is None:
            raise ValueError("full supervision needs a vocabulary")
        rows = [{"image_id": r.image_id, "regions": GT_REGIONS,
                 "pairs": [p.to_list() for p in labels_from_ground_truth(r)]} for r in records]
        return vocab, rows
    if supervision != "weak":
        raise ValueError(f"unknown supervision {supervision!r}")
    triplets = {r.image_id: list(r.parsed_triplets or []) for r in records}
    if mode == OPEN:
        vocab = build_open_vocabulary(
            (t for ts in triplets.values() for t in ts), min_obj_freq, min_pred_freq)
    elif vocab is None:
        raise ValueError("closed mode needs a vocabulary")
    om = CategoryMatcher(vocab.object_names, lex)
    pm = CategoryMatcher(vocab.predicate_names, lex)
    rows = []
    for rec in records:
        kept = filter_triplets(triplets[rec.image_id], vocab, lex, CLOSED, obj_matcher=om, pred_matcher=pm) \
            if mode == CLOSED else triplets[rec.image_id]
        pairs = assign_labels(rec.regions, kept, lex, vocab, image_rng(seed, rec.image_id), pair_filter,
                              region_matcher=om)
        rows.append({"image_id": rec.image_id, "regions": DETECTED, "pairs": [p.to_list() for p in pairs]})
    return vocab, rows


def load_labels(path: str | Path) -> dict[str, dict]:
    rows = read_jsonl(_require_file(path, "labels file"))
    return {r["image_id"]: {"regions": r.get("regions", DETECTED),
                            "pairs": [LabeledPair.from_list(p) for p in r["pairs"]]} for r in rows}


# --- stats -----------------------------------------------------------------


def run_stats(records: Sequence[ImageRecord], target: Sequence[ImageRecord], vocab: Vocabulary,
              lex: ConceptLexicon) -> dict:
    """Caption-side and target-side category counts and the resulting loss weights."""
    caption = filter_triplets((t for r in records for t in (r.parsed_triplets or [])), vocab, lex, CLOSED)
    cap_obj, cap_pred = concept_frequencies(caption)
    tgt_obj, tgt_pred = ground_truth_counts(target, vocab)
    weights = loss_weights_from_counts(cap_obj, cap_pred, tgt_obj, tgt_pred, vocab)
    return {
        "caption_objects": dict(sorted(cap_obj.items())),
        "caption_predicates": dict(sorted(cap_pred.items())),
        "target_objects": dict(sorted(tgt_obj.items())),
        "target_predicates": dict(sorted(tgt_pred.items())),
        "weights": weights.to_json(vocab),
    }


# --- train -----------------------------------------------------------------


def training_images(records: Sequence[ImageRecord], labels: dict[str, dict]) -> list[TrainImage]:
    out = []
    for rec in records:
        if rec.image_id not in labels:
            continue
        entry = labels[rec.image_id]
        out.append(TrainImage.from_record(rec, entry["pairs"], use_gt_regions=entry["regions"] == GT_REGIONS))
    return out


def tag_words(records: Sequence[ImageRecord]) -> WordVocab:
    tags = set()
    for rec in records:
        tags.update(r.detector_label for r in rec.regions)
        if rec.gt is not None and rec.gt.tags is not None:
            tags.update(rec.gt.tags)
    return WordVocab(sorted(tags))


def run_train(records: Sequence[ImageRecord], labels: dict[str, dict], vocab: Vocabulary, config: dict,
              out_dir: str | Path, *, weights: LossWeights | None = None, seed: int | None = None) -> Checkpoint:
    """Build a model from ``config`` ("model", "train", optional "embeddings") and train it.

    The word table is trainable when randomly initialized and frozen when
    ingested from an embedding file, unless ``train_word_embeddings`` says
    otherwise.
    """
    train_cfg = TrainConfig.from_json(config.get("train", {}))
    if seed is not None:
        train_cfg = replace(train_cfg, seed=seed)
    images = training_images(records, labels)
    if not images:
        raise ValueError("no labeled images to train on")
    words = tag_words(records)
    d_vis = int(images[0].features.shape[1])
    model_cfg = ModelConfig(**{**config.get("model", {}), "d_vis": d_vis, "word_vocab_size": len(words),
                               "n_obj_classes": vocab.n_objects, "n_pred_classes": vocab.n_predicates})
    table = None
    frozen: list[str] = []
    emb = config.get("embeddings")
    if emb:
        table = load_embedding_table(_require_file(emb, "embedding table"), words, model_cfg.d_word,
                                     train_cfg.seed)
    if not config.get("train_word_embeddings", table is None):
        frozen.append("txt.word_emb")
    params = init_params(model_cfg, train_cfg.seed, table)
    result = train(images, model_cfg, train_cfg, params, words, weights=weights, frozen=frozen,
                   out_dir=out_dir, object_names=vocab.object_names, predicate_names=vocab.predicate_names,
                   checkpoint_meta=lambda: {"seed": train_cfg.seed})
    ckpt = Checkpoint(model_cfg, result.params, list(words.words), list(vocab.object_names),
                      list(vocab.predicate_names), sorted(frozen),
                      {"seed": train_cfg.seed, "train": asdict(train_cfg),
                       "epochs_done": train_cfg.epochs, "final_loss": result.final_loss})
    save_checkpoint(ckpt, Path(out_dir) / "checkpoint.lsg")
    return ckpt


# --- infer -----------------------------------------------------------------


def run_infer(ckpt: Checkpoint, records: Sequence[ImageRecord], *, task: str = "sgdet", ablate: str = "none",
              seed: int = 0, threads: int = 1, target_vocab: Vocabulary | None = None,
              lex: ConceptLexicon | None = None, use_max: bool = False) -> dict[str, SceneGraph]:
    """Scene graph per image; with ``target_vocab`` the graphs are mapped into it (open-set)."""
    words = ckpt.word_vocab
    source = Vocabulary.from_names(ckpt.object_names[1:], ckpt.predicate_names[1:])

    def one(rec: ImageRecord) -> SceneGraph:
        g = infer_image(ckpt.params, ckpt.config, words, rec, task, ablate, seed)
        if target_vocab is not None:
            g = open_set_map(g, source, target_vocab, lex or ConceptLexicon.default(), use_max=use_max)
        return g

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            graphs = list(pool.map(one, records))
    else:
        graphs = [one(r) for r in records]
    return {rec.image_id: g for rec, g in zip(records, graphs)}


def save_graphs(graphs: dict[str, SceneGraph], path: str | Path) -> None:
    write_jsonl(({"image_id": i, "graph": g.to_json()} for i, g in graphs.items()), path)


def load_graphs(path: str | Path) -> dict[str, SceneGraph]:
    return {r["image_id"]: SceneGraph.from_json(r["graph"]) for r in read_jsonl(_require_file(path, "graphs"))}


def graph_dot(image_id: str, graph: SceneGraph, vocab: Vocabulary) -> str:
    """Graphviz description of one scene graph."""
    lines = [f'digraph "{image_id}" {{']
    for i, (_, lab) in enumerate(graph.regions):
        lines.append(f'  n{i} [label="{vocab.object_names[lab]} #{i}"];')
    for s, p, o, score in graph.edges:
        lines.append(f'  n{s} -> n{o} [label="{vocab.predicate_names[p]} {score:.3f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- eval ------------------------------------------------------------------


def run_eval(preds: dict[str, SceneGraph], records: Sequence[ImageRecord], cfg: EvalConfig,
             predicate_names: Sequence[str] | None = None) -> EvalReport:
    gts = {}
    for rec in records:
        if rec.gt_graph is None:
            raise ValueError(f"image {rec.image_id} has no ground-truth graph")
        gts[rec.image_id] = rec.gt_graph
    return evaluate(preds, gts, cfg, predicate_names)


# --- end to end ------------------------------------------------------------


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(config_path: str | Path, out_dir: str | Path, seed: int | None = None) -> dict:
    """synth/data -> parse -> label -> (stats) -> train -> infer -> eval, all artifacts under ``out_dir``.

    Recognized config keys: ``seed``; ``synth`` (SynthConfig fields) or
    ``data`` + ``vocab`` + ``lexicon``; ``label`` (mode, supervision,
    negatives_per_positive, distance_ratio, min_obj_freq, min_pred_freq);
    ``model``; ``train``; ``weighted_loss``; ``infer`` (tasks, ablate);
    ``eval`` (ks, iou_threshold, aggregate); ``threads``.
    """
    config_path = _require_file(config_path, "pipeline config")
    config = json.loads(config_path.read_text(encoding="utf-8"))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if seed is None:
        seed = int(config.get("seed", 0))
    seeds = {"synth": seed, "label": seed, "train": seed, "infer": seed}
    for stage, s in config.get("seeds", {}).items():
        seeds[stage] = int(s)
    threads = int(config.get("threads", 1))
    report: dict = {"config_sha256": _sha256_file(config_path), "seeds": seeds, "stages": {}}

    def stage(name, fn):
        try:
            value = fn()
        except Exception as exc:
            raise StageError(name, exc) from exc
        log.info("stage %s done", name)
        return value

    # data
    if "synth" in config:
        def make_data():
            sd = synth_dataset(SynthConfig(**{**config["synth"], "seed": seeds["synth"]}))
            save_dataset(sd.records, out / "dataset.jsonl", _d_vis(sd.records))
            save_vocabulary(sd.vocab, out / "vocab.json")
            (out / "lexicon.json").write_text(json.dumps(sd.lexicon, indent=1, sort_keys=True), encoding="utf-8")
            return out / "dataset.jsonl", out / "vocab.json", out / "lexicon.json"
        data_path, vocab_path, lex_path = stage("synth-data", make_data)
    else:
        data_path = Path(config["data"])
        vocab_path = Path(config["vocab"]) if config.get("vocab") else None
        lex_path = Path(config["lexicon"]) if config.get("lexicon") else None

    parsed = stage("parse", lambda: run_parse(data_path, out / "parsed.jsonl"))
    lex = stage("lexicon", lambda: load_lexicon(lex_path))
    label_cfg = dict(config.get("label", {}))
    vocab_in = load_vocabulary(vocab_path) if vocab_path is not None else None

    def label():
        pf = PairFilterConfig(distance_ratio=float(label_cfg.get("distance_ratio", 0.5)))
        vocab, rows = run_label(parsed, vocab_in, lex, mode=label_cfg.get("mode", CLOSED),
                                supervision=label_cfg.get("supervision", "weak"), seed=seeds["label"],
                                pair_filter=pf, min_obj_freq=int(label_cfg.get("min_obj_freq", 3)),
                                min_pred_freq=int(label_cfg.get("min_pred_freq", 10)))
        write_jsonl(rows, out / "labels.jsonl")
        save_vocabulary(vocab, out / "train_vocab.json")
        return vocab

    vocab = stage("label", label)
    n_pos = sum(1 for r in read_jsonl(out / "labels.jsonl") for p in r["pairs"] if p[3] != 0)
    report["stages"]["label"] = {"positive_pairs": n_pos}

    weights = None
    if config.get("weighted_loss"):
        def stats():
            s = run_stats(parsed, parsed, vocab, lex)
            (out / "stats.json").write_text(json.dumps(s, indent=1, sort_keys=True), encoding="utf-8")
            return LossWeights.from_json(s["weights"])
        weights = stage("stats", stats)

    train_section = dict(config.get("train", {}))
    train_section.setdefault("threads", threads)
    if config.get("weighted_loss"):
        train_section["weighted_loss"] = True
    if "negatives_per_positive" in label_cfg:
        train_section["negatives_per_positive"] = label_cfg["negatives_per_positive"]
    train_config = {**{k: v for k, v in config.items() if k in ("model", "embeddings", "train_word_embeddings")},
                    "train": train_section}
    ckpt = stage("train", lambda: run_train(parsed, load_labels(out / "labels.jsonl"), vocab, train_config,
                                            out / "train", weights=weights, seed=seeds["train"]))
    report["stages"]["train"] = {"final_loss": ckpt.meta["final_loss"],
                                 "checkpoint_sha256": _sha256_file(out / "train" / "checkpoint.lsg")}

    infer_cfg = config.get("infer", {})
    eval_cfg = config.get("eval", {})
    tasks = infer_cfg.get("tasks", ["sgdet"])
    open_set = label_cfg.get("mode", CLOSED) == OPEN
    eval_vocab = vocab_in if open_set else vocab
    if open_set and vocab_in is None:
        raise StageError("infer", ValueError("open-set evaluation needs the target vocabulary"))
    report["eval"] = {}
    for task in tasks:
        graphs = stage(f"infer:{task}", lambda: run_infer(ckpt, parsed, task=task,
                                                          ablate=infer_cfg.get("ablate", "none"),
                                                          seed=seeds["infer"], threads=threads,
                                                          target_vocab=vocab_in if open_set else None,
                                                          lex=lex))
        save_graphs(graphs, out / f"graphs_{task}.jsonl")
        ecfg = EvalConfig(mode=task, ks=tuple(eval_cfg.get("ks", (20, 50, 100))),
                          iou_threshold=float(eval_cfg.get("iou_threshold", 0.5)),
                          aggregate=eval_cfg.get("aggregate", "macro"))
        rep = stage(f"eval:{task}", lambda: run_eval(graphs, parsed, ecfg, eval_vocab.predicate_names))
        report["eval"][task] = rep.to_json()
        report["stages"][f"infer:{task}"] = {"graphs_sha256": _sha256_file(out / f"graphs_{task}.jsonl")}
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True), encoding="utf-8")
    return report

"""Scene-graph inference: pair scoring, region-label aggregation, open-set mapping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Box, ImageRecord, Region, SceneGraph, Vocabulary, box_geometry
from .matcher import ConceptLexicon, concepts_match
from .model import ModelConfig, PairBatch, WordVocab, forward

SGDET, SGCLS, PREDCLS = "sgdet", "sgcls", "predcls"
TASKS = (SGDET, SGCLS, PREDCLS)
ABLATIONS = ("none", "mask_text", "mask_visual")


@dataclass
class PairScores:
    """Class distributions for every ordered region pair (k, l), k != l."""

    pairs: list[tuple[int, int]]
    subject_probs: np.ndarray
    predicate_probs: np.ndarray
    object_probs: np.ndarray
    n_regions: int


def all_pairs(n: int) -> list[tuple[int, int]]:
    return [(k, l) for k in range(n) for l in range(n) if k != l]


@dataclass
class ImageInputs:
    boxes: list[Box]
    features: np.ndarray
    geometry: np.ndarray
    tags: list[str]


def image_inputs(regions: Sequence[Region], width: float, height: float) -> ImageInputs:
    if not regions:
        return ImageInputs([], np.zeros((0, 0)), np.zeros((0, 7)), [])
    return ImageInputs(
        [r.box for r in regions],
        np.stack([r.feature for r in regions]).astype(np.float64),
        np.stack([box_geometry(r.box, width, height).as_array() for r in regions]),
        [r.detector_label for r in regions],
    )


def score_pairs(params, cfg: ModelConfig, words: WordVocab, inputs: ImageInputs, *,
                chunk: int = 256, word_override: np.ndarray | None = None) -> PairScores:
    """Eval-mode forward for every ordered pair, ``chunk`` pairs per batched call."""
    n = len(inputs.tags)
    pairs = all_pairs(n)
    if not pairs:
        empty_o = np.zeros((0, cfg.n_obj_classes))
        return PairScores([], empty_o, np.zeros((0, cfg.n_pred_classes)), empty_o.copy(), n)
    tag_ids = np.array([words.index(t) for t in inputs.tags], dtype=np.int64)
    subj = np.array([k for k, _ in pairs], dtype=np.int64)
    obj = np.array([l for _, l in pairs], dtype=np.int64)
    ps, pp, po = [], [], []
    for start in range(0, len(pairs), chunk):
        sl = slice(start, start + chunk)
        b = len(subj[sl])
        word_ids = np.stack([tag_ids[subj[sl]], np.full(b, words.mask), tag_ids[obj[sl]],
                             np.full(b, words.sep)], axis=1)
        batch = PairBatch(inputs.features, inputs.geometry, subj[sl], obj[sl], word_ids)
        override = None if word_override is None else np.broadcast_to(word_override, (b, 2, cfg.d_word))
        out, _ = forward(params, cfg, batch, word_override=override)
        ps.append(out.subject_probs)
        pp.append(out.predicate_probs)
        po.append(out.object_probs)
    return PairScores(pairs, np.concatenate(ps), np.concatenate(pp), np.concatenate(po), n)


def ablate_inputs(params, cfg: ModelConfig, words: WordVocab, inputs: ImageInputs,
                  mode: str = "none", seed: int = 0) -> PairScores:
    """Score pairs with textual or visual inputs masked.

    ``mask_text`` feeds one seeded random vector (scaled like the word table)
    in place of both tag embeddings; ``mask_visual`` gives every region the
    image's mean feature, leaving geometry and role intact.
    """
    if mode == "none":
        return score_pairs(params, cfg, words, inputs)
    if mode == "mask_text":
        table = params["txt.word_emb"]
        rng = np.random.default_rng(seed)
        vec = rng.normal(0.0, float(table.std()) or 1.0, size=cfg.d_word)
        return score_pairs(params, cfg, words, inputs, word_override=np.stack([vec, vec]))
    if mode == "mask_visual":
        if len(inputs.tags) == 0:
            return score_pairs(params, cfg, words, inputs)
        mean = inputs.features.mean(axis=0, keepdims=True)
        masked = ImageInputs(inputs.boxes, np.repeat(mean, len(inputs.tags), axis=0),
                             inputs.geometry, inputs.tags)
        return score_pairs(params, cfg, words, masked)
    raise ValueError(f"unknown ablation mode {mode!r}; expected one of {ABLATIONS}")


def region_distributions(scores: PairScores) -> np.ndarray:
    """Mean of every subject-role and object-role distribution mentioning each region."""
    n = scores.n_regions
    c = scores.subject_probs.shape[1]
    sums = np.zeros((n, c))
    counts = np.zeros(n)
    for i, (k, l) in enumerate(scores.pairs):
        sums[k] += scores.subject_probs[i]
        sums[l] += scores.object_probs[i]
        counts[k] += 1
        counts[l] += 1
    counts[counts == 0] = 1
    return sums / counts[:, None]


def aggregate_graph(scores: PairScores, boxes: Sequence[Box],
                    fixed_labels: Sequence[int] | None = None) -> SceneGraph:
    """Collapse pair scores into a scene graph under the graph constraint.

    Region labels are the foreground argmax of the averaged distributions
    (``fixed_labels`` overrides them with probability 1).  A pair yields an
    edge only when its predicate argmax is not background; the edge score is
    P(subject label) * P(predicate) * P(object label).
    """
    n = scores.n_regions
    if len(boxes) != n:
        raise ValueError(f"{len(boxes)} boxes for {n} scored regions")
    node_probs = region_distributions(scores)
    if fixed_labels is not None:
        labels = [int(x) for x in fixed_labels]
        conf = np.ones(n)
    elif n and node_probs.shape[1] > 1:
        labels = [int(np.argmax(node_probs[i, 1:])) + 1 for i in range(n)]
        conf = np.array([node_probs[i, labels[i]] for i in range(n)])
    else:
        labels = [0] * n
        conf = np.zeros(n)
    edges = []
    edge_rows = []
    for i, (k, l) in enumerate(scores.pairs):
        pdist = scores.predicate_probs[i]
        p = int(np.argmax(pdist))
        if p == 0:
            continue
        edges.append((k, p, l, float(conf[k] * pdist[p] * conf[l])))
        edge_rows.append(i)
    order = sorted(range(len(edges)), key=lambda j: (-edges[j][3], edges[j][0], edges[j][2]))
    edge_probs = scores.predicate_probs[[edge_rows[j] for j in order]] if order else \
        np.zeros((0, scores.predicate_probs.shape[1]))
    g = SceneGraph([(b, lab) for b, lab in zip(boxes, labels)], [edges[j] for j in order],
                   node_probs, edge_probs)
    if fixed_labels is not None:
        g.node_probs = np.eye(node_probs.shape[1])[labels] if n else node_probs
    return g


def transfer_matrix(source: Sequence[str], target: Sequence[str], lex: ConceptLexicon) -> np.ndarray:
    """0/1 matrix M[i, j] = concepts_match(source_i, target_j); background maps to background."""
    m = np.zeros((len(source), len(target)))
    m[0, 0] = 1.0
    for i, s in enumerate(source[1:], start=1):
        for j, t in enumerate(target[1:], start=1):
            if concepts_match(s, t, lex):
                m[i, j] = 1.0
    return m


def _move_mass(probs: np.ndarray, m: np.ndarray, use_max: bool) -> np.ndarray:
    if not use_max:
        return probs @ m
    return (probs[:, :, None] * m[None, :, :]).max(axis=1)


def open_set_map(graph: SceneGraph, source: Vocabulary, target: Vocabulary, lex: ConceptLexicon,
                 *, use_max: bool = False) -> SceneGraph:
    """Re-express a graph over ``source`` categories in ``target`` categories.

    Probability mass of each source class moves onto every matching target
    class (summed, or maximum with ``use_max``).  Nodes and edges whose
    predicted source label matches no target class are dropped.
    """
    if graph.node_probs is None or graph.edge_probs is None:
        raise ValueError("open-set mapping needs node and edge distributions")
    mo = transfer_matrix(source.object_names, target.object_names, lex)
    mp = transfer_matrix(source.predicate_names, target.predicate_names, lex)
    keep = [i for i, (_, lab) in enumerate(graph.regions) if mo[lab].any()]
    new_index = {old: new for new, old in enumerate(keep)}
    node_probs = _move_mass(graph.node_probs[keep], mo, use_max) if keep else \
        np.zeros((0, target.n_objects))
    labels, conf = [], []
    for row in node_probs:
        lab = int(np.argmax(row[1:])) + 1
        labels.append(lab)
        conf.append(row[lab])
    edges, rows = [], []
    for j, (s, p, o, _) in enumerate(graph.edges):
        if s not in new_index or o not in new_index or not mp[p].any():
            continue
        pdist = _move_mass(graph.edge_probs[j : j + 1], mp, use_max)[0]
        q = int(np.argmax(pdist[1:])) + 1
        si, oi = new_index[s], new_index[o]
        edges.append((si, q, oi, float(conf[si] * pdist[q] * conf[oi])))
        rows.append(pdist)
    order = sorted(range(len(edges)), key=lambda j: (-edges[j][3], edges[j][0], edges[j][2]))
    edge_probs = np.stack([rows[j] for j in order]) if order else np.zeros((0, target.n_predicates))
    regions = [(graph.regions[i][0], lab) for i, lab in zip(keep, labels)]
    return SceneGraph(regions, [edges[j] for j in order], node_probs, edge_probs)


def infer_image(params, cfg: ModelConfig, words: WordVocab, record: ImageRecord,
                task: str = SGDET, ablate: str = "none", seed: int = 0) -> SceneGraph:
    """Scene graph for one image.

    ``sgdet`` runs on the detected regions; ``sgcls`` and ``predcls`` run on
    the ground-truth regions, and ``predcls`` also fixes their labels.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    regions = record.regions if task == SGDET else record.gt_regions()
    inputs = image_inputs(regions, record.width, record.height)
    scores = ablate_inputs(params, cfg, words, inputs, ablate, seed)
    fixed = [lab for _, lab in record.gt_graph.regions] if task == PREDCLS else None
    return aggregate_graph(scores, inputs.boxes, fixed)

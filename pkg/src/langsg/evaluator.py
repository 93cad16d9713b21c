"""Recall@K and mean Recall@K for SGDet / SGCls / PredCls under the graph constraint."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import Box, SceneGraph, iou

SGDET, SGCLS, PREDCLS = "sgdet", "sgcls", "predcls"
MODES = (SGDET, SGCLS, PREDCLS)
MACRO, MICRO = "macro", "micro"


@dataclass(frozen=True)
class EvalConfig:
    mode: str = SGDET
    ks: tuple[int, ...] = (20, 50, 100)
    iou_threshold: float = 0.5
    aggregate: str = MACRO

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if list(self.ks) != sorted(set(self.ks)) or any(k < 0 for k in self.ks):
            raise ValueError("K values must be distinct, nonnegative and ascending")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must lie in (0, 1]")
        if self.aggregate not in (MACRO, MICRO):
            raise ValueError(f"aggregate must be {MACRO!r} or {MICRO!r}")


@dataclass(frozen=True)
class EdgeTriplet:
    subject_box: Box
    subject_label: int
    predicate: int
    object_box: Box
    object_label: int


def graph_triplets(graph: SceneGraph) -> list[EdgeTriplet]:
    """Edges of ``graph`` in their stored (ranked) order, with boxes and labels resolved."""
    out = []
    for s, p, o, _ in graph.edges:
        sb, sl = graph.regions[s]
        ob, ol = graph.regions[o]
        out.append(EdgeTriplet(sb, sl, p, ob, ol))
    return out


def match_triplet(pred: EdgeTriplet, gt: EdgeTriplet, mode: str = SGDET, iou_threshold: float = 0.5) -> bool:
    if (pred.subject_label, pred.predicate, pred.object_label) != (gt.subject_label, gt.predicate, gt.object_label):
        return False
    if mode == SGDET:
        return iou(pred.subject_box, gt.subject_box) >= iou_threshold and \
            iou(pred.object_box, gt.object_box) >= iou_threshold
    return pred.subject_box == gt.subject_box and pred.object_box == gt.object_box


@dataclass
class MatchResult:
    hits: int
    gt_count: int
    class_hits: dict[int, int]
    class_gt: dict[int, int]


def match_graph(pred: SceneGraph, gt: SceneGraph, k: int, mode: str = SGDET,
                iou_threshold: float = 0.5) -> MatchResult:
    """One-to-one matching of the top-``k`` predicted edges to ground-truth edges.

    Predictions are scanned in rank order; each one claims a free matching
    ground-truth edge, or re-routes an earlier claim along an augmenting path
    when all its candidates are taken.  The matched count is therefore the
    maximum bipartite matching, and a plain first-fit scan gives the same
    answer whenever it is already optimal.
    """
    preds = graph_triplets(pred)[: max(k, 0)]
    gts = graph_triplets(gt)
    adj = [[j for j, g in enumerate(gts) if match_triplet(p, g, mode, iou_threshold)] for p in preds]
    owner: list[int | None] = [None] * len(gts)

    def augment(i: int, seen: set[int]) -> bool:
        for j in adj[i]:
            if j in seen:
                continue
            seen.add(j)
            if owner[j] is None or augment(owner[j], seen):
                owner[j] = i
                return True
        return False

    for i in range(len(preds)):
        augment(i, set())

    class_gt: dict[int, int] = defaultdict(int)
    class_hits: dict[int, int] = defaultdict(int)
    for j, g in enumerate(gts):
        class_gt[g.predicate] += 1
        if owner[j] is not None:
            class_hits[g.predicate] += 1
    hits = sum(1 for o in owner if o is not None)
    return MatchResult(hits, len(gts), dict(class_hits), dict(class_gt))


def recall_at_k(pred: SceneGraph, gt: SceneGraph, k: int, mode: str = SGDET,
                iou_threshold: float = 0.5) -> tuple[int, int]:
    m = match_graph(pred, gt, k, mode, iou_threshold)
    return m.hits, m.gt_count


def mean_recall(class_hits: Mapping[int, int], class_gt: Mapping[int, int]) -> float:
    """Unweighted mean of per-class recall over classes with at least one GT instance."""
    classes = [c for c, n in class_gt.items() if n > 0]
    if not classes:
        return 0.0
    return sum(class_hits.get(c, 0) / class_gt[c] for c in classes) / len(classes)


@dataclass
class EvalReport:
    mode: str
    ks: tuple[int, ...]
    recall: dict[int, float]
    mean_recall: dict[int, float]
    per_predicate: dict[int, dict[str, float]]
    n_images: int
    aggregate: str = MACRO

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "aggregate": self.aggregate,
            "n_images": self.n_images,
            "recall": {f"R@{k}": self.recall[k] for k in self.ks},
            "mean_recall": {f"mR@{k}": self.mean_recall[k] for k in self.ks},
            "per_predicate": {f"R@{k}": self.per_predicate[k] for k in self.ks},
        }

    def to_table(self) -> str:
        lines = [f"mode={self.mode} images={self.n_images} aggregate={self.aggregate}"]
        head = f"{'metric':<10}" + "".join(f"{'@' + str(k):>10}" for k in self.ks)
        lines.append(head)
        lines.append(f"{'R':<10}" + "".join(f"{self.recall[k]:>10.4f}" for k in self.ks))
        lines.append(f"{'mR':<10}" + "".join(f"{self.mean_recall[k]:>10.4f}" for k in self.ks))
        names = sorted({n for k in self.ks for n in self.per_predicate[k]})
        for name in names:
            cells = "".join(f"{self.per_predicate[k].get(name, 0.0):>10.4f}" for k in self.ks)
            lines.append(f"{name[:10]:<10}{cells}")
        return "\n".join(lines)


def evaluate(preds: Mapping[str, SceneGraph], gts: Mapping[str, SceneGraph], cfg: EvalConfig = EvalConfig(),
             predicate_names: Sequence[str] | None = None) -> EvalReport:
    """Dataset-level R@K, mR@K and per-predicate recall.

    Image ids must agree between ``preds`` and ``gts``; a mismatch raises with
    both difference lists.  Images without ground-truth edges do not count
    towards the per-image mean.
    """
    only_pred = sorted(set(preds) - set(gts))
    only_gt = sorted(set(gts) - set(preds))
    if only_pred or only_gt:
        raise ValueError(f"image id mismatch: predictions only {only_pred}, ground truth only {only_gt}")
    ids = sorted(gts)

    def name(c: int) -> str:
        return predicate_names[c] if predicate_names is not None else str(c)

    recall, mrecall, per_pred = {}, {}, {}
    for k in cfg.ks:
        image_recalls = []
        hits_total = gt_total = 0
        class_hits: dict[int, int] = defaultdict(int)
        class_gt: dict[int, int] = defaultdict(int)
        for image_id in ids:
            m = match_graph(preds[image_id], gts[image_id], k, cfg.mode, cfg.iou_threshold)
            if m.gt_count == 0:
                continue
            image_recalls.append(m.hits / m.gt_count)
            hits_total += m.hits
            gt_total += m.gt_count
            for c in sorted(m.class_gt):
                class_gt[c] += m.class_gt[c]
                class_hits[c] += m.class_hits.get(c, 0)
        if cfg.aggregate == MACRO:
            recall[k] = sum(image_recalls) / len(image_recalls) if image_recalls else 0.0
        else:
            recall[k] = hits_total / gt_total if gt_total else 0.0
        mrecall[k] = mean_recall(class_hits, class_gt)
        per_pred[k] = {name(c): class_hits.get(c, 0) / class_gt[c] for c in sorted(class_gt)}
    return EvalReport(cfg.mode, tuple(cfg.ks), recall, mrecall, per_pred, len(ids), cfg.aggregate)

"""Pseudo-label assignment: caption triplets onto detector region pairs.

Also holds the loss-weight statistics and the per-image training sampler.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import ImageRecord, Region, Triplet, Vocabulary, iou
from .matcher import CategoryMatcher, ConceptLexicon, concepts_match


@dataclass(frozen=True)
class LabeledPair:
    subject_region_index: int
    object_region_index: int
    subject_label: int
    predicate_label: int
    object_label: int

    def __post_init__(self):
        if self.subject_region_index == self.object_region_index:
            raise ValueError("labeled pair needs two distinct regions")

    @property
    def is_positive(self) -> bool:
        return self.predicate_label != 0

    def to_list(self) -> list[int]:
        return [
            self.subject_region_index, self.object_region_index,
            self.subject_label, self.predicate_label, self.object_label,
        ]

    @classmethod
    def from_list(cls, xs: Sequence[int]) -> "LabeledPair":
        return cls(*(int(x) for x in xs))


@dataclass(frozen=True)
class LossWeights:
    object_weights: np.ndarray
    predicate_weights: np.ndarray

    def __post_init__(self):
        for w in (self.object_weights, self.predicate_weights):
            if not np.all(w > 0):
                raise ValueError("loss weights must be positive")

    @classmethod
    def uniform(cls, n_objects: int, n_predicates: int) -> "LossWeights":
        return cls(np.ones(n_objects), np.ones(n_predicates))

    def to_json(self, vocab: Vocabulary | None = None) -> dict:
        d = {
            "object_weights": self.object_weights.tolist(),
            "predicate_weights": self.predicate_weights.tolist(),
        }
        if vocab is not None:
            d["objects"] = list(vocab.object_names)
            d["predicates"] = list(vocab.predicate_names)
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "LossWeights":
        return cls(
            np.asarray(d["object_weights"], dtype=np.float64),
            np.asarray(d["predicate_weights"], dtype=np.float64),
        )


@dataclass(frozen=True)
class PairFilterConfig:
    require_overlap_or_near: bool = True
    distance_ratio: float = 0.5

    def __post_init__(self):
        if not self.distance_ratio > 0:
            raise ValueError("distance_ratio must be positive")


def image_rng(seed: int, image_id: str) -> np.random.Generator:
    """Per-image generator so results do not depend on processing order."""
    digest = hashlib.sha256(f"{seed}:{image_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def candidate_pairs(regions: Sequence[Region], cfg: PairFilterConfig = PairFilterConfig()) -> list[tuple[int, int]]:
    """Ordered region pairs that overlap or whose centers are close relative to their union box."""
    n = len(regions)
    out = []
    for k in range(n):
        for l in range(n):
            if k == l:
                continue
            if not cfg.require_overlap_or_near or _near(regions[k], regions[l], cfg.distance_ratio):
                out.append((k, l))
    return out


def _near(a: Region, b: Region, ratio: float) -> bool:
    if iou(a.box, b.box) > 0:
        return True
    (ax, ay), (bx, by) = a.box.center, b.box.center
    ux1, uy1 = min(a.box.x1, b.box.x1), min(a.box.y1, b.box.y1)
    ux2, uy2 = max(a.box.x2, b.box.x2), max(a.box.y2, b.box.y2)
    return math.hypot(ax - bx, ay - by) <= ratio * math.hypot(ux2 - ux1, uy2 - uy1)


def assign_labels(
    regions: Sequence[Region],
    triplets: Sequence[Triplet],
    lex: ConceptLexicon,
    vocab: Vocabulary,
    seed: int | np.random.Generator,
    cfg: PairFilterConfig = PairFilterConfig(),
    *,
    region_matcher: CategoryMatcher | None = None,
) -> list[LabeledPair]:
    """Label every candidate pair: a matching triplet when there is one, background otherwise.

    Triplet fields must already be vocabulary names (closed-set filtering, or
    an open vocabulary); fields outside ``vocab`` are skipped.  When several
    triplets match a pair, one is drawn uniformly from ``seed``.  Background
    pairs still carry object labels for regions whose detector label maps
    into the vocabulary.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    obj_index = {name: i for i, name in enumerate(vocab.object_names)}
    pred_index = {name: i for i, name in enumerate(vocab.predicate_names)}
    usable = [
        t for t in triplets
        if obj_index.get(t.subject, 0) and obj_index.get(t.object, 0) and pred_index.get(t.predicate, 0)
    ]
    rm = region_matcher or CategoryMatcher(vocab.object_names, lex)
    region_labels = [rm.index(r.detector_label) for r in regions]

    # concept -> per-region match flags, computed once per image
    memo: dict[str, list[bool]] = {}

    def matches(concept: str) -> list[bool]:
        if concept not in memo:
            memo[concept] = [concepts_match(concept, r.detector_label, lex) for r in regions]
        return memo[concept]

    out = []
    for k, l in candidate_pairs(regions, cfg):
        hits = [t for t in usable if matches(t.subject)[k] and matches(t.object)[l]]
        if hits:
            t = hits[int(rng.integers(len(hits)))] if len(hits) > 1 else hits[0]
            out.append(
                LabeledPair(k, l, obj_index[t.subject], pred_index[t.predicate], obj_index[t.object])
            )
        else:
            out.append(LabeledPair(k, l, region_labels[k], 0, region_labels[l]))
    return out


def labels_from_ground_truth(record: ImageRecord) -> list[LabeledPair]:
    """Fully supervised labels: every ground-truth edge, plus background for the other pairs."""
    graph = record.gt_graph
    if graph is None:
        raise ValueError(f"image {record.image_id} has no ground-truth graph")
    edges = {(s, o): p for s, p, o, _ in graph.edges}
    n = len(graph.regions)
    out = []
    for k in range(n):
        for l in range(n):
            if k != l:
                out.append(
                    LabeledPair(k, l, graph.regions[k][1], edges.get((k, l), 0), graph.regions[l][1])
                )
    return out


def compute_loss_weights(
    caption_freq: Mapping[int, float] | Sequence[float],
    target_freq: Mapping[int, float] | Sequence[float],
    n_classes: int,
) -> np.ndarray:
    """Per-category ratio caption_freq / target_freq; 1.0 where either count is missing.

    Index 0 (background) always gets weight 1.0.
    """
    cf = _as_counts(caption_freq, n_classes)
    tf = _as_counts(target_freq, n_classes)
    w = np.ones(n_classes)
    both = (cf > 0) & (tf > 0)
    both[0] = False
    w[both] = cf[both] / tf[both]
    return w


def _as_counts(freq, n: int) -> np.ndarray:
    out = np.zeros(n)
    if isinstance(freq, Mapping):
        for i, c in freq.items():
            if c < 0:
                raise ValueError("frequencies must be nonnegative")
            out[int(i)] = c
    else:
        arr = np.asarray(freq, dtype=np.float64)
        if np.any(arr < 0):
            raise ValueError("frequencies must be nonnegative")
        out[: len(arr)] = arr
    return out


def loss_weights_from_counts(
    caption_obj: Counter, caption_pred: Counter, target_obj: Counter, target_pred: Counter,
    vocab: Vocabulary,
) -> LossWeights:
    """Counters keyed by category name -> LossWeights over the vocabulary."""
    def vec(counter: Counter, names: Sequence[str]) -> list[float]:
        return [float(counter.get(n, 0)) for n in names]

    return LossWeights(
        compute_loss_weights(vec(caption_obj, vocab.object_names), vec(target_obj, vocab.object_names), vocab.n_objects),
        compute_loss_weights(vec(caption_pred, vocab.predicate_names), vec(target_pred, vocab.predicate_names), vocab.n_predicates),
    )


def ground_truth_counts(records: Iterable[ImageRecord], vocab: Vocabulary) -> tuple[Counter, Counter]:
    """Category counts from ground-truth graphs (the target-side estimate)."""
    objs: Counter = Counter()
    preds: Counter = Counter()
    for rec in records:
        g = rec.gt_graph
        if g is None:
            continue
        for s, p, o, _ in g.edges:
            objs[vocab.object_names[g.regions[s][1]]] += 1
            objs[vocab.object_names[g.regions[o][1]]] += 1
            preds[vocab.predicate_names[p]] += 1
    return objs, preds


def sample_training_batch(
    pairs: Sequence[LabeledPair],
    rng: np.random.Generator,
    per_image: int = 16,
    negatives_per_positive: float = 3.0,
) -> list[LabeledPair]:
    """Up to ``per_image`` pairs: positives first, then background pairs.

    At most ``negatives_per_positive`` background pairs per positive are
    drawn, and never more than the remaining slots.  An image without
    positives contributes no pairs.  Order of the output is positives then
    negatives, each in original pair order.
    """
    pos = [i for i, p in enumerate(pairs) if p.is_positive]
    neg = [i for i, p in enumerate(pairs) if not p.is_positive]
    if not pos:
        return []
    if len(pos) > per_image:
        pos = sorted(rng.choice(pos, size=per_image, replace=False).tolist())
    n_neg = min(len(neg), per_image - len(pos), int(math.floor(negatives_per_positive * len(pos))))
    chosen_neg = sorted(rng.choice(neg, size=n_neg, replace=False).tolist()) if n_neg > 0 else []
    return [pairs[i] for i in pos] + [pairs[i] for i in chosen_neg]

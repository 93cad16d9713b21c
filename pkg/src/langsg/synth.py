"""Synthetic datasets that are solvable by construction.

Each image shows a few distinct object classes.  A fixed, seeded rule
table decides which ordered class pairs are related and by which
predicate; every rule whose two classes appear in an image is planted as
a ground-truth edge and realized as a caption "a {s} {p} a {o}".
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import Box, GroundTruth, ImageRecord, Region, SceneGraph, Vocabulary
from .labeler import PairFilterConfig, candidate_pairs

OBJECT_POOL = ("man", "horse", "table", "cup", "dog", "tree", "woman", "car", "bike", "boat", "hat", "bench")
# predicate name -> caption surface form
PREDICATE_POOL = (
    ("on", "on"), ("near", "near"), ("ride", "riding"), ("hold", "holding"),
    ("wear", "wearing"), ("behind", "behind"), ("under", "under"),
)
DISTRACTOR_POOL = ("lamp", "window", "cloud", "sign")


@dataclass(frozen=True)
class SynthConfig:
    n_images: int = 20
    n_objects: int = 6
    n_predicates: int = 4
    triplets_per_image: int = 2
    objects_per_image: int = 3
    n_rules: int = 8
    feature_noise: float = 0.0
    box_jitter: float = 1.0
    d_vis: int = 16
    distractors: int = 0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_images", "n_objects", "n_predicates", "triplets_per_image",
                     "objects_per_image", "n_rules", "d_vis"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_objects > len(OBJECT_POOL):
            raise ValueError(f"at most {len(OBJECT_POOL)} object classes")
        if self.n_predicates > len(PREDICATE_POOL):
            raise ValueError(f"at most {len(PREDICATE_POOL)} predicates")
        if self.objects_per_image > self.n_objects:
            raise ValueError("objects_per_image exceeds n_objects")
        if self.n_rules > self.n_objects * (self.n_objects - 1) // 2:
            raise ValueError("more rules than unordered class pairs")
        if self.feature_noise < 0 or self.box_jitter < 0 or self.distractors < 0:
            raise ValueError("noise levels and distractor count must be nonnegative")
        max_edges = self.objects_per_image * (self.objects_per_image - 1) // 2
        if self.triplets_per_image > min(max_edges, self.n_rules):
            raise ValueError("triplets_per_image cannot be reached with these settings")


@dataclass
class SynthData:
    records: list[ImageRecord]
    vocab: Vocabulary
    lexicon: dict
    rules: dict[tuple[int, int], int]
    prototypes: np.ndarray


def _lexicon(objects, predicates, distractors) -> dict:
    lex = {}
    for name in objects + distractors:
        lex[name] = {"lemmas": [name], "synsets": [f"{name}.n.01"], "hypernyms": [], "root": name}
    for name, surface in predicates:
        lex[name] = {"lemmas": [name, surface], "synsets": [f"{name}.v.01"], "hypernyms": [], "root": name}
    return lex


def synth_dataset(cfg: SynthConfig = SynthConfig()) -> SynthData:
    rng = np.random.default_rng(cfg.seed)
    objects = list(OBJECT_POOL[: cfg.n_objects])
    predicates = list(PREDICATE_POOL[: cfg.n_predicates])
    vocab = Vocabulary.from_names(objects, [p for p, _ in predicates])
    surface = dict(predicates)

    # rule table over class indices 1..n_objects: at most one direction per unordered pair
    unordered = list(itertools.combinations(range(1, cfg.n_objects + 1), 2))
    picked = rng.choice(len(unordered), size=cfg.n_rules, replace=False)
    rules: dict[tuple[int, int], int] = {}
    for i in sorted(picked.tolist()):
        a, b = unordered[i]
        if rng.random() < 0.5:
            a, b = b, a
        rules[(a, b)] = int(rng.integers(1, cfg.n_predicates + 1))

    n_proto = cfg.n_objects + 1 + len(DISTRACTOR_POOL)
    prototypes = rng.normal(size=(n_proto, cfg.d_vis))

    records = []
    for img in range(cfg.n_images):
        for _ in range(10_000):
            classes = sorted(rng.choice(np.arange(1, cfg.n_objects + 1), size=cfg.objects_per_image,
                                        replace=False).tolist())
            planted = [(s, o) for s in classes for o in classes if (s, o) in rules]
            if len(planted) == cfg.triplets_per_image:
                break
        else:
            raise RuntimeError("could not draw an image with the requested triplet count")
        order = rng.permutation(len(classes)).tolist()
        classes = [classes[i] for i in order]
        edges_idx = [(classes.index(s), rules[(s, o)], classes.index(o)) for s, o in planted]
        edges_idx.sort()
        records.append(_image(cfg, rng, img, classes, edges_idx, vocab, surface, prototypes))
    return SynthData(records, vocab, _lexicon(objects, predicates, list(DISTRACTOR_POOL)), rules, prototypes)


def _feature(rng, prototypes, cls, noise):
    if noise == 0.0:
        return prototypes[cls].copy()
    return prototypes[cls] + noise * rng.normal(size=prototypes.shape[1])


def _image(cfg, rng, index, classes, edges, vocab, surface, prototypes) -> ImageRecord:
    width = height = 100.0
    filt = PairFilterConfig()
    n = len(classes)
    for _ in range(10_000):
        boxes = []
        for _ in range(n):
            w, h = rng.uniform(25, 45, size=2)
            x1, y1 = rng.uniform(5, width - w - 5), rng.uniform(5, height - h - 5)
            boxes.append(Box(round(x1, 2), round(y1, 2), round(x1 + w, 2), round(y1 + h, 2)))
        dets = [_jitter(b, rng, cfg.box_jitter, width, height) for b in boxes]
        probe = [Region(b, "x", 1.0, np.zeros(1)) for b in dets]
        kept = set(candidate_pairs(probe, filt))
        if all((s, o) in kept for s, _, o in edges):
            break
    else:
        raise RuntimeError("could not place boxes so that related objects are near each other")

    names = [vocab.object_names[c] for c in classes]
    regions = [Region(d, name, 1.0, _feature(rng, prototypes, c, cfg.feature_noise))
               for d, name, c in zip(dets, names, classes)]
    for j in range(cfg.distractors):
        k = j % len(DISTRACTOR_POOL)
        w, h = rng.uniform(10, 25, size=2)
        x1, y1 = rng.uniform(0, width - w), rng.uniform(0, height - h)
        regions.append(Region(Box(round(x1, 2), round(y1, 2), round(x1 + w, 2), round(y1 + h, 2)),
                              DISTRACTOR_POOL[k], 1.0,
                              _feature(rng, prototypes, cfg.n_objects + 1 + k, cfg.feature_noise)))
    gt_feats = [_feature(rng, prototypes, c, cfg.feature_noise) for c in classes]
    graph = SceneGraph([(b, c) for b, c in zip(boxes, classes)], [(s, p, o, 1.0) for s, p, o in edges])
    captions = [f"a {names[s]} {surface[vocab.predicate_names[p]]} a {names[o]}" for s, p, o in edges]
    return ImageRecord(f"synth_{index:05d}", width, height, regions, captions, None,
                       GroundTruth(graph, gt_feats, names))


def _jitter(b: Box, rng, amount, width, height) -> Box:
    if amount == 0:
        return b
    d = rng.uniform(-amount, amount, size=4)
    x1 = min(max(b.x1 + d[0], 0.0), width - 1)
    y1 = min(max(b.y1 + d[1], 0.0), height - 1)
    x2 = max(min(b.x2 + d[2], width), x1 + 1)
    y2 = max(min(b.y2 + d[3], height), y1 + 1)
    return Box(round(x1, 2), round(y1, 2), round(x2, 2), round(y2, 2))

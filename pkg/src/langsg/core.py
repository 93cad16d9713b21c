"""Shared data model, box geometry and the JSON-lines dataset formats."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BACKGROUND = "background"

SOURCE_CAPTION = "caption"
SOURCE_UNLOCALIZED = "unlocalized_graph"
SOURCE_GROUND_TRUTH = "ground_truth"
TRIPLET_SOURCES = (SOURCE_CAPTION, SOURCE_UNLOCALIZED, SOURCE_GROUND_TRUTH)


class SchemaError(ValueError):
    """A dataset or vocabulary file does not follow the expected layout."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


@dataclass(frozen=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite box coordinates {coords}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box {coords}")

    @classmethod
    def from_list(cls, xs: Sequence[float]) -> "Box":
        if len(xs) != 4:
            raise ValueError(f"box needs 4 coordinates, got {len(xs)}")
        return cls(*(float(x) for x in xs))

    def to_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))


@dataclass(frozen=True)
class Region:
    box: Box
    detector_label: str
    score: float
    feature: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        if not self.detector_label:
            raise ValueError("region label must be nonempty")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"region score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class BoxGeometry:
    top: float
    left: float
    bottom: float
    right: float
    width: float
    height: float
    area: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.top, self.left, self.bottom, self.right, self.width, self.height, self.area]
        )


@dataclass(frozen=True)
class Vocabulary:
    """Object and predicate category names; index 0 of each list is background."""

    object_names: tuple[str, ...]
    predicate_names: tuple[str, ...]

    def __post_init__(self):
        for kind, names in (("object", self.object_names), ("predicate", self.predicate_names)):
            if not names or names[0] != BACKGROUND:
                raise ValueError(f"{kind} vocabulary must start with '{BACKGROUND}'")
            if len(set(names)) != len(names):
                raise ValueError(f"{kind} vocabulary has duplicate names")

    @classmethod
    def from_names(cls, objects: Iterable[str], predicates: Iterable[str]) -> "Vocabulary":
        """Build a vocabulary, prepending background when it is missing."""
        objs = [o for o in objects if o != BACKGROUND]
        preds = [p for p in predicates if p != BACKGROUND]
        return cls((BACKGROUND, *objs), (BACKGROUND, *preds))

    @property
    def n_objects(self) -> int:
        return len(self.object_names)

    @property
    def n_predicates(self) -> int:
        return len(self.predicate_names)

    def object_index(self, name: str) -> int:
        return self.object_names.index(name)

    def predicate_index(self, name: str) -> int:
        return self.predicate_names.index(name)

    def to_json(self) -> dict:
        return {"objects": list(self.object_names[1:]), "predicates": list(self.predicate_names[1:])}


@dataclass(frozen=True)
class Triplet:
    subject: str
    predicate: str
    object: str
    source: str = SOURCE_CAPTION
    binding: tuple[int, int] | None = None

    def __post_init__(self):
        if not self.subject or not self.object:
            raise ValueError("triplet subject and object must be nonempty")
        if self.source not in TRIPLET_SOURCES:
            raise ValueError(f"unknown triplet source {self.source!r}")
        if self.binding is not None and self.binding[0] == self.binding[1]:
            raise ValueError("triplet binding indices must differ")

    @property
    def spo(self) -> tuple[str, str, str]:
        return (self.subject, self.predicate, self.object)

    def to_json(self) -> dict:
        out = {"s": self.subject, "p": self.predicate, "o": self.object, "source": self.source}
        if self.binding is not None:
            out["binding"] = list(self.binding)
        return out

    @classmethod
    def from_json(cls, d: dict) -> "Triplet":
        binding = d.get("binding")
        return cls(
            d["s"], d["p"], d["o"], d.get("source", SOURCE_CAPTION),
            tuple(binding) if binding is not None else None,
        )


@dataclass
class SceneGraph:
    """Nodes are (box, object label index); edges are (subject, predicate, object, score).

    ``node_probs`` and ``edge_probs`` are optional per-node and per-edge class
    distributions kept by inference so that open-set mapping can move
    probability mass between vocabularies.
    """

    regions: list[tuple[Box, int]]
    edges: list[tuple[int, int, int, float]]
    node_probs: np.ndarray | None = field(default=None, repr=False)
    edge_probs: np.ndarray | None = field(default=None, repr=False)

    def validate(self, graph_constraint: bool = False) -> None:
        n = len(self.regions)
        seen = set()
        for si, _, oi, _ in self.edges:
            if not (0 <= si < n and 0 <= oi < n):
                raise ValueError(f"edge ({si}, {oi}) out of range for {n} regions")
            if graph_constraint:
                if (si, oi) in seen:
                    raise ValueError(f"two edges on ordered pair ({si}, {oi})")
                seen.add((si, oi))

    def to_json(self) -> dict:
        return {
            "regions": [{"box": b.to_list(), "label_index": int(lab)} for b, lab in self.regions],
            "edges": [[int(s), int(p), int(o), float(sc)] for s, p, o, sc in self.edges],
        }

    @classmethod
    def from_json(cls, d: dict) -> "SceneGraph":
        regions = [(Box.from_list(r["box"]), int(r["label_index"])) for r in d["regions"]]
        edges = []
        for e in d.get("edges", []):
            score = float(e[3]) if len(e) > 3 else 1.0
            edges.append((int(e[0]), int(e[1]), int(e[2]), score))
        g = cls(regions, edges)
        g.validate()
        return g


@dataclass
class GroundTruth:
    """Ground-truth graph plus the optional per-region inputs needed for SGCls/PredCls."""

    graph: SceneGraph
    features: list[np.ndarray] | None = None
    tags: list[str] | None = None


@dataclass
class ImageRecord:
    image_id: str
    width: float
    height: float
    regions: list[Region]
    captions: list[str]
    parsed_triplets: list[Triplet] | None = None
    gt: GroundTruth | None = None

    @property
    def gt_graph(self) -> SceneGraph | None:
        return self.gt.graph if self.gt is not None else None

    def gt_regions(self) -> list[Region]:
        """Ground-truth boxes as model inputs (SGCls/PredCls)."""
        if self.gt is None or self.gt.features is None or self.gt.tags is None:
            raise SchemaError(
                f"image {self.image_id}: ground-truth regions carry no feature/label; "
                "SGCls and PredCls need both in the dataset file"
            )
        return [
            Region(box, tag, 1.0, feat)
            for (box, _), tag, feat in zip(self.gt.graph.regions, self.gt.tags, self.gt.features)
        ]


def iou(a: Box, b: Box) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def box_geometry(b: Box, width: float, height: float) -> BoxGeometry:
    """Normalized top/left/bottom/right, width, height and area of a box."""
    if not (width > 0 and height > 0):
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    # clip guards against coordinates a hair outside the image from detector rounding
    top = min(max(b.y1 / height, 0.0), 1.0)
    left = min(max(b.x1 / width, 0.0), 1.0)
    bottom = min(max(b.y2 / height, 0.0), 1.0)
    right = min(max(b.x2 / width, 0.0), 1.0)
    w = right - left
    h = bottom - top
    return BoxGeometry(top, left, bottom, right, w, h, w * h)


# ---------------------------------------------------------------------------
# JSON-lines I/O
# ---------------------------------------------------------------------------


def _require(d: dict, key: str, line: int, prefix: str = ""):
    if key not in d:
        raise SchemaError("missing", line, prefix + key)
    return d[key]


def _feature(values, d_vis: int | None, line: int, fname: str) -> np.ndarray:
    if not isinstance(values, list):
        raise SchemaError("feature must be a list of numbers", line, fname)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise SchemaError("feature must be one-dimensional", line, fname)
    if d_vis is not None and arr.shape[0] != d_vis:
        raise SchemaError(f"length {arr.shape[0]} does not match d_vis={d_vis}", line, fname)
    if not np.all(np.isfinite(arr)):
        raise SchemaError("non-finite feature value", line, fname)
    return arr


def record_from_json(d: dict, line: int = 0, d_vis: int | None = None) -> ImageRecord:
    image_id = str(_require(d, "image_id", line))
    width = float(_require(d, "width", line))
    height = float(_require(d, "height", line))
    if not (width > 0 and height > 0):
        raise SchemaError("image dimensions must be positive", line, "width/height")
    if d_vis is None and "d_vis" in d:
        d_vis = int(d["d_vis"])

    regions = []
    for i, r in enumerate(_require(d, "regions", line)):
        pre = f"regions[{i}]."
        try:
            box = Box.from_list(_require(r, "box", line, pre))
        except (TypeError, ValueError) as exc:
            raise SchemaError(str(exc), line, pre + "box") from None
        if box.x1 < 0 or box.y1 < 0 or box.x2 > width or box.y2 > height:
            raise SchemaError("box lies outside the image", line, pre + "box")
        label = str(_require(r, "label", line, pre))
        if not label:
            raise SchemaError("empty label", line, pre + "label")
        score = float(r.get("score", 1.0))
        feat = _feature(_require(r, "feature", line, pre), d_vis, line, pre + "feature")
        regions.append(Region(box, label, score, feat))

    captions = [str(c) for c in d.get("captions", [])]
    triplets = None
    if "triplets" in d and d["triplets"] is not None:
        try:
            triplets = [Triplet.from_json(t) for t in d["triplets"]]
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(str(exc), line, "triplets") from None

    gt = None
    if d.get("gt") is not None:
        g = d["gt"]
        gt_regions, feats, tags = [], [], []
        for i, r in enumerate(_require(g, "regions", line, "gt.")):
            pre = f"gt.regions[{i}]."
            try:
                box = Box.from_list(_require(r, "box", line, pre))
            except (TypeError, ValueError) as exc:
                raise SchemaError(str(exc), line, pre + "box") from None
            gt_regions.append((box, int(_require(r, "label_index", line, pre))))
            feats.append(
                _feature(r["feature"], d_vis, line, pre + "feature") if "feature" in r else None
            )
            tags.append(str(r["label"]) if "label" in r else None)
        edges = []
        for e in g.get("edges", []):
            if len(e) < 3:
                raise SchemaError("edge needs [subject, predicate, object]", line, "gt.edges")
            edges.append((int(e[0]), int(e[1]), int(e[2]), 1.0))
        graph = SceneGraph(gt_regions, _collapse_duplicates(edges))
        try:
            graph.validate()
        except ValueError as exc:
            raise SchemaError(str(exc), line, "gt.edges") from None
        gt = GroundTruth(
            graph,
            feats if all(f is not None for f in feats) else None,
            tags if all(t is not None for t in tags) else None,
        )
    return ImageRecord(image_id, width, height, regions, captions, triplets, gt)


def _collapse_duplicates(edges):
    seen = set()
    out = []
    for e in edges:
        if e[:3] not in seen:
            seen.add(e[:3])
            out.append(e)
    return out


def record_to_json(rec: ImageRecord) -> dict:
    d: dict = {
        "image_id": rec.image_id,
        "width": rec.width,
        "height": rec.height,
        "regions": [
            {
                "box": r.box.to_list(),
                "label": r.detector_label,
                "score": r.score,
                "feature": r.feature.tolist(),
            }
            for r in rec.regions
        ],
        "captions": list(rec.captions),
    }
    if rec.parsed_triplets is not None:
        d["triplets"] = [t.to_json() for t in rec.parsed_triplets]
    if rec.gt is not None:
        gregions = []
        for i, (box, lab) in enumerate(rec.gt.graph.regions):
            r = {"box": box.to_list(), "label_index": lab}
            if rec.gt.tags is not None:
                r["label"] = rec.gt.tags[i]
            if rec.gt.features is not None:
                r["feature"] = rec.gt.features[i].tolist()
            gregions.append(r)
        d["gt"] = {
            "regions": gregions,
            "edges": [[s, p, o] for s, p, o, _ in rec.gt.graph.edges],
        }
    return d


def load_dataset(path: str | Path, d_vis: int | None = None) -> list[ImageRecord]:
    """Read a JSON-lines dataset.

    ``d_vis`` may be passed explicitly; otherwise a header line
    ``{"d_vis": D}`` (a line without ``image_id``) declares it, and failing
    both, the first region's feature length fixes it for the rest of the file.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                d = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", lineno) from None
            if "image_id" not in d and "d_vis" in d:
                d_vis = int(d["d_vis"])
                continue
            rec = record_from_json(d, lineno, d_vis)
            if d_vis is None and rec.regions:
                d_vis = rec.regions[0].feature.shape[0]
            records.append(rec)
    return records


def save_dataset(records: Sequence[ImageRecord], path: str | Path, d_vis: int | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if d_vis is not None:
            fh.write(json.dumps({"d_vis": d_vis}) + "\n")
        for rec in records:
            fh.write(json.dumps(record_to_json(rec)) + "\n")


def load_vocabulary(path: str | Path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    for key in ("objects", "predicates"):
        if key not in d or not isinstance(d[key], list):
            raise SchemaError("expected a list of names", field=key)
    try:
        return Vocabulary.from_names(d["objects"], d["predicates"])
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(vocab.to_json(), fh, indent=1)


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")

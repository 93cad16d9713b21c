"""SGD training of the Triplet Transformer on pseudo-labeled region pairs."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import ImageRecord, box_geometry
from .labeler import LabeledPair, LossWeights, sample_training_batch
from .model import (
    Checkpoint,
    LossLambdas,
    ModelConfig,
    PairBatch,
    WordVocab,
    loss_and_grads,
    save_checkpoint,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_images: int = 32
    triplets_per_image: int = 16
    lr: float = 0.0032
    momentum: float = 0.9
    epochs: int = 10
    seed: int = 0
    lambda_s: float = 0.5
    lambda_p: float = 1.0
    lambda_o: float = 0.5
    weighted_loss: bool = False
    negatives_per_positive: float = 3.0
    threads: int = 1

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("lr must be nonnegative")
        if self.batch_images <= 0 or self.triplets_per_image <= 0:
            raise ValueError("batch sizes must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.negatives_per_positive < 0:
            raise ValueError("negatives_per_positive must be nonnegative")

    @property
    def lambdas(self) -> LossLambdas:
        return LossLambdas(self.lambda_s, self.lambda_p, self.lambda_o)

    @classmethod
    def from_json(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainImage:
    """Model inputs of one image plus its labeled candidate pairs."""

    image_id: str
    features: np.ndarray
    geometry: np.ndarray
    tags: list[str]
    pairs: list[LabeledPair]

    @classmethod
    def from_record(cls, rec: ImageRecord, pairs: Sequence[LabeledPair], use_gt_regions: bool = False):
        regions = rec.gt_regions() if use_gt_regions else rec.regions
        feats = np.stack([r.feature for r in regions]) if regions else np.zeros((0, 0))
        geom = np.stack([box_geometry(r.box, rec.width, rec.height).as_array() for r in regions]) \
            if regions else np.zeros((0, 7))
        return cls(rec.image_id, feats, geom, [r.detector_label for r in regions], list(pairs))


def sgd_step(params: dict, grads: dict, lr: float, momentum: float, velocity: dict,
             trainable: Callable[[str], bool] | None = None) -> tuple[dict, dict]:
    """In-place momentum SGD: v <- mu*v + g, theta <- theta - lr*v."""
    for name, g in grads.items():
        if trainable is not None and not trainable(name):
            continue
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
        v = velocity.get(name)
        if v is None:
            v = velocity[name] = np.zeros_like(g)
        v *= momentum
        v += g
        params[name] -= lr * v
    return params, velocity


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def _image_key(image_id: str) -> int:
    # stable across processes, unlike hash()
    return int.from_bytes(hashlib.sha256(image_id.encode("utf-8")).digest()[:8], "little")


def build_batch(img: TrainImage, pairs: Sequence[LabeledPair], words: WordVocab):
    tag_ids = np.array([words.index(t) for t in img.tags], dtype=np.int64)
    subj = np.array([p.subject_region_index for p in pairs], dtype=np.int64)
    obj = np.array([p.object_region_index for p in pairs], dtype=np.int64)
    word_ids = np.stack(
        [tag_ids[subj], np.full(len(pairs), words.mask), tag_ids[obj], np.full(len(pairs), words.sep)],
        axis=1,
    )
    labels = np.array([[p.subject_label, p.predicate_label, p.object_label] for p in pairs], dtype=np.int64)
    return PairBatch(img.features, img.geometry, subj, obj, word_ids), labels


@dataclass
class TrainResult:
    params: dict
    log: list[dict] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        if not self.log:
            return float("nan")
        last = self.log[-1]["epoch"]
        rows = [r for r in self.log if r["epoch"] == last]
        return sum(r["total"] * r["examples"] for r in rows) / sum(r["examples"] for r in rows)


def train(
    images: Sequence[TrainImage],
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    params: dict,
    words: WordVocab,
    *,
    weights: LossWeights | None = None,
    frozen: Sequence[str] = (),
    out_dir: str | Path | None = None,
    checkpoint_meta: Callable[[], dict] | None = None,
    object_names: Sequence[str] = (),
    predicate_names: Sequence[str] = (),
) -> TrainResult:
    """Train ``params`` in place and return them with the per-step loss log.

    Each step draws up to ``triplets_per_image`` labeled pairs from each of
    ``batch_images`` images; the step loss is the mean over those pairs.
    When ``out_dir`` is given, ``checkpoint.lsg`` is rewritten after every
    epoch and the log is appended to ``train_log.jsonl``.
    """
    images = [img for img in images if any(p.is_positive for p in img.pairs)]
    if not images:
        raise ValueError("training set has no image with a positive labeled pair")
    if cfg.weighted_loss and weights is None:
        raise ValueError("weighted_loss needs loss weights")
    use_weights = weights if cfg.weighted_loss else None
    frozen_set = set(frozen)
    trainable = (lambda name: name not in frozen_set) if frozen_set else None
    lambdas = cfg.lambdas
    velocity: dict = {}
    result = TrainResult(params)

    out = Path(out_dir) if out_dir is not None else None
    log_fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log_fh = open(out / "train_log.jsonl", "w", encoding="utf-8")
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for epoch in range(cfg.epochs):
            perm_seed = int(_rng(cfg.seed, epoch).integers(2**63))
            order = np.random.default_rng(perm_seed).permutation(len(images))
            for step, start in enumerate(range(0, len(images), cfg.batch_images)):
                chunk = [images[i] for i in order[start : start + cfg.batch_images]]
                jobs = []
                for img in chunk:
                    key = _image_key(img.image_id)
                    chosen = sample_training_batch(img.pairs, _rng(cfg.seed, epoch, key, 0),
                                                   cfg.triplets_per_image, cfg.negatives_per_positive)
                    if chosen:
                        jobs.append((img, chosen, _rng(cfg.seed, epoch, key, 1)))
                total_examples = sum(len(c) for _, c, _ in jobs)
                if total_examples == 0:
                    continue
                scale = 1.0 / total_examples

                def run(job):
                    img, chosen, drop_rng = job
                    batch, labels = build_batch(img, chosen, words)
                    return loss_and_grads(params, model_cfg, batch, labels, use_weights, lambdas,
                                          drop_rng, scale, trainable)

                results = list(pool.map(run, jobs)) if pool else [run(j) for j in jobs]
                grads = results[0][2]
                loss = results[0][0]
                parts = dict(results[0][1])
                for l, p, g in results[1:]:
                    loss += l
                    for k in parts:
                        parts[k] += p[k]
                    for name in grads:
                        grads[name] += g[name]
                if not np.isfinite(loss):
                    raise FloatingPointError(f"non-finite loss at epoch {epoch} step {step}")
                sgd_step(params, grads, cfg.lr, cfg.momentum, velocity, trainable)
                row = {
                    "epoch": epoch, "step": step,
                    "loss_s": parts["s"] * scale, "loss_p": parts["p"] * scale,
                    "loss_o": parts["o"] * scale, "total": loss,
                    "examples": total_examples, "perm_seed": perm_seed,
                }
                result.log.append(row)
                if log_fh is not None:
                    log_fh.write(json.dumps(row, sort_keys=True) + "\n")
            if out is not None:
                meta = {"train": asdict(cfg), "epochs_done": epoch + 1}
                if checkpoint_meta is not None:
                    meta.update(checkpoint_meta())
                save_checkpoint(
                    Checkpoint(model_cfg, params, list(words.words), list(object_names),
                               list(predicate_names), sorted(frozen_set), meta),
                    out / "checkpoint.lsg",
                )
            if result.log:
                log.info("epoch %d loss %.6f", epoch, result.final_loss)
    finally:
        if log_fh is not None:
            log_fh.close()
        if pool is not None:
            pool.shutdown()
    return result

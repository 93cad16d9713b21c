"""End-to-end acceptance checks, one test per criterion.

Each test records a pass/fail line that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import json
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from conftest import (
    ACCEPTANCE,
    exhaustive_matching,
    grad_check_errors,
    perturbed_params,
    random_eval_fixture,
    toy_config,
)
from langsg.core import Box, Region, Triplet, Vocabulary, box_geometry, iou
from langsg.evaluator import MODES, match_graph
from langsg.inference import ImageInputs, aggregate_graph, score_pairs
from langsg.labeler import LabeledPair, LossWeights, assign_labels, compute_loss_weights, image_rng
from langsg.matcher import ConceptLexicon, concepts_match, match_reasons
from langsg.model import WordVocab, init_params, triplet_loss
from langsg.pipeline import run_pipeline
from langsg.trainer import TrainConfig, TrainImage, train

ROOT = Path(__file__).resolve().parent.parent


@contextmanager
def criterion(n, title):
    detail = {"text": ""}
    try:
        yield detail
    except BaseException as exc:
        ACCEPTANCE[n] = (False, title, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        raise
    ACCEPTANCE[n] = (True, title, detail["text"])


def test_1_gradient_check():
    with criterion(1, "gradient check on every parameter tensor") as d:
        cfg = toy_config(d=16, n_heads=2, head_dim=8, n_layers=2, n_obj_classes=5, n_pred_classes=4)
        t0 = time.perf_counter()
        # seed 0 lands within one step of a head ReLU kink; seed 1 does not, and that is asserted
        errors, crossings = grad_check_errors(cfg, seed=1)
        elapsed = time.perf_counter() - t0
        worst = max(errors, key=errors.get)
        d["text"] = (f"{len(errors)} tensors, max rel err {errors[worst]:.2e} ({worst}), "
                     f"{crossings} kink crossings, {elapsed:.1f}s")
        assert len(errors) == len(init_params(cfg, 0))
        assert crossings == 0, d["text"]
        assert errors[worst] < 1e-4, d["text"]
        assert elapsed < 60, d["text"]


def test_2_loss_formula():
    with criterion(2, "loss with perfect s/o and uniform predicate over 51 classes") as d:
        n_obj, n_pred, b = 151, 51, 4
        rng = np.random.default_rng(0)
        labels = np.stack([rng.integers(1, n_obj, b), rng.integers(0, n_pred, b), rng.integers(1, n_obj, b)], 1)
        ps = np.eye(n_obj)[labels[:, 0]]
        po = np.eye(n_obj)[labels[:, 2]]
        pp = np.full((b, n_pred), 1.0 / n_pred)
        total, _ = triplet_loss(ps, pp, po, labels, LossWeights.uniform(n_obj, n_pred))
        d["text"] = f"loss {total[0]:.10f} vs ln(51) {math.log(51):.10f}"
        assert np.all(np.abs(total - math.log(51)) < 1e-6), d["text"]


def test_3_overfit_synthetic(tmp_path):
    with criterion(3, "synthetic overfit through the full pipeline") as d:
        cfg_path = ROOT / "configs" / "synth_overfit.json"
        cfg = json.loads(cfg_path.read_text())
        assert cfg["synth"]["n_images"] == 20 and cfg["synth"]["n_objects"] == 6
        assert cfg["synth"]["n_predicates"] == 4 and cfg["synth"]["feature_noise"] == 0.0 and cfg["seed"] == 0
        assert cfg["train"]["epochs"] <= 500
        t0 = time.perf_counter()
        report = run_pipeline(cfg_path, tmp_path)
        elapsed = time.perf_counter() - t0
        pred = report["eval"]["predcls"]["recall"]["R@50"]
        det = report["eval"]["sgdet"]["recall"]["R@50"]
        d["text"] = (f"PredCls R@50 {pred:.3f}, SGDet R@50 {det:.3f}, final loss "
                     f"{report['stages']['train']['final_loss']:.2e}, {cfg['train']['epochs']} epochs, {elapsed:.1f}s")
        assert pred >= 0.90 and det >= 0.80, d["text"]
        assert report["stages"]["train"]["final_loss"] < 0.1, d["text"]
        assert elapsed < 300, d["text"]


def test_4_evaluator_matches_oracle():
    with criterion(4, "evaluator vs exhaustive maximum matching") as d:
        rng = np.random.default_rng(2024)
        checks = 0
        for n in range(200):
            pred, gt = random_eval_fixture(rng, *((1, 1) if n % 2 else (2, 3)))
            assert len(gt.regions) <= 5 and len(gt.edges) <= 5 and len(pred.regions) <= 5
            for mode in MODES:
                for k in (1, 5, 20):
                    got = match_graph(pred, gt, k, mode).hits
                    want = exhaustive_matching(pred, gt, k, mode)
                    assert got == want, f"fixture {n} mode {mode} K={k}: {got} != {want}"
                    checks += 1
        d["text"] = f"200 fixtures, {checks} (mode, K) comparisons equal"


GEOMETRY_FIXTURES = [
    # (box, width, height) -> [top, left, bottom, right, w, h, area], all relative to the image
    ((0, 0, 100, 100), 100, 100, [0, 0, 1, 1, 1, 1, 1]),
    ((25, 50, 75, 100), 100, 100, [0.5, 0.25, 1, 0.75, 0.5, 0.5, 0.25]),
    ((0, 0, 50, 50), 200, 100, [0, 0, 0.5, 0.25, 0.25, 0.5, 0.125]),
    ((10, 20, 30, 60), 40, 80, [0.25, 0.25, 0.75, 0.75, 0.5, 0.5, 0.25]),
    ((100, 0, 200, 50), 400, 200, [0, 0.25, 0.25, 0.5, 0.25, 0.25, 0.0625]),
    ((0, 75, 20, 100), 80, 100, [0.75, 0, 1, 0.25, 0.25, 0.25, 0.0625]),
    ((30, 30, 60, 90), 120, 120, [0.25, 0.25, 0.75, 0.5, 0.25, 0.5, 0.125]),
    ((5, 10, 15, 30), 20, 40, [0.25, 0.25, 0.75, 0.75, 0.5, 0.5, 0.25]),
    ((1, 2, 3, 4), 8, 8, [0.25, 0.125, 0.5, 0.375, 0.25, 0.25, 0.0625]),
    ((640, 360, 1280, 720), 1280, 720, [0.5, 0.5, 1, 1, 0.5, 0.5, 0.25]),
]


def test_5_iou_and_geometry():
    with criterion(5, "IoU and box geometry") as d:
        v = iou(Box(0, 0, 10, 10), Box(5, 5, 15, 15))
        assert abs(v - 25 / 175) < 1e-9
        for box, w, h, want in GEOMETRY_FIXTURES:
            got = box_geometry(Box(*map(float, box)), w, h).as_array()
            assert np.allclose(got, want, rtol=0, atol=1e-12), f"{box} in {w}x{h}: {got.tolist()}"
        d["text"] = f"IoU {v:.12f}; {len(GEOMETRY_FIXTURES)} geometry fixtures exact"


def test_6_matching_rules():
    with criterion(6, "concept matching rules") as d:
        lex = ConceptLexicon.default()
        assert "hypernym" in match_reasons("tortoise", "animal", lex)
        assert "root" in match_reasons("baseball player", "player", lex)
        rng = np.random.default_rng(6)
        known = sorted(lex)
        picks = [known[i] for i in rng.choice(len(known), 80, replace=False)]
        letters = list("abcdefghijklmnopqrstuvwxyz")
        picks += ["".join(rng.choice(letters, 6)) + (" " + "".join(rng.choice(letters, 4)) if i % 2 else "")
                  for i in range(20)]
        bad = [c for c in picks if not concepts_match(c, c, lex)]
        assert not bad, bad
        d["text"] = "tortoise->animal via hypernym, baseball player->player via root, reflexive on 100 concepts"


def _label_fixture():
    rng = np.random.default_rng(70)
    objects = ["man", "woman", "horse", "dog", "table", "cup"]
    preds = ["ride", "near", "on", "hold"]
    vocab = Vocabulary.from_names(objects, preds)
    images = []
    for i in range(50):
        n = int(rng.integers(3, 6))
        regions = []
        for _ in range(n):
            x, y = rng.uniform(0, 60, 2)
            regions.append(Region(Box(round(x, 1), round(y, 1), round(x + 40, 1), round(y + 40, 1)),
                                  objects[int(rng.integers(len(objects)))], 1.0, np.zeros(2)))
        triplets = []
        for _ in range(int(rng.integers(2, 6))):
            s, o = rng.choice(n, 2, replace=False)
            # several predicates for the same concept pair make multi-match pairs common
            for p in rng.choice(preds, int(rng.integers(1, 4)), replace=False):
                triplets.append(Triplet(regions[s].detector_label, str(p), regions[o].detector_label))
        images.append((f"img_{i:03d}", regions, triplets))
    return images, vocab


def _label_all(images, vocab, lex, seed):
    return {image_id: assign_labels(regions, triplets, lex, vocab, image_rng(seed, image_id))
            for image_id, regions, triplets in images}


def _dump(labels):
    return json.dumps({k: [p.to_list() for p in v] for k, v in labels.items()}, sort_keys=True).encode()


def test_7_pseudo_label_determinism():
    with criterion(7, "pseudo-label determinism") as d:
        images, vocab = _label_fixture()
        lex = ConceptLexicon.default()
        a, b, c = (_label_all(images, vocab, lex, s) for s in (7, 7, 8))
        assert _dump(a) == _dump(b)
        multi = changed = 0
        for image_id, regions, triplets in images:
            for pa, pc in zip(a[image_id], c[image_id]):
                k, l = pa.subject_region_index, pa.object_region_index
                hits = {t.spo for t in triplets if concepts_match(t.subject, regions[k].detector_label, lex)
                        and concepts_match(t.object, regions[l].detector_label, lex)}
                if len(hits) > 1:
                    multi += 1
                    changed += pa != pc
        d["text"] = f"seed 7 runs byte-identical; seed 8 differs on {changed} of {multi} multi-match pairs"
        assert changed >= 1, d["text"]


def _train_images():
    rng = np.random.default_rng(8)
    images = []
    for i in range(6):
        pairs = [LabeledPair(k, l, int(rng.integers(1, 5)), int(rng.integers(0, 4)) if (k + l) % 2 else 1,
                             int(rng.integers(1, 5)))
                 for k in range(3) for l in range(3) if k != l]
        images.append(TrainImage(f"t{i}", rng.normal(size=(3, 12)), rng.uniform(size=(3, 7)),
                                 ["man", "horse", "cup"], pairs))
    return images


def test_8_weighted_loss_contract():
    with criterion(8, "loss weights and unit-weight training equivalence") as d:
        rng = np.random.default_rng(80)
        n = 40
        source = {c: int(rng.integers(0, 50)) for c in range(1, n) if rng.uniform() < 0.8}
        target = {c: int(rng.integers(0, 50)) for c in range(1, n) if rng.uniform() < 0.8}
        w = compute_loss_weights(source, target, n)
        for c in range(n):
            s, t = source.get(c, 0), target.get(c, 0)
            want = s / t if c and s > 0 and t > 0 else 1.0
            assert w[c] == want, (c, s, t, w[c])
        cfg = toy_config()
        words = WordVocab(["man", "horse", "cup"])
        tcfg = dict(lr=0.02, epochs=3, batch_images=2, seed=3)
        plain = train(_train_images(), cfg, TrainConfig(**tcfg), init_params(cfg, 1), words)
        unit = train(_train_images(), cfg, TrainConfig(**tcfg, weighted_loss=True), init_params(cfg, 1), words,
                     weights=LossWeights.uniform(cfg.n_obj_classes, cfg.n_pred_classes))
        same = all(np.array_equal(plain.params[k], unit.params[k]) for k in plain.params)
        same_log = [r["total"] for r in plain.log] == [r["total"] for r in unit.log]
        d["text"] = f"{n} classes checked; unit-weight training bit-identical: {same and same_log}"
        assert same and same_log


def test_9_graph_constraint():
    with criterion(9, "graph constraint over random inferences") as d:
        rng = np.random.default_rng(90)
        words = WordVocab(["man", "horse", "cup", "dog"])
        tags = ["man", "horse", "cup", "dog", "zebra"]
        models = []
        for s in range(5):
            cfg = toy_config(n_obj_classes=int(rng.integers(2, 7)), n_pred_classes=int(rng.integers(2, 6)),
                             n_layers=1)
            # strong perturbations keep background from winning every pair
            models.append((cfg, perturbed_params(cfg, s, scale=1.0)))
        edges = 0
        for i in range(1000):
            cfg, params = models[i % len(models)]
            n = int(rng.integers(1, 7))
            boxes = [Box(float(x), float(x), float(x) + 5.0, float(x) + 5.0) for x in range(n)]
            inputs = ImageInputs(boxes, rng.normal(size=(n, cfg.d_vis)), rng.uniform(size=(n, 7)),
                                 [tags[j] for j in rng.integers(0, len(tags), n)])
            scores = score_pairs(params, cfg, words, inputs)
            fixed = rng.integers(1, cfg.n_obj_classes, n).tolist() if i % 3 == 0 else None
            g = aggregate_graph(scores, boxes, fixed)
            keys = [(s, o) for s, _, o, _ in g.edges]
            assert len(keys) == len(set(keys)), f"inference {i}: duplicate ordered pair"
            g.validate(graph_constraint=True)
            edges += len(keys)
        d["text"] = f"1000 graphs, {edges} edges, no ordered pair repeated"
        assert edges > 0


REPRO_CONFIG = {
    "seed": 4,
    "synth": {"n_images": 10, "n_objects": 6, "n_predicates": 4, "feature_noise": 0.1, "distractors": 1},
    "model": {"d": 16, "n_layers": 2, "n_heads": 2, "head_dim": 8, "mlp_dim": 32, "d_word": 8, "dropout_p": 0.1},
    "train": {"epochs": 15, "batch_images": 3, "lr": 0.03},
    "weighted_loss": True,
    "infer": {"tasks": ["sgdet", "sgcls", "predcls"]},
    "eval": {"ks": [5, 20, 50]},
    "threads": 2,
}


def test_10_pipeline_reproducible(tmp_path):
    with criterion(10, "pipeline reproducibility") as d:
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(REPRO_CONFIG))
        run_pipeline(cfg_path, tmp_path / "a")
        run_pipeline(cfg_path, tmp_path / "b")
        names = ["train/checkpoint.lsg", "report.json"] + [f"graphs_{t}.jsonl" for t in REPRO_CONFIG["infer"]["tasks"]]
        diff = [n for n in names if (tmp_path / "a" / n).read_bytes() != (tmp_path / "b" / n).read_bytes()]
        d["text"] = f"{len(names)} artifacts compared, {len(diff)} differ"
        assert not diff, diff


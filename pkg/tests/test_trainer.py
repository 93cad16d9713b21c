import json

import numpy as np
import pytest

from conftest import toy_config
from langsg.labeler import LabeledPair, LossWeights
from langsg.model import WordVocab, init_params, load_checkpoint
from langsg.trainer import TrainConfig, TrainImage, build_batch, sgd_step, train

TAGS = ["man", "horse", "dog", "cup", "hat", "car"]
WORDS = WordVocab(TAGS)


def toy_images(n=4, n_regions=3, seed=0, d_vis=12):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        feats = rng.normal(size=(n_regions, d_vis))
        geom = rng.uniform(size=(n_regions, 7))
        tags = [TAGS[j] for j in rng.integers(0, len(TAGS), n_regions)]
        pairs = []
        for k in range(n_regions):
            for l in range(n_regions):
                if k != l:
                    pred = int(rng.integers(1, 4)) if len(pairs) < 2 else 0
                    pairs.append(LabeledPair(k, l, int(rng.integers(1, 5)), pred, int(rng.integers(1, 5))))
        out.append(TrainImage(f"img{i}", feats, geom, tags, pairs))
    return out


def test_sgd_step_plain():
    p = {"w": np.array([1.0])}
    sgd_step(p, {"w": np.array([2.0])}, 0.1, 0.0, {})
    assert p["w"][0] == pytest.approx(0.8)


def test_sgd_step_zero_gradient_is_noop():
    p = {"w": np.array([1.5, -2.0])}
    sgd_step(p, {"w": np.zeros(2)}, 0.1, 0.9, {})
    assert p["w"].tolist() == [1.5, -2.0]


def test_sgd_momentum_two_steps():
    p, v = {"w": np.array([1.0])}, {}
    g = {"w": np.array([2.0])}
    sgd_step(p, g, 0.1, 0.9, v)
    sgd_step(p, {"w": np.array([2.0])}, 0.1, 0.9, v)
    # v1 = 2, theta1 = 0.8; v2 = 0.9*2 + 2 = 3.8, theta2 = 0.8 - 0.38
    assert p["w"][0] == pytest.approx(0.42)


def test_sgd_skips_frozen_and_rejects_nan():
    p = {"a": np.ones(1), "b": np.ones(1)}
    sgd_step(p, {"a": np.ones(1), "b": np.ones(1)}, 1.0, 0.0, {}, trainable=lambda n: n != "b")
    assert p["a"][0] == 0.0 and p["b"][0] == 1.0
    with pytest.raises(FloatingPointError, match="a"):
        sgd_step(p, {"a": np.array([np.nan])}, 1.0, 0.0, {})


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=-1)
    with pytest.raises(ValueError):
        TrainConfig(momentum=1.0)
    with pytest.raises(ValueError, match="unknown"):
        TrainConfig.from_json({"learning_rate": 0.1})


def test_build_batch_word_layout():
    img = toy_images(1)[0]
    batch, labels = build_batch(img, img.pairs[:2], WORDS)
    assert batch.word_ids[:, 1].tolist() == [1, 1] and batch.word_ids[:, 3].tolist() == [2, 2]
    assert batch.word_ids[0, 0] == WORDS.index(img.tags[img.pairs[0].subject_region_index])
    assert labels.shape == (2, 3)


def _run(cfg, tcfg, images=None, **kw):
    params = init_params(cfg, 0)
    return train(toy_images() if images is None else images, cfg, tcfg, params, WORDS, **kw)


def test_zero_lr_keeps_loss_constant():
    cfg = toy_config(dropout_p=0.0)
    res = _run(cfg, TrainConfig(lr=0.0, epochs=3, batch_images=8, triplets_per_image=16))
    totals = [r["total"] for r in res.log]
    assert len(totals) == 3
    assert np.allclose(totals, totals[0], rtol=1e-12, atol=0)


def test_small_step_decreases_loss():
    cfg = toy_config(dropout_p=0.0)
    images = toy_images()
    base = _run(cfg, TrainConfig(lr=0.0, epochs=1, batch_images=8), images).final_loss
    res = _run(cfg, TrainConfig(lr=0.05, momentum=0.0, epochs=2, batch_images=8), images)
    assert res.log[1]["total"] < base


def test_same_seed_bit_identical_checkpoints(tmp_path):
    cfg = toy_config()
    tcfg = TrainConfig(lr=0.01, epochs=2, batch_images=2, seed=5)
    _run(cfg, tcfg, out_dir=tmp_path / "a")
    _run(cfg, tcfg, out_dir=tmp_path / "b")
    assert (tmp_path / "a/checkpoint.lsg").read_bytes() == (tmp_path / "b/checkpoint.lsg").read_bytes()
    assert (tmp_path / "a/train_log.jsonl").read_text() == (tmp_path / "b/train_log.jsonl").read_text()


def test_threads_do_not_change_result():
    cfg = toy_config()
    a = _run(cfg, TrainConfig(lr=0.01, epochs=2, batch_images=4))
    b = _run(cfg, TrainConfig(lr=0.01, epochs=2, batch_images=4, threads=3))
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])


def test_unit_weights_match_unweighted_exactly():
    cfg = toy_config()
    w = LossWeights.uniform(cfg.n_obj_classes, cfg.n_pred_classes)
    a = _run(cfg, TrainConfig(lr=0.01, epochs=2, batch_images=2))
    b = _run(cfg, TrainConfig(lr=0.01, epochs=2, batch_images=2, weighted_loss=True), weights=w)
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])


def test_different_seed_changes_result():
    cfg = toy_config()
    a = _run(cfg, TrainConfig(lr=0.01, epochs=1, batch_images=2, seed=0))
    b = _run(cfg, TrainConfig(lr=0.01, epochs=1, batch_images=2, seed=1))
    assert any(not np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_frozen_tensor_untouched():
    cfg = toy_config()
    start = init_params(cfg, 0)["txt.word_emb"].copy()
    res = _run(cfg, TrainConfig(lr=0.05, epochs=2), frozen=["txt.word_emb"])
    assert np.array_equal(res.params["txt.word_emb"], start)


def test_log_and_checkpoint_contents(tmp_path):
    cfg = toy_config()
    res = _run(cfg, TrainConfig(lr=0.01, epochs=2, batch_images=3), out_dir=tmp_path,
               object_names=["background", "a", "b", "c", "d"], predicate_names=["background", "x", "y", "z"])
    rows = [json.loads(l) for l in (tmp_path / "train_log.jsonl").read_text().splitlines()]
    assert len(rows) == 4 and {"epoch", "step", "loss_s", "loss_p", "loss_o", "total", "perm_seed"} <= set(rows[0])
    ck = load_checkpoint(tmp_path / "checkpoint.lsg")
    assert ck.meta["epochs_done"] == 2
    for k in res.params:
        assert np.array_equal(ck.params[k], res.params[k])


def test_no_positive_pairs_is_error():
    imgs = toy_images(2)
    for img in imgs:
        img.pairs = [LabeledPair(p.subject_region_index, p.object_region_index, 1, 0, 1) for p in img.pairs]
    with pytest.raises(ValueError, match="positive"):
        _run(toy_config(), TrainConfig(epochs=1), imgs)
    with pytest.raises(ValueError, match="positive"):
        _run(toy_config(), TrainConfig(epochs=1), [])


def test_weighted_loss_needs_weights():
    with pytest.raises(ValueError, match="weights"):
        _run(toy_config(), TrainConfig(epochs=1, weighted_loss=True))

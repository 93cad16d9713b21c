import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from langsg.core import (
    BACKGROUND,
    Box,
    GroundTruth,
    ImageRecord,
    Region,
    SceneGraph,
    SchemaError,
    Triplet,
    Vocabulary,
    box_geometry,
    iou,
    load_dataset,
    load_vocabulary,
    save_dataset,
    save_vocabulary,
)


def B(*xs):
    return Box(*map(float, xs))


def test_iou_identity_disjoint_and_partial():
    assert iou(B(0, 0, 10, 10), B(0, 0, 10, 10)) == 1.0
    assert iou(B(0, 0, 1, 1), B(5, 5, 6, 6)) == 0.0
    assert abs(iou(B(0, 0, 10, 10), B(5, 5, 15, 15)) - 25 / 175) < 1e-12


def test_iou_touching_edges_is_zero():
    assert iou(B(0, 0, 5, 5), B(5, 0, 10, 5)) == 0.0


boxes = st.tuples(
    st.floats(0, 100), st.floats(0, 100), st.floats(0.5, 50), st.floats(0.5, 50)
).map(lambda t: Box(t[0], t[1], t[0] + t[2], t[1] + t[3]))


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(boxes)
def test_iou_self_is_one(a):
    assert abs(iou(a, a) - 1.0) < 1e-12


def test_box_rejects_degenerate_and_nonfinite():
    with pytest.raises(ValueError):
        B(0, 0, 0, 10)
    with pytest.raises(ValueError):
        B(0, 0, float("nan"), 10)
    with pytest.raises(ValueError):
        Box.from_list([1, 2, 3])


def test_box_geometry_full_image():
    g = box_geometry(B(0, 0, 100, 100), 100, 100)
    assert g.as_array().tolist() == [0, 0, 1, 1, 1, 1, 1]


def test_box_geometry_hand_example():
    g = box_geometry(B(25, 50, 75, 100), 100, 100)
    assert g.as_array().tolist() == [0.5, 0.25, 1.0, 0.75, 0.5, 0.5, 0.25]


def test_box_geometry_rejects_zero_dimensions():
    with pytest.raises(ValueError):
        box_geometry(B(0, 0, 1, 1), 0, 10)


@given(boxes)
def test_box_geometry_invariants(b):
    g = box_geometry(b, 200, 200).as_array()
    assert np.all((g >= 0) & (g <= 1))
    top, left, bottom, right, w, h, area = g
    assert abs(w - (right - left)) < 1e-6 and abs(h - (bottom - top)) < 1e-6
    assert abs(area - w * h) < 1e-6


def test_vocabulary_background_first_and_unique():
    v = Vocabulary.from_names(["man", "horse"], ["ride"])
    assert v.object_names[0] == BACKGROUND and v.predicate_names[0] == BACKGROUND
    assert v.object_index("horse") == 2 and v.predicate_index("ride") == 1
    with pytest.raises(ValueError):
        Vocabulary.from_names(["man", "man"], ["ride"])


def test_load_vocabulary_prepends_background(tmp_path):
    (tmp_path / "v.json").write_text(json.dumps({"objects": ["man"], "predicates": ["ride"]}))
    v = load_vocabulary(tmp_path / "v.json")
    assert v.object_names == ("background", "man")
    save_vocabulary(v, tmp_path / "w.json")
    assert load_vocabulary(tmp_path / "w.json") == v


def test_load_vocabulary_schema_error(tmp_path):
    (tmp_path / "v.json").write_text(json.dumps({"objects": ["man"]}))
    with pytest.raises(SchemaError, match="predicates"):
        load_vocabulary(tmp_path / "v.json")


def test_triplet_validation_and_json():
    t = Triplet("man", "ride", "horse", binding=(0, 1))
    assert Triplet.from_json(t.to_json()) == t
    with pytest.raises(ValueError):
        Triplet("", "ride", "horse")
    with pytest.raises(ValueError):
        Triplet("man", "ride", "horse", binding=(1, 1))


def test_scene_graph_constraint_check():
    g = SceneGraph([(B(0, 0, 1, 1), 1), (B(1, 1, 2, 2), 2)], [(0, 1, 1, 0.5), (0, 2, 1, 0.4)])
    g.validate()
    with pytest.raises(ValueError):
        g.validate(graph_constraint=True)
    with pytest.raises(ValueError):
        SceneGraph([(B(0, 0, 1, 1), 1)], [(0, 1, 3, 1.0)]).validate()


def _record(d=3):
    rng = np.random.default_rng(0)
    regions = [Region(B(0, 0, 10, 10), "man", 0.9, rng.normal(size=d)),
               Region(B(5, 5, 20, 20), "horse", 0.8, rng.normal(size=d))]
    graph = SceneGraph([(B(0, 0, 10, 10), 1), (B(5, 5, 20, 20), 2)], [(0, 1, 1, 1.0)])
    gt = GroundTruth(graph, [rng.normal(size=d), rng.normal(size=d)], ["man", "horse"])
    return ImageRecord("img1", 20.0, 20.0, regions, ["a man riding a horse"],
                       [Triplet("man", "ride", "horse")], gt)


def test_dataset_roundtrip_bit_exact(tmp_path):
    rec = _record()
    save_dataset([rec], tmp_path / "d.jsonl", 3)
    (back,) = load_dataset(tmp_path / "d.jsonl")
    assert back.image_id == rec.image_id and back.captions == rec.captions
    assert back.parsed_triplets == rec.parsed_triplets
    for a, b in zip(back.regions, rec.regions):
        assert a == b and np.array_equal(a.feature, b.feature)
    assert back.gt.graph.regions == rec.gt.graph.regions and back.gt.graph.edges == rec.gt.graph.edges
    assert all(np.array_equal(a, b) for a, b in zip(back.gt.features, rec.gt.features))
    assert back.gt.tags == rec.gt.tags
    assert [r.box for r in back.gt_regions()] == [b for b, _ in rec.gt.graph.regions]


def _write(tmp_path, rows):
    p = tmp_path / "d.jsonl"
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return p


def test_missing_feature_is_schema_error_with_line(tmp_path):
    rows = [{"d_vis": 2},
            {"image_id": "a", "width": 10, "height": 10, "captions": [],
             "regions": [{"box": [0, 0, 5, 5], "label": "man", "score": 1.0}]}]
    with pytest.raises(SchemaError) as exc:
        load_dataset(_write(tmp_path, rows))
    assert exc.value.line == 2 and "feature" in exc.value.field


def test_feature_length_mismatch(tmp_path):
    rows = [{"d_vis": 3},
            {"image_id": "a", "width": 10, "height": 10, "captions": [],
             "regions": [{"box": [0, 0, 5, 5], "label": "man", "score": 1.0, "feature": [1, 2]}]}]
    with pytest.raises(SchemaError, match="line 2"):
        load_dataset(_write(tmp_path, rows))


def test_box_outside_image_rejected(tmp_path):
    rows = [{"image_id": "a", "width": 10, "height": 10, "captions": [],
             "regions": [{"box": [0, 0, 50, 5], "label": "man", "score": 1.0, "feature": [1]}]}]
    with pytest.raises(SchemaError):
        load_dataset(_write(tmp_path, rows))


def test_duplicate_gt_edges_collapsed(tmp_path):
    rows = [{"image_id": "a", "width": 10, "height": 10, "captions": [], "regions": [],
             "gt": {"regions": [{"box": [0, 0, 5, 5], "label_index": 1}, {"box": [2, 2, 8, 8], "label_index": 2}],
                    "edges": [[0, 1, 1], [0, 1, 1], [1, 2, 0]]}}]
    (rec,) = load_dataset(_write(tmp_path, rows))
    assert [e[:3] for e in rec.gt.graph.edges] == [(0, 1, 1), (1, 2, 0)]


def test_gt_regions_without_features_is_error(tmp_path):
    rows = [{"image_id": "a", "width": 10, "height": 10, "captions": [], "regions": [],
             "gt": {"regions": [{"box": [0, 0, 5, 5], "label_index": 1}], "edges": []}}]
    (rec,) = load_dataset(_write(tmp_path, rows))
    with pytest.raises(SchemaError, match="SGCls"):
        rec.gt_regions()

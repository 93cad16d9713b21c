import random

import pytest

from langsg.core import Triplet, Vocabulary
from langsg.matcher import (
    CLOSED,
    OPEN,
    CategoryMatcher,
    ConceptLexicon,
    LexEntry,
    build_open_vocabulary,
    concepts_match,
    fallback_root,
    filter_triplets,
    match_reasons,
)

LEX = ConceptLexicon.default()


def test_hypernym_rule():
    assert "hypernym" in match_reasons("tortoise", "animal", LEX)
    assert not concepts_match("animal", "tortoise", LEX)


def test_root_form_rule():
    assert "root" in match_reasons("baseball player", "player", LEX)


def test_lemma_and_synset_rules():
    assert {"lemma", "synset"} <= match_reasons("riding", "ride", LEX)
    assert concepts_match("puppy", "dog", LEX)


def test_case_insensitive_exact():
    assert "exact" in match_reasons("Man", "man", LEX)


def test_reflexive_on_lexicon_and_unknown_concepts():
    rng = random.Random(0)
    concepts = rng.sample(sorted(LEX), 50) + ["zorblax", "blue zorblax", "walk to"]
    assert all(concepts_match(c, c, LEX) for c in concepts)


def test_unrelated_concepts_do_not_match():
    assert not concepts_match("horse", "table", LEX)
    assert not concepts_match("cup", "ride", LEX)


def test_fallback_root():
    assert fallback_root("red car") == "car"
    assert fallback_root("stand next to") == "stand next to"
    assert fallback_root("") == ""


def test_lexicon_roundtrip():
    again = ConceptLexicon.from_dict(LEX.to_dict())
    assert again.to_dict() == LEX.to_dict()


def test_lexicon_entry_needs_root():
    with pytest.raises(ValueError):
        LexEntry(frozenset(), frozenset(), frozenset(), "")
    assert ConceptLexicon.from_dict({"red car": {}}).get("red car").root == "car"


def test_closed_filter_rewrites_to_categories():
    vocab = Vocabulary.from_names(["person", "animal", "table"], ["ride", "on"])
    ts = [Triplet("man", "riding", "tortoise"), Triplet("cup", "on", "table"), Triplet("boy", "on", "table")]
    out = filter_triplets(ts, vocab, LEX, CLOSED)
    assert [t.spo for t in out] == [("person", "ride", "animal"), ("person", "on", "table")]


def test_open_filter_is_identity():
    ts = [Triplet("a", "b", "c")]
    assert filter_triplets(ts, Vocabulary.from_names(["x"], ["y"]), LEX, OPEN) == ts
    with pytest.raises(ValueError):
        filter_triplets(ts, Vocabulary.from_names(["x"], ["y"]), LEX, "half-open")


def test_category_matcher_first_match_and_background():
    m = CategoryMatcher(["background", "animal", "dog"], LEX)
    assert m.index("puppy") == 1
    assert m.index("table") == 0


def test_open_vocabulary_thresholds_and_order():
    ts = [Triplet("man", "ride", "horse")] * 10 + [Triplet("dog", "on", "bench")] * 3 + \
        [Triplet("cat", "near", "cup")] * 2
    v = build_open_vocabulary(ts, min_obj_freq=3, min_pred_freq=10)
    assert v.object_names == ("background", "horse", "man", "bench", "dog")
    assert v.predicate_names == ("background", "ride")


def test_open_vocabulary_empty_raises():
    with pytest.raises(ValueError, match="empty"):
        build_open_vocabulary([Triplet("a", "b", "c")])

"""Lexicon-based concept matching, closed-set triplet filtering and open vocabularies."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import Triplet, Vocabulary

CLOSED, OPEN = "closed", "open"

# words that never serve as the root of a noun phrase
_FUNCTION_WORDS = frozenset(
    "on in at with near under above behind of to from by for into onto over off up down".split()
)


@dataclass(frozen=True)
class LexEntry:
    lemmas: frozenset[str]
    synsets: frozenset[str]
    hypernyms: frozenset[str]
    root: str

    def __post_init__(self):
        if not self.root:
            raise ValueError("root form must be nonempty")


class ConceptLexicon:
    """Read-only map from concept strings to lemmas, synsets, hypernyms and root form.

    Lookups are case-insensitive.  Hypernym sets hold the full chain up to the
    taxonomy root, so a single set intersection decides specialization.
    """

    def __init__(self, entries: Mapping[str, LexEntry]):
        self._entries = {k.lower(): v for k, v in entries.items()}

    def __contains__(self, concept: str) -> bool:
        return concept.lower() in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def get(self, concept: str) -> LexEntry | None:
        return self._entries.get(concept.lower())

    def root_form(self, concept: str) -> str:
        entry = self.get(concept)
        if entry is not None:
            return entry.root
        return fallback_root(concept)

    @classmethod
    def from_dict(cls, d: Mapping[str, Mapping]) -> "ConceptLexicon":
        entries = {}
        for concept, e in d.items():
            entries[concept] = LexEntry(
                frozenset(x.lower() for x in e.get("lemmas", [])) | {concept.lower()},
                frozenset(e.get("synsets", [])),
                frozenset(e.get("hypernyms", [])),
                str(e.get("root") or fallback_root(concept)).lower(),
            )
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "ConceptLexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "ConceptLexicon":
        """The curated fixture lexicon shipped with the package."""
        text = resources.files("langsg").joinpath("data/lexicon.json").read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            k: {
                "lemmas": sorted(e.lemmas), "synsets": sorted(e.synsets),
                "hypernyms": sorted(e.hypernyms), "root": e.root,
            }
            for k, e in sorted(self._entries.items())
        }


def fallback_root(concept: str) -> str:
    """Head word of a phrase not in the lexicon ("red car" -> "car").

    Phrases ending in a function word (multi-word predicates) keep their full
    text so that "stand next to" and "walk to" do not collapse onto "to".
    """
    words = concept.lower().split()
    if not words:
        return ""
    if len(words) == 1 or words[-1] in _FUNCTION_WORDS:
        return " ".join(words)
    return words[-1]


def match_reasons(a: str, b: str, lex: ConceptLexicon) -> set[str]:
    """Every rule under which concept ``a`` matches concept ``b``.

    Possible members: ``exact``, ``lemma``, ``synset``, ``hypernym`` (a is a
    specialization of b) and ``root``.
    """
    reasons = set()
    if a.strip().lower() == b.strip().lower():
        reasons.add("exact")
    ea, eb = lex.get(a), lex.get(b)
    if ea is not None and eb is not None:
        if ea.lemmas & eb.lemmas:
            reasons.add("lemma")
        if ea.synsets & eb.synsets:
            reasons.add("synset")
        if ea.hypernyms & eb.synsets:
            reasons.add("hypernym")
    if lex.root_form(a) == lex.root_form(b):
        reasons.add("root")
    return reasons


def concepts_match(a: str, b: str, lex: ConceptLexicon) -> bool:
    return bool(match_reasons(a, b, lex))


class CategoryMatcher:
    """Memoized first-match lookup of free-form concepts into vocabulary categories."""

    def __init__(self, names: Sequence[str], lex: ConceptLexicon):
        # index 0 is background and never a match target
        self.names = list(names)
        self.lex = lex
        self._cache: dict[str, int] = {}

    def index(self, concept: str) -> int:
        """Vocabulary index of the first matching category, or 0 when none matches."""
        key = concept.lower()
        if key not in self._cache:
            found = 0
            for i, name in enumerate(self.names[1:], start=1):
                if concepts_match(concept, name, self.lex):
                    found = i
                    break
            self._cache[key] = found
        return self._cache[key]


def filter_triplets(
    triplets: Iterable[Triplet],
    vocab: Vocabulary,
    lex: ConceptLexicon,
    mode: str = CLOSED,
    *,
    obj_matcher: CategoryMatcher | None = None,
    pred_matcher: CategoryMatcher | None = None,
) -> list[Triplet]:
    """Keep triplets whose three fields map into the vocabulary, rewritten to category names.

    Open mode keeps everything untouched.
    """
    triplets = list(triplets)
    if mode == OPEN:
        return triplets
    if mode != CLOSED:
        raise ValueError(f"unknown filter mode {mode!r}")
    om = obj_matcher or CategoryMatcher(vocab.object_names, lex)
    pm = pred_matcher or CategoryMatcher(vocab.predicate_names, lex)
    out = []
    for t in triplets:
        s, p, o = om.index(t.subject), pm.index(t.predicate), om.index(t.object)
        if s and p and o:
            out.append(
                replace(
                    t,
                    subject=vocab.object_names[s],
                    predicate=vocab.predicate_names[p],
                    object=vocab.object_names[o],
                )
            )
    return out


def concept_frequencies(triplets: Iterable[Triplet]) -> tuple[Counter, Counter]:
    """Object (subject and object slots pooled) and predicate counts."""
    objs: Counter = Counter()
    preds: Counter = Counter()
    for t in triplets:
        objs[t.subject] += 1
        objs[t.object] += 1
        preds[t.predicate] += 1
    return objs, preds


def build_open_vocabulary(
    triplets: Iterable[Triplet], min_obj_freq: int = 3, min_pred_freq: int = 10
) -> Vocabulary:
    objs, preds = concept_frequencies(triplets)

    def keep(counts: Counter, threshold: int) -> list[str]:
        kept = [(-c, name) for name, c in counts.items() if c >= threshold]
        return [name for _, name in sorted(kept)]

    obj_names = keep(objs, min_obj_freq)
    pred_names = keep(preds, min_pred_freq)
    if not obj_names or not pred_names:
        raise ValueError(
            f"open vocabulary is empty: {len(obj_names)} objects >= {min_obj_freq}, "
            f"{len(pred_names)} predicates >= {min_pred_freq}"
        )
    return Vocabulary.from_names(obj_names, pred_names)

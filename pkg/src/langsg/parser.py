"""Caption → subject-predicate-object triplets with a small pattern grammar.

The grammar chunks a caption into noun phrases (optional determiners and
adjectives, then nouns) and links consecutive phrases through a verb, a
verb followed by a preposition, or a bare preposition.  It is not a
dependency parser; pre-parsed triplets can be supplied in the dataset
file instead and are passed through untouched by :func:`ingest_triplets`.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core import SOURCE_CAPTION, ImageRecord, Triplet

NOUN, VERB, ADP, DET, ADJ, CONJ, OTHER = "NOUN", "VERB", "ADP", "DET", "ADJ", "CONJ", "OTHER"

_IRREGULAR = {
    "men": "man", "women": "woman", "children": "child", "people": "person",
    "feet": "foot", "teeth": "tooth", "mice": "mouse", "geese": "goose",
    "sheep": "sheep", "fish": "fish", "deer": "deer", "knives": "knife",
    "leaves": "leaf", "shelves": "shelf", "wolves": "wolf", "scarves": "scarf",
    "is": "be", "are": "be", "was": "be", "were": "be", "been": "be", "being": "be", "am": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do",
    "sat": "sit", "sitting": "sit", "ate": "eat", "eaten": "eat",
    "rode": "ride", "ridden": "ride", "held": "hold", "stood": "stand",
    "flew": "fly", "flown": "fly", "flies": "fly", "ran": "run", "running": "run",
    "swam": "swim", "swimming": "swim", "wore": "wear", "worn": "wear",
    "drove": "drive", "driven": "drive", "threw": "throw", "thrown": "throw",
    "caught": "catch", "lay": "lie", "lying": "lie", "laid": "lay",
    "hung": "hang", "grew": "grow", "grown": "grow", "took": "take", "taken": "take",
    "made": "make", "led": "lead", "fed": "feed", "hit": "hit", "put": "put",
    "leaning": "lean", "cutting": "cut", "getting": "get", "putting": "put",
    "hitting": "hit",
    "glasses": "glasses", "pants": "pants", "jeans": "jeans", "shorts": "shorts",
    "skis": "ski", "bus": "bus", "grass": "grass", "glass": "glass", "dress": "dress",
    "across": "across", "this": "this", "his": "his", "its": "its", "as": "as",
}

# -ing words that are nouns, never verb forms
_ING_NOUNS = frozenset((
    "building", "ceiling", "clothing", "painting", "railing", "awning", "ring", "king",
    "string", "thing", "wing", "sling", "swing", "evening", "morning", "wedding",
    "frosting", "icing", "topping", "stuffing", "pudding", "dressing", "lighting",
    "stocking", "sibling", "bedding", "ping", "spring", "sing", "siding", "landing",
))

DEFAULT_STOP_WORDS = (
    "a", "an", "the", "his", "her", "their", "its", "my", "our", "your", "this", "that",
    "these", "those", "some", "two", "three", "four", "five", "several", "many", "few",
    "one", "each", "every", "another", "other", "all", "both", "lots", "lot",
)

DEFAULT_AUXILIARIES = ("be", "do", "can", "will", "there", "here", "while", "who", "which", "that")

DEFAULT_VERBS = (
    "ride", "drive", "hold", "carry", "eat", "wear", "sit", "stand", "walk", "lie",
    "hang", "fly", "play", "throw", "catch", "hit", "look", "watch", "cover", "cross",
    "park", "pull", "push", "use", "cut", "feed", "graze", "swim", "run", "jump",
    "lean", "rest", "sleep", "wait", "read", "talk", "kick", "surf", "ski", "skate",
    "grow", "mount", "attach", "contain", "fill", "lay", "have", "make", "take",
    "chase", "follow", "lead", "drink", "pet", "hug", "kiss", "brush", "hold", "touch",
    "face", "sell", "wash", "paint", "climb", "enter", "leave", "approach", "pass",
    "show", "decorate", "display", "tow", "serve", "prepare", "cook", "swing", "smile",
    "point", "reach", "sail", "float", "travel", "move", "line", "surround", "overlook",
    "fix", "hang", "perch", "stack", "place", "lift", "steer", "land", "bite", "sniff",
)

DEFAULT_PREPOSITIONS = (
    "in front of", "on top of", "next to", "in the middle of", "on the side of",
    "on", "in", "at", "with", "near", "under", "above", "behind", "beside", "by", "of",
    "from", "into", "onto", "over", "inside", "outside", "across", "along", "against",
    "through", "atop", "beneath", "below", "underneath", "around", "between", "among",
    "toward", "towards", "for", "to", "up", "down", "off", "upon", "within", "past",
)

DEFAULT_ADJECTIVES = (
    "red", "blue", "green", "yellow", "white", "black", "brown", "gray", "grey", "orange",
    "pink", "purple", "large", "big", "small", "little", "tall", "short", "long", "old",
    "young", "new", "wooden", "metal", "clear", "cloudy", "sunny", "dark", "bright",
    "empty", "full", "open", "closed", "busy", "close", "wet", "dry", "happy", "many",
    "huge", "tiny", "pretty", "beautiful", "colorful", "striped", "plastic", "glass",
)

DEFAULT_CONJUNCTIONS = ("and", "or", "but", "while", "as")


@dataclass(frozen=True)
class Token:
    surface: str
    lemma: str
    tag: str

    def __post_init__(self):
        if not self.lemma or self.lemma != self.lemma.lower():
            raise ValueError(f"lemma must be lowercase and nonempty: {self.lemma!r}")


@dataclass(frozen=True)
class ParseRuleSet:
    """Word lists and limits driving :func:`tokenize` and :func:`extract_triplets`.

    ``prepositions`` may contain multi-word entries; longer entries win over
    their prefixes because matching is tried longest-first.
    """

    stop_words: frozenset[str] = frozenset(DEFAULT_STOP_WORDS)
    auxiliaries: frozenset[str] = frozenset(DEFAULT_AUXILIARIES)
    verbs: frozenset[str] = frozenset(DEFAULT_VERBS)
    prepositions: tuple[str, ...] = DEFAULT_PREPOSITIONS
    adjectives: frozenset[str] = frozenset(DEFAULT_ADJECTIVES)
    conjunctions: frozenset[str] = frozenset(DEFAULT_CONJUNCTIONS)
    max_np_length: int = 4
    extra_lemmas: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if self.max_np_length < 1:
            raise ValueError("max_np_length must be positive")
        preps = tuple(sorted(set(self.prepositions), key=lambda p: (-len(p.split()), p)))
        object.__setattr__(self, "prepositions", preps)
        object.__setattr__(self, "single_prepositions", frozenset(p for p in preps if " " not in p))

    @classmethod
    def from_json(cls, path: str | Path) -> "ParseRuleSet":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        base = cls()
        return cls(
            stop_words=frozenset(d.get("stop_words", base.stop_words)),
            auxiliaries=frozenset(d.get("auxiliaries", base.auxiliaries)),
            verbs=frozenset(d.get("verbs", base.verbs)),
            prepositions=tuple(d.get("prepositions", base.prepositions)),
            adjectives=frozenset(d.get("adjectives", base.adjectives)),
            conjunctions=frozenset(d.get("conjunctions", base.conjunctions)),
            max_np_length=int(d.get("max_np_length", base.max_np_length)),
            extra_lemmas=dict(d.get("lemmas", {})),
        )


DEFAULT_RULES = ParseRuleSet()

_WORD_RE = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")
_VOWELS = set("aeiou")


def lemmatize(word: str, rules: ParseRuleSet = DEFAULT_RULES) -> str:
    """Table lookup, then suffix stripping; unknown words pass through."""
    if word in rules.extra_lemmas:
        return rules.extra_lemmas[word]
    if word in _IRREGULAR:
        return _IRREGULAR[word]
    if word in _ING_NOUNS:
        return word
    known = rules.verbs
    if word.endswith("ing") and len(word) > 4:
        stem = word[:-3]
        for cand in (stem, stem + "e", stem[:-1] if _doubled(stem) else None):
            if cand and cand in known:
                return cand
        if _doubled(stem):
            return stem[:-1]
        return stem + "e" if _needs_e(stem) else stem
    if word.endswith("ed") and len(word) > 3:
        stem = word[:-2]
        for cand in (stem, stem + "e", stem[:-1] if _doubled(stem) else None, word[:-1]):
            if cand and cand in known:
                return cand
        if len(stem) < 4 or not _VOWELS & set(stem):
            return word
        if stem.endswith("i"):
            return stem[:-1] + "y"
        return stem[:-1] if _doubled(stem) else stem
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith("es") and len(word) > 3 and re.search(r"(s|x|z|ch|sh)es$", word):
        return word[:-2]
    if word.endswith("s") and len(word) > 3 and not re.search(r"(ss|us|is)$", word):
        return word[:-1]
    return word


def _doubled(stem: str) -> bool:
    return len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS and stem[-1] not in "lsz"


def _needs_e(stem: str) -> bool:
    # consonant-vowel-consonant endings usually lost a silent e (rid->ride, mak->make)
    return (
        len(stem) >= 3
        and stem[-1] not in _VOWELS | {"w", "x", "y"}
        and stem[-2] in _VOWELS
        and stem[-3] not in _VOWELS
    )


def tokenize(caption: str, rules: ParseRuleSet = DEFAULT_RULES) -> list[Token]:
    words = _WORD_RE.findall(caption.lower())
    tokens = []
    for w in words:
        lemma = lemmatize(w, rules)
        tokens.append(Token(w, lemma, _tag(w, lemma, rules)))
    return tokens


def _tag(word: str, lemma: str, rules: ParseRuleSet) -> str:
    if word in rules.stop_words:
        return DET
    if word in rules.conjunctions:
        return CONJ
    if lemma in rules.auxiliaries or word in rules.auxiliaries:
        return OTHER
    if word in rules.single_prepositions:
        return ADP
    if word in rules.adjectives:
        return ADJ
    if word.isdigit():
        return OTHER
    if lemma in rules.verbs:
        # "ride"/"rides" can also be nouns; _nounish settles it from position
        return VERB
    if word.endswith("ing") and len(word) > 4 and word not in _ING_NOUNS:
        return VERB
    return NOUN


# ---------------------------------------------------------------------------
# Grammar
# ---------------------------------------------------------------------------


@dataclass
class _Phrase:
    text: str


@dataclass
class _Pred:
    text: str
    is_verb: bool


def _chunk(tokens: Sequence[Token], rules: ParseRuleSet) -> list:
    """Turn tokens into a list of _Phrase / _Pred / "CONJ" markers."""
    items: list = []
    i = 0
    n = len(tokens)
    lemmas = [t.lemma for t in tokens]
    surfaces = [t.surface for t in tokens]
    while i < n:
        tok = tokens[i]
        multi = _match_multiword_prep(surfaces, i, rules)
        if multi is not None:
            text, width = multi
            items.append(_Pred(text, False))
            i += width
            continue
        if tok.tag in (NOUN, ADJ, DET) or (tok.tag == VERB and _nounish(tokens, i)):
            j = i
            # participles before the head act as adjectives ("a parked car")
            while j < n and (
                tokens[j].tag in (DET, ADJ)
                or (tokens[j].tag == VERB and tokens[j].surface.endswith("ed"))
            ):
                j += 1
            nouns: list[str] = []
            while j < n and (tokens[j].tag == NOUN or (tokens[j].tag == VERB and _nounish(tokens, j))):
                nouns.append(lemmas[j])
                j += 1
            if nouns:
                # head noun plus at most one modifier ("baseball player")
                nouns = nouns[-rules.max_np_length :]
                items.append(_Phrase(" ".join(nouns[-2:])))
            i = j if j > i else i + 1
            continue
        if tok.tag == VERB:
            text = tok.lemma
            j = i + 1
            # verb particle / preposition directly after the verb joins it ("sit on")
            if j < n:
                multi = _match_multiword_prep(surfaces, j, rules)
                if multi is not None:
                    text += " " + multi[0]
                    j += multi[1]
                elif tokens[j].tag == ADP:
                    text += " " + tokens[j].lemma
                    j += 1
            items.append(_Pred(text, True))
            i = j
            continue
        if tok.tag == ADP:
            items.append(_Pred(tok.lemma, False))
        elif tok.tag == CONJ:
            items.append("CONJ")
        i += 1
    return items


def _nounish(tokens: Sequence[Token], i: int) -> bool:
    """A verb-tagged word acts as a noun right after a determiner/adjective (not -ing forms)."""
    tok = tokens[i]
    if tok.surface.endswith("ing"):
        return False
    if i == 0:
        return False
    return tokens[i - 1].tag in (DET, ADJ)


def _match_multiword_prep(surfaces: Sequence[str], i: int, rules: ParseRuleSet):
    for prep in rules.prepositions:
        parts = prep.split()
        if len(parts) < 2:
            break
        if tuple(surfaces[i : i + len(parts)]) == tuple(parts):
            return prep, len(parts)
    return None


def extract_triplets(tokens: Sequence[Token], rules: ParseRuleSet = DEFAULT_RULES) -> list[Triplet]:
    """Link consecutive noun phrases through the predicate between them.

    Left to right and greedy: the object of one triplet becomes the subject
    candidate for a following preposition, while a verb after a conjunction
    reattaches to the subject of the previous verb ("a man riding a horse and
    holding a whip").  Duplicates within one caption are dropped.
    """
    items = _chunk(tokens, rules)
    out: list[Triplet] = []
    seen: set[tuple[str, str, str]] = set()
    subject: str | None = None
    verb_subject: str | None = None
    pred: _Pred | None = None
    after_conj = False
    for item in items:
        if isinstance(item, _Phrase):
            if pred is not None and subject is not None:
                spo = (subject, pred.text, item.text)
                if spo not in seen:
                    seen.add(spo)
                    out.append(Triplet(*spo, source=SOURCE_CAPTION))
                if pred.is_verb:
                    verb_subject = subject
            pred = None
            subject = item.text
            after_conj = False
        elif isinstance(item, _Pred):
            if item.is_verb and after_conj and verb_subject is not None:
                subject = verb_subject
            if item.is_verb and verb_subject is None:
                verb_subject = subject
            pred = item
            after_conj = False
        else:
            after_conj = True
            pred = None
    return out


def parse_caption(caption: str, rules: ParseRuleSet = DEFAULT_RULES) -> list[Triplet]:
    return extract_triplets(tokenize(caption, rules), rules)


def ingest_triplets(record: ImageRecord) -> list[Triplet]:
    """Externally parsed triplets (captions, unlocalized graphs, ...) verbatim."""
    return list(record.parsed_triplets or [])


def parse_record(record: ImageRecord, rules: ParseRuleSet = DEFAULT_RULES) -> list[Triplet]:
    """Triplets for one image: pre-parsed ones win, otherwise the built-in grammar."""
    if record.parsed_triplets is not None:
        return ingest_triplets(record)
    out: list[Triplet] = []
    for cap in record.captions:
        out.extend(parse_caption(cap, rules))
    return out

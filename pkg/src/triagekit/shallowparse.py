"""Tokenization, deterministic POS tagging, predicate and argument extraction.

The tagger is a closed-class lexicon plus suffix heuristics, not a learned
model, so every tag is reproducible in tests. The patient-argument
extractor returns the first noun phrase after a predicate (role label
"A1"), which is the role that dominates key phrases in operations chat; a
full role labeller can be swapped in behind the same span contract.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

_DATA_DIR = Path(__file__).parent / "data"

POS_TAGS = ("VERB", "NOUN", "PRON", "ADJ", "ADV", "DET", "ADP", "PUNCT", "NUM", "OTHER")

# Punctuation peeled off the end of whitespace chunks; '?' splits anywhere.
_TERMINAL_PUNCT = ".,!;:"

_NUM_RE = re.compile(r"^[+-]?\d+([.,]\d+)*%?$")
_CODE_RE = re.compile(r"^(?=.*[0-9A-Za-z])(.*[._\-].*|(?=.*\d)(?=.*[A-Za-z]).*)$")


@dataclass(frozen=True)
class Token:
    text: str
    lower: str
    start: int
    end: int

    @property
    def is_question_mark(self) -> bool:
        return self.text == "?"


@dataclass(frozen=True)
class TaggedToken:
    token: Token
    pos: str


@dataclass(frozen=True)
class Predicate:
    """A verb token found in the action dictionary; lemma is the lowercase
    surface form (no stemming)."""

    index: int
    lemma: str


@dataclass(frozen=True)
class ArgumentSpan:
    """A numbered-argument span over tokens [start, end), tied to a predicate."""

    role: str
    start: int
    end: int
    predicate: Predicate


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int
    surface: str


def tokenize(text: str) -> list[Token]:
    """Split on whitespace; '?' is always its own token and terminal
    punctuation is peeled off chunk ends. Offsets index the source string."""
    tokens: list[Token] = []
    for chunk_match in re.finditer(r"\S+", text):
        chunk = chunk_match.group()
        base = chunk_match.start()
        for piece_start, piece in _split_chunk(chunk):
            start = base + piece_start
            tokens.append(
                Token(text=piece, lower=piece.lower(), start=start, end=start + len(piece))
            )
    return tokens


def _split_chunk(chunk: str) -> list[tuple[int, str]]:
    # Split around every '?' first, then peel terminal punctuation.
    pieces: list[tuple[int, str]] = []
    offset = 0
    for part in chunk.split("?"):
        if part:
            pieces.append((offset, part))
        offset += len(part)
        if offset < len(chunk):
            pieces.append((offset, "?"))
            offset += 1
    result: list[tuple[int, str]] = []
    for start, piece in pieces:
        if piece == "?":
            result.append((start, piece))
            continue
        tail: list[tuple[int, str]] = []
        end = len(piece)
        while end > 1 and piece[end - 1] in _TERMINAL_PUNCT:
            tail.append((start + end - 1, piece[end - 1]))
            end -= 1
        result.append((start, piece[:end]))
        result.extend(reversed(tail))
    return result


@dataclass(frozen=True)
class TaggerRules:
    """Closed-class word table plus ordered suffix rules."""

    closed: dict
    suffixes: tuple

    def __hash__(self):  # rules are loaded once and treated as a constant
        return id(self)


def _load_wordlist(path: Path) -> list[str]:
    words = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line and not line.startswith("#"):
                words.append(line.lower())
    return words


@lru_cache(maxsize=1)
def default_rules() -> TaggerRules:
    closed = {}
    for filename, tag in (
        ("pron.txt", "PRON"),
        ("det.txt", "DET"),
        ("adp.txt", "ADP"),
        ("verb.txt", "VERB"),
        ("adv.txt", "ADV"),
        ("adj.txt", "ADJ"),
        ("modal.txt", "OTHER"),
        ("conj.txt", "OTHER"),
    ):
        for word in _load_wordlist(_DATA_DIR / "pos" / filename):
            closed.setdefault(word, tag)
    suffixes = []
    with open(_DATA_DIR / "pos" / "suffix_rules.txt", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            suffix, tag = line.split()
            suffixes.append((suffix.lower(), tag.upper()))
    suffixes.sort(key=lambda rule: -len(rule[0]))
    return TaggerRules(closed=closed, suffixes=tuple(suffixes))


@lru_cache(maxsize=1)
def _modal_words() -> frozenset:
    return frozenset(_load_wordlist(_DATA_DIR / "pos" / "modal.txt"))


def _base_tag(lower: str, rules: TaggerRules) -> str:
    if all(not ch.isalnum() for ch in lower):
        return "PUNCT"
    if _NUM_RE.match(lower):
        return "NUM"
    tag = rules.closed.get(lower)
    if tag is not None:
        return tag
    for suffix, suffix_tag in rules.suffixes:
        if len(lower) > len(suffix) + 1 and lower.endswith(suffix):
            return suffix_tag
    return "NOUN"


def pos_tag(tokens: list[Token], action_verbs=frozenset(), rules: TaggerRules | None = None) -> list[TaggedToken]:
    """Deterministic coarse tagging; unknown words default to NOUN.

    A word from the action-verb dictionary is promoted to VERB when it
    opens the sentence (imperative) or directly follows a pronoun, a modal,
    or an adverb ("we will scale...", "please reboot...").
    """
    rules = rules or default_rules()
    modals = _modal_words()
    tagged: list[TaggedToken] = []
    for i, token in enumerate(tokens):
        tag = _base_tag(token.lower, rules)
        if token.lower in action_verbs and tag != "VERB":
            if i == 0:
                tag = "VERB"
            else:
                prev = tagged[i - 1]
                if prev.pos in ("PRON", "ADV") or prev.token.lower in modals:
                    tag = "VERB"
        tagged.append(TaggedToken(token=token, pos=tag))
    return tagged


def find_predicates(tagged: list[TaggedToken], action_verbs) -> list[Predicate]:
    """Predicates are VERB tokens whose surface form is in the action
    dictionary, returned in token order."""
    terms = action_verbs.terms if hasattr(action_verbs, "terms") else frozenset(action_verbs)
    return [
        Predicate(index=i, lemma=tt.token.lower)
        for i, tt in enumerate(tagged)
        if tt.pos == "VERB" and tt.token.lower in terms
    ]


def extract_a1_argument(tagged: list[TaggedToken], predicate: Predicate) -> ArgumentSpan | None:
    """First noun phrase (DET? ADJ* (NOUN|NUM)+) strictly after the
    predicate and before any later VERB; absent when no such phrase."""
    bound = len(tagged)
    for i in range(predicate.index + 1, len(tagged)):
        if tagged[i].pos == "VERB":
            bound = i
            break
    i = predicate.index + 1
    while i < bound:
        start = i
        if tagged[i].pos == "DET":
            i += 1
        while i < bound and tagged[i].pos == "ADJ":
            i += 1
        head_start = i
        while i < bound and tagged[i].pos in ("NOUN", "NUM"):
            i += 1
        if i > head_start:
            return ArgumentSpan(role="A1", start=start, end=i, predicate=predicate)
        i = start + 1
    return None


def extract_key_entities(tagged: list[TaggedToken]) -> list[EntitySpan]:
    """Maximal ADJ*-prefixed NOUN/NUM runs plus code-like tokens
    (digits-with-letters, dots, underscores, dashes), deduplicated by span."""
    spans: list[tuple[int, int]] = []
    n = len(tagged)
    i = 0
    while i < n:
        start = i
        while i < n and tagged[i].pos == "ADJ":
            i += 1
        head_start = i
        while i < n and tagged[i].pos in ("NOUN", "NUM"):
            i += 1
        if i > head_start:
            spans.append((start, i))
        else:
            i = start + 1
    for idx, tt in enumerate(tagged):
        if _CODE_RE.match(tt.token.text) and tt.pos != "PUNCT":
            spans.append((idx, idx + 1))
    seen = set()
    entities = []
    for start, end in sorted(spans):
        if (start, end) in seen:
            continue
        seen.add((start, end))
        surface = " ".join(tagged[i].token.text for i in range(start, end))
        entities.append(EntitySpan(start=start, end=end, surface=surface))
    return entities


def spans_overlap(a_start: int, a_end: int, b_start: int, b_end: int) -> bool:
    return a_start < b_end and b_start < a_end

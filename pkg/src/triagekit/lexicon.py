"""Curated domain dictionaries and term matching.

Lexicon files are UTF-8, one term per line; ``#`` starts a comment line and
blank lines are ignored. Terms may span multiple words ("500x errors").
Matching is done over pre-lowercased token lists and returns maximal
non-overlapping spans, longest match first with left-to-right tie-breaking.

Inflected verb forms must be listed explicitly; there is no stemming.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

LEXICON_KINDS = ("action_verb", "symptom_term", "question_word")


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class Lexicon:
    """An immutable set of lowercase terms of one kind."""

    name: str
    terms: frozenset[str]
    kind: str

    def __post_init__(self):
        if self.kind not in LEXICON_KINDS:
            raise LexiconError(f"unknown lexicon kind: {self.kind!r}")
        if not self.terms:
            raise LexiconError(f"lexicon {self.name!r} has no terms")
        for term in self.terms:
            if term != term.strip() or term != term.lower() or not term:
                raise LexiconError(f"lexicon {self.name!r}: bad term {term!r}")


@dataclass(frozen=True)
class TermMatch:
    """A matched term covering tokens [start, end)."""

    term: str
    start: int
    end: int


def make_lexicon(name: str, terms, kind: str) -> Lexicon:
    """Build a lexicon from raw strings, lowercasing and deduplicating."""
    cleaned = frozenset(t.strip().lower() for t in terms if t.strip())
    if not cleaned:
        raise LexiconError(f"lexicon {name!r} has no terms")
    return Lexicon(name=name, terms=cleaned, kind=kind)


def load_lexicon(path, kind: str) -> Lexicon:
    """Load a lexicon file; an empty effective term set is a configuration
    fault and raises."""
    path = Path(path)
    terms = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            terms.append(line)
    if not terms:
        raise LexiconError(f"lexicon file {path} contains no terms")
    return make_lexicon(path.stem, terms, kind)


def match_terms(lexicon: Lexicon, tokens: list[str]) -> list[TermMatch]:
    """All maximal non-overlapping matches, longest first, then leftmost.

    ``tokens`` must already be lowercase (the shared tokenizer provides
    ``Token.lower``). Multi-word terms match contiguous token runs.
    """
    by_words = {}
    max_len = 1
    for term in lexicon.terms:
        words = tuple(term.split())
        by_words[words] = term
        max_len = max(max_len, len(words))

    candidates = []
    n = len(tokens)
    for start in range(n):
        for length in range(1, min(max_len, n - start) + 1):
            words = tuple(tokens[start : start + length])
            term = by_words.get(words)
            if term is not None:
                candidates.append(TermMatch(term=term, start=start, end=start + length))

    candidates.sort(key=lambda m: (-(m.end - m.start), m.start))
    taken = [False] * n
    accepted = []
    for match in candidates:
        if any(taken[i] for i in range(match.start, match.end)):
            continue
        for i in range(match.start, match.end):
            taken[i] = True
        accepted.append(match)
    accepted.sort(key=lambda m: m.start)
    return accepted

"""Unsupervised domain-knowledge-guided artefact prediction.

Three independent detectors (action, symptom, diagnostic-query) feed a
priority resolution: Diagnostic beats Action beats Symptom, and an
utterance with no evidence at all is chit-chat. The query detector pairs a
lexical rule with a multinomial Naive Bayes model; an utterance is a
non-query only when both say so. A query with no action or symptom
evidence stays chit-chat: pure questions about nothing domain-relevant are
not diagnostics.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

from .lexicon import Lexicon, TermMatch, load_lexicon, match_terms
from .model import ArtefactLabel, Prediction
from .shallowparse import (
    ArgumentSpan,
    EntitySpan,
    Predicate,
    extract_a1_argument,
    extract_key_entities,
    find_predicates,
    pos_tag,
    spans_overlap,
    tokenize,
)

_DATA_DIR = Path(__file__).parent / "data"

FIVE_W1H = frozenset({"who", "what", "when", "where", "why", "how"})

#: Mapping of NPS Chat post classes to the binary query scheme. The table is
#: explicit and swappable; pass a different one to :func:`load_nps_posts`.
NPS_CLASS_MAP = {
    "whQuestion": "query",
    "ynQuestion": "query",
    "Accept": "non_query",
    "Bye": "non_query",
    "Clarify": "non_query",
    "Continuer": "non_query",
    "Emotion": "non_query",
    "Emphasis": "non_query",
    "Greet": "non_query",
    "nAnswer": "non_query",
    "Other": "non_query",
    "Reject": "non_query",
    "Statement": "non_query",
    "System": "non_query",
    "yAnswer": "non_query",
}

QUERY_CLASSES = ("query", "non_query")


@dataclass(frozen=True)
class NBModel:
    """Multinomial Naive Bayes with additive smoothing over two classes.

    ``log_likelihood[c][t]`` holds log P(t|c) for every vocabulary token;
    unseen tokens fall back to the smoothing floor ``log_unseen[c]``.
    """

    priors: dict
    log_likelihood: dict
    log_unseen: dict
    vocabulary: frozenset
    alpha: float


def train_query_nb(corpus, alpha: float = 1.0) -> NBModel:
    """Train on (tokens, class) pairs; both classes must be present.

    likelihood(t|c) = (count(t,c) + alpha) / (count(c) + alpha * |V|).
    """
    if alpha <= 0:
        raise ValueError("smoothing alpha must be > 0")
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty training corpus")
    doc_counts = {c: 0 for c in QUERY_CLASSES}
    token_counts = {c: {} for c in QUERY_CLASSES}
    total_tokens = {c: 0 for c in QUERY_CLASSES}
    vocabulary = set()
    for tokens, cls in corpus:
        if cls not in doc_counts:
            raise ValueError(f"unknown class {cls!r}")
        doc_counts[cls] += 1
        for token in tokens:
            vocabulary.add(token)
            token_counts[cls][token] = token_counts[cls].get(token, 0) + 1
            total_tokens[cls] += 1
    if any(doc_counts[c] == 0 for c in QUERY_CLASSES):
        raise ValueError("training corpus must contain both classes")

    n_docs = len(corpus)
    v = len(vocabulary)
    priors = {c: doc_counts[c] / n_docs for c in QUERY_CLASSES}
    log_likelihood = {}
    log_unseen = {}
    for cls in QUERY_CLASSES:
        denom = total_tokens[cls] + alpha * v
        log_likelihood[cls] = {
            t: math.log((token_counts[cls].get(t, 0) + alpha) / denom) for t in vocabulary
        }
        log_unseen[cls] = math.log(alpha / denom)
    return NBModel(
        priors=priors,
        log_likelihood=log_likelihood,
        log_unseen=log_unseen,
        vocabulary=frozenset(vocabulary),
        alpha=alpha,
    )


def classify_query_nb(model: NBModel, tokens) -> tuple[str, float]:
    """Argmax posterior under bag-of-tokens independence.

    Returns (class, posterior). The posterior is normalized over both
    classes in log space; an empty token list yields the prior argmax.
    Ties break toward ``non_query``.
    """
    log_joint = {}
    for cls in QUERY_CLASSES:
        score = math.log(model.priors[cls])
        table = model.log_likelihood[cls]
        floor = model.log_unseen[cls]
        for token in tokens:
            score += table.get(token, floor)
        log_joint[cls] = score
    peak = max(log_joint.values())
    total = sum(math.exp(s - peak) for s in log_joint.values())
    best = max(QUERY_CLASSES, key=lambda c: (log_joint[c], c == "non_query"))
    posterior = math.exp(log_joint[best] - peak) / total
    return best, posterior


def load_query_corpus(path) -> list[tuple[list[str], str]]:
    """Load line-delimited {"text", "class"} records as tokenized pairs."""
    pairs = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            cls = obj["class"]
            if cls not in QUERY_CLASSES:
                raise ValueError(f"line {line_no}: unknown class {cls!r}")
            pairs.append(([t.lower for t in tokenize(obj["text"])], cls))
    return pairs


def load_nps_posts(path, class_map: dict | None = None) -> list[tuple[list[str], str]]:
    """Load an NPS-Chat-format XML posts file, mapping post classes to the
    binary query scheme via ``class_map`` (default :data:`NPS_CLASS_MAP`)."""
    class_map = class_map or NPS_CLASS_MAP
    root = ET.parse(path).getroot()
    pairs = []
    for post in root.iter("Post"):
        cls = class_map.get(post.get("class", ""), "non_query")
        text = post.text or ""
        pairs.append(([t.lower for t in tokenize(text)], cls))
    return pairs


def is_query_lexical(tokens, question_lexicon: Lexicon) -> bool:
    """Explicit query test: a '?' anywhere, a 5W1H opener, or a curated
    modal/adverb question word within the first three tokens."""
    if "?" in tokens:
        return True
    if tokens and tokens[0] in FIVE_W1H:
        return True
    for token in tokens[:3]:
        if token in question_lexicon.terms and token not in FIVE_W1H:
            return True
    return False


@dataclass(frozen=True)
class ActionEvidence:
    predicate: Predicate
    a1: ArgumentSpan
    entity: EntitySpan


@dataclass(frozen=True)
class SymptomEvidence:
    match: TermMatch
    phrase: str


@dataclass(frozen=True)
class ArtefactEvidence:
    """Everything the detectors found for one utterance.

    ``query_provenance`` is one of lexical/nb/both/none and is ``none``
    exactly when ``is_query`` is false.
    """

    action: ActionEvidence | None
    symptom: SymptomEvidence | None
    is_query: bool
    query_provenance: str
    nb_posterior: float

    def __post_init__(self):
        if (self.query_provenance == "none") != (not self.is_query):
            raise ValueError("query provenance inconsistent with is_query")


@dataclass(frozen=True)
class DkgConfig:
    """Shared inputs for the detectors: the three lexicons, a trained query
    model, and the symptom phrase context window (tokens per side)."""

    action_lexicon: Lexicon
    symptom_lexicon: Lexicon
    question_lexicon: Lexicon
    nb_model: NBModel
    symptom_window: int = 5


def default_config(alpha: float = 1.0, symptom_window: int = 5) -> DkgConfig:
    """Config backed by the bundled starter lexicons and query corpus."""
    return DkgConfig(
        action_lexicon=load_lexicon(_DATA_DIR / "action_verbs.txt", "action_verb"),
        symptom_lexicon=load_lexicon(_DATA_DIR / "symptom_terms.txt", "symptom_term"),
        question_lexicon=load_lexicon(_DATA_DIR / "question_words.txt", "question_word"),
        nb_model=train_query_nb(load_query_corpus(_DATA_DIR / "query_corpus.jsonl"), alpha),
        symptom_window=symptom_window,
    )


def detect_action(text: str, config: DkgConfig) -> ActionEvidence | None:
    """Candidate gate, key-entity extraction, then predicate-A1 linking.

    Evidence requires a predicate whose A1 span overlaps a key entity; a
    bare verb with no linked entity is not an action.
    """
    tokens = tokenize(text)
    lowers = [t.lower for t in tokens]
    if not match_terms(config.action_lexicon, lowers):
        return None
    tagged = pos_tag(tokens, action_verbs=config.action_lexicon.terms)
    entities = extract_key_entities(tagged)
    if not entities:
        return None
    for predicate in find_predicates(tagged, config.action_lexicon):
        a1 = extract_a1_argument(tagged, predicate)
        if a1 is None:
            continue
        for entity in entities:
            if spans_overlap(a1.start, a1.end, entity.start, entity.end):
                return ActionEvidence(predicate=predicate, a1=a1, entity=entity)
    return None


def detect_symptom(text: str, config: DkgConfig) -> SymptomEvidence | None:
    """First symptom-term match plus its surrounding phrase, clipped to the
    utterance bounds."""
    tokens = tokenize(text)
    matches = match_terms(config.symptom_lexicon, [t.lower for t in tokens])
    if not matches:
        return None
    first = min(matches, key=lambda m: m.start)
    window = config.symptom_window
    lo = max(0, first.start - window)
    hi = min(len(tokens), first.end + window)
    phrase = " ".join(tokens[i].text for i in range(lo, hi))
    return SymptomEvidence(match=first, phrase=phrase)


def analyze(text: str, config: DkgConfig) -> ArtefactEvidence:
    """Run all detectors and combine the query signals."""
    tokens = [t.lower for t in tokenize(text)]
    lexical = is_query_lexical(tokens, config.question_lexicon)
    nb_label, nb_posterior = classify_query_nb(config.nb_model, tokens)
    nb_query = nb_label == "query"
    if lexical and nb_query:
        provenance = "both"
    elif lexical:
        provenance = "lexical"
    elif nb_query:
        provenance = "nb"
    else:
        provenance = "none"
    return ArtefactEvidence(
        action=detect_action(text, config),
        symptom=detect_symptom(text, config),
        is_query=lexical or nb_query,
        query_provenance=provenance,
        nb_posterior=nb_posterior,
    )


def label_evidence(evidence: ArtefactEvidence) -> Prediction:
    """Priority resolution over the evidence.

    Confidence is 1.0 for rule-forced outcomes; when a Diagnostic decision
    rests on the Naive Bayes signal alone it carries the NB posterior.
    """
    has_domain = evidence.action is not None or evidence.symptom is not None
    if evidence.is_query and has_domain:
        label = ArtefactLabel.DIAGNOSTIC
        confidence = evidence.nb_posterior if evidence.query_provenance == "nb" else 1.0
    elif evidence.action is not None:
        label = ArtefactLabel.ACTION
        confidence = 1.0
    elif evidence.symptom is not None:
        label = ArtefactLabel.SYMPTOM
        confidence = 1.0
    else:
        label = ArtefactLabel.CHITCHAT
        confidence = 1.0
    return Prediction(label=label, confidence=confidence, source="dkg")


def dkg_label(text: str, config: DkgConfig) -> Prediction:
    """Label one utterance; total and deterministic."""
    return label_evidence(analyze(text, config))


def evidence_phrase(evidence: ArtefactEvidence, text: str) -> str | None:
    """Human-readable extracted phrase for triage-tree nodes: the action
    predicate plus its A1 text when present, else the symptom phrase."""
    if evidence.action is not None:
        tokens = tokenize(text)
        a1 = evidence.action.a1
        arg = " ".join(tokens[i].text for i in range(a1.start, a1.end))
        return f"{evidence.action.predicate.lemma} {arg}"
    if evidence.symptom is not None:
        return evidence.symptom.phrase
    return None

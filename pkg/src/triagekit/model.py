"""Shared domain types: messages, utterances, artefact labels, predictions.

All types are immutable values; they can be shared freely between threads.
Timestamps are integer epoch milliseconds (UTC). ISO-8601 strings are
accepted on ingestion and normalized by :func:`parse_timestamp`.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum


class ArtefactLabel(Enum):
    """The four utterance roles.

    Priority for tie-breaking is Diagnostic > Action > Symptom > ChitChat.
    """

    SYMPTOM = "symptom"
    ACTION = "action"
    DIAGNOSTIC = "diagnostic"
    CHITCHAT = "chitchat"

    @property
    def priority(self) -> int:
        return _PRIORITY[self]

    @classmethod
    def from_string(cls, value: str) -> "ArtefactLabel":
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown artefact label: {value!r}") from None


_PRIORITY = {
    ArtefactLabel.DIAGNOSTIC: 3,
    ArtefactLabel.ACTION: 2,
    ArtefactLabel.SYMPTOM: 1,
    ArtefactLabel.CHITCHAT: 0,
}

#: Fixed class order used by the fusion classifier's output layer.
CLASS_ORDER = (
    ArtefactLabel.SYMPTOM,
    ArtefactLabel.ACTION,
    ArtefactLabel.DIAGNOSTIC,
    ArtefactLabel.CHITCHAT,
)

PREDICTION_SOURCES = frozenset({"dkg", "ffb", "ensemble", "human"})


def highest_priority(labels) -> ArtefactLabel:
    """Pick the highest-priority label from a non-empty iterable."""
    labels = list(labels)
    if not labels:
        raise ValueError("no labels given")
    return max(labels, key=lambda l: l.priority)


def parse_timestamp(value) -> int:
    """Normalize a timestamp to integer epoch milliseconds UTC.

    Accepts an integer (already epoch ms) or an ISO-8601 string. Naive
    datetimes are interpreted as UTC.
    """
    if isinstance(value, bool):
        raise ValueError(f"invalid timestamp: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        text = value.strip()
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            raise ValueError(f"invalid timestamp: {value!r}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp() * 1000)
    raise ValueError(f"invalid timestamp: {value!r}")


@dataclass(frozen=True)
class Message:
    """One raw chat message.

    ``id`` must be nonempty and unique within a log; ``thread_id`` is the
    native platform thread membership, if any.
    """

    id: str
    ts: int
    user: str
    text: str
    thread_id: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("message id must be nonempty")


@dataclass(frozen=True)
class Utterance:
    """One utterance of a disentangled conversation.

    One message maps to exactly one utterance; multi-sentence messages are
    not split.
    """

    conversation_id: str
    utterance_id: str
    ts: int
    user: str
    text: str


@dataclass(frozen=True)
class Prediction:
    """An artefact label with confidence and provenance.

    ``confidence`` is 1.0 for human labels; for the supervised classifier it
    equals the max softmax probability.
    """

    label: ArtefactLabel
    confidence: float
    source: str

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")
        if self.source not in PREDICTION_SOURCES:
            raise ValueError(f"unknown prediction source: {self.source!r}")
        if self.source == "human" and self.confidence != 1.0:
            raise ValueError("human predictions must have confidence 1.0")


def message_to_utterance(message: Message, conversation_id: str) -> Utterance:
    return Utterance(
        conversation_id=conversation_id,
        utterance_id=message.id,
        ts=message.ts,
        user=message.user,
        text=message.text,
    )

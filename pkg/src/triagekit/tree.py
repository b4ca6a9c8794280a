"""Issue triaging trees: temporal chains of non-chit-chat artefact nodes.

The tree is deliberately a chain (each node's parent is its predecessor in
time); the edge-list representation leaves room for richer branching later
without a format change. Trees serialize to JSON documents and the
artefact database is simply a directory of such documents keyed by
issue id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .chatlog import atomic_write
from .disentangle import Conversation
from .model import ArtefactLabel


@dataclass(frozen=True)
class TriageNode:
    node_id: str
    type: ArtefactLabel
    utterance_id: str
    ts: int
    text: str
    phrase: str | None = None

    def __post_init__(self):
        if self.type == ArtefactLabel.CHITCHAT:
            raise ValueError("chit-chat never becomes a triage node")


@dataclass(frozen=True)
class TriagingTree:
    issue_id: str
    nodes: tuple
    edges: tuple

    def __post_init__(self):
        for i in range(1, len(self.nodes)):
            if self.nodes[i].ts < self.nodes[i - 1].ts:
                raise ValueError("triage nodes must be in temporal order")
        expected = tuple((i, i + 1) for i in range(len(self.nodes) - 1))
        if self.edges != expected:
            raise ValueError("edges must form the chain (i, i+1)")


def build_tree(conversation: Conversation, labels, phrases=None) -> TriagingTree:
    """Filter chit-chat and chain the rest in ts order (stable on ties).

    ``labels`` holds one Prediction per utterance; ``phrases`` optionally
    supplies an extracted phrase per utterance (same alignment).
    """
    labels = list(labels)
    if len(labels) != len(conversation.utterances):
        raise ValueError(
            f"{len(conversation.utterances)} utterances but {len(labels)} labels"
        )
    if phrases is None:
        phrases = [None] * len(labels)
    rows = [
        (utterance, prediction, phrase)
        for utterance, prediction, phrase in zip(conversation.utterances, labels, phrases)
        if prediction.label != ArtefactLabel.CHITCHAT
    ]
    rows.sort(key=lambda row: row[0].ts)  # stable: equal ts keep input order
    nodes = tuple(
        TriageNode(
            node_id=f"n{i}",
            type=prediction.label,
            utterance_id=utterance.utterance_id,
            ts=utterance.ts,
            text=utterance.text,
            phrase=phrase,
        )
        for i, (utterance, prediction, phrase) in enumerate(rows)
    )
    edges = tuple((i, i + 1) for i in range(len(nodes) - 1))
    return TriagingTree(issue_id=conversation.conversation_id, nodes=nodes, edges=edges)


def tree_document(tree: TriagingTree) -> dict:
    return {
        "issue_id": tree.issue_id,
        "nodes": [
            {
                "node_id": node.node_id,
                "type": node.type.value,
                "utterance_id": node.utterance_id,
                "ts": node.ts,
                "text": node.text,
                "phrase": node.phrase,
            }
            for node in tree.nodes
        ],
        "edges": [list(edge) for edge in tree.edges],
    }


def serialize_tree(tree: TriagingTree) -> bytes:
    return json.dumps(tree_document(tree), ensure_ascii=False, indent=2).encode("utf-8")


def deserialize_tree(data: bytes) -> TriagingTree:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed tree document: {exc}") from None
    if not isinstance(obj, dict) or "issue_id" not in obj:
        raise ValueError("malformed tree document: missing issue_id")
    try:
        nodes = tuple(
            TriageNode(
                node_id=n["node_id"],
                type=ArtefactLabel.from_string(n["type"]),
                utterance_id=n["utterance_id"],
                ts=int(n["ts"]),
                text=n["text"],
                phrase=n.get("phrase"),
            )
            for n in obj.get("nodes", [])
        )
        edges = tuple(tuple(e) for e in obj.get("edges", []))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed tree document: {exc}") from None
    return TriagingTree(issue_id=obj["issue_id"], nodes=nodes, edges=edges)


def write_tree(directory, tree: TriagingTree) -> Path:
    """Store one tree document in the artefact database directory."""
    directory = Path(directory)
    path = directory / f"{tree.issue_id}.json"
    with atomic_write(path, "wb") as handle:
        handle.write(serialize_tree(tree))
    return path


def read_tree(directory, issue_id: str) -> TriagingTree:
    path = Path(directory) / f"{issue_id}.json"
    return deserialize_tree(path.read_bytes())

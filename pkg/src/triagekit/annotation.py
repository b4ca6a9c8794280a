"""Semi-labelling backend: pre-labels, human corrections, votes, agreement.

Storage is an append-only audit log plus a materialized current-state
table, both plain JSONL files in the store directory; there is no external
database. The audit log is the source of truth: opening a store replays
it, so a restarted service sees every annotation ever recorded. All writes
go through a single lock; readers get consistent snapshots.

Files in a store directory:
  pre_labels.jsonl    one record per utterance with its machine pre-label
  audit.jsonl         append-only annotation events, never rewritten
  annotations.jsonl   materialized current state (one row per
                      utterance/annotator pair), rewritten atomically
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .chatlog import atomic_write
from .model import ArtefactLabel, Prediction, Utterance, highest_priority


@dataclass(frozen=True)
class AnnotationRecord:
    utterance_id: str
    annotator_id: str
    label: ArtefactLabel
    submitted_at: int


@dataclass(frozen=True)
class VoteResult:
    utterance_id: str
    final: ArtefactLabel
    counts: dict
    unanimous: bool


def majority_vote(records) -> VoteResult:
    """Plurality label; ties resolve to the highest-priority tied label."""
    records = list(records)
    if not records:
        raise ValueError("majority vote needs at least one record")
    utterance_id = records[0].utterance_id
    counts: dict[ArtefactLabel, int] = {}
    for record in records:
        if record.utterance_id != utterance_id:
            raise ValueError("majority vote records must target one utterance")
        counts[record.label] = counts.get(record.label, 0) + 1
    top = max(counts.values())
    final = highest_priority([label for label, c in counts.items() if c == top])
    return VoteResult(
        utterance_id=utterance_id,
        final=final,
        counts=counts,
        unanimous=len(counts) == 1,
    )


def agreement(records_by_utterance) -> dict:
    """Observed pairwise agreement and a multi-rater chance-corrected kappa.

    Observed agreement is the fraction of agreeing annotator pairs, pooled
    over all utterances with at least two annotations. The kappa corrects
    that by the chance agreement expected from the overall label
    distribution (sum of squared label proportions across the four
    classes): kappa = (Po - Pe) / (1 - Pe).
    """
    agreeing = 0
    total_pairs = 0
    label_counts: dict[ArtefactLabel, int] = {}
    total_labels = 0
    items = 0
    for records in records_by_utterance.values():
        records = list(records)
        for record in records:
            label_counts[record.label] = label_counts.get(record.label, 0) + 1
            total_labels += 1
        n = len(records)
        if n < 2:
            continue
        items += 1
        per_label: dict[ArtefactLabel, int] = {}
        for record in records:
            per_label[record.label] = per_label.get(record.label, 0) + 1
        agreeing += sum(c * (c - 1) // 2 for c in per_label.values())
        total_pairs += n * (n - 1) // 2
    if total_pairs == 0:
        raise ValueError("agreement needs at least two annotators on one utterance")
    observed = agreeing / total_pairs
    chance = sum((c / total_labels) ** 2 for c in label_counts.values())
    kappa = (observed - chance) / (1.0 - chance) if chance < 1.0 else 1.0
    return {
        "observed": observed,
        "kappa": kappa,
        "items": items,
        "pairs": total_pairs,
    }


class AnnotationStore:
    """File-backed store for one labelling campaign.

    Construct with :meth:`open`; seed utterances and machine pre-labels
    with :meth:`seed` before recording human annotations.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._utterances: dict[str, Utterance] = {}
        self._pre_labels: dict[str, Prediction] = {}
        self._order: list[str] = []
        self._annotations: dict[tuple[str, str], AnnotationRecord] = {}
        self._audit_len = 0

    # -- paths ------------------------------------------------------------
    @property
    def _pre_labels_path(self) -> Path:
        return self.directory / "pre_labels.jsonl"

    @property
    def _audit_path(self) -> Path:
        return self.directory / "audit.jsonl"

    @property
    def _state_path(self) -> Path:
        return self.directory / "annotations.jsonl"

    # -- lifecycle ----------------------------------------------------------
    @classmethod
    def open(cls, directory) -> "AnnotationStore":
        """Open a store, replaying the audit log into the current state."""
        store = cls(directory)
        if store._pre_labels_path.exists():
            with open(store._pre_labels_path, encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    utterance = Utterance(
                        conversation_id=obj["conversation_id"],
                        utterance_id=obj["utterance_id"],
                        ts=obj["ts"],
                        user=obj["user"],
                        text=obj["text"],
                    )
                    prediction = Prediction(
                        label=ArtefactLabel.from_string(obj["label"]),
                        confidence=float(obj["confidence"]),
                        source=obj["source"],
                    )
                    store._utterances[utterance.utterance_id] = utterance
                    store._pre_labels[utterance.utterance_id] = prediction
                    store._order.append(utterance.utterance_id)
        if store._audit_path.exists():
            with open(store._audit_path, encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    record = AnnotationRecord(
                        utterance_id=obj["utterance_id"],
                        annotator_id=obj["annotator_id"],
                        label=ArtefactLabel.from_string(obj["label"]),
                        submitted_at=int(obj["submitted_at"]),
                    )
                    store._annotations[(record.utterance_id, record.annotator_id)] = record
                    store._audit_len += 1
        return store

    def seed(self, labelled) -> None:
        """Load (Utterance, Prediction) machine pre-labels into the store."""
        with self._lock:
            for utterance, prediction in labelled:
                if utterance.utterance_id not in self._utterances:
                    self._order.append(utterance.utterance_id)
                self._utterances[utterance.utterance_id] = utterance
                self._pre_labels[utterance.utterance_id] = prediction
            with atomic_write(self._pre_labels_path) as handle:
                for utterance_id in self._order:
                    utterance = self._utterances[utterance_id]
                    prediction = self._pre_labels[utterance_id]
                    handle.write(json.dumps({
                        "conversation_id": utterance.conversation_id,
                        "utterance_id": utterance.utterance_id,
                        "ts": utterance.ts,
                        "user": utterance.user,
                        "text": utterance.text,
                        "label": prediction.label.value,
                        "confidence": prediction.confidence,
                        "source": prediction.source,
                    }, ensure_ascii=False) + "\n")

    # -- queries ------------------------------------------------------------
    def conversations(self) -> list[dict]:
        with self._lock:
            counts: dict[str, int] = {}
            for utterance_id in self._order:
                conv = self._utterances[utterance_id].conversation_id
                counts[conv] = counts.get(conv, 0) + 1
            return [
                {"conversation_id": conv, "utterance_count": count}
                for conv, count in counts.items()
            ]

    def utterance_ids(self, conversation_id: str | None = None) -> list[str]:
        with self._lock:
            if conversation_id is None:
                return list(self._order)
            return [
                uid for uid in self._order
                if self._utterances[uid].conversation_id == conversation_id
            ]

    def annotations_for(self, utterance_id: str) -> list[AnnotationRecord]:
        with self._lock:
            records = [r for (uid, _), r in self._annotations.items() if uid == utterance_id]
            records.sort(key=lambda r: (r.submitted_at, r.annotator_id))
            return records

    def review_item(self, utterance_id: str) -> dict:
        """Full server-side view of one utterance for review clients."""
        with self._lock:
            if utterance_id not in self._utterances:
                raise KeyError(utterance_id)
            utterance = self._utterances[utterance_id]
            prediction = self._pre_labels[utterance_id]
            records = self.annotations_for(utterance_id)
            item = {
                "conversation_id": utterance.conversation_id,
                "utterance_id": utterance_id,
                "ts": utterance.ts,
                "user": utterance.user,
                "text": utterance.text,
                "pre_label": {
                    "label": prediction.label.value,
                    "confidence": prediction.confidence,
                    "source": prediction.source,
                },
                "annotations": [
                    {
                        "annotator_id": r.annotator_id,
                        "label": r.label.value,
                        "submitted_at": r.submitted_at,
                    }
                    for r in records
                ],
                "vote": None,
            }
            if records:
                vote = majority_vote(records)
                item["vote"] = {
                    "final": vote.final.value,
                    "counts": {label.value: c for label, c in vote.counts.items()},
                    "unanimous": vote.unanimous,
                }
            return item

    def audit_length(self) -> int:
        with self._lock:
            return self._audit_len

    # -- writes -------------------------------------------------------------
    def record_annotation(self, utterance_id: str, annotator_id: str,
                          label: ArtefactLabel, submitted_at: int | None = None) -> AnnotationRecord:
        """Upsert one annotator's label for one utterance; the audit log
        always grows, even on resubmission."""
        with self._lock:
            if utterance_id not in self._utterances:
                raise KeyError(f"unknown utterance: {utterance_id}")
            if submitted_at is None:
                submitted_at = int(time.time() * 1000)
            record = AnnotationRecord(
                utterance_id=utterance_id,
                annotator_id=annotator_id,
                label=label,
                submitted_at=submitted_at,
            )
            with open(self._audit_path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps({
                    "utterance_id": record.utterance_id,
                    "annotator_id": record.annotator_id,
                    "label": record.label.value,
                    "submitted_at": record.submitted_at,
                }) + "\n")
            self._audit_len += 1
            self._annotations[(utterance_id, annotator_id)] = record
            self._write_state()
            return record

    def _write_state(self) -> None:
        with atomic_write(self._state_path) as handle:
            for key in sorted(self._annotations):
                record = self._annotations[key]
                handle.write(json.dumps({
                    "utterance_id": record.utterance_id,
                    "annotator_id": record.annotator_id,
                    "label": record.label.value,
                    "submitted_at": record.submitted_at,
                }) + "\n")

    # -- aggregation ----------------------------------------------------------
    def records_by_utterance(self) -> dict:
        with self._lock:
            grouped: dict[str, list[AnnotationRecord]] = {}
            for (utterance_id, _), record in self._annotations.items():
                grouped.setdefault(utterance_id, []).append(record)
            return grouped

    def agreement(self) -> dict:
        return agreement(self.records_by_utterance())

    def export_training_set(self, path=None) -> list[tuple[Utterance, Prediction]]:
        """Majority-voted labels for every utterance with human input.

        Utterances carrying only a machine pre-label are excluded. When
        ``path`` is given, records are also written in the label schema.
        """
        from .chatlog import write_labels

        with self._lock:
            grouped = self.records_by_utterance()
            if not grouped:
                raise ValueError("no human annotations to export")
            rows = []
            for utterance_id in self._order:
                records = grouped.get(utterance_id)
                if not records:
                    continue
                vote = majority_vote(records)
                rows.append((
                    self._utterances[utterance_id],
                    Prediction(label=vote.final, confidence=1.0, source="human"),
                ))
            if path is not None:
                write_labels(path, rows)
            return rows

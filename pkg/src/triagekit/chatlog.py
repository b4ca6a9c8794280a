"""Reading and writing the line-delimited chat-log and label file formats.

Chat log: one JSON object per line with keys ``id``, ``ts`` (integer
epoch-ms or ISO-8601 string), ``user``, ``text``, ``thread_id`` (string or
null). Label file: one JSON object per line with keys ``conversation_id``,
``utterance_id``, ``label``, ``confidence``, ``source``.

All writers go through :func:`atomic_write` (temp file + rename) so a
crashed run never leaves a partial output behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from .model import ArtefactLabel, Message, Prediction, Utterance, parse_timestamp


class ChatLogError(ValueError):
    """Malformed chat-log input; the message names the offending line or id."""


@dataclass(frozen=True)
class IngestConfig:
    """Options for chat-log ingestion. Empty message text is rejected unless
    ``allow_empty_text`` is set."""

    allow_empty_text: bool = False


@contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temp file in the target directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, encoding=None if "b" in mode else "utf-8") as handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _parse_message(obj: dict, line_no: int, config: IngestConfig) -> Message:
    for key in ("id", "ts", "user", "text"):
        if key not in obj:
            raise ChatLogError(f"line {line_no}: missing key {key!r}")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise ChatLogError(f"line {line_no}: id must be a nonempty string")
    if not isinstance(obj["user"], str):
        raise ChatLogError(f"line {line_no}: user must be a string")
    if not isinstance(obj["text"], str):
        raise ChatLogError(f"line {line_no}: text must be a string")
    if obj["text"] == "" and not config.allow_empty_text:
        raise ChatLogError(f"line {line_no}: empty text for message {obj['id']!r}")
    thread_id = obj.get("thread_id")
    if thread_id is not None and not isinstance(thread_id, str):
        raise ChatLogError(f"line {line_no}: thread_id must be a string or null")
    try:
        ts = parse_timestamp(obj["ts"])
    except ValueError as exc:
        raise ChatLogError(f"line {line_no}: {exc}") from None
    return Message(id=obj["id"], ts=ts, user=obj["user"], text=obj["text"], thread_id=thread_id)


def load_chat_log(path, config: IngestConfig | None = None) -> list[Message]:
    """Load a chat log, sorted by ts ascending with ties broken by id.

    Non-monotonic input is accepted (sorting is the contract). Malformed
    lines and duplicate ids raise :class:`ChatLogError`.
    """
    config = config or IngestConfig()
    messages: list[Message] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ChatLogError(f"line {line_no}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ChatLogError(f"line {line_no}: record must be an object")
            message = _parse_message(obj, line_no, config)
            if message.id in seen:
                raise ChatLogError(f"duplicate message id {message.id!r} (line {line_no})")
            seen.add(message.id)
            messages.append(message)
    messages.sort(key=lambda m: (m.ts, m.id))
    return messages


def message_record(message: Message) -> dict:
    return {
        "id": message.id,
        "ts": message.ts,
        "user": message.user,
        "text": message.text,
        "thread_id": message.thread_id,
    }


def write_chat_log(path, messages) -> None:
    with atomic_write(path) as handle:
        for message in messages:
            handle.write(json.dumps(message_record(message), ensure_ascii=False) + "\n")


def utterance_record(utterance: Utterance) -> dict:
    return {
        "conversation_id": utterance.conversation_id,
        "utterance_id": utterance.utterance_id,
        "ts": utterance.ts,
        "user": utterance.user,
        "text": utterance.text,
    }


def parse_utterance(obj: dict) -> Utterance:
    return Utterance(
        conversation_id=obj["conversation_id"],
        utterance_id=obj["utterance_id"],
        ts=parse_timestamp(obj["ts"]),
        user=obj["user"],
        text=obj["text"],
    )


def label_record(utterance: Utterance, prediction: Prediction) -> dict:
    return {
        "conversation_id": utterance.conversation_id,
        "utterance_id": utterance.utterance_id,
        "label": prediction.label.value,
        "confidence": prediction.confidence,
        "source": prediction.source,
    }


def write_labels(path, labelled) -> None:
    """Write (Utterance, Prediction) pairs in the label schema.

    Confidences round-trip exactly: json emits the shortest float repr,
    which is always at least 6 significant digits.
    """
    with atomic_write(path) as handle:
        for utterance, prediction in labelled:
            handle.write(json.dumps(label_record(utterance, prediction)) + "\n")


def read_labels(path) -> list[tuple[str, str, Prediction]]:
    """Read a label file as (conversation_id, utterance_id, Prediction) rows."""
    rows = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ChatLogError(f"line {line_no}: invalid JSON ({exc.msg})") from None
            prediction = Prediction(
                label=ArtefactLabel.from_string(obj["label"]),
                confidence=float(obj["confidence"]),
                source=obj["source"],
            )
            rows.append((obj["conversation_id"], obj["utterance_id"], prediction))
    return rows

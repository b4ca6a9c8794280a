"""Conversation disentanglement: native threads plus contextual messages.

Native threads come from the platform's thread ids. Messages written
outside any thread are candidate contextual messages when they fall within
a temporal window around a thread's boundaries; a candidate is merged into
the thread exactly when its author also participates in the thread. A
message eligible for several threads is arbitrated to the one whose
boundary is temporally nearest (ties to the earlier thread) before the
per-thread candidate cap applies.

Everything here is a pure function of the input log and configuration, so
results are independent of any parallel schedule. Bot-authored access
requests are not special-cased; pass ``user_denylist`` to exclude authors
explicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .chatlog import atomic_write, parse_utterance, utterance_record
from .model import Message, message_to_utterance


@dataclass(frozen=True)
class Thread:
    """A native thread: its messages in ts order and the participant set."""

    thread_id: str
    messages: tuple
    participants: frozenset

    @property
    def first_ts(self) -> int:
        return self.messages[0].ts

    @property
    def last_ts(self) -> int:
        return self.messages[-1].ts


@dataclass(frozen=True)
class CandidateSet:
    """Contextual-message candidates around one thread.

    ``before`` holds messages within ``window_ms`` before the thread's
    first message, ``after`` symmetric around its last; each side is capped
    at ``max_per_side`` with nearest-to-boundary preference.
    """

    thread_id: str
    before: tuple
    after: tuple
    candidate_users: frozenset
    window_ms: int
    max_per_side: int

    @property
    def messages(self) -> tuple:
        return self.before + self.after


@dataclass(frozen=True)
class Conversation:
    conversation_id: str
    utterances: tuple
    source_thread_id: str
    merged_message_ids: frozenset


@dataclass(frozen=True)
class ConfusionCounts:
    """Confusion counts over contextual-message merge decisions. Undefined
    ratios (zero denominators) are reported as None, not 0."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def precision(self) -> float | None:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp > 0 else None

    @property
    def recall(self) -> float | None:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn > 0 else None


def extract_native_threads(messages, min_gap_ms: int = 0) -> list[Thread]:
    """Group messages by non-null thread_id, ordered by first-message ts.

    With ``min_gap_ms`` > 0, a thread whose gap to the previously kept
    thread (its first ts minus the previous thread's last ts) is below the
    minimum is dropped; the evaluation protocol in the source data used 24
    hours to avoid overlapping threads.
    """
    groups: dict[str, list[Message]] = {}
    for message in messages:
        if message.thread_id is not None:
            groups.setdefault(message.thread_id, []).append(message)
    threads = []
    for thread_id, group in groups.items():
        group.sort(key=lambda m: (m.ts, m.id))
        threads.append(
            Thread(
                thread_id=thread_id,
                messages=tuple(group),
                participants=frozenset(m.user for m in group),
            )
        )
    threads.sort(key=lambda t: (t.first_ts, t.thread_id))
    if min_gap_ms <= 0:
        return threads
    kept: list[Thread] = []
    for thread in threads:
        if kept and thread.first_ts - kept[-1].last_ts < min_gap_ms:
            continue
        kept.append(thread)
    return kept


def _eligible(message: Message) -> bool:
    # Contextual search never spans other threads' messages.
    return message.thread_id is None


def select_candidates(
    thread: Thread,
    messages,
    window_ms: int,
    max_per_side: int = 50,
    claimed: set | None = None,
) -> CandidateSet:
    """Candidates around one thread, nearest-to-boundary preferred.

    ``claimed`` optionally restricts the search to messages this thread won
    during cross-thread arbitration (see :func:`assign_candidates`).
    """
    before = []
    after = []
    for message in messages:
        if not _eligible(message):
            continue
        if claimed is not None and message.id not in claimed:
            continue
        if thread.first_ts - window_ms <= message.ts < thread.first_ts:
            before.append(message)
        elif thread.last_ts < message.ts <= thread.last_ts + window_ms:
            after.append(message)
    before.sort(key=lambda m: (thread.first_ts - m.ts, m.id))
    after.sort(key=lambda m: (m.ts - thread.last_ts, m.id))
    before = sorted(before[:max_per_side], key=lambda m: (m.ts, m.id))
    after = sorted(after[:max_per_side], key=lambda m: (m.ts, m.id))
    return CandidateSet(
        thread_id=thread.thread_id,
        before=tuple(before),
        after=tuple(after),
        candidate_users=frozenset(m.user for m in before + after),
        window_ms=window_ms,
        max_per_side=max_per_side,
    )


def assign_candidates(threads, messages, window_ms: int, max_per_side: int = 50) -> dict:
    """Build candidate sets for all threads with cross-thread arbitration.

    A message in range of several threads goes to the thread with the
    nearest boundary; distance ties go to the earlier thread (output
    order). Returns thread_id -> CandidateSet.
    """
    claims: dict[str, tuple[int, int, str]] = {}
    order = {thread.thread_id: i for i, thread in enumerate(threads)}
    for thread in threads:
        for message in messages:
            if not _eligible(message):
                continue
            if thread.first_ts - window_ms <= message.ts < thread.first_ts:
                distance = thread.first_ts - message.ts
            elif thread.last_ts < message.ts <= thread.last_ts + window_ms:
                distance = message.ts - thread.last_ts
            else:
                continue
            claim = (distance, order[thread.thread_id], thread.thread_id)
            if message.id not in claims or claim < claims[message.id]:
                claims[message.id] = claim
    by_thread: dict[str, set] = {thread.thread_id: set() for thread in threads}
    for message_id, (_, _, thread_id) in claims.items():
        by_thread[thread_id].add(message_id)
    return {
        thread.thread_id: select_candidates(
            thread, messages, window_ms, max_per_side, claimed=by_thread[thread.thread_id]
        )
        for thread in threads
    }


def merge_contextual(thread: Thread, candidates: CandidateSet) -> Conversation:
    """Merge candidates authored by thread participants (user overlap rule)
    and interleave everything in ts order."""
    merged = [m for m in candidates.messages if m.user in thread.participants]
    combined = sorted(list(thread.messages) + merged, key=lambda m: (m.ts, m.id))
    conversation_id = thread.thread_id
    return Conversation(
        conversation_id=conversation_id,
        utterances=tuple(message_to_utterance(m, conversation_id) for m in combined),
        source_thread_id=thread.thread_id,
        merged_message_ids=frozenset(m.id for m in merged),
    )


def disentangle(
    messages,
    window_ms: int = 2 * 60 * 60 * 1000,
    max_per_side: int = 50,
    min_gap_ms: int = 0,
    user_denylist=frozenset(),
) -> list[Conversation]:
    """Full pipeline: threads, arbitrated candidates, merges."""
    if user_denylist:
        messages = [m for m in messages if m.user not in user_denylist]
    threads = extract_native_threads(messages, min_gap_ms)
    candidate_sets = assign_candidates(threads, messages, window_ms, max_per_side)
    return [merge_contextual(t, candidate_sets[t.thread_id]) for t in threads]


def evaluate_disentanglement(decisions) -> ConfusionCounts:
    """Accumulate (predicted, gold) merge decisions into confusion counts."""
    tp = fp = tn = fn = 0
    for predicted, gold in decisions:
        if predicted and gold:
            tp += 1
        elif predicted and not gold:
            fp += 1
        elif not predicted and gold:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def conversation_record(conversation: Conversation) -> dict:
    return {
        "conversation_id": conversation.conversation_id,
        "source_thread_id": conversation.source_thread_id,
        "utterances": [utterance_record(u) for u in conversation.utterances],
        "merged_message_ids": sorted(conversation.merged_message_ids),
    }


def write_conversations(path, conversations) -> None:
    with atomic_write(path) as handle:
        for conversation in conversations:
            handle.write(json.dumps(conversation_record(conversation), ensure_ascii=False) + "\n")


def read_conversations(path) -> list[Conversation]:
    conversations = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            conversations.append(
                Conversation(
                    conversation_id=obj["conversation_id"],
                    utterances=tuple(parse_utterance(u) for u in obj["utterances"]),
                    source_thread_id=obj["source_thread_id"],
                    merged_message_ids=frozenset(obj["merged_message_ids"]),
                )
            )
    return conversations

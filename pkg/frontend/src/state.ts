/** Session state and pure update helpers.
 *
 * The server is the source of truth: a submission optimistically marks the
 * item, but the state is always reconciled with the ReviewItem the server
 * returns (or rolled back on failure), so local state never diverges from
 * a fresh fetch.
 */

import type { ArtefactLabel, ReviewItem } from "./types";

export interface SessionState {
  annotatorId: string;
  conversationId: string | null;
  items: ReviewItem[];
  cursor: number;
  /** Utterances with an in-flight submission (blocks double-submit). */
  pending: Set<string>;
  error: { message: string; retryable: boolean } | null;
}

export function initialState(annotatorId: string): SessionState {
  return {
    annotatorId,
    conversationId: null,
    items: [],
    cursor: 0,
    pending: new Set(),
    error: null,
  };
}

export function withQueue(
  state: SessionState,
  conversationId: string,
  items: ReviewItem[],
): SessionState {
  return { ...state, conversationId, items, cursor: 0, pending: new Set(), error: null };
}

/** Replace one item with the server's version of it. */
export function withServerItem(state: SessionState, item: ReviewItem): SessionState {
  const items = state.items.map((existing) =>
    existing.utterance_id === item.utterance_id ? item : existing,
  );
  const pending = new Set(state.pending);
  pending.delete(item.utterance_id);
  return { ...state, items, pending, error: null };
}

/** Optimistic annotation: record the annotator's label locally while the
 * POST is in flight. Returns the prior item so a failure can roll back. */
export function withOptimisticLabel(
  state: SessionState,
  utteranceId: string,
  label: ArtefactLabel,
): { state: SessionState; before: ReviewItem } {
  const before = state.items.find((item) => item.utterance_id === utteranceId);
  if (!before) {
    throw new Error(`unknown utterance: ${utteranceId}`);
  }
  const annotations = before.annotations
    .filter((a) => a.annotator_id !== state.annotatorId)
    .concat([{ annotator_id: state.annotatorId, label, submitted_at: Date.now() }]);
  const optimistic: ReviewItem = { ...before, annotations };
  const pending = new Set(state.pending);
  pending.add(utteranceId);
  return {
    state: {
      ...state,
      pending,
      items: state.items.map((item) => (item === before ? optimistic : item)),
    },
    before,
  };
}

/** Roll a failed submission back to the pre-submission item. */
export function withRollback(state: SessionState, before: ReviewItem): SessionState {
  const pending = new Set(state.pending);
  pending.delete(before.utterance_id);
  return {
    ...state,
    pending,
    items: state.items.map((item) =>
      item.utterance_id === before.utterance_id ? before : item,
    ),
  };
}

export function withError(
  state: SessionState,
  message: string,
  retryable: boolean,
): SessionState {
  return { ...state, error: { message, retryable } };
}

export function withCursor(state: SessionState, cursor: number): SessionState {
  const bounded = Math.max(0, Math.min(cursor, state.items.length - 1));
  return { ...state, cursor: state.items.length === 0 ? 0 : bounded };
}

/** The current annotator's stored label for an item, if any. */
export function ownLabel(state: SessionState, item: ReviewItem): ArtefactLabel | null {
  const match = item.annotations.find((a) => a.annotator_id === state.annotatorId);
  return match ? match.label : null;
}

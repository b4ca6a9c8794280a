import { describe, expect, it } from "vitest";

import {
  initialState,
  ownLabel,
  withCursor,
  withOptimisticLabel,
  withQueue,
  withRollback,
  withServerItem,
} from "../src/state";
import type { ReviewItem } from "../src/types";

function item(id: string, overrides: Partial<ReviewItem> = {}): ReviewItem {
  return {
    conversation_id: "c1",
    utterance_id: id,
    ts: 1000,
    user: "sre",
    text: `text ${id}`,
    pre_label: { label: "chitchat", confidence: 1.0, source: "dkg" },
    annotations: [],
    vote: null,
    ...overrides,
  };
}

function queued() {
  return withQueue(initialState("ann"), "c1", [item("u1"), item("u2")]);
}

describe("session state", () => {
  it("optimistic label appears immediately and marks the item pending", () => {
    const { state } = withOptimisticLabel(queued(), "u1", "symptom");
    expect(ownLabel(state, state.items[0])).toBe("symptom");
    expect(state.pending.has("u1")).toBe(true);
  });

  it("server item replaces the optimistic one and clears pending", () => {
    const { state } = withOptimisticLabel(queued(), "u1", "symptom");
    const server = item("u1", {
      annotations: [{ annotator_id: "ann", label: "symptom", submitted_at: 5 }],
      vote: { final: "symptom", counts: { symptom: 1 }, unanimous: true },
    });
    const next = withServerItem(state, server);
    expect(next.items[0]).toEqual(server);
    expect(next.pending.size).toBe(0);
  });

  it("rollback restores the pre-submission item exactly", () => {
    const start = queued();
    const { state, before } = withOptimisticLabel(start, "u1", "action");
    const rolledBack = withRollback(state, before);
    expect(rolledBack.items).toEqual(start.items);
    expect(rolledBack.pending.size).toBe(0);
  });

  it("resubmission replaces the annotator's previous optimistic label", () => {
    const first = withOptimisticLabel(queued(), "u1", "symptom").state;
    const second = withOptimisticLabel(first, "u1", "action").state;
    const labels = second.items[0].annotations.filter((a) => a.annotator_id === "ann");
    expect(labels).toHaveLength(1);
    expect(labels[0].label).toBe("action");
  });

  it("cursor is clamped to the queue", () => {
    const state = queued();
    expect(withCursor(state, -3).cursor).toBe(0);
    expect(withCursor(state, 99).cursor).toBe(1);
  });

  it("unknown utterance submission is an error", () => {
    expect(() => withOptimisticLabel(queued(), "zzz", "symptom")).toThrow(/unknown/);
  });
});

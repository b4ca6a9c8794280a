import { describe, expect, it } from "vitest";

import { shortcutFor } from "../src/shortcuts";

describe("keyboard shortcuts", () => {
  it("maps 1-4 to the four labels in class order", () => {
    expect(shortcutFor("1")).toEqual({ kind: "label", label: "symptom" });
    expect(shortcutFor("2")).toEqual({ kind: "label", label: "action" });
    expect(shortcutFor("3")).toEqual({ kind: "label", label: "diagnostic" });
    expect(shortcutFor("4")).toEqual({ kind: "label", label: "chitchat" });
  });

  it("maps enter to accept", () => {
    expect(shortcutFor("Enter")).toEqual({ kind: "accept" });
  });

  it("maps arrows and vim keys to cursor moves", () => {
    expect(shortcutFor("ArrowDown")).toEqual({ kind: "next" });
    expect(shortcutFor("j")).toEqual({ kind: "next" });
    expect(shortcutFor("ArrowUp")).toEqual({ kind: "previous" });
    expect(shortcutFor("k")).toEqual({ kind: "previous" });
  });

  it("ignores everything else", () => {
    expect(shortcutFor("5")).toBeNull();
    expect(shortcutFor("a")).toBeNull();
    expect(shortcutFor("Escape")).toBeNull();
  });
});

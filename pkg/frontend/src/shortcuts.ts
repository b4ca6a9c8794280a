/** Keyboard mapping: 1-4 select the four labels in their fixed class
 * order; Enter accepts the machine pre-label unchanged (an explicit
 * confirmation is stored as an annotation); arrows move the cursor. */

import { LABELS, type ArtefactLabel } from "./types";

export type ShortcutAction =
  | { kind: "label"; label: ArtefactLabel }
  | { kind: "accept" }
  | { kind: "next" }
  | { kind: "previous" }
  | null;

export function shortcutFor(key: string): ShortcutAction {
  if (key >= "1" && key <= "4") {
    return { kind: "label", label: LABELS[Number(key) - 1] };
  }
  switch (key) {
    case "Enter":
      return { kind: "accept" };
    case "ArrowDown":
    case "j":
      return { kind: "next" };
    case "ArrowUp":
    case "k":
      return { kind: "previous" };
    default:
      return null;
  }
}

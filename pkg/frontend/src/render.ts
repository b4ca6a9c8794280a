/** DOM rendering. Every displayed label goes through labelText, which only
 * accepts the four-class scheme. */

import { ownLabel, type SessionState } from "./state";
import { isArtefactLabel, LABELS, type ReviewItem, type AgreementReport } from "./types";

export function labelText(value: string): string {
  if (!isArtefactLabel(value)) {
    throw new Error(`label outside the four-class scheme: ${value}`);
  }
  return value;
}

function voteHtml(item: ReviewItem): string {
  if (!item.vote) {
    return `<span class="vote none">no votes yet</span>`;
  }
  const counts = LABELS.filter((label) => item.vote!.counts[label])
    .map((label) => `${labelText(label)} ${item.vote!.counts[label]}`)
    .join(", ");
  const marker = item.vote.unanimous ? " (unanimous)" : "";
  return `<span class="vote">final <b>${labelText(item.vote.final)}</b>${marker} — ${counts}</span>`;
}

export function itemHtml(state: SessionState, item: ReviewItem, selected: boolean): string {
  const own = ownLabel(state, item);
  const time = new Date(item.ts).toISOString().slice(11, 19);
  const buttons = LABELS.map(
    (label, i) =>
      `<button data-utterance="${item.utterance_id}" data-label="${label}"
        class="label-btn ${label}${own === label ? " chosen" : ""}">${i + 1} ${labelText(label)}</button>`,
  ).join("");
  const pending = state.pending.has(item.utterance_id) ? " pending" : "";
  return `
  <li class="item${selected ? " selected" : ""}${pending}" data-utterance="${item.utterance_id}">
    <div class="meta"><span class="user">${item.user}</span> <span class="ts">${time}</span></div>
    <div class="text">${escapeHtml(item.text)}</div>
    <div class="prelabel">machine: <b class="${item.pre_label.label}">${labelText(item.pre_label.label)}</b>
      (${item.pre_label.confidence.toFixed(2)}, ${item.pre_label.source})
      <button class="accept" data-utterance="${item.utterance_id}">accept ⏎</button></div>
    <div class="buttons">${buttons}</div>
    ${voteHtml(item)}
  </li>`;
}

export function queueHtml(state: SessionState): string {
  if (state.items.length === 0) {
    return `<p class="empty">no utterances in this conversation</p>`;
  }
  const rows = state.items
    .map((item, i) => itemHtml(state, item, i === state.cursor))
    .join("\n");
  return `<ol class="queue">${rows}</ol>`;
}

export function agreementHtml(report: AgreementReport | null): string {
  if (!report) {
    return `<span class="agreement none">agreement: needs two annotators on one utterance</span>`;
  }
  return `<span class="agreement">observed agreement ${(report.observed * 100).toFixed(1)}%
    — kappa ${report.kappa.toFixed(3)} over ${report.items} utterances</span>`;
}

export function errorHtml(state: SessionState): string {
  if (!state.error) {
    return "";
  }
  const retry = state.error.retryable
    ? `<button id="retry">retry</button>`
    : "";
  return `<div class="banner error">${escapeHtml(state.error.message)} ${retry}</div>`;
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

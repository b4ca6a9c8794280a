/** App wiring: session start, queue fetching, submissions, shortcuts. */

import { ApiClient, ApiError } from "./api";
import { agreementHtml, errorHtml, queueHtml } from "./render";
import { shortcutFor } from "./shortcuts";
import {
  initialState,
  withCursor,
  withError,
  withOptimisticLabel,
  withQueue,
  withRollback,
  withServerItem,
  type SessionState,
} from "./state";
import type { AgreementReport, ArtefactLabel } from "./types";

const api = new ApiClient(
  (window as { TRIAGEKIT_API?: string }).TRIAGEKIT_API ?? "http://127.0.0.1:8080",
);

let state: SessionState = initialState(askAnnotatorId());
let agreement: AgreementReport | null = null;

function askAnnotatorId(): string {
  const stored = sessionStorage.getItem("annotator_id");
  if (stored) {
    return stored;
  }
  const entered = window.prompt("annotator id for this session:", "sre1") || "sre1";
  sessionStorage.setItem("annotator_id", entered);
  return entered;
}

function render(): void {
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  root.innerHTML = `
    <header>
      <h1>review queue</h1>
      <div class="session">annotator <b>${state.annotatorId}</b>
        ${state.conversationId ? `— conversation <b>${state.conversationId}</b>` : ""}</div>
      ${agreementHtml(agreement)}
    </header>
    ${errorHtml(state)}
    <nav id="conversations"></nav>
    <main>${queueHtml(state)}</main>`;
  root.querySelectorAll<HTMLButtonElement>("button.label-btn").forEach((button) => {
    button.addEventListener("click", () => {
      void submit(button.dataset.utterance!, button.dataset.label as ArtefactLabel);
    });
  });
  root.querySelectorAll<HTMLButtonElement>("button.accept").forEach((button) => {
    button.addEventListener("click", () => void accept(button.dataset.utterance!));
  });
  const retry = root.querySelector<HTMLButtonElement>("#retry");
  if (retry) {
    retry.addEventListener("click", () => void loadConversations());
  }
  void renderConversationNav();
}

async function renderConversationNav(): Promise<void> {
  const nav = document.getElementById("conversations");
  if (!nav) {
    return;
  }
  try {
    const conversations = await api.listConversations();
    nav.innerHTML = conversations
      .map(
        (c) =>
          `<button class="conv" data-id="${c.conversation_id}">
            ${c.conversation_id} (${c.utterance_count})</button>`,
      )
      .join("");
    nav.querySelectorAll<HTMLButtonElement>("button.conv").forEach((button) => {
      button.addEventListener("click", () => void openConversation(button.dataset.id!));
    });
  } catch (error) {
    nav.innerHTML = `<span class="error">${(error as Error).message}</span>`;
  }
}

async function loadConversations(): Promise<void> {
  try {
    const conversations = await api.listConversations();
    if (conversations.length > 0) {
      await openConversation(conversations[0].conversation_id);
      return;
    }
    state = { ...state, error: null };
  } catch (error) {
    const apiError = error as ApiError;
    state = withError(state, apiError.message, apiError.retryable ?? true);
  }
  render();
}

async function openConversation(conversationId: string): Promise<void> {
  try {
    const items = await api.fetchReviewQueue(conversationId);
    state = withQueue(state, conversationId, items);
    await refreshAgreement();
  } catch (error) {
    const apiError = error as ApiError;
    state =
      apiError.status === 404
        ? withError(state, `conversation not found: ${conversationId}`, false)
        : withError(state, apiError.message, apiError.retryable ?? true);
  }
  render();
}

async function refreshAgreement(): Promise<void> {
  try {
    agreement = await api.getAgreement();
  } catch (error) {
    if ((error as ApiError).status === 409) {
      agreement = null; // not enough annotators yet: a state, not an error
    }
  }
}

async function submit(utteranceId: string, label: ArtefactLabel): Promise<void> {
  if (state.pending.has(utteranceId)) {
    return;
  }
  const { state: optimistic, before } = withOptimisticLabel(state, utteranceId, label);
  state = optimistic;
  render();
  try {
    const item = await api.submitAnnotation(utteranceId, state.annotatorId, label);
    state = withServerItem(state, item);
    await refreshAgreement();
  } catch (error) {
    const apiError = error as ApiError;
    state = withError(
      withRollback(state, before),
      apiError.message,
      apiError.retryable ?? true,
    );
  }
  render();
}

/** Accepting the pre-label unchanged still stores an annotation. */
async function accept(utteranceId: string): Promise<void> {
  const item = state.items.find((candidate) => candidate.utterance_id === utteranceId);
  if (item) {
    await submit(utteranceId, item.pre_label.label);
  }
}

document.addEventListener("keydown", (event) => {
  if ((event.target as HTMLElement | null)?.tagName === "INPUT") {
    return;
  }
  const action = shortcutFor(event.key);
  if (!action || state.items.length === 0) {
    return;
  }
  const current = state.items[state.cursor];
  switch (action.kind) {
    case "label":
      void submit(current.utterance_id, action.label);
      break;
    case "accept":
      void accept(current.utterance_id);
      break;
    case "next":
      state = withCursor(state, state.cursor + 1);
      render();
      break;
    case "previous":
      state = withCursor(state, state.cursor - 1);
      render();
      break;
  }
});

render();
void loadConversations();

/** Thin client over the annotation service HTTP API. No caching: every
 * mutation returns the server's view of the item and callers adopt it. */

import type { AgreementReport, ArtefactLabel, ConversationSummary, ReviewItem } from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  /** 4xx responses are requests the server understood and refused;
   * network failures and 5xx are retryable. */
  get retryable(): boolean {
    return this.status === 0 || this.status >= 500;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch {
    throw new ApiError(0, "server unreachable");
  }
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON body; fall through to status handling
  }
  if (!response.ok) {
    const detail =
      body && typeof body === "object" && "error" in body
        ? String((body as { error: unknown }).error)
        : `request failed with status ${response.status}`;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  async listConversations(): Promise<ConversationSummary[]> {
    const data = await request<{ conversations: ConversationSummary[] }>(
      `${this.baseUrl}/conversations`,
    );
    return data.conversations;
  }

  /** Review queue for one conversation, in utterance order. */
  async fetchReviewQueue(conversationId: string): Promise<ReviewItem[]> {
    const data = await request<{ utterances: ReviewItem[] }>(
      `${this.baseUrl}/conversations/${encodeURIComponent(conversationId)}/utterances`,
    );
    return data.utterances;
  }

  /** Submit one annotator's label; resolves to the server's updated item. */
  async submitAnnotation(
    utteranceId: string,
    annotatorId: string,
    label: ArtefactLabel,
  ): Promise<ReviewItem> {
    return request<ReviewItem>(`${this.baseUrl}/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        utterance_id: utteranceId,
        annotator_id: annotatorId,
        label,
      }),
    });
  }

  async getAgreement(): Promise<AgreementReport> {
    return request<AgreementReport>(`${this.baseUrl}/agreement`);
  }

  async exportTrainingSet(): Promise<{ path: string; count: number }> {
    return request<{ path: string; count: number }>(`${this.baseUrl}/export`, {
      method: "POST",
    });
  }
}

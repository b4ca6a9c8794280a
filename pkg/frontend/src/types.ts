/** Shared types mirroring the annotation API's wire format. */

export const LABELS = ["symptom", "action", "diagnostic", "chitchat"] as const;

export type ArtefactLabel = (typeof LABELS)[number];

export function isArtefactLabel(value: string): value is ArtefactLabel {
  return (LABELS as readonly string[]).includes(value);
}

export interface PreLabel {
  label: ArtefactLabel;
  confidence: number;
  source: string;
}

export interface Annotation {
  annotator_id: string;
  label: ArtefactLabel;
  submitted_at: number;
}

export interface VoteSummary {
  final: ArtefactLabel;
  counts: Record<string, number>;
  unanimous: boolean;
}

/** One utterance as served by GET /conversations/{id}/utterances. */
export interface ReviewItem {
  conversation_id: string;
  utterance_id: string;
  ts: number;
  user: string;
  text: string;
  pre_label: PreLabel;
  annotations: Annotation[];
  vote: VoteSummary | null;
}

export interface ConversationSummary {
  conversation_id: string;
  utterance_count: number;
}

export interface AgreementReport {
  observed: number;
  kappa: number;
  items: number;
  pairs: number;
}

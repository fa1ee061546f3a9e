// Payload shapes for api_version 1. Field names mirror the server JSON
// exactly; the console never reshapes or recomputes what the API reports.

export const API_VERSION = 1;

export type ItemState =
  | "pending"
  | "approved"
  | "edited"
  | "rejected"
  | "posted"
  | "failed"
  | "skipped";

export type GateVerdict = "passed" | "rejected";

export interface ItemView {
  id: string;
  state: ItemState;
  community: string;
  thread_id: string;
  matched_terms: string[];
  relevant: boolean;
  reason: string | null;
  post_excerpt: string;
  post_author: string;
  proposed_text: string | null;
  word_count: number;
  gate: GateVerdict;
  gate_reason: string | null;
  edited_text: string | null;
  history: [string, number][];
}

export type Cohort = "denier" | "supporter" | "unknown";

export interface ResponsePayload {
  response_id: string;
  posted_id: string;
  responder: string;
  cohort: Cohort;
  is_original_poster: boolean;
  text: string;
  word_count: number;
  similarity: number;
  original_bucket: string;
  response_bucket: string;
  parent_id: string;
}

export interface CohortStats {
  cohort: Cohort;
  n_interventions: number;
  n_responded: number;
  response_rate: number;
  n_responses: number;
  mean_word_count: number | null;
  min_word_count: number | null;
  max_word_count: number | null;
  mean_similarity: number | null;
}

export interface CommunityCounts {
  deployed: number;
  relevant: number;
  out_of_context: number;
}

export interface TransitionTable {
  order: string[];
  counts: number[][];
  rates: number[][];
  total: number;
}

export interface EvidenceCounts {
  deployed: number;
  responded: number;
  responses: number;
}

export type TTest =
  | { t: number; df: number; p: number }
  | { skipped: string };

export interface StatsBody {
  report_version: number;
  idf_variant: string;
  counts: {
    deployed: number;
    responded: number;
    responses: number;
    responses_by_original_poster: number;
    per_community: Record<string, CommunityCounts>;
  };
  items: Record<string, number>;
  cohorts: Record<Cohort, CohortStats>;
  evidence: {
    with_evidence: EvidenceCounts;
    without_evidence: EvidenceCounts;
  };
  transitions: Record<"all" | "denier" | "supporter", TransitionTable>;
  similarity: {
    macro_over_responses: number;
    macro_over_interventions: number;
  };
  t_test: TTest;
}

export interface EventView {
  seq: number;
  ts: number;
  kind: string;
  payload: Record<string, unknown>;
}

// Envelopes: every endpoint wraps its body with the API version.
export interface QueueEnvelope {
  api_version: number;
  items: ItemView[];
}

export interface ItemEnvelope {
  api_version: number;
  item: ItemView;
}

export interface StatsEnvelope {
  api_version: number;
  stats: StatsBody;
}

export interface ResponsesEnvelope {
  api_version: number;
  responses: ResponsePayload[];
}

export interface ResponseEnvelope {
  api_version: number;
  response: ResponsePayload;
}

export interface EventsEnvelope {
  api_version: number;
  events: EventView[];
}

// 409 bodies carry the server-side state so the client can resynchronize.
export interface ConflictDetail {
  error: string;
  state: ItemState;
}

/**
 * Wire types mirroring the run service's persisted JSON schemas.
 * The UI renders these verbatim; it never derives or mutates score values.
 */

export interface TrajectoryPayload {
  tau: number | null;
  points: number[];
}

export interface RunSummary {
  run_id: string;
  dir: string;
  phase: string;
  round_t: number;
}

export interface TopicsSnapshot {
  seed: string;
  proposed: string[];
  approved: string[];
  revision_log: Array<Record<string, unknown>>;
  finalized: boolean;
}

export interface ReviewerIdentity {
  family: string;
  model_name: string;
  role_tag: string;
}

export interface ReviewPayload {
  reviewer: ReviewerIdentity;
  round_t: number;
  chunk_index: number;
  subscores: Record<string, Record<string, number>>;
  comments: Record<string, string>;
  suggestions: string[];
  summary: string;
  strengths: string;
  weaknesses: string;
  decision: string;
  total: number;
}

export interface ScoresPayload {
  totals: Record<string, number>;
  avg: number;
  avg_display: number;
  decision: string;
  missing_cells: Array<[string, number]>;
  page_estimator?: string;
}

export interface RoundReviewsPayload {
  reviews: ReviewPayload[];
  scores: ScoresPayload | null;
}

export interface ManifestPayload {
  run_id: string;
  config: {
    topic_seed: string;
    threshold_tau: number;
    max_rounds: number;
    [key: string]: unknown;
  };
  state: {
    phase: string;
    round_t: number;
    trajectory: number[];
    artifacts: Record<string, unknown>;
    failure?: string | null;
  };
}

/** One approval-protocol command, exactly as the POST body expects it. */
export type DecisionCommand =
  | { action: "approve"; index: number }
  | { action: "remove"; index: number }
  | { action: "add"; text: string }
  | { action: "edit"; index: number; text: string }
  | { action: "finalize" };

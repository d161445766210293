/** Wire types mirroring the scoring service's JSON payloads. */

export type Rating = "weak" | "moderate" | "strong";

export type WorkflowMode = "basic" | "rag" | "rag_no_ratings";

export interface ScoreResponse {
  p: number;
  masked_title: string;
  masked_body: string;
}

export interface SpanPayload {
  start: number;
  end: number;
  is_title: boolean;
  text: string;
}

export interface ExplainResponse {
  id: string;
  p: number;
  method: "ig" | "occlusion";
  spans: SpanPayload[];
  shares: number[] | null;
  degenerate: boolean;
  ratings: {
    overall: Rating;
    title: Rating;
    sentences: Rating[];
  };
}

export interface ReviseSuccess {
  failed: false;
  workflow: WorkflowMode;
  p_before: number;
  p_after: number;
  delta: number;
  improved: boolean;
  original_title: string;
  original_body: string;
  revised_title: string;
  revised_body: string;
}

export interface ReviseFailure {
  failed: true;
  code: string;
  failure_reason: string;
  raw: string;
  p_before: number;
  workflow: WorkflowMode;
}

export type ReviseResponse = ReviseSuccess | ReviseFailure;

export interface HealthResponse {
  status: string;
  versions: Record<string, unknown>;
}

/** Typed client for the scoring service. Every number the UI displays
 * comes from one of these responses; the client performs no model math. */

import type {
  ExplainResponse,
  HealthResponse,
  ReviseResponse,
  ScoreResponse,
  WorkflowMode,
} from "./types";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly retryable: boolean;

  constructor(status: number, code: string, message: string, retryable = false) {
    super(message);
    this.code = code;
    this.status = status;
    this.retryable = retryable;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface Draft {
  title: string;
  body: string;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn: FetchLike = (...args) => fetch(...args)) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async post<T>(path: string, payload: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      });
    } catch (err) {
      throw new ApiError(0, "network_error", String(err), true);
    }
    if (!response.ok) {
      const detail = await response
        .json()
        .then((data) => (data as { detail?: { code?: string; message?: string; retryable?: boolean } }).detail)
        .catch(() => undefined);
      throw new ApiError(
        response.status,
        detail?.code ?? "http_error",
        detail?.message ?? `HTTP ${response.status}`,
        detail?.retryable ?? false,
      );
    }
    return (await response.json()) as T;
  }

  async health(): Promise<HealthResponse> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + "/health");
    } catch (err) {
      throw new ApiError(0, "network_error", String(err), true);
    }
    if (!response.ok) throw new ApiError(response.status, "http_error", "health check failed");
    return (await response.json()) as HealthResponse;
  }

  score(draft: Draft): Promise<ScoreResponse> {
    return this.post<ScoreResponse>("/score", draft);
  }

  explain(draft: Draft): Promise<ExplainResponse> {
    return this.post<ExplainResponse>("/explain", draft);
  }

  revise(draft: Draft, mode: WorkflowMode, includeRatings: boolean): Promise<ReviseResponse> {
    const effective = mode === "rag" && !includeRatings ? "rag_no_ratings" : mode;
    return this.post<ReviseResponse>(`/revise?mode=${effective}`, draft);
  }
}

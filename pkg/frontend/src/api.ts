// Typed fetch client for the session service. All elicitation math lives on
// the server; this module only moves JSON.

import type {
  BeliefsResponse,
  NextQueryResponse,
  ProblemSummary,
  Recommendation,
  SessionSummary,
  YesNo,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, {
      headers: { "content-type": "application/json" },
      ...init,
    });
  } catch (err) {
    throw new ApiError(0, `service unreachable: ${String(err)}`);
  }
  const text = await response.text();
  if (!response.ok) {
    let detail = text;
    try {
      detail = JSON.parse(text).detail ?? text;
    } catch {
      // non-JSON error body, keep the raw text
    }
    throw new ApiError(response.status, detail);
  }
  return JSON.parse(text) as T;
}

export class ServiceClient {
  constructor(public baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  health(): Promise<{ status: string }> {
    return request(this.url("/health"));
  }

  listProblems(): Promise<ProblemSummary[]> {
    return request(this.url("/problems"));
  }

  getProblem(id: string): Promise<Record<string, unknown>> {
    return request(this.url(`/problems/${id}`));
  }

  createSession(
    problem: Record<string, unknown>,
    mode: string,
    randomFallback: boolean,
  ): Promise<{ session_id: string; summary: SessionSummary }> {
    return request(this.url("/sessions"), {
      method: "POST",
      body: JSON.stringify({ problem, mode, random_fallback: randomFallback }),
    });
  }

  summary(sessionId: string): Promise<SessionSummary> {
    return request(this.url(`/sessions/${sessionId}`));
  }

  nextQuery(sessionId: string): Promise<NextQueryResponse> {
    return request(this.url(`/sessions/${sessionId}/next-query`));
  }

  submit(sessionId: string, queryId: string, response: YesNo | number): Promise<SessionSummary> {
    return request(this.url(`/sessions/${sessionId}/responses`), {
      method: "POST",
      body: JSON.stringify({ query_id: queryId, response }),
    });
  }

  recommendation(sessionId: string): Promise<Recommendation> {
    return request(this.url(`/sessions/${sessionId}/recommendation`));
  }

  beliefs(sessionId: string): Promise<BeliefsResponse> {
    return request(this.url(`/sessions/${sessionId}/beliefs`));
  }

  undo(sessionId: string): Promise<SessionSummary> {
    return request(this.url(`/sessions/${sessionId}/undo`), { method: "POST" });
  }

  exportSession(sessionId: string): Promise<Record<string, unknown>> {
    return request(this.url(`/sessions/${sessionId}/export`));
  }
}

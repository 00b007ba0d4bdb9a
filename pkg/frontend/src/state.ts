// Session flow: one in-flight request at a time, state rebuilt from service
// responses only, undo via the server's transcript truncation.

import { ApiError, ServiceClient } from "./api.js";
import type { ParameterBelief, QueryCard, Recommendation, SessionSummary, YesNo } from "./types.js";

export interface FlowState {
  phase: "idle" | "active" | "complete" | "error";
  sessionId: string | null;
  card: QueryCard | null;
  recommendation: Recommendation | null;
  beliefs: ParameterBelief[];
  queriesAnswered: number;
  lastEvoi: number | null;
  error: string | null;
  busy: boolean;
}

type Listener = (state: FlowState) => void;

export class SessionFlow {
  private state: FlowState = {
    phase: "idle",
    sessionId: null,
    card: null,
    recommendation: null,
    beliefs: [],
    queriesAnswered: 0,
    lastEvoi: null,
    error: null,
    busy: false,
  };
  private listeners: Listener[] = [];

  constructor(private client: ServiceClient) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
    listener(this.state);
  }

  get current(): FlowState {
    return this.state;
  }

  private update(patch: Partial<FlowState>): void {
    this.state = { ...this.state, ...patch };
    for (const l of this.listeners) l(this.state);
  }

  async start(problem: Record<string, unknown>, randomFallback: boolean): Promise<void> {
    if (this.state.busy) return;
    this.update({ busy: true, error: null });
    try {
      const created = await this.client.createSession(problem, "evoi", randomFallback);
      this.update({ sessionId: created.session_id, phase: "active" });
      await this.refresh(created.summary);
    } catch (err) {
      this.update({ phase: "error", error: describe(err) });
    } finally {
      this.update({ busy: false });
    }
  }

  /** Pulls the pending card, beliefs, and recommendation for the session. */
  private async refresh(summary?: SessionSummary): Promise<void> {
    const sid = this.state.sessionId;
    if (!sid) return;
    const next = await this.client.nextQuery(sid);
    const beliefs = await this.client.beliefs(sid);
    const current = summary ?? (await this.client.summary(sid));
    this.update({
      card: next.query,
      phase: next.complete ? "complete" : "active",
      beliefs: beliefs.parameters,
      recommendation: current.recommendation,
      queriesAnswered: current.queries_answered,
    });
  }

  async answer(response: YesNo): Promise<void> {
    const { card, sessionId, busy, phase } = this.state;
    if (busy || phase !== "active" || !card || !sessionId) return;
    this.update({ busy: true, error: null });
    try {
      const summary = await this.client.submit(sessionId, card.query_id, response);
      this.update({ lastEvoi: summary.answered_query_evoi ?? null });
      await this.refresh(summary);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // stale double-submit: the server kept its state, just resync
        await this.refresh();
      } else {
        this.update({ error: describe(err) });
      }
    } finally {
      this.update({ busy: false });
    }
  }

  async undo(): Promise<void> {
    const { sessionId, busy, queriesAnswered } = this.state;
    if (busy || !sessionId || queriesAnswered === 0) return;
    this.update({ busy: true, error: null });
    try {
      const summary = await this.client.undo(sessionId);
      this.update({ lastEvoi: null, phase: "active" });
      await this.refresh(summary);
    } catch (err) {
      this.update({ error: describe(err) });
    } finally {
      this.update({ busy: false });
    }
  }

  get canUndo(): boolean {
    return this.state.queriesAnswered > 0 && !this.state.busy;
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.status === 0 ? err.message : `service error ${err.status}: ${err.message}`;
  }
  return String(err);
}

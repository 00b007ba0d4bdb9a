// Wire types mirroring the session service payloads.

export interface ProblemSummary {
  id: string;
  name: string;
  attributes: number;
  factors: number;
}

export interface GambleView {
  probability: number;
  top: Record<string, string>;
  bottom: Record<string, string>;
}

export interface QueryCard {
  query_id: string;
  kind: string;
  response_type: "yes_no" | "probability" | "utility";
  factor?: number;
  config?: Record<string, string>;
  threshold?: number;
  gamble?: GambleView;
  conditioning?: Record<string, string>;
  outcome?: Record<string, string>;
  prompt: string;
  evoi?: number | null;
}

export interface NextQueryResponse {
  complete: boolean;
  query: QueryCard | null;
}

export interface Recommendation {
  outcome: Record<string, string>;
  expected_utility: number;
  per_factor: Record<string, number>;
}

export interface SessionSummary {
  session_id: string;
  mode: string;
  problem: string;
  queries_answered: number;
  created: string;
  updated: string;
  state_fingerprint: string;
  complete: boolean;
  recommendation: Recommendation | null;
  answered_query_evoi?: number | null;
  posterior?: ParameterBelief;
}

export interface ParameterBelief {
  factor: number;
  config: Record<string, string>;
  mean: number;
  components: Array<[number, number, number]>; // lower, upper, weight
}

export interface BeliefsResponse {
  parameters: ParameterBelief[];
}

export type YesNo = "yes" | "no";

// Server payload shapes, mirrored verbatim. The console never recomputes a
// number: everything rendered comes straight out of these fields.

export interface CostBreakdown {
  material: number;
  inbound_shipping: number;
  production: number;
  outbound_shipping: number;
  delay: number;
  lost_penalty: number;
}

export interface PlanDiffPayload {
  type: "plan_diff";
  base_total: number;
  alt_total: number;
  delta_total: number;
  delta_by_component: CostBreakdown;
  changed_flows: { lane: string; base_units: number; alt_units: number }[];
  delta_lost: Record<string, number>;
  feasibility_note: string;
}

export interface QueryResultPayload {
  type: "query_result";
  form: string;
  value: number | string;
  unit: string | null;
  details: Record<string, unknown>;
}

export type StructuredPayload = PlanDiffPayload | QueryResultPayload | null;

export type AnswerKind = "what-if" | "insight" | "clarification" | "fallback";

export interface AnswerPayload {
  kind: AnswerKind;
  text: string;
  dsl: string | null;
  structured: StructuredPayload;
  options: string[];
  provenance: Record<string, unknown>;
}

export interface SessionInfo {
  session_id: string;
  dataset_id: string;
  baseline: PlanPayload;
}

export interface PlanPayload {
  status: string;
  flows: { lane: string; item: string; units: number }[];
  production: Record<string, number>;
  lost: Record<string, number>;
  cost_breakdown: CostBreakdown;
  total_cost: number;
}

export interface DriftChange {
  record_id: string;
  kind: "added" | "removed" | "modified";
  qty_before: number | null;
  qty_after: number | null;
  qty_delta: number;
  due_delta: number;
  attr_changes: Record<string, [string | null, string | null]>;
  retailer_change: [string, string] | null;
  product_change: [string, string] | null;
  author: string;
  note: string;
  category: string;
  flags: string[];
}

export interface DriftReportPayload {
  snapshot_a: string;
  snapshot_b: string;
  total_before: number;
  total_after: number;
  total_delta: number;
  counts: { added: number; removed: number; modified: number; unchanged: number };
  regions: { region: string; before: number; after: number; delta: number }[];
  changes: DriftChange[];
  flagged: string[];
}

export interface DriftResponse {
  report: DriftReportPayload;
  rendered: string;
}

export interface ApiError {
  error: { code: string; message: string };
}

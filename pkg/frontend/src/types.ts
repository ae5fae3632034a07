/** Payload shapes of the backend's HTTP JSON API. */

export interface TraceNodeJson {
  id: string;
  label: string;
  summary: string;
  reasoning: string;
  slots: Record<string, string>;
  status: string;
  children: TraceNodeJson[];
  alternatives: TraceNodeJson[];
}

export interface TraceJson {
  nl_query: string;
  root: TraceNodeJson;
  divergences: string[];
}

export interface TraceDiffJson {
  unchanged: string[];
  modified: string[];
  changed_slots: Record<string, string[]>;
  reasoning_changed: string[];
  alternatives: string[];
}

export interface TraceVersionJson {
  version: number;
  trace: TraceJson;
  diff: TraceDiffJson | null;
  chart: ChartSpec | null;
}

export type ChartSpec = Record<string, unknown>;

export interface ResultColumnJson {
  label: string;
  type: string;
}

export interface ResultTableJson {
  columns: ResultColumnJson[];
  rows: [unknown, unknown][];
  ordered: boolean;
}

export type CorrectionMode = "self" | "manual";

export interface CorrectionBody {
  node_id: string;
  mode: CorrectionMode;
  preference?: string;
}

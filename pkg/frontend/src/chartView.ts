/** Chart view-model: spec sanity checks and export helpers.
 *
 * Rendering itself is delegated to the standard grammar runtime (vega-embed)
 * in the browser shell; the logic here stays DOM-free so it can run in tests.
 */

import type { ChartSpec } from "./types.js";

export function specProblems(spec: unknown): string[] {
  const problems: string[] = [];
  if (typeof spec !== "object" || spec === null || Array.isArray(spec)) {
    return ["spec is not a JSON object"];
  }
  const doc = spec as ChartSpec;
  if (typeof doc["$schema"] !== "string") problems.push("missing $schema");
  if (typeof doc["mark"] !== "string") problems.push("missing mark");
  if (typeof doc["encoding"] !== "object" || doc["encoding"] === null) {
    problems.push("missing encoding");
  }
  const data = doc["data"] as { values?: unknown } | undefined;
  if (!data || !Array.isArray(data.values)) problems.push("missing inline data values");
  return problems;
}

/** Serialize a spec exactly as the server's export endpoint does (compact
 * JSON, original key order), so a client-side download matches the server
 * byte for byte. */
export function exportSpecJson(spec: ChartSpec): string {
  return JSON.stringify(spec);
}

export function exportFilename(kind: "spec" | "svg", sessionId: string): string {
  return `chart-${sessionId}.${kind === "spec" ? "vl.json" : "svg"}`;
}

export interface SortHint {
  field: string;
  direction: "ascending" | "descending";
}

export function sortHint(spec: ChartSpec): SortHint | null {
  const meta = spec["usermeta"] as { sortHint?: SortHint } | undefined;
  return meta?.sortHint ?? null;
}

/** Coordinated companion views: selecting a tree node drives the information
 * view (full reasoning text) and the table view (step data fetched from the
 * server). All content comes from server payloads; nothing is recomputed
 * client-side.
 */

import type { ResultTableJson, TraceJson, TraceNodeJson } from "./types.js";

export interface InfoView {
  nodeId: string;
  title: string;
  summary: string;
  reasoning: string;
  slots: Record<string, string>;
}

function findJsonPath(node: TraceNodeJson, id: string): TraceNodeJson[] | null {
  if (node.id === id) return [node];
  for (const child of [...node.children, ...node.alternatives]) {
    const hit = findJsonPath(child, id);
    if (hit !== null) return [node, ...hit];
  }
  return null;
}

export function infoView(trace: TraceJson, nodeId: string): InfoView {
  const path = findJsonPath(trace.root, nodeId);
  if (path === null) {
    throw new Error(`unknown node ${nodeId}`);
  }
  const node = path[path.length - 1]!;
  // slot leaves carry no prose of their own; show the enclosing decision's
  const reasoning =
    [...path].reverse().map((n) => n.reasoning).find((text) => text !== "") ?? "";
  return {
    nodeId: node.id,
    title: node.label,
    summary: node.summary,
    reasoning,
    slots: { ...node.slots },
  };
}

/** Server path for the selected step's data. */
export function stepDataPath(sessionId: string, nodeId: string): string {
  return `/sessions/${encodeURIComponent(sessionId)}/steps/${nodeId}/data`;
}

export interface TableView {
  header: string[];
  rows: string[][];
  ordered: boolean;
}

function formatCell(cell: unknown): string {
  if (cell === null || cell === undefined) return "";
  if (typeof cell === "number" && !Number.isInteger(cell)) {
    return cell.toFixed(2);
  }
  return String(cell);
}

export function tableView(payload: ResultTableJson): TableView {
  return {
    header: payload.columns.map((c) => c.label),
    rows: payload.rows.map((row) => row.map(formatCell)),
    ordered: payload.ordered,
  };
}

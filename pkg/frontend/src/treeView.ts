/** Pure view-model for the reasoning-trace tree.
 *
 * The tree mirrors the server payload: synthesis root, four stage children,
 * slot leaves, with flagged originals appended as alternative nodes. Visual
 * state is a pure function of (trace, diff, expansion set, selection): after a
 * correction, untouched decisions dim while modified ones highlight.
 */

import type { TraceDiffJson, TraceJson, TraceNodeJson } from "./types.js";

export type VisualState = "normal" | "dimmed" | "modified" | "alternative";

export interface TreeNodeView {
  id: string;
  label: string;
  summary: string;
  reasoning: string;
  slots: Record<string, string>;
  depth: number;
  expanded: boolean;
  selected: boolean;
  visual: VisualState;
  changedSlots: string[];
  children: TreeNodeView[];
}

export interface TreeViewState {
  expanded: Set<string>;
  selected: string | null;
}

export function initialState(trace: TraceJson): TreeViewState {
  const expanded = new Set<string>();
  const walk = (node: TraceNodeJson) => {
    if (node.children.length > 0 || node.alternatives.length > 0) {
      expanded.add(node.id);
    }
    node.children.forEach(walk);
  };
  walk(trace.root);
  return { expanded, selected: trace.root.id };
}

function decisionVisual(node: TraceNodeJson, diff: TraceDiffJson | null): VisualState {
  if (node.status === "alternative") return "alternative";
  if (diff === null) return "normal";
  if (diff.modified.includes(node.id)) return "modified";
  if (diff.alternatives.includes(node.id)) return "alternative";
  return "dimmed";
}

function buildNode(
  node: TraceNodeJson,
  diff: TraceDiffJson | null,
  state: TreeViewState,
  depth: number,
): TreeNodeView {
  const children = [
    ...node.children.map((child) => buildNode(child, diff, state, depth + 1)),
    ...node.alternatives.map((alt) => buildNode(alt, diff, state, depth + 1)),
  ];
  const isDecision = Object.keys(node.slots).length > 0 || children.length === 0;
  let visual: VisualState;
  if (isDecision) {
    visual = decisionVisual(node, diff);
  } else if (children.some((c) => c.visual === "modified")) {
    // a stage with any changed decision reads as changed itself
    visual = "modified";
  } else {
    visual = diff === null ? "normal" : "dimmed";
  }
  return {
    id: node.id,
    label: node.label,
    summary: node.summary,
    reasoning: node.reasoning,
    slots: { ...node.slots },
    depth,
    expanded: state.expanded.has(node.id),
    selected: state.selected === node.id,
    visual,
    changedSlots: diff?.changed_slots[node.id] ?? [],
    children,
  };
}

export function buildTree(
  trace: TraceJson,
  diff: TraceDiffJson | null,
  state: TreeViewState,
): TreeNodeView {
  return buildNode(trace.root, diff, state, 0);
}

export function toggleNode(state: TreeViewState, id: string): TreeViewState {
  const expanded = new Set(state.expanded);
  if (expanded.has(id)) {
    expanded.delete(id);
  } else {
    expanded.add(id);
  }
  return { expanded, selected: state.selected };
}

export function selectNode(state: TreeViewState, id: string): TreeViewState {
  return { expanded: new Set(state.expanded), selected: id };
}

/** Nodes in render order, honouring collapsed subtrees. */
export function visibleNodes(root: TreeNodeView): TreeNodeView[] {
  const out: TreeNodeView[] = [];
  const walk = (node: TreeNodeView) => {
    out.push(node);
    if (node.expanded) node.children.forEach(walk);
  };
  walk(root);
  return out;
}

export function findNode(root: TreeNodeView, id: string): TreeNodeView | null {
  if (root.id === id) return root;
  for (const child of root.children) {
    const hit = findNode(child, id);
    if (hit !== null) return hit;
  }
  return null;
}

export function treeDepth(root: TreeNodeView): number {
  if (root.children.length === 0) return 1;
  return 1 + Math.max(...root.children.map(treeDepth));
}

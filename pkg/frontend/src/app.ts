/** Browser shell: wires the API client and view-models into the page.
 *
 * Layout: horizontal tree on the left (root at the left edge), information
 * and table views in the middle column, chart view with export buttons on the
 * right. Chart rendering and SVG export go through the vega-embed runtime,
 * which the host page provides as `window.vegaEmbed`.
 */

import { StudioApi, canSubmitCorrection, correctionBody } from "./api.js";
import { exportFilename, exportSpecJson, specProblems } from "./chartView.js";
import {
  TreeViewState, buildTree, initialState, selectNode, toggleNode, visibleNodes,
} from "./treeView.js";
import { infoView, tableView } from "./views.js";
import type { ChartSpec, CorrectionMode, TraceVersionJson } from "./types.js";

type VegaEmbed = (el: Element, spec: ChartSpec) => Promise<{
  view: { toSVG(): Promise<string> };
}>;

declare global {
  interface Window {
    vegaEmbed?: VegaEmbed;
  }
}

const PALETTE: Record<string, string> = {
  normal: "#1f2430",
  dimmed: "#9aa3b2",
  modified: "#c62828", // changed fields read as red per the diff contract
  alternative: "#7b5cb8",
};

export class StudioApp {
  private state: TreeViewState | null = null;
  private version: TraceVersionJson | null = null;
  private sessionId: string | null = null;
  private busy = false;

  constructor(
    private readonly api: StudioApi,
    private readonly root: HTMLElement,
  ) {}

  async start(database: string, query: string): Promise<void> {
    this.sessionId = await this.api.createSession(database);
    this.version = await this.api.submitQuery(this.sessionId, query);
    this.state = initialState(this.version.trace);
    await this.renderAll();
  }

  private el(role: string): HTMLElement {
    const found = this.root.querySelector<HTMLElement>(`[data-role="${role}"]`);
    if (found === null) throw new Error(`missing pane ${role}`);
    return found;
  }

  private async renderAll(): Promise<void> {
    if (this.version === null || this.state === null) return;
    this.renderTree();
    await this.renderSelection();
    await this.renderChart();
  }

  private renderTree(): void {
    if (this.version === null || this.state === null) return;
    const tree = buildTree(this.version.trace, this.version.diff, this.state);
    const pane = this.el("tree");
    pane.replaceChildren();
    for (const node of visibleNodes(tree)) {
      const row = document.createElement("div");
      row.textContent = `${node.children.length > 0 ? (node.expanded ? "▾ " : "▸ ") : ""}${node.label}`;
      row.style.paddingLeft = `${node.depth * 18}px`;
      row.style.color = PALETTE[node.visual] ?? PALETTE["normal"] ?? "";
      row.style.fontWeight = node.selected ? "bold" : "normal";
      row.addEventListener("click", () => {
        if (this.state === null) return;
        this.state = selectNode(this.state, node.id);
        void this.renderAll();
      });
      row.addEventListener("dblclick", () => {
        if (this.state === null) return;
        this.state = toggleNode(this.state, node.id);
        this.renderTree();
      });
      pane.appendChild(row);
    }
  }

  private async renderSelection(): Promise<void> {
    if (this.version === null || this.state === null || this.state.selected === null) return;
    const info = infoView(this.version.trace, this.state.selected);
    this.el("info-title").textContent = info.title;
    this.el("info-reasoning").textContent = info.reasoning;

    if (this.sessionId === null) return;
    try {
      const payload = await this.api.stepData(this.sessionId, this.state.selected);
      const table = tableView(payload);
      this.el("table").textContent = [
        table.header.join(" | "),
        ...table.rows.map((r) => r.join(" | ")),
      ].join("\n");
    } catch {
      this.el("table").textContent = "step data unavailable";
    }
  }

  private async renderChart(): Promise<void> {
    const spec = this.version?.chart ?? null;
    const pane = this.el("chart");
    if (spec === null || specProblems(spec).length > 0 || !window.vegaEmbed) {
      pane.textContent = "chart unavailable";
      return;
    }
    await window.vegaEmbed(pane, spec);
  }

  async applyCorrection(mode: CorrectionMode, preference = ""): Promise<void> {
    if (this.busy || this.sessionId === null || this.state?.selected == null) return;
    if (!canSubmitCorrection(mode, preference)) return;
    this.busy = true;
    try {
      this.version = await this.api.correct(
        this.sessionId,
        correctionBody(this.state.selected, mode, preference),
      );
      this.state = { ...this.state, expanded: new Set(this.state.expanded) };
      await this.renderAll();
    } finally {
      this.busy = false;
    }
  }

  async downloadSpec(): Promise<void> {
    if (this.sessionId === null || this.version?.chart == null) return;
    const text = exportSpecJson(this.version.chart);
    this.triggerDownload(exportFilename("spec", this.sessionId), text, "application/json");
  }

  async downloadSvg(): Promise<void> {
    if (this.sessionId === null || this.version?.chart == null || !window.vegaEmbed) return;
    const holder = document.createElement("div");
    const embedded = await window.vegaEmbed(holder, this.version.chart);
    const svg = await embedded.view.toSVG();
    this.triggerDownload(exportFilename("svg", this.sessionId), svg, "image/svg+xml");
  }

  private triggerDownload(name: string, content: string, mime: string): void {
    const link = document.createElement("a");
    link.href = URL.createObjectURL(new Blob([content], { type: mime }));
    link.download = name;
    link.click();
    URL.revokeObjectURL(link.href);
  }
}

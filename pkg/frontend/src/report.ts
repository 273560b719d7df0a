// Physician review: the stored report rendered in wire order (summary
// first), the question graph with state colors, and per-fact local edits
// that exist only in this view until exported as text.

import { ApiError } from "./api.js";
import type { GraphWire, InterviewApi, ReportWire } from "./api.js";
import { renderGraph } from "./graphview.js";

const PENDING_MARKER = "(follow-up pending)";
const REFRESH_MS = 2000;

export interface ReportViewState {
  report: ReportWire | null;
  graph: GraphWire | null;
  editBuffer: Map<string, string>;
  pendingRefresh: boolean;
  error: string | null;
}

export class ReportView {
  state: ReportViewState = {
    report: null,
    graph: null,
    editBuffer: new Map(),
    pendingRefresh: false,
    error: null,
  };

  constructor(
    private root: HTMLElement,
    private api: InterviewApi,
    private scheduleRefresh: (fn: () => void, ms: number) => void = (fn, ms) => {
      setTimeout(fn, ms);
    },
  ) {}

  async load(sessionId: string): Promise<void> {
    try {
      const [report, snapshot] = await Promise.all([
        this.api.getReport(sessionId),
        this.api.getSnapshot(sessionId),
      ]);
      this.state.report = report;
      this.state.graph = snapshot.graph;
      this.state.pendingRefresh = false;
      this.state.error = null;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Interview still running: show a pending state and poll.
        this.state.pendingRefresh = true;
        this.scheduleRefresh(() => void this.load(sessionId), REFRESH_MS);
      } else {
        this.state.error = err instanceof Error ? err.message : String(err);
      }
    }
    this.render();
  }

  factKey(sectionIndex: number, factIndex: number): string {
    return `${sectionIndex}:${factIndex}`;
  }

  factText(sectionIndex: number, factIndex: number): string {
    const edited = this.state.editBuffer.get(this.factKey(sectionIndex, factIndex));
    if (edited !== undefined) return edited;
    return this.state.report?.sections[sectionIndex]?.facts[factIndex] ?? "";
  }

  editFact(sectionIndex: number, factIndex: number, text: string): void {
    this.state.editBuffer.set(this.factKey(sectionIndex, factIndex), text);
  }

  exportText(): string {
    const report = this.state.report;
    if (!report) return "";
    const lines: string[] = ["MEDICAL REPORT", `Session: ${report.session_id}`];
    if (report.patient_gender) lines.push(`Patient gender: ${report.patient_gender}`);
    lines.push("", "Summary:", report.summary, "");
    report.sections.forEach((section, sectionIndex) => {
      lines.push(`${titleCase(section.label)}:`);
      section.facts.forEach((_, factIndex) => {
        lines.push(`  - ${this.factText(sectionIndex, factIndex)}`);
      });
      lines.push("");
    });
    return lines.join("\n").trimEnd() + "\n";
  }

  render(): void {
    const { report, graph, pendingRefresh, error } = this.state;
    this.root.replaceChildren();

    if (error) {
      const banner = el("div", "error-banner");
      banner.dataset.testid = "error-banner";
      banner.textContent = error;
      this.root.appendChild(banner);
      return;
    }
    if (pendingRefresh || !report) {
      const pending = el("div", "pending-state");
      pending.dataset.testid = "pending-state";
      pending.textContent = "The interview is still in progress; the report will appear here.";
      this.root.appendChild(pending);
      return;
    }

    const summary = el("section", "summary");
    summary.dataset.testid = "summary";
    const summaryTitle = el("h2", "summary-title");
    summaryTitle.textContent = "Symptomatic summary";
    const summaryBody = el("p", "summary-body");
    summaryBody.textContent = report.summary;
    summary.append(summaryTitle, summaryBody);
    this.root.appendChild(summary);

    const sections = el("div", "sections");
    sections.dataset.testid = "sections";
    report.sections.forEach((section, sectionIndex) => {
      const card = el("section", "section-card");
      card.dataset.testid = "section";
      card.dataset.label = section.label;
      const heading = el("h3", "section-title");
      heading.textContent = `${titleCase(section.label)} (${section.node_count})`;
      card.appendChild(heading);
      const list = el("ul", "facts");
      section.facts.forEach((fact, factIndex) => {
        const item = el("li", "fact");
        if (fact.includes(PENDING_MARKER)) {
          item.classList.add("pending");
          item.dataset.pending = "true";
        }
        const editor = document.createElement("textarea");
        editor.dataset.testid = "fact-editor";
        editor.value = this.factText(sectionIndex, factIndex);
        editor.rows = 2;
        editor.addEventListener("input", () => {
          this.editFact(sectionIndex, factIndex, editor.value);
        });
        item.appendChild(editor);
        list.appendChild(item);
      });
      card.appendChild(list);
      sections.appendChild(card);
    });
    this.root.appendChild(sections);

    const exportButton = document.createElement("button");
    exportButton.dataset.testid = "export-button";
    exportButton.textContent = "Export as text";
    exportButton.addEventListener("click", () => {
      const output =
        this.root.querySelector<HTMLElement>("[data-testid=export-output]") ??
        (() => {
          const pre = el("pre", "export-output");
          pre.dataset.testid = "export-output";
          this.root.appendChild(pre);
          return pre;
        })();
      output.textContent = this.exportText();
    });
    this.root.appendChild(exportButton);

    const graphContainer = el("div", "graph");
    graphContainer.dataset.testid = "graph";
    if (graph) renderGraph(graphContainer, graph);
    this.root.appendChild(graphContainer);
  }
}

function titleCase(wire: string): string {
  return wire
    .split("_")
    .map((word) => word.charAt(0).toUpperCase() + word.slice(1))
    .join(" ");
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}

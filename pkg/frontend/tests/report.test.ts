// Physician review: wire-order rendering, state colors, local edits, export.

import { beforeEach, describe, expect, it } from "vitest";

import { ReportView } from "../src/report.js";
import { STATE_COLORS, renderGraph } from "../src/graphview.js";
import { ApiError } from "../src/api.js";
import type { ReportWire } from "../src/api.js";
import { FIXTURE_GRAPH, FIXTURE_REPORT, ScriptedApi, flush } from "./fixtures.js";

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<main id="app"></main>';
  root = document.getElementById("app") as HTMLElement;
});

describe("physician review", () => {
  it("renders sections exactly in wire order, no client re-sorting", async () => {
    const view = new ReportView(root, new ScriptedApi());
    await view.load("fixture-session");
    const labels = [...root.querySelectorAll("[data-testid=section]")].map(
      (section) => (section as HTMLElement).dataset.label,
    );
    expect(labels).toEqual(FIXTURE_REPORT.sections.map((s) => s.label));
  });

  it("shows the summary before the sections", async () => {
    const view = new ReportView(root, new ScriptedApi());
    await view.load("fixture-session");
    const children = [...root.children].map((element) => (element as HTMLElement).dataset.testid);
    expect(children.indexOf("summary")).toBeLessThan(children.indexOf("sections"));
    expect(root.querySelector("[data-testid=summary]")?.textContent).toContain(
      FIXTURE_REPORT.summary,
    );
  });

  it("marks pending follow-up bullets visibly", async () => {
    const view = new ReportView(root, new ScriptedApi());
    await view.load("fixture-session");
    const pending = root.querySelectorAll("li.fact[data-pending=true]");
    expect(pending.length).toBe(1);
    const editor = pending[0].querySelector("textarea") as HTMLTextAreaElement;
    expect(editor.value).toContain("(follow-up pending)");
  });

  it("renders graph nodes with the snapshot states: open yellow, answered green", async () => {
    const view = new ReportView(root, new ScriptedApi());
    await view.load("fixture-session");
    const circles = [...root.querySelectorAll("circle")];
    expect(circles.length).toBe(FIXTURE_GRAPH.nodes.length);
    const fillByNode = new Map(
      circles.map((c) => [c.getAttribute("data-node-id"), c.getAttribute("fill")]),
    );
    expect(fillByNode.get("q2")).toBe(STATE_COLORS.open);
    expect(STATE_COLORS.open).toBe("#f5c542"); // yellow
    for (const answered of ["q0", "q1"]) {
      const fill = fillByNode.get(answered) ?? "";
      expect([STATE_COLORS.explore, STATE_COLORS.closed]).toContain(fill);
    }
    // Both answered-state colors are greens.
    expect(STATE_COLORS.explore).toBe("#43a047");
    expect(STATE_COLORS.closed).toBe("#2e7d32");
    // The rendered states are passed through from the snapshot verbatim.
    for (const node of FIXTURE_GRAPH.nodes) {
      const circle = circles.find((c) => c.getAttribute("data-node-id") === node.id);
      expect(circle?.getAttribute("data-state")).toBe(node.state);
    }
  });

  it("renders one edge per wire edge", () => {
    const container = document.createElement("div");
    renderGraph(container, FIXTURE_GRAPH);
    expect(container.querySelectorAll("line").length).toBe(FIXTURE_GRAPH.edges.length);
  });

  it("keeps edits local and exports the edited bullet text", async () => {
    const view = new ReportView(root, new ScriptedApi());
    await view.load("fixture-session");
    const editor = root.querySelector("[data-testid=fact-editor]") as HTMLTextAreaElement;
    editor.value = "Headache began two days ago (corrected)";
    editor.dispatchEvent(new Event("input", { bubbles: true }));

    // The original report object stays untouched.
    expect(view.state.report?.sections[0].facts[0]).toBe("Headache began yesterday morning");

    (root.querySelector("[data-testid=export-button]") as HTMLButtonElement).click();
    const exported = root.querySelector("[data-testid=export-output]")?.textContent ?? "";
    expect(exported).toContain("Headache began two days ago (corrected)");
    expect(exported).not.toContain("Headache began yesterday morning");
    expect(exported).toContain("Patient takes lisinopril for hypertension");
    expect(exported.indexOf("Summary:")).toBeLessThan(exported.indexOf("Chief Complaint:"));
  });

  it("shows a pending state and polls while the interview is active", async () => {
    const api = new ScriptedApi();
    const notReady = Object.create(api) as ScriptedApi;
    let ready = false;
    notReady.getReport = async (sessionId: string): Promise<ReportWire> => {
      if (!ready) throw new ApiError(409, "NotTerminated", "session is still active");
      return ScriptedApi.prototype.getReport.call(api, sessionId);
    };
    const refreshes: Array<() => void> = [];
    const view = new ReportView(root, notReady, (fn) => refreshes.push(fn));
    await view.load("fixture-session");
    expect(root.querySelector("[data-testid=pending-state]")).not.toBeNull();
    expect(refreshes.length).toBe(1);
    ready = true;
    refreshes[0]();
    await flush();
    await flush();
    expect(root.querySelector("[data-testid=sections]")).not.toBeNull();
  });
});

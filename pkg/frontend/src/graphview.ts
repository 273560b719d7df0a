// Dialogue-graph rendering with state colors. Open questions are yellow,
// answered ones (exploring or closed) are green; the mapping is fixed here
// and asserted by the component tests.

import type { GraphWire, NodeWire } from "./api.js";

export const STATE_COLORS: Record<string, string> = {
  open: "#f5c542",
  explore: "#43a047",
  closed: "#2e7d32",
};

const NODE_RADIUS = 14;
const LEVEL_GAP = 96;
const ROW_GAP = 44;

interface Placed {
  node: NodeWire;
  x: number;
  y: number;
}

function layout(graph: GraphWire): Placed[] {
  const depth = new Map<string, number>();
  const parents = new Map<string, string[]>();
  for (const edge of graph.edges) {
    const list = parents.get(edge.child) ?? [];
    list.push(edge.parent);
    parents.set(edge.child, list);
  }
  const depthOf = (id: string): number => {
    const known = depth.get(id);
    if (known !== undefined) return known;
    const ps = parents.get(id) ?? [];
    const d = ps.length ? Math.max(...ps.map(depthOf)) + 1 : 0;
    depth.set(id, d);
    return d;
  };
  const rows = new Map<number, number>();
  const placed: Placed[] = [];
  const ordered = [...graph.nodes].sort((a, b) => a.insertion_index - b.insertion_index);
  for (const node of ordered) {
    const d = depthOf(node.id);
    const row = rows.get(d) ?? 0;
    rows.set(d, row + 1);
    placed.push({
      node,
      x: NODE_RADIUS + 6 + d * LEVEL_GAP,
      y: NODE_RADIUS + 6 + row * ROW_GAP,
    });
  }
  return placed;
}

export function renderGraph(container: HTMLElement, graph: GraphWire): void {
  const placed = layout(graph);
  const byId = new Map(placed.map((p) => [p.node.id, p]));
  const width = Math.max(...placed.map((p) => p.x), 0) + NODE_RADIUS + 8;
  const height = Math.max(...placed.map((p) => p.y), 0) + NODE_RADIUS + 8;
  const svgNs = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("role", "img");
  svg.setAttribute("aria-label", "interview question graph");

  for (const edge of graph.edges) {
    const from = byId.get(edge.parent);
    const to = byId.get(edge.child);
    if (!from || !to) continue;
    const line = document.createElementNS(svgNs, "line");
    line.setAttribute("x1", String(from.x));
    line.setAttribute("y1", String(from.y));
    line.setAttribute("x2", String(to.x));
    line.setAttribute("y2", String(to.y));
    line.setAttribute("stroke", "#9e9e9e");
    svg.appendChild(line);
  }

  for (const { node, x, y } of placed) {
    const circle = document.createElementNS(svgNs, "circle");
    circle.setAttribute("cx", String(x));
    circle.setAttribute("cy", String(y));
    circle.setAttribute("r", String(NODE_RADIUS));
    circle.setAttribute("fill", STATE_COLORS[node.state] ?? "#bdbdbd");
    circle.setAttribute("data-node-id", node.id);
    circle.setAttribute("data-state", node.state);
    const title = document.createElementNS(svgNs, "title");
    title.textContent = `${node.question} [${node.state}]`;
    circle.appendChild(title);
    svg.appendChild(circle);
  }

  container.replaceChildren(svg);
}

import type {
  Decomposition,
  GraphDoc,
  HeatmapDoc,
  ProjectSummary,
  RunKey,
} from "./types.js";
import type { Pin } from "./state.js";
import type { Point } from "./layout.js";
import { paddedHull } from "./layout.js";
import { cellRect, colorFor, nearestIndex, qscoreRange } from "./heatmap.js";
import { metricRows } from "./metrics-text.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const PALETTE = [
  "#4e79a7",
  "#f28e2b",
  "#59a14f",
  "#b07aa1",
  "#76b7b2",
  "#edc948",
  "#e15759",
  "#9c755f",
  "#bab0ac",
  "#17becf",
];

export const serviceColor = (index: number): string =>
  PALETTE[index % PALETTE.length];

const INTRA_COLOR = "#2e8b57";
const INTER_COLOR = "#d62728";
const OUTLIER_COLOR = "#8a8a8a";

const svgEl = <K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] => {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, value);
  }
  return el;
};

export interface GraphCallbacks {
  onHover(classId: number | null): void;
}

/** Service hulls, call edges, then class nodes; overlap classes get a doubled outline. */
export const renderGraph = (
  svg: SVGSVGElement,
  doc: GraphDoc,
  positions: Map<number, Point>,
  highlighted: number | null,
  callbacks: GraphCallbacks,
): void => {
  svg.replaceChildren();

  for (const service of doc.services) {
    const pts = service.classes
      .map((id) => positions.get(id))
      .filter((p): p is Point => p !== undefined);
    if (pts.length === 0) continue;
    const hull = paddedHull(pts, 26);
    const color = serviceColor(service.index);
    if (hull.length >= 3) {
      const d = `M ${hull.map((p) => `${p.x} ${p.y}`).join(" L ")} Z`;
      svg.appendChild(
        svgEl("path", {
          d,
          fill: color,
          "fill-opacity": "0.12",
          stroke: color,
          "stroke-opacity": "0.5",
          "stroke-width": "1.5",
        }),
      );
    } else {
      // one or two members: a padded circle stands in for the hull
      const cx = pts.reduce((acc, p) => acc + p.x, 0) / pts.length;
      const cy = pts.reduce((acc, p) => acc + p.y, 0) / pts.length;
      const spread = Math.max(
        ...pts.map((p) => Math.hypot(p.x - cx, p.y - cy)),
        0,
      );
      svg.appendChild(
        svgEl("circle", {
          cx: String(cx),
          cy: String(cy),
          r: String(spread + 26),
          fill: color,
          "fill-opacity": "0.12",
          stroke: color,
          "stroke-opacity": "0.5",
          "stroke-width": "1.5",
        }),
      );
    }
  }

  for (const edge of doc.edges) {
    const a = positions.get(edge.source);
    const b = positions.get(edge.target);
    if (!a || !b) continue;
    svg.appendChild(
      svgEl("line", {
        x1: String(a.x),
        y1: String(a.y),
        x2: String(b.x),
        y2: String(b.y),
        stroke: edge.intra ? INTRA_COLOR : INTER_COLOR,
        "stroke-width": String(1 + Math.log1p(edge.count)),
        "stroke-opacity": "0.65",
      }),
    );
  }

  for (const node of doc.nodes) {
    const pos = positions.get(node.id);
    if (!pos) continue;
    const color = node.outlier ? OUTLIER_COLOR : serviceColor(node.services[0]);
    const group = svgEl("g", { class: "node" });
    if (node.overlap) {
      group.appendChild(
        svgEl("circle", {
          cx: String(pos.x),
          cy: String(pos.y),
          r: "13",
          fill: "none",
          stroke: serviceColor(node.services[1] ?? node.services[0]),
          "stroke-width": "2.5",
        }),
      );
    }
    const dot = svgEl("circle", {
      cx: String(pos.x),
      cy: String(pos.y),
      r: node.id === highlighted ? "11" : "9",
      fill: color,
      stroke: node.id === highlighted ? "#111" : "#fff",
      "stroke-width": node.id === highlighted ? "2.5" : "1.5",
      ...(node.outlier ? { "stroke-dasharray": "3 2", stroke: "#555" } : {}),
    });
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${node.name} (services: ${
      node.services.length > 0 ? node.services.join(", ") : "none"
    })`;
    dot.appendChild(title);
    dot.addEventListener("mouseenter", () => callbacks.onHover(node.id));
    dot.addEventListener("mouseleave", () => callbacks.onHover(null));
    group.appendChild(dot);
    if (node.id === highlighted) {
      const label = svgEl("text", {
        x: String(pos.x + 14),
        y: String(pos.y + 4),
        class: "node-label",
      });
      label.textContent = node.name.split(".").pop() ?? node.name;
      group.appendChild(label);
    }
    svg.appendChild(group);
  }
};

/**
 * Metric readouts. Values are literal substrings of the response body,
 * shown next to the raw body itself; nothing is parsed and reprinted.
 */
export const renderMetrics = (
  container: HTMLElement,
  bodyText: string | null,
  note: string | null,
): void => {
  container.replaceChildren();
  if (note !== null) {
    const p = document.createElement("p");
    p.className = "metric-note";
    p.textContent = note;
    container.appendChild(p);
  }
  if (bodyText === null) return;
  const table = document.createElement("table");
  table.className = "metric-table";
  for (const row of metricRows(bodyText)) {
    const tr = document.createElement("tr");
    const th = document.createElement("th");
    th.textContent = row.key;
    const td = document.createElement("td");
    td.textContent = row.literal;
    tr.append(th, td);
    table.appendChild(tr);
  }
  const raw = document.createElement("pre");
  raw.className = "metric-raw";
  raw.textContent = bodyText;
  container.append(table, raw);
};

export interface HeatmapCallbacks {
  onPick(alpha: number, tau: number): void;
}

export const renderHeatmap = (
  svg: SVGSVGElement,
  hm: HeatmapDoc | null,
  current: { alpha: number; tau: number },
  callbacks: HeatmapCallbacks,
): void => {
  svg.replaceChildren();
  if (hm === null) return;
  const view = svg.viewBox.baseVal;
  const margin = { left: 34, bottom: 22 };
  const width = view.width - margin.left;
  const height = view.height - margin.bottom;
  const nRows = hm.alphas.length;
  const nCols = hm.taus.length;
  if (nRows === 0 || nCols === 0) return;
  const range = qscoreRange(hm.qscore);

  for (let row = 0; row < nRows; row++) {
    for (let col = 0; col < nCols; col++) {
      const rect = cellRect({ row, col }, width, height, nRows, nCols);
      const q = hm.qscore[row][col];
      const cell = svgEl("rect", {
        x: String(margin.left + rect.x),
        y: String(rect.y),
        width: String(rect.w),
        height: String(rect.h),
        fill: colorFor(q, range),
        stroke: "#fff",
        "stroke-width": "0.5",
      });
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent =
        q === null
          ? `alpha=${hm.alphas[row]} tau=${hm.taus[col]}: no services`
          : `alpha=${hm.alphas[row]} tau=${hm.taus[col]}: qscore=${q.toFixed(3)}`;
      cell.appendChild(title);
      cell.addEventListener("click", () =>
        callbacks.onPick(hm.alphas[row], hm.taus[col]),
      );
      svg.appendChild(cell);
    }
  }

  const markRow = nearestIndex(hm.alphas, current.alpha);
  const markCol = nearestIndex(hm.taus, current.tau);
  const mark = cellRect({ row: markRow, col: markCol }, width, height, nRows, nCols);
  svg.appendChild(
    svgEl("rect", {
      x: String(margin.left + mark.x),
      y: String(mark.y),
      width: String(mark.w),
      height: String(mark.h),
      fill: "none",
      stroke: "#111",
      "stroke-width": "2",
      "pointer-events": "none",
    }),
  );

  const axis = (x: number, y: number, text: string, anchor: string) => {
    const label = svgEl("text", {
      x: String(x),
      y: String(y),
      class: "axis-label",
      "text-anchor": anchor,
    });
    label.textContent = text;
    svg.appendChild(label);
  };
  axis(margin.left - 4, 10, `α ${hm.alphas[0]}`, "end");
  axis(margin.left - 4, height - 2, `${hm.alphas[nRows - 1]}`, "end");
  axis(margin.left, height + 14, `τ ${hm.taus[0]}`, "start");
  axis(margin.left + width, height + 14, `${hm.taus[nCols - 1]}`, "end");
};

export const renderRunOptions = (
  select: HTMLSelectElement,
  runs: RunKey[],
  current: { n: number; seed: number },
): void => {
  select.replaceChildren();
  for (const run of runs) {
    const option = document.createElement("option");
    option.value = `${run.n}:${run.seed}`;
    option.textContent = `N=${run.n} seed=${run.seed}`;
    option.selected = run.n === current.n && run.seed === current.seed;
    select.appendChild(option);
  }
};

export const renderProjectSummary = (
  el: HTMLElement,
  project: ProjectSummary,
): void => {
  el.textContent =
    `${project.n_classes} classes, ${project.n_class_pairs} calling pairs, ` +
    `${project.total_calls} calls`;
};

export interface PinCallbacks {
  onRestore(pin: Pin): void;
  onRemove(index: number): void;
}

export const renderPins = (
  container: HTMLElement,
  pins: Pin[],
  callbacks: PinCallbacks,
): void => {
  container.replaceChildren();
  pins.forEach((pin, index) => {
    const card = document.createElement("div");
    card.className = "pin-card";

    const head = document.createElement("div");
    head.className = "pin-head";
    head.textContent = `N=${pin.n} seed=${pin.seed} α=${pin.alpha} τ=${pin.tau}`;

    const body = document.createElement("div");
    body.className = "pin-body";
    const sizes = pin.services.map((s) => s.length).join(", ");
    body.textContent = `services [${sizes}], ${pin.outliers.length} outliers`;

    const metrics = document.createElement("div");
    metrics.className = "pin-metrics";
    if (pin.metricsText !== null) {
      metrics.textContent = metricRows(pin.metricsText)
        .map((r) => `${r.key}=${r.literal}`)
        .join("  ");
    }

    const actions = document.createElement("div");
    const restore = document.createElement("button");
    restore.textContent = "restore";
    restore.addEventListener("click", () => callbacks.onRestore(pin));
    const remove = document.createElement("button");
    remove.textContent = "remove";
    remove.addEventListener("click", () => callbacks.onRemove(index));
    actions.append(restore, remove);

    card.append(head, body, metrics, actions);
    container.appendChild(card);
  });
};

/** Non-blocking banner; disappears on its own. */
export const showBanner = (
  container: HTMLElement,
  message: string,
  ttlMs = 6000,
): void => {
  const banner = document.createElement("div");
  banner.className = "banner";
  banner.textContent = message;
  const close = document.createElement("button");
  close.textContent = "×";
  close.addEventListener("click", () => banner.remove());
  banner.appendChild(close);
  container.appendChild(banner);
  setTimeout(() => banner.remove(), ttlMs);
};

/** Dims a panel while its content no longer matches the sliders. */
export const setStale = (el: HTMLElement | SVGElement, stale: boolean): void => {
  el.classList.toggle("stale", stale);
};

export const describeDecomposition = (d: Decomposition): string => {
  const sizes = d.services.map((s) => s.length).join(", ");
  return `${d.services.length} services [${sizes}], ${d.outliers.length} outliers`;
};

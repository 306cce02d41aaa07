// Data overview: two projection scatterplots (benign/adversarial) with a
// true/predicted color toggle and lasso selection, plus the clickable
// prediction-matrix heatmap.

import type { ApiClient, Matrix, Overview } from "../api";
import type { Store } from "../state";
import { classColor, clear, el, insidePolygon, svg } from "./common";

const PLOT = 220;
const PAD = 12;

export class OverviewView {
  private lastColorBy: string | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private store: Store,
  ) {
    store.subscribe(() => void this.render());
  }

  async render(): Promise<void> {
    const state = this.store.get();
    if (state.colorBy === this.lastColorBy) {
      this.highlightCell();
      return;
    }
    this.lastColorBy = state.colorBy;
    const version = this.store.version;
    const [overview, matrix] = await Promise.all([
      this.api.overview("pca", state.colorBy),
      this.api.matrix(),
    ]);
    if (version !== this.store.version && this.store.get().colorBy === this.lastColorBy) {
      return; // a newer selection superseded this fetch
    }
    clear(this.root);
    this.root.appendChild(this.colorToggle());
    const row = el("div", { class: "overview-row" });
    row.appendChild(this.scatter(overview, "benign"));
    row.appendChild(this.scatter(overview, "adversarial"));
    row.appendChild(this.matrixHeatmap(matrix));
    this.root.appendChild(row);
    this.highlightCell();
  }

  private colorToggle(): HTMLElement {
    const wrap = el("div", { class: "controls" });
    const select = el("select", { "data-role": "color-by" });
    for (const value of ["true", "predicted"]) {
      const option = el("option", { value }, `color: ${value} label`);
      if (this.store.get().colorBy === value) {
        option.setAttribute("selected", "");
      }
      select.appendChild(option);
    }
    select.addEventListener("change", () => {
      this.store.setColorBy(select.value as "true" | "predicted");
    });
    wrap.appendChild(select);
    return wrap;
  }

  private scatter(overview: Overview, side: "benign" | "adversarial"): SVGSVGElement {
    const points = overview.points;
    const xs = points.map((p) => p[side][0]);
    const ys = points.map((p) => p[side][1]);
    const xMin = Math.min(...xs);
    const xMax = Math.max(...xs);
    const yMin = Math.min(...ys);
    const yMax = Math.max(...ys);
    const sx = (v: number) =>
      PAD + ((v - xMin) / (xMax - xMin || 1)) * (PLOT - 2 * PAD);
    const sy = (v: number) =>
      PLOT - PAD - ((v - yMin) / (yMax - yMin || 1)) * (PLOT - 2 * PAD);
    const plot = svg("svg", {
      width: String(PLOT),
      height: String(PLOT),
      class: `scatter scatter-${side}`,
    });
    const colorBy = this.store.get().colorBy;
    for (const p of points) {
      const label = colorBy === "true" ? p.y : p.adv_label;
      const dot = svg("circle", {
        cx: String(sx(p[side][0])),
        cy: String(sy(p[side][1])),
        r: "3",
        fill: classColor(label),
        "data-pair": String(p.id),
      });
      dot.addEventListener("click", () => this.store.selectPair(p.id));
      plot.appendChild(dot);
    }
    this.attachLasso(plot, points.map((p) => ({
      id: p.id,
      x: sx(p[side][0]),
      y: sy(p[side][1]),
    })));
    return plot;
  }

  private attachLasso(
    plot: SVGSVGElement,
    positions: Array<{ id: number; x: number; y: number }>,
  ): void {
    let path: Array<[number, number]> = [];
    let trail: SVGPolylineElement | null = null;
    const point = (event: PointerEvent): [number, number] => {
      const box = plot.getBoundingClientRect();
      return [event.clientX - box.left, event.clientY - box.top];
    };
    plot.addEventListener("pointerdown", (event) => {
      path = [point(event)];
      trail = svg("polyline", { class: "lasso", fill: "none", stroke: "#333" });
      plot.appendChild(trail);
    });
    plot.addEventListener("pointermove", (event) => {
      if (!trail) {
        return;
      }
      path.push(point(event));
      trail.setAttribute("points", path.map(([x, y]) => `${x},${y}`).join(" "));
    });
    plot.addEventListener("pointerup", () => {
      if (trail) {
        trail.remove();
        trail = null;
      }
      if (path.length < 3) {
        return;
      }
      const picked = positions
        .filter((p) => insidePolygon(p.x, p.y, path))
        .map((p) => p.id);
      if (picked.length) {
        this.store.selectLasso(picked);
      }
    });
  }

  private matrixHeatmap(matrix: Matrix): HTMLElement {
    const n = matrix.class_names.length;
    const table = el("table", { class: "matrix" });
    const header = el("tr");
    header.appendChild(el("th", {}, "true \\ adv"));
    for (const name of matrix.class_names) {
      header.appendChild(el("th", {}, name));
    }
    table.appendChild(header);
    const peak = Math.max(1, ...matrix.counts.flat());
    for (let y = 0; y < n; y++) {
      const row = el("tr");
      row.appendChild(el("th", {}, matrix.class_names[y]));
      for (let a = 0; a < n; a++) {
        const count = matrix.counts[y][a];
        const cell = el(
          "td",
          {
            class: "matrix-cell",
            "data-cell": `${y},${a}`,
            style: `background: rgba(228, 87, 86, ${count / peak})`,
          },
          String(count),
        );
        if (count > 0) {
          cell.addEventListener("click", () => this.store.selectCell({ y, advLabel: a }));
        }
        row.appendChild(cell);
      }
      table.appendChild(row);
    }
    return table;
  }

  private highlightCell(): void {
    const cell = this.store.get().cell;
    for (const node of this.root.querySelectorAll(".matrix-cell")) {
      const selected =
        cell !== null && node.getAttribute("data-cell") === `${cell.y},${cell.advLabel}`;
      node.classList.toggle("selected", selected);
    }
  }
}

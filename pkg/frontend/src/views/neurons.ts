// Neuron vulnerability chart: benign and adversarial contribution curves
// with their class bands, horizontally zoomable, hover tooltip, and a sort
// selector over {band gap, IoU-benign, IoU-adversarial}.

import type { ApiClient, NeuronEntry, NeuronSort } from "../api";
import type { Store } from "../state";
import { clear, el, svg } from "./common";

const WIDTH = 640;
const HEIGHT = 200;
const PAD = 24;
const SORTS: NeuronSort[] = ["gap", "iou_b", "iou_a"];

export class NeuronView {
  private zoom: [number, number] = [0, 1]; // visible fraction of the x axis

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private store: Store,
  ) {
    store.subscribe(() => void this.render());
  }

  async render(): Promise<void> {
    const state = this.store.get();
    const version = this.store.version;
    clear(this.root);
    if (state.pairId === null) {
      this.root.appendChild(el("p", { class: "hint" }, "Select a pair."));
      return;
    }
    const body = await this.api.neurons(
      state.pairId, state.neuronSort, state.rfThreshold, state.vulnQ,
    );
    if (version !== this.store.version) {
      return;
    }
    this.root.appendChild(this.controls());
    this.root.appendChild(this.chart(body.neurons));
  }

  private controls(): HTMLElement {
    const wrap = el("div", { class: "controls" });
    const select = el("select", { "data-role": "neuron-sort" });
    for (const value of SORTS) {
      const option = el("option", { value }, `sort: ${value}`);
      if (this.store.get().neuronSort === value) {
        option.setAttribute("selected", "");
      }
      select.appendChild(option);
    }
    select.addEventListener("change", () =>
      this.store.setNeuronSort(select.value as NeuronSort),
    );
    wrap.appendChild(select);
    const zoomIn = el("button", { "data-role": "zoom-in" }, "zoom +");
    zoomIn.addEventListener("click", () => this.setZoom(0.5));
    const zoomOut = el("button", { "data-role": "zoom-out" }, "zoom -");
    zoomOut.addEventListener("click", () => this.setZoom(2));
    wrap.appendChild(zoomIn);
    wrap.appendChild(zoomOut);
    return wrap;
  }

  private setZoom(factor: number): void {
    const [lo, hi] = this.zoom;
    const center = (lo + hi) / 2;
    const half = Math.min(0.5, Math.max(0.02, ((hi - lo) / 2) * factor));
    this.zoom = [Math.max(0, center - half), Math.min(1, center + half)];
    void this.render();
  }

  private chart(neurons: NeuronEntry[]): SVGSVGElement {
    const n = neurons.length;
    const [lo, hi] = this.zoom;
    const first = Math.floor(lo * n);
    const last = Math.max(first + 1, Math.ceil(hi * n));
    const visible = neurons.slice(first, last);
    const values = visible.flatMap((e) => [
      e.curve_b, e.curve_a, e.band_b[0], e.band_b[1], e.band_a[0], e.band_a[1],
    ]);
    const yMin = Math.min(...values);
    const yMax = Math.max(...values);
    const sx = (i: number) =>
      PAD + (i / Math.max(1, visible.length - 1)) * (WIDTH - 2 * PAD);
    const sy = (v: number) =>
      HEIGHT - PAD - ((v - yMin) / (yMax - yMin || 1)) * (HEIGHT - 2 * PAD);
    const plot = svg("svg", {
      width: String(WIDTH),
      height: String(HEIGHT),
      class: "neuron-chart",
    });
    plot.appendChild(this.band(visible, "band_b", sx, sy, "#4c78a8"));
    plot.appendChild(this.band(visible, "band_a", sx, sy, "#e45756"));
    plot.appendChild(this.curve(visible, "curve_b", sx, sy, "#4c78a8"));
    plot.appendChild(this.curve(visible, "curve_a", sx, sy, "#e45756"));
    const tooltip = el("div", { class: "tooltip", style: "display: none" });
    this.root.appendChild(tooltip);
    visible.forEach((entry, i) => {
      const hit = svg("rect", {
        x: String(sx(i) - 4),
        y: "0",
        width: "8",
        height: String(HEIGHT),
        fill: "transparent",
        "data-neuron": String(entry.id),
        class: this.store.get().neuronId === entry.id ? "neuron-hit selected" : "neuron-hit",
      });
      hit.addEventListener("click", () => this.store.selectNeuron(entry.id));
      hit.addEventListener("pointerenter", () => {
        tooltip.style.display = "block";
        tooltip.textContent =
          `neuron ${entry.id}: bg ${entry.bg.toFixed(4)}, ` +
          `benign ${entry.curve_b.toFixed(4)} in [${entry.band_b[0].toFixed(3)}, ` +
          `${entry.band_b[1].toFixed(3)}], adversarial ${entry.curve_a.toFixed(4)} ` +
          `in [${entry.band_a[0].toFixed(3)}, ${entry.band_a[1].toFixed(3)}]`;
      });
      hit.addEventListener("pointerleave", () => {
        tooltip.style.display = "none";
      });
      plot.appendChild(hit);
    });
    return plot;
  }

  private band(
    entries: NeuronEntry[],
    key: "band_b" | "band_a",
    sx: (i: number) => number,
    sy: (v: number) => number,
    color: string,
  ): SVGPolygonElement {
    const upper = entries.map((e, i) => `${sx(i)},${sy(e[key][1])}`);
    const lower = entries.map((e, i) => `${sx(i)},${sy(e[key][0])}`).reverse();
    return svg("polygon", {
      points: [...upper, ...lower].join(" "),
      fill: color,
      opacity: "0.2",
      class: `band ${key}`,
    });
  }

  private curve(
    entries: NeuronEntry[],
    key: "curve_b" | "curve_a",
    sx: (i: number) => number,
    sy: (v: number) => number,
    color: string,
  ): SVGPolylineElement {
    return svg("polyline", {
      points: entries.map((e, i) => `${sx(i)},${sy(e[key])}`).join(" "),
      fill: "none",
      stroke: color,
      "stroke-width": "1.5",
      class: `curve ${key}`,
    });
  }
}

// Neuron cluster view: the pair's dendrogram with the selected neuron's
// leaf highlighted, multi-node click selection, a union/intersection
// toggle, and the combined cluster receptive field.

import type { ApiClient, Dendrogram, MaskOp } from "../api";
import type { Store } from "../state";
import { clear, el, pngSrc, svg } from "./common";

const WIDTH = 640;
const HEIGHT = 240;
const PAD = 16;

export class DendrogramView {
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
    const pairId = state.pairId;
    const body = await this.api.dendrogram(pairId, state.rfThreshold);
    let clusterImage: string | null = null;
    let leafCount = 0;
    if (state.clusterNodes.length) {
      const cluster = await this.api.clusterRf(
        pairId, state.clusterNodes, state.maskOp, "benign", state.rfThreshold,
      );
      clusterImage = cluster.image;
      leafCount = cluster.leaves.length;
    }
    if (version !== this.store.version) {
      return;
    }
    this.root.appendChild(this.opToggle());
    this.root.appendChild(this.tree(body.dendrogram));
    if (clusterImage !== null) {
      const panel = el("div", { class: "cluster-rf" });
      const img = el("img", {
        width: "96",
        height: "96",
        alt: "cluster receptive field",
        "data-role": "cluster-rf-image",
      });
      img.src = pngSrc(clusterImage);
      panel.appendChild(img);
      panel.appendChild(
        el("div", {}, `${this.store.get().maskOp} of ${leafCount} neurons`),
      );
      this.root.appendChild(panel);
    }
  }

  private opToggle(): HTMLElement {
    const wrap = el("div", { class: "controls" });
    const select = el("select", { "data-role": "mask-op" });
    for (const value of ["union", "intersection"]) {
      const option = el("option", { value }, value);
      if (this.store.get().maskOp === value) {
        option.setAttribute("selected", "");
      }
      select.appendChild(option);
    }
    select.addEventListener("change", () => this.store.setMaskOp(select.value as MaskOp));
    wrap.appendChild(select);
    return wrap;
  }

  private tree(dendrogram: Dendrogram): SVGSVGElement {
    const plot = svg("svg", {
      width: String(WIDTH),
      height: String(HEIGHT),
      class: "dendrogram",
    });
    const order = dendrogram.leaf_order;
    const slot = new Map<number, number>();
    order.forEach((leaf, i) => slot.set(leaf, i));
    const sx = (position: number) =>
      PAD + (position / Math.max(1, order.length - 1)) * (WIDTH - 2 * PAD);
    const peak = Math.max(...dendrogram.merges.map((m) => m.height), 1e-12);
    const sy = (height: number) =>
      HEIGHT - PAD - (height / peak) * (HEIGHT - 2 * PAD);
    // position and height per node; leaves sit at height 0
    const xPos = new Map<number, number>();
    const yPos = new Map<number, number>();
    for (const leaf of order) {
      xPos.set(leaf, sx(slot.get(leaf)!));
      yPos.set(leaf, sy(0));
    }
    const selectedNodes = new Set(this.store.get().clusterNodes);
    const selectedNeuron = this.store.get().neuronId;
    for (const merge of dendrogram.merges) {
      const xl = xPos.get(merge.left)!;
      const xr = xPos.get(merge.right)!;
      const y = sy(merge.height);
      const x = (xl + xr) / 2;
      xPos.set(merge.node, x);
      yPos.set(merge.node, y);
      const path = svg("path", {
        d:
          `M ${xl} ${yPos.get(merge.left)!} L ${xl} ${y} ` +
          `L ${xr} ${y} L ${xr} ${yPos.get(merge.right)!}`,
        fill: "none",
        stroke: "#888",
      });
      plot.appendChild(path);
      const handle = svg("circle", {
        cx: String(x),
        cy: String(y),
        r: "4",
        class: selectedNodes.has(merge.node) ? "dendro-node selected" : "dendro-node",
        "data-node": String(merge.node),
        fill: selectedNodes.has(merge.node) ? "#e45756" : "#bbb",
      });
      handle.addEventListener("click", () => this.store.toggleClusterNode(merge.node));
      plot.appendChild(handle);
    }
    for (const leaf of order) {
      const mark = svg("circle", {
        cx: String(xPos.get(leaf)!),
        cy: String(sy(0)),
        r: leaf === selectedNeuron ? "5" : "2.5",
        class: leaf === selectedNeuron ? "dendro-leaf highlighted" : "dendro-leaf",
        "data-leaf": String(leaf),
        fill: leaf === selectedNeuron ? "#f58518" : "#555",
      });
      mark.addEventListener("click", () => this.store.toggleClusterNode(leaf));
      plot.appendChild(mark);
    }
    return plot;
  }
}

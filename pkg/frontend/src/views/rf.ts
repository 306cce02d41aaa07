// Receptive field view: the selected neuron's benign and adversarial RFs
// with probability bars, both vulnerability overlays, a threshold slider,
// and a click-to-open popup of context images.

import type { ApiClient } from "../api";
import type { Store } from "../state";
import { clear, el, pngSrc, probabilityBars } from "./common";

export class RfView {
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
    if (state.pairId === null || state.neuronId === null) {
      this.root.appendChild(el("p", { class: "hint" }, "Select a neuron."));
      return;
    }
    const pairId = state.pairId;
    const neuron = state.neuronId;
    const [rfBenign, rfAdv, vmBenign, vmAdv, cell] = await Promise.all([
      this.api.rf(pairId, neuron, "benign", state.rfThreshold),
      this.api.rf(pairId, neuron, "adversarial", state.rfThreshold),
      this.api.vulnmap(pairId, "benign", state.vulnQ),
      this.api.vulnmap(pairId, "adv", state.vulnQ),
      state.cell
        ? this.api.cellPairs(state.cell.y, state.cell.advLabel, state.pairSort)
        : Promise.resolve(null),
    ]);
    if (version !== this.store.version) {
      return;
    }
    this.root.appendChild(this.thresholdSlider());
    const row = el("div", { class: "rf-row" });
    const pair = cell?.pairs.find((p) => p.id === pairId);
    row.appendChild(this.panel("benign RF", rfBenign.image, rfBenign.dead, pair?.p_benign));
    row.appendChild(this.panel("adversarial RF", rfAdv.image, rfAdv.dead, pair?.p_adv));
    row.appendChild(this.panel("benign-class vulnerability", vmBenign.overlay, false));
    row.appendChild(this.panel("adversarial-class vulnerability", vmAdv.overlay, false));
    this.root.appendChild(row);
    const contextButton = el("button", { "data-role": "context" }, "context images");
    contextButton.addEventListener("click", () => void this.openContext(pairId, neuron));
    this.root.appendChild(contextButton);
  }

  private thresholdSlider(): HTMLElement {
    const wrap = el("div", { class: "controls" });
    const state = this.store.get();
    const slider = el("input", {
      type: "range",
      min: "0.05",
      max: "1",
      step: "0.05",
      value: String(state.rfThreshold),
      "data-role": "rf-threshold",
    });
    slider.addEventListener("change", () =>
      this.store.setRfThreshold(Number(slider.value)),
    );
    wrap.appendChild(el("label", {}, `RF threshold ${state.rfThreshold.toFixed(2)}`));
    wrap.appendChild(slider);
    return wrap;
  }

  private panel(
    title: string,
    imageBase64: string,
    dead: boolean,
    probs?: number[],
  ): HTMLElement {
    const panel = el("div", { class: "rf-panel" });
    if (probs) {
      panel.appendChild(probabilityBars(probs, 96, 16));
    }
    const img = el("img", {
      class: "rf-image",
      width: "96",
      height: "96",
      alt: title,
    });
    img.src = pngSrc(imageBase64);
    panel.appendChild(img);
    panel.appendChild(el("div", { class: "rf-caption" }, dead ? `${title} (dead)` : title));
    return panel;
  }

  private async openContext(pairId: number, neuron: number): Promise<void> {
    const body = await this.api.context(pairId, neuron, 6);
    const popup = el("div", { class: "context-popup", "data-role": "context-popup" });
    const close = el("button", {}, "close");
    close.addEventListener("click", () => popup.remove());
    popup.appendChild(close);
    for (const item of body.items) {
      const entry = el("div", { class: "context-item" });
      const benign = el("img", { width: "64", height: "64", alt: `pair ${item.pair_id} benign RF` });
      benign.src = pngSrc(item.benign_rf);
      const adv = el("img", { width: "64", height: "64", alt: `pair ${item.pair_id} adversarial RF` });
      adv.src = pngSrc(item.adversarial_rf);
      entry.appendChild(benign);
      entry.appendChild(adv);
      entry.appendChild(el("span", {}, `pair ${item.pair_id}`));
      popup.appendChild(entry);
    }
    this.root.appendChild(popup);
  }
}

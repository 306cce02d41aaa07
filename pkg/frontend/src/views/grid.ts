// Image grid: the selected cell's (or lasso's) pairs with probability bars
// above, values below, borders colored by the predicted label, and a sort
// selector over the four pair measures.

import type { ApiClient, CellPair, PairSort } from "../api";
import type { Store } from "../state";
import { classColor, clear, el, pngSrc, probabilityBars } from "./common";

const SORTS: PairSort[] = ["l2_asc", "l2_desc", "p_benign_desc", "p_adv_asc"];

export class GridView {
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
    if (!state.cell && !state.lasso) {
      this.root.appendChild(el("p", { class: "hint" }, "Select a matrix cell or lasso points."));
      return;
    }
    this.root.appendChild(this.sortSelector());
    let pairs: CellPair[] = [];
    if (state.cell) {
      const body = await this.api.cellPairs(state.cell.y, state.cell.advLabel, state.pairSort);
      pairs = body.pairs;
    } else if (state.lasso) {
      // A lasso can span several cells; fetch each touched cell once and keep
      // the lassoed ids, preserving the server's sort inside each cell.
      const wanted = new Set(state.lasso);
      const matrix = await this.api.matrix();
      const n = matrix.class_names.length;
      for (let y = 0; y < n; y++) {
        for (let a = 0; a < n; a++) {
          if (matrix.counts[y][a] === 0) {
            continue;
          }
          const body = await this.api.cellPairs(y, a, state.pairSort);
          pairs.push(...body.pairs.filter((p) => wanted.has(p.id)));
        }
      }
    }
    if (version !== this.store.version) {
      return;
    }
    const grid = el("div", { class: "pair-grid" });
    for (const pair of pairs) {
      grid.appendChild(this.card(pair));
    }
    this.root.appendChild(grid);
  }

  private sortSelector(): HTMLElement {
    const wrap = el("div", { class: "controls" });
    const select = el("select", { "data-role": "pair-sort" });
    for (const value of SORTS) {
      const option = el("option", { value }, value);
      if (this.store.get().pairSort === value) {
        option.setAttribute("selected", "");
      }
      select.appendChild(option);
    }
    select.addEventListener("change", () => this.store.setPairSort(select.value as PairSort));
    wrap.appendChild(select);
    return wrap;
  }

  private card(pair: CellPair): HTMLElement {
    const selected = this.store.get().pairId === pair.id;
    const card = el("div", {
      class: `pair-card${selected ? " selected" : ""}`,
      "data-pair": String(pair.id),
    });
    card.addEventListener("click", () => this.store.selectPair(pair.id));
    for (const side of ["benign", "adv"] as const) {
      const probs = side === "benign" ? pair.p_benign : pair.p_adv;
      const label = side === "benign" ? pair.y : pair.adv_label;
      const column = el("div", { class: "pair-side" });
      column.appendChild(probabilityBars(probs));
      const img = el("img", {
        class: "pair-thumb",
        width: "64",
        height: "64",
        style: `border: 3px solid ${classColor(label)}`,
        alt: `${side} image of pair ${pair.id}`,
      });
      const thumb = side === "benign" ? pair.thumb_benign : pair.thumb_adv;
      img.src = thumb ? pngSrc(thumb) : this.api.pairImageUrl(pair.id, side === "benign" ? "benign" : "adversarial");
      column.appendChild(img);
      column.appendChild(
        el("div", { class: "prob-value" }, probs[label].toFixed(3)),
      );
      card.appendChild(column);
    }
    card.appendChild(el("div", { class: "pair-l2" }, `l2 ${pair.l2.toFixed(3)}`));
    return card;
  }
}

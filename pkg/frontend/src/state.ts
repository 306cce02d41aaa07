// Single source of truth for the coordinated views. Changing an upstream
// selection clears everything downstream (cell -> pair -> neuron -> cluster),
// and every change bumps a version number so views can discard responses
// that arrive after a newer selection superseded them.

import type { MaskOp, NeuronSort, PairSort } from "./api";

export interface Cell {
  y: number;
  advLabel: number;
}

export interface SelectionState {
  cell: Cell | null;
  lasso: number[] | null; // pair ids picked in a scatterplot lasso
  pairId: number | null;
  neuronId: number | null;
  clusterNodes: number[];
  pairSort: PairSort;
  neuronSort: NeuronSort;
  rfThreshold: number;
  vulnQ: number;
  maskOp: MaskOp;
  colorBy: "true" | "predicted";
}

type Listener = (state: SelectionState, version: number) => void;

export class Store {
  private state: SelectionState = {
    cell: null,
    lasso: null,
    pairId: null,
    neuronId: null,
    clusterNodes: [],
    pairSort: "l2_asc",
    neuronSort: "gap",
    rfThreshold: 0.5,
    vulnQ: 0.2,
    maskOp: "union",
    colorBy: "true",
  };
  private listeners: Listener[] = [];
  private currentVersion = 0;

  get(): SelectionState {
    return this.state;
  }

  get version(): number {
    return this.currentVersion;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private update(patch: Partial<SelectionState>): void {
    this.state = { ...this.state, ...patch };
    this.currentVersion += 1;
    for (const listener of this.listeners) {
      listener(this.state, this.currentVersion);
    }
  }

  selectCell(cell: Cell | null): void {
    this.update({ cell, lasso: null, pairId: null, neuronId: null, clusterNodes: [] });
  }

  selectLasso(pairIds: number[] | null): void {
    this.update({ lasso: pairIds, cell: null, pairId: null, neuronId: null, clusterNodes: [] });
  }

  selectPair(pairId: number | null): void {
    this.update({ pairId, neuronId: null, clusterNodes: [] });
  }

  selectNeuron(neuronId: number | null): void {
    this.update({ neuronId, clusterNodes: [] });
  }

  toggleClusterNode(node: number): void {
    const nodes = this.state.clusterNodes.includes(node)
      ? this.state.clusterNodes.filter((n) => n !== node)
      : [...this.state.clusterNodes, node];
    this.update({ clusterNodes: nodes });
  }

  setPairSort(pairSort: PairSort): void {
    this.update({ pairSort });
  }

  setNeuronSort(neuronSort: NeuronSort): void {
    this.update({ neuronSort });
  }

  setRfThreshold(rfThreshold: number): void {
    this.update({ rfThreshold });
  }

  setVulnQ(vulnQ: number): void {
    this.update({ vulnQ });
  }

  setMaskOp(maskOp: MaskOp): void {
    this.update({ maskOp });
  }

  setColorBy(colorBy: "true" | "predicted"): void {
    this.update({ colorBy });
  }
}

// Application entry point: builds the five coordinated views against the
// run server's JSON API (same origin).

import { ApiClient } from "./api";
import { Store } from "./state";
import { DendrogramView } from "./views/dendrogram";
import { GridView } from "./views/grid";
import { NeuronView } from "./views/neurons";
import { OverviewView } from "./views/overview";
import { RfView } from "./views/rf";

export interface App {
  store: Store;
  overview: OverviewView;
  grid: GridView;
  neurons: NeuronView;
  rf: RfView;
  dendrogram: DendrogramView;
}

export function createApp(root: HTMLElement, api: ApiClient = new ApiClient()): App {
  const store = new Store();
  const sections: Record<string, HTMLElement> = {};
  for (const [id, title] of [
    ["overview", "Data overview"],
    ["grid", "Image grid"],
    ["neurons", "Neuron vulnerability"],
    ["rf", "Receptive fields"],
    ["dendrogram", "Neuron clusters"],
  ] as const) {
    const section = document.createElement("section");
    section.id = `view-${id}`;
    const heading = document.createElement("h2");
    heading.textContent = title;
    section.appendChild(heading);
    const body = document.createElement("div");
    body.className = "view-body";
    section.appendChild(body);
    root.appendChild(section);
    sections[id] = body;
  }
  const app: App = {
    store,
    overview: new OverviewView(sections.overview, api, store),
    grid: new GridView(sections.grid, api, store),
    neurons: new NeuronView(sections.neurons, api, store),
    rf: new RfView(sections.rf, api, store),
    dendrogram: new DendrogramView(sections.dendrogram, api, store),
  };
  return app;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = createApp(document.getElementById("app")!);
  void app.overview.render();
  void app.grid.render();
  void app.neurons.render();
  void app.rf.render();
  void app.dendrogram.render();
}

// Typed client for the run server's JSON API. Every number shown in the UI
// originates from one of these responses; the client never computes scores.

export interface OverviewPoint {
  id: number;
  y: number;
  adv_label: number;
  benign: [number, number];
  adversarial: [number, number];
}

export interface Overview {
  method: string;
  seed: number;
  color_by: string;
  class_names: string[];
  points: OverviewPoint[];
}

export interface Matrix {
  class_names: string[];
  counts: number[][];
  total: number;
}

export interface CellPair {
  id: number;
  y: number;
  adv_label: number;
  p_benign: number[];
  p_adv: number[];
  l2: number;
  thumb_benign?: string;
  thumb_adv?: string;
}

export interface NeuronEntry {
  id: number;
  curve_b: number;
  curve_a: number;
  band_b: [number, number];
  band_a: [number, number];
  bg: number;
  sort_value: number;
}

export interface RfResponse {
  neuron: number;
  dead: boolean;
  mask: number[];
  image: string;
}

export interface ContextItem {
  pair_id: number;
  benign_rf: string;
  adversarial_rf: string;
}

export interface VulnmapResponse {
  score: number[][];
  binarized: number[];
  overlay: string;
}

export interface DendrogramMerge {
  node: number;
  left: number;
  right: number;
  height: number;
  count: number;
}

export interface Dendrogram {
  leaf_count: number;
  leaf_order: number[];
  merges: DendrogramMerge[];
}

export interface ClusterRf {
  leaves: number[];
  mask: number[];
  image: string;
}

export type PairSort = "l2_asc" | "l2_desc" | "p_benign_desc" | "p_adv_asc";
export type NeuronSort = "gap" | "iou_b" | "iou_a";
export type MaskOp = "union" | "intersection";
export type Side = "benign" | "adversarial";

async function getJson<T>(url: string): Promise<T> {
  const response = await fetch(url);
  if (!response.ok) {
    const body = await response.text();
    throw new Error(`GET ${url}: ${response.status} ${body}`);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private base: string = "") {}

  private url(path: string, params: Record<string, unknown> = {}): string {
    const query = Object.entries(params)
      .filter(([, v]) => v !== undefined && v !== null)
      .map(([k, v]) => `${k}=${encodeURIComponent(String(v))}`)
      .join("&");
    return this.base + path + (query ? `?${query}` : "");
  }

  overview(method: string, colorBy: string): Promise<Overview> {
    return getJson(this.url("/overview", { method, color_by: colorBy }));
  }

  matrix(): Promise<Matrix> {
    return getJson(this.url("/matrix"));
  }

  cellPairs(y: number, advLabel: number, sort: PairSort): Promise<{ pairs: CellPair[] }> {
    return getJson(this.url(`/cell/${y}/${advLabel}/pairs`, { sort }));
  }

  neurons(pairId: number, sort: NeuronSort, t: number, q: number): Promise<{ neurons: NeuronEntry[] }> {
    return getJson(this.url(`/pair/${pairId}/neurons`, { sort, t, q }));
  }

  rf(pairId: number, neuron: number, side: Side, t: number): Promise<RfResponse> {
    return getJson(this.url(`/pair/${pairId}/neuron/${neuron}/rf`, { side, t }));
  }

  context(pairId: number, neuron: number, m: number): Promise<{ items: ContextItem[] }> {
    return getJson(this.url(`/pair/${pairId}/neuron/${neuron}/context`, { m }));
  }

  vulnmap(pairId: number, which: "benign" | "adv", q: number): Promise<VulnmapResponse> {
    return getJson(this.url(`/pair/${pairId}/vulnmap`, { which, q }));
  }

  dendrogram(pairId: number, t: number): Promise<{ dendrogram: Dendrogram }> {
    return getJson(this.url(`/pair/${pairId}/dendrogram`, { t }));
  }

  clusterRf(pairId: number, nodes: number[], op: MaskOp, side: Side, t: number): Promise<ClusterRf> {
    return getJson(this.url(`/pair/${pairId}/cluster-rf`, { nodes: nodes.join(","), op, side, t }));
  }

  pairImageUrl(pairId: number, side: Side): string {
    return this.url(`/pair/${pairId}/image`, { side });
  }
}

// Masks arrive run-length encoded as [h, w, run0, run1, ...] with runs
// alternating zero/one in row-major order, starting with the zero-run.
export function rleDecode(payload: number[]): { h: number; w: number; bits: Uint8Array } {
  const [h, w, ...runs] = payload;
  const bits = new Uint8Array(h * w);
  let offset = 0;
  let value = 0;
  for (const run of runs) {
    bits.fill(value, offset, offset + run);
    offset += run;
    value = 1 - value;
  }
  return { h, w, bits };
}

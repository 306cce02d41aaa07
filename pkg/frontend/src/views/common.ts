// Small DOM/SVG helpers shared by the views.

export const CLASS_COLORS = [
  "#4c78a8", "#f58518", "#54a24b", "#e45756",
  "#72b7b2", "#b279a2", "#eeca3b", "#9d755d",
];

export function classColor(label: number): string {
  return CLASS_COLORS[label % CLASS_COLORS.length];
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

const SVG_NS = "http://www.w3.org/2000/svg";

export function svg<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}

export function clear(node: Element): void {
  while (node.firstChild) {
    node.removeChild(node.firstChild);
  }
}

export function pngSrc(base64: string): string {
  return `data:image/png;base64,${base64}`;
}

// Horizontal probability bars, one per class, heights proportional to the
// server-reported probabilities.
export function probabilityBars(probs: number[], width = 64, height = 16): SVGSVGElement {
  const root = svg("svg", {
    width: String(width),
    height: String(height),
    class: "prob-bars",
  });
  const barWidth = width / probs.length;
  probs.forEach((p, i) => {
    const barHeight = Math.max(1, p * height);
    root.appendChild(
      svg("rect", {
        x: String(i * barWidth + 1),
        y: String(height - barHeight),
        width: String(barWidth - 2),
        height: String(barHeight),
        fill: classColor(i),
      }),
    );
  });
  return root;
}

// Point-in-polygon test used only for lasso hit-testing (a UI concern, not
// an analysis computation).
export function insidePolygon(x: number, y: number, poly: Array<[number, number]>): boolean {
  let inside = false;
  for (let i = 0, j = poly.length - 1; i < poly.length; j = i++) {
    const [xi, yi] = poly[i];
    const [xj, yj] = poly[j];
    if (yi > y !== yj > y && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

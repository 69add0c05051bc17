const SVG = "http://www.w3.org/2000/svg";

export interface ChartPoint {
  x: number;
  /** null marks a failed point, drawn as a gap. */
  y: number | null;
  label?: string;
}

export interface ChartOptions {
  width?: number;
  height?: number;
  yMax?: number;
  reference?: number | null;
  onClick?: (p: ChartPoint) => void;
}

function svg<K extends keyof SVGElementTagNameMap>(doc: Document, tag: K, attrs: Record<string, string | number>): SVGElementTagNameMap[K] {
  const node = doc.createElementNS(SVG, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

/** Line chart; consecutive successful points are joined, failures break the line. */
export function lineChart(doc: Document, points: ChartPoint[], opts: ChartOptions = {}): SVGSVGElement {
  const width = opts.width ?? 480;
  const height = opts.height ?? 240;
  const pad = 32;
  const xs = points.map((p) => p.x);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const yMax = opts.yMax ?? 1;
  const sx = (x: number) => (x1 === x0 ? width / 2 : pad + ((x - x0) / (x1 - x0)) * (width - 2 * pad));
  const sy = (y: number) => height - pad - (y / yMax) * (height - 2 * pad);

  const root = svg(doc, "svg", { viewBox: `0 0 ${width} ${height}`, class: "chart" });
  root.append(svg(doc, "line", { x1: pad, y1: height - pad, x2: width - pad, y2: height - pad, class: "axis" }));
  if (opts.reference != null) {
    root.append(svg(doc, "line", { x1: pad, y1: sy(opts.reference), x2: width - pad, y2: sy(opts.reference), class: "reference" }));
  }

  let segment: string[] = [];
  const flush = () => {
    if (segment.length > 1) root.append(svg(doc, "polyline", { points: segment.join(" "), class: "series" }));
    segment = [];
  };
  for (const p of points) {
    if (p.y === null) {
      flush();
      const gap = svg(doc, "circle", { cx: sx(p.x), cy: height - pad, r: 3, class: "gap", "data-x": p.x });
      gap.append(Object.assign(doc.createElementNS(SVG, "title"), { textContent: p.label ?? "failed" }));
      root.append(gap);
      continue;
    }
    segment.push(`${sx(p.x)},${sy(p.y)}`);
  }
  flush();
  for (const p of points) {
    if (p.y === null) continue;
    const dot = svg(doc, "circle", { cx: sx(p.x), cy: sy(p.y), r: 4, class: "point", "data-x": p.x, "data-y": p.y });
    dot.append(Object.assign(doc.createElementNS(SVG, "title"), { textContent: `${p.x}: ${p.y}` }));
    if (opts.onClick) dot.addEventListener("click", () => opts.onClick!(p));
    root.append(dot);
  }
  return root;
}

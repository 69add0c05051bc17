import { ApiError } from "./api";
import type { Completion, Envelope, KeywordScore, SteerReport } from "./types";

export type SteerOutcome = { ok: true; response: Envelope<SteerReport> } | { ok: false; error: ApiError };

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  node.append(...children);
  return node;
}

/** Completion text with the server-reported keyword spans wrapped in <mark>. */
export function highlighted(doc: Document, text: string, spans: [number, number][]): HTMLElement {
  const chars = Array.from(text);
  const out = el(doc, "p", { class: "completion" });
  let at = 0;
  for (const [a, b] of spans) {
    out.append(chars.slice(at, a).join(""), el(doc, "mark", {}, chars.slice(a, b).join("")));
    at = b;
  }
  out.append(chars.slice(at).join(""));
  return out;
}

function column(doc: Document, title: string, completions: Completion[], score: KeywordScore): HTMLElement {
  const col = el(doc, "section", { class: `column ${title}` }, el(doc, "h3", {}, title));
  col.append(
    el(
      doc,
      "p",
      { class: "score" },
      "with keyword: ",
      el(doc, "span", { class: "fraction" }, String(score.fraction)),
      ", mean count: ",
      el(doc, "span", { class: "mean" }, String(score.mean_count)),
    ),
  );
  completions.forEach((c, i) => {
    const item = highlighted(doc, c.text, score.spans[i] ?? []);
    item.dataset.seed = String(c.seed);
    col.append(item);
  });
  return col;
}

/** Per-row steering-vector norms as a strip of bars; the title holds the exact value. */
export function normStrip(doc: Document, norms: number[]): HTMLElement {
  const strip = el(doc, "div", { class: "norms" });
  const max = Math.max(...norms, 0);
  norms.forEach((n, i) => {
    const height = max > 0 ? (100 * n) / max : 0;
    strip.append(el(doc, "span", { class: "bar", title: `row ${i}: ${n}`, "data-norm": String(n), style: `height: ${height}%` }));
  });
  return strip;
}

export function renderError(doc: Document, error: ApiError): HTMLElement {
  const box = el(doc, "div", { class: "error", role: "alert" }, el(doc, "p", { class: "message" }, error.message));
  if (error.fields.length) {
    const list = el(doc, "ul", { class: "fields" });
    for (const f of error.fields) list.append(el(doc, "li", { "data-field": f.field }, `${f.field}: ${f.message}`));
    box.append(list);
  }
  if (error.id) box.append(el(doc, "p", { class: "error-id" }, `error id ${error.id}`));
  return box;
}

/** Side-by-side baseline and steered completions, or an inline error. */
export function renderComparison(outcome: SteerOutcome, doc: Document = document): HTMLElement {
  if (!outcome.ok) return renderError(doc, outcome.error);
  const r = outcome.response.report;
  const view = el(doc, "div", { class: "comparison" });
  const header = el(
    doc,
    "header",
    {},
    el(doc, "span", { class: "seed" }, `seed ${outcome.response.seed}`),
    el(doc, "span", { class: "layer" }, `layer ${r.vector.spec.layer}`),
    el(doc, "span", { class: "coefficient" }, `c = ${r.vector.spec.coefficient}`),
    el(doc, "span", { class: "keywords" }, `keywords: ${r.scores.keywords.join(", ")}`),
  );
  if (r.identical) header.append(el(doc, "span", { class: "badge identical" }, "identical output"));
  view.append(
    header,
    normStrip(doc, r.vector.norms),
    el(
      doc,
      "div",
      { class: "columns" },
      column(doc, "baseline", r.baseline, r.scores.baseline),
      column(doc, "steered", r.steered, r.scores.steered),
    ),
  );
  return view;
}

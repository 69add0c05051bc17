import { ApiClient, ApiError, Limiter } from "./api";
import { lineChart } from "./chart";
import type { ModelInfo, SteerRequest } from "./types";

export type SweepAxis = "coefficient" | "layer";

export interface SweepPoint {
  x: number;
  /** Steered related-word fraction, as reported; null when the request failed. */
  fraction: number | null;
  baseline: number | null;
  seed?: number;
  error?: ApiError;
}

export interface SweepOptions {
  client: ApiClient;
  model?: ModelInfo;
  onAdopt?: (draft: SteerRequest) => void;
  doc?: Document;
  concurrency?: number;
}

export interface SweepPanel {
  element: HTMLElement;
  done: Promise<SweepPoint[]>;
}

export function checkRange(axis: SweepAxis, values: number[], model?: ModelInfo): void {
  if (values.length === 0) throw new RangeError("empty sweep range");
  for (const v of values) {
    if (!Number.isFinite(v)) throw new RangeError(`${axis} value ${v} is not finite`);
    if (axis === "layer") {
      const n = model?.config.n_layers;
      if (!Number.isInteger(v) || v < 0 || (n !== undefined && v >= n)) {
        throw new RangeError(`layer ${v} out of range; valid layers are 0..${n === undefined ? "" : n - 1}`);
      }
    }
  }
}

export function pointDraft(draft: SteerRequest, axis: SweepAxis, x: number): SteerRequest {
  const next = JSON.parse(JSON.stringify(draft)) as SteerRequest;
  next[axis] = x;
  return next;
}

/**
 * One /v1/steer per grid value, at most `concurrency` (default 2) at a
 * time, plotted as related-word fraction against the axis.
 */
export function sweepPanel(draft: SteerRequest, axis: SweepAxis, values: number[], opts: SweepOptions): SweepPanel {
  checkRange(axis, values, opts.model);
  const doc = opts.doc ?? document;
  const element = doc.createElement("div");
  element.className = `sweep sweep-${axis}`;
  const status = doc.createElement("p");
  status.className = "status";
  element.append(status);

  const pool = new Limiter(opts.concurrency ?? 2);
  let finished = 0;
  status.textContent = `0 / ${values.length}`;

  const run = async (x: number): Promise<SweepPoint> => {
    try {
      const res = await pool.run(() => opts.client.steer(pointDraft(draft, axis, x)));
      const s = res.report.scores;
      return { x, fraction: s.steered.fraction, baseline: s.baseline.fraction, seed: res.seed };
    } catch (e) {
      const error = e instanceof ApiError ? e : new ApiError(0, "internal", String(e));
      return { x, fraction: null, baseline: null, error };
    } finally {
      status.textContent = `${++finished} / ${values.length}`;
    }
  };

  const done = Promise.all(values.map(run)).then((points) => {
    const reference = points.find((p) => p.baseline !== null)?.baseline ?? null;
    const failures = points.filter((p) => p.error);
    status.textContent = failures.length ? `${failures.length} of ${points.length} points failed` : `${points.length} points`;
    element.append(
      lineChart(
        doc,
        points.map((p) => ({ x: p.x, y: p.fraction, label: p.error?.message })),
        {
          reference,
          onClick: (p) => opts.onAdopt?.(pointDraft(draft, axis, p.x)),
        },
      ),
    );
    return points;
  });
  return { element, done };
}

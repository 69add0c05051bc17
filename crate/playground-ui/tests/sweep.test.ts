import { ApiClient } from "../src/api";
import { checkRange, sweepPanel } from "../src/sweep";
import type { Envelope, ModelInfo, SteerRequest } from "../src/types";
import { BASE, fixtures, fromSweep, mockServer, steerBody } from "./mock";

const model = (fixtures.model.body as Envelope<ModelInfo>).report;
const draft = fixtures.steerKeywords.request as SteerRequest;

function plotted(el: HTMLElement) {
  return [...el.querySelectorAll("circle.point")].map((c) => [Number(c.getAttribute("data-x")), Number(c.getAttribute("data-y"))]);
}

describe("sweepPanel", () => {
  it("plots exactly the recorded layer sweep", async () => {
    const server = mockServer(fromSweep("layer"));
    const panel = sweepPanel(draft, "layer", [0, 1, 2, 3], { client: new ApiClient(BASE, server.fetch), model });
    const points = await panel.done;
    const want = fixtures.sweepLayer.body.map((p) => [p.x, steerBody(p).report.scores.steered.fraction]);
    expect(plotted(panel.element)).toEqual(want);
    expect(points.map((p) => p.fraction)).toEqual(want.map((w) => w[1]));
    expect(server.requests.map((r) => (r.body as SteerRequest).layer)).toEqual([0, 1, 2, 3]);
    expect(server.peak).toBeLessThanOrEqual(2);
  });

  it("plots the coefficient sweep; the zero point equals the baseline", async () => {
    const server = mockServer(fromSweep("coefficient"));
    const panel = sweepPanel(draft, "coefficient", [0, 2, 4, 8, 16], { client: new ApiClient(BASE, server.fetch) });
    const points = await panel.done;
    const zero = points.find((p) => p.x === 0)!;
    expect(zero.fraction).toBe(zero.baseline);
    const want = fixtures.sweepCoefficient.body.map((p) => [p.x, steerBody(p).report.scores.steered.fraction]);
    expect(plotted(panel.element)).toEqual(want);
    const ref = panel.element.querySelector("line.reference");
    expect(ref).not.toBeNull();
  });

  it("uses at most two concurrent requests for a 12-layer sweep", async () => {
    const gpt2: ModelInfo = { ...model, config: { ...model.config, n_layers: 12, d_model: 768 } };
    const server = mockServer(() => fixtures.steerKeywords, 10);
    const panel = sweepPanel(draft, "layer", [...Array(12).keys()], { client: new ApiClient(BASE, server.fetch, 8), model: gpt2 });
    await panel.done;
    expect(panel.element.querySelectorAll("circle.point")).toHaveLength(12);
    expect(server.peak).toBe(2);
  });

  it("draws failed points as gaps", async () => {
    const layer = fromSweep("layer");
    const server = mockServer((req) => (req.layer === 2 ? fixtures.error400 : layer(req)));
    const panel = sweepPanel(draft, "layer", [0, 1, 2, 3], { client: new ApiClient(BASE, server.fetch), model });
    const points = await panel.done;
    expect(points[2].fraction).toBeNull();
    expect(points[2].error?.kind).toBe("validation");
    expect(panel.element.querySelectorAll("circle.point")).toHaveLength(3);
    expect(panel.element.querySelectorAll("circle.gap")).toHaveLength(1);
    // 0-1 joined, 3 stands alone
    expect(panel.element.querySelectorAll("polyline.series")).toHaveLength(1);
    expect(panel.element.querySelector(".status")?.textContent).toBe("1 of 4 points failed");
  });

  it("adopts a clicked point into the draft", async () => {
    const adopted: SteerRequest[] = [];
    const server = mockServer(fromSweep("layer"));
    const panel = sweepPanel(draft, "layer", [0, 1, 2, 3], {
      client: new ApiClient(BASE, server.fetch),
      model,
      onAdopt: (d) => adopted.push(d),
    });
    await panel.done;
    const dot = panel.element.querySelector('circle.point[data-x="1"]')!;
    dot.dispatchEvent(new MouseEvent("click"));
    expect(adopted).toHaveLength(1);
    expect(adopted[0]).toEqual({ ...draft, layer: 1 });
  });

  it("rejects ranges outside the model", () => {
    expect(() => checkRange("layer", [0, 4], model)).toThrow(/layer 4 out of range/);
    expect(() => checkRange("layer", [1.5], model)).toThrow(RangeError);
    expect(() => checkRange("coefficient", [NaN])).toThrow(RangeError);
    expect(() => checkRange("coefficient", [])).toThrow(/empty/);
    expect(() => checkRange("coefficient", [-10, 0, 10])).not.toThrow();
  });
});

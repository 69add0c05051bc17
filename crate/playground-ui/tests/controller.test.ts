import { ApiClient } from "../src/api";
import { SteerController } from "../src/controller";
import { SessionState } from "../src/session";
import type { SteerRequest } from "../src/types";
import { BASE, fixtures, mockServer } from "./mock";

describe("SteerController", () => {
  it("discards responses to superseded drafts", async () => {
    let calls = 0;
    const slowFirst = mockServer(() => fixtures.steerKeywords, 0);
    const fetch = slowFirst.fetch;
    const client = new ApiClient(BASE, async (input, init) => {
      const n = calls++;
      await new Promise((r) => setTimeout(r, n === 0 ? 40 : 1));
      return fetch(input, init);
    });
    const session = new SessionState();
    const c = new SteerController(client, session);
    const first = c.submit({ ...session.draft, coefficient: 1 });
    const second = c.submit({ ...session.draft, coefficient: 2 });
    const [a, b] = await Promise.all([first, second]);
    expect("stale" in a && a.stale).toBe(true);
    expect(b.ok).toBe(true);
    expect(session.history).toHaveLength(1);
    expect(session.history[0].request.coefficient).toBe(2);
  });

  it("keeps the draft on errors", async () => {
    const session = new SessionState(fixtures.error400.request as SteerRequest);
    const before = JSON.stringify(session.draft);
    const c = new SteerController(new ApiClient(BASE, mockServer(() => fixtures.error400).fetch), session);
    const out = await c.submit();
    expect(out.ok).toBe(false);
    expect("error" in out && out.error.fields.map((f) => f.field)).toEqual(["layer"]);
    expect(JSON.stringify(session.draft)).toBe(before);
    expect(session.history).toHaveLength(0);
  });
});

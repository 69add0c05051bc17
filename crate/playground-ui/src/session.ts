import type { Envelope, SteerReport, SteerRequest } from "./types";

export interface HistoryEntry {
  id: number;
  request: SteerRequest;
  /** Seed the server reports having used; replaying with it reproduces the text. */
  seed: number;
  response: Envelope<SteerReport>;
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

interface Persisted {
  prompt: string;
  draft: SteerRequest;
  history: HistoryEntry[];
  pinned: number[];
}

export const DEFAULT_DRAFT: SteerRequest = {
  prompt: "I went up to my friend and said",
  pair: { p_plus: " weddings", p_minus: " " },
  layer: 6,
  coefficient: 4,
  alignment: 1,
  n_completions: 3,
  params: { max_new_tokens: 40 },
};

export function storageKey(modelHash: string): string {
  return `actadd-playground:${modelHash}`;
}

function clone<T>(v: T): T {
  return JSON.parse(JSON.stringify(v)) as T;
}

/** Playground session: the draft being edited plus an append-only history. */
export class SessionState {
  draft: SteerRequest;
  private entries: HistoryEntry[] = [];
  private pins = new Set<number>();

  constructor(draft: SteerRequest = DEFAULT_DRAFT) {
    this.draft = clone(draft);
  }

  get prompt(): string {
    return this.draft.prompt;
  }

  set prompt(p: string) {
    this.draft = { ...this.draft, prompt: p };
  }

  get history(): readonly HistoryEntry[] {
    return Object.freeze([...this.entries]);
  }

  get pinned(): readonly HistoryEntry[] {
    return this.entries.filter((e) => this.pins.has(e.id));
  }

  record(request: SteerRequest, response: Envelope<SteerReport>): HistoryEntry {
    if (typeof response.seed !== "number") {
      throw new Error("steer response carries no seed");
    }
    const entry: HistoryEntry = {
      id: this.entries.length,
      request: clone(request),
      seed: response.seed,
      response: clone(response),
    };
    this.entries.push(Object.freeze(entry));
    return entry;
  }

  pin(id: number): void {
    if (!this.entries.some((e) => e.id === id)) throw new RangeError(`no history entry ${id}`);
    this.pins.add(id);
  }

  unpin(id: number): void {
    this.pins.delete(id);
  }

  /** The entry's request with the echoed seed filled in. */
  replayRequest(entry: HistoryEntry): SteerRequest {
    const req = clone(entry.request);
    req.params = { ...req.params, seed: entry.seed };
    return req;
  }

  save(storage: StorageLike, modelHash: string): void {
    const data: Persisted = {
      prompt: this.prompt,
      draft: this.draft,
      history: this.entries,
      pinned: [...this.pins],
    };
    storage.setItem(storageKey(modelHash), JSON.stringify(data));
  }

  static load(storage: StorageLike, modelHash: string): SessionState {
    const raw = storage.getItem(storageKey(modelHash));
    if (!raw) return new SessionState();
    try {
      const data = JSON.parse(raw) as Persisted;
      const s = new SessionState(data.draft);
      for (const e of data.history) s.entries.push(Object.freeze({ ...e, id: s.entries.length }));
      for (const id of data.pinned) if (id < s.entries.length) s.pins.add(id);
      return s;
    } catch {
      return new SessionState();
    }
  }
}

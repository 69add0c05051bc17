import type { Envelope, ErrorBody, FieldError, ModelInfo, SteerReport, SteerRequest } from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    message: string,
    readonly fields: FieldError[] = [],
    readonly id?: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Counting semaphore; `run` waits for a free slot. */
export class Limiter {
  private active = 0;
  private waiting: (() => void)[] = [];
  peak = 0;

  constructor(readonly limit: number) {}

  get inFlight(): number {
    return this.active;
  }

  async run<T>(task: () => Promise<T>): Promise<T> {
    if (this.active >= this.limit) {
      await new Promise<void>((resolve) => this.waiting.push(resolve));
    } else {
      this.active++;
    }
    this.peak = Math.max(this.peak, this.active);
    try {
      return await task();
    } finally {
      const next = this.waiting.shift();
      if (next) next();
      else this.active--;
    }
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export const MAX_IN_FLIGHT = 2;

export class ApiClient {
  readonly limiter: Limiter;

  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
    maxInFlight = MAX_IN_FLIGHT,
  ) {
    this.limiter = new Limiter(maxInFlight);
  }

  model(): Promise<Envelope<ModelInfo>> {
    return this.call("GET", "/v1/model");
  }

  steer(req: SteerRequest): Promise<Envelope<SteerReport>> {
    return this.call("POST", "/v1/steer", req);
  }

  private call<T>(method: string, path: string, body?: unknown): Promise<T> {
    return this.limiter.run(async () => {
      let res: Response;
      try {
        res = await this.fetchImpl(this.baseUrl.replace(/\/$/, "") + path, {
          method,
          headers: body === undefined ? undefined : { "content-type": "application/json" },
          body: body === undefined ? undefined : JSON.stringify(body),
        });
      } catch (e) {
        throw new ApiError(0, "network", `could not reach the server: ${(e as Error).message}`);
      }
      const text = await res.text();
      let json: unknown;
      try {
        json = JSON.parse(text);
      } catch {
        throw new ApiError(res.status, "internal", `unexpected response (${res.status}): ${text.slice(0, 200)}`);
      }
      if (!res.ok) {
        const err = (json as ErrorBody).error ?? { kind: "internal", message: text };
        throw new ApiError(res.status, err.kind, err.message, err.fields ?? [], err.id);
      }
      return json as T;
    });
  }
}

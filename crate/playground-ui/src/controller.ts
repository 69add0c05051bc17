import { ApiClient, ApiError } from "./api";
import type { SteerOutcome } from "./comparison";
import type { SessionState } from "./session";
import type { SteerRequest } from "./types";

export type SubmitResult = SteerOutcome | { ok: false; stale: true };

/**
 * Sends drafts to the server. Only the latest submission's response is
 * recorded; a response to a superseded draft comes back as `stale`.
 */
export class SteerController {
  private latest = 0;

  constructor(
    private readonly client: ApiClient,
    readonly session: SessionState,
  ) {}

  async submit(draft: SteerRequest = this.session.draft): Promise<SubmitResult> {
    const id = ++this.latest;
    const request = JSON.parse(JSON.stringify(draft)) as SteerRequest;
    try {
      const response = await this.client.steer(request);
      if (id !== this.latest) return { ok: false, stale: true };
      this.session.record(request, response);
      return { ok: true, response };
    } catch (e) {
      if (id !== this.latest) return { ok: false, stale: true };
      const error = e instanceof ApiError ? e : new ApiError(0, "internal", String(e));
      return { ok: false, error };
    }
  }
}

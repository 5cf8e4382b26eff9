// Thin fetch wrapper over the scene service; every method returns the parsed
// JSON body or throws ApiFailure carrying the server's reason.

import type {
  EditOp, GenerationResult, HealthPayload, SessionPayload,
} from "./types.js";

export class ApiFailure extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export interface FetchLike {
  (url: string, init?: RequestInit): Promise<Response>;
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await resp.json().catch(() => ({ error: "invalid JSON from server" }));
    if (!resp.ok) {
      throw new ApiFailure(resp.status, (payload as { error?: string }).error ?? `HTTP ${resp.status}`);
    }
    return payload as T;
  }

  health(): Promise<HealthPayload> {
    return this.call("GET", "/api/health");
  }

  async createSession(seed: number): Promise<string> {
    const body = await this.call<{ session_id: string }>("POST", "/api/sessions", { seed });
    return body.session_id;
  }

  getSession(id: string): Promise<SessionPayload> {
    return this.call("GET", `/api/sessions/${id}`);
  }

  synthesize(id: string, prompt: string, seed?: number): Promise<GenerationResult> {
    return this.call("POST", `/api/sessions/${id}/synthesize`,
      seed === undefined ? { prompt } : { prompt, seed });
  }

  edit(id: string, op: EditOp, prompt: string, targetId: string,
       seed?: number): Promise<GenerationResult> {
    const body: Record<string, unknown> = { op, prompt, target_id: targetId };
    if (seed !== undefined) body.seed = seed;
    return this.call("POST", `/api/sessions/${id}/edit`, body);
  }
}

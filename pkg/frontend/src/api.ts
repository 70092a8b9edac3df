import type { ApiErrorPayload, ChatTurnPayload, EfOutcomePayload, EfQueryBody } from "./types.js";

export type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

// Non-2xx responses surface as this error so callers can show the server's
// message (and its details payload, e.g. violation lists) inline.
export class ApiRequestError extends Error {
  readonly status: number;
  readonly payload: ApiErrorPayload | null;

  constructor(status: number, payload: ApiErrorPayload | null) {
    super(payload?.message ?? `request failed with HTTP ${status}`);
    this.status = status;
    this.payload = payload;
  }
}

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      payload = null;
    }
    if (!response.ok) {
      throw new ApiRequestError(response.status, payload as ApiErrorPayload | null);
    }
    return payload as T;
  }

  chat(sessionId: string | null, message: string): Promise<ChatTurnPayload> {
    return this.post<ChatTurnPayload>("/api/chat", {
      session_id: sessionId,
      message,
    });
  }

  efRecommend(body: EfQueryBody): Promise<EfOutcomePayload> {
    return this.post<EfOutcomePayload>("/api/ef/recommend", body);
  }
}

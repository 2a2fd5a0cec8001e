import type { ActionResponse, FeedbackResponse, HumanView, TurnView } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/** Thin typed wrapper around the session service.
 *
 * Every response body passes through `onPayload` before being returned, so
 * callers (and tests) can observe exactly what the server disclosed. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    public onPayload: (payload: unknown) => void = () => {},
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await res.json();
    this.onPayload(payload);
    if (!res.ok) {
      const detail = typeof payload?.detail === "string" ? payload.detail : res.statusText;
      throw new ApiError(res.status, detail);
    }
    return payload as T;
  }

  createSession(participantId: string, gameListId = "default"): Promise<HumanView> {
    return this.request("POST", "/sessions", {
      participant_id: participantId,
      game_list_id: gameListId,
    });
  }

  getState(sessionId: string): Promise<HumanView> {
    return this.request("GET", `/sessions/${sessionId}/state`);
  }

  getHistory(sessionId: string): Promise<{ history: TurnView[] }> {
    return this.request("GET", `/sessions/${sessionId}/history`);
  }

  submitAction(sessionId: string, action: string): Promise<ActionResponse> {
    return this.request("POST", `/sessions/${sessionId}/action`, { action });
  }

  submitFeedback(sessionId: string, answers: number[]): Promise<FeedbackResponse> {
    return this.request("POST", `/sessions/${sessionId}/feedback`, { answers });
  }

  /** Live updates: SSE where EventSource exists, otherwise a no-op (the UI
   * refreshes after each of its own actions anyway). */
  subscribe(sessionId: string, onEvent: (event: unknown) => void): () => void {
    if (typeof EventSource === "undefined") {
      return () => {};
    }
    const source = new EventSource(`${this.baseUrl}/sessions/${sessionId}/events`);
    source.onmessage = (msg) => onEvent(JSON.parse(msg.data));
    return () => source.close();
  }
}

/** Thin typed client for the annotation service HTTP API. */

export interface EditEvent {
  event_index: number;
  timestamp: number;
  position: number;
  deleted_len: number;
  inserted_text: string;
}

export interface TaskPayload {
  done: boolean;
  commit_id?: string;
  message_id?: string;
  diff?: string;
  summary?: string | null;
  generated_text?: string;
  help_text?: string;
  position?: number;
  total?: number;
  completed?: number;
}

export interface EventsAck {
  accepted_through: number;
}

export interface SubmitResult {
  node_id: string;
  commit_id: string;
  flags: string[];
  cursor: number;
}

export interface ConflictDetail {
  error: string;
  first_bad_index?: number;
  expected?: number;
  divergence?: number;
  active?: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: ConflictDetail | string,
    url: string
  ) {
    super(`${url} -> ${status}: ${typeof detail === "string" ? detail : detail.error}`);
    this.name = "ApiError";
  }

  get conflict(): ConflictDetail | null {
    return this.status === 409 && typeof this.detail !== "string" ? this.detail : null;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class AnnotClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    // fetch must be called unbound from any instance, hence the wrapper
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const url = this.base + path;
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(url, init);
    if (!resp.ok) {
      let detail: ConflictDetail | string;
      try {
        const parsed = (await resp.json()) as { detail?: ConflictDetail | string };
        detail = parsed.detail ?? `HTTP ${resp.status}`;
      } catch {
        detail = `HTTP ${resp.status}`;
      }
      throw new ApiError(resp.status, detail, url);
    }
    return (await resp.json()) as T;
  }

  createSession(annotatorId: string): Promise<{ session_id: string; task_count: number }> {
    return this.request("POST", "/sessions", { annotator_id: annotatorId });
  }

  task(sessionId: string): Promise<TaskPayload> {
    return this.request("GET", `/sessions/${sessionId}/task`);
  }

  sendEvents(sessionId: string, messageId: string, events: EditEvent[]): Promise<EventsAck> {
    return this.request("POST", `/sessions/${sessionId}/events`, {
      message_id: messageId,
      events,
    });
  }

  submit(sessionId: string, messageId: string, finalText: string): Promise<SubmitResult> {
    return this.request("POST", `/sessions/${sessionId}/submit`, {
      message_id: messageId,
      final_text: finalText,
    });
  }

  skip(sessionId: string): Promise<{ skipped: string; cursor: number }> {
    return this.request("POST", `/sessions/${sessionId}/skip`);
  }

  export(): Promise<{ corpus_jsonl: string; events_jsonl: string }> {
    return this.request("GET", "/export");
  }
}

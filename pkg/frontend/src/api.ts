import type {
  Answer,
  QueriesResponse,
  RuleRecord,
  SessionInfo,
  StateSnapshot,
  Transport,
} from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<never> {
  let code = "http_error";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (body?.error) {
      code = body.error.code;
      message = body.error.message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiRequestError(code, message, response.status);
}

/** Thin fetch client; every state transition goes through the server. */
export class HttpTransport implements Transport {
  constructor(private readonly baseUrl: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  getSession(sessionId: string): Promise<SessionInfo> {
    return this.getJson(`/sessions/${sessionId}`);
  }

  getQueries(sessionId: string): Promise<QueriesResponse> {
    return this.getJson(`/sessions/${sessionId}/queries`);
  }

  submitAnswer(sessionId: string, queryId: string, answer: Answer): Promise<StateSnapshot> {
    return this.postJson(`/sessions/${sessionId}/answers`, { query_id: queryId, answer });
  }

  getState(sessionId: string): Promise<StateSnapshot> {
    return this.getJson(`/sessions/${sessionId}/state`);
  }

  async getRules(sessionId: string): Promise<RuleRecord[]> {
    const body = await this.getJson<{ rules: RuleRecord[] }>(`/sessions/${sessionId}/rules`);
    return body.rules;
  }

  async exportRules(sessionId: string): Promise<Uint8Array> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/artifacts/rules.jsonl`);
    if (!response.ok) await parseError(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  async createSession(corpus: string, config: Record<string, unknown>): Promise<string> {
    const body = await this.postJson<{ session_id: string }>("/sessions", { corpus, config });
    return body.session_id;
  }

  async listCorpora(): Promise<Array<{ name: string; class_names: string[] }>> {
    const body = await this.getJson<{ corpora: Array<{ name: string; class_names: string[] }> }>(
      "/corpora",
    );
    return body.corpora;
  }
}

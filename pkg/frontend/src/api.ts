/**
 * Typed client for the audit session API.
 *
 * Every method maps to one endpoint and returns the response body as-is:
 * the console never recomputes a number the server already produced, so
 * the types here are the single place the wire contract is written down.
 */

export type SessionStatus = "running" | "stopped" | "exhausted";
export type Decision = "reject" | "confirm" | "continue";

export interface PopulationSummary {
  population_id: string;
  n: number;
  total_value: number;
}

export interface SessionRequest {
  population_id: string;
  epsilon: number;
  delta: number;
  strategy: string;
  rel_accuracy?: number;
  cs_family?: string;
  control_variates?: boolean;
  batch_size?: number;
  seed?: number;
  use_logical?: boolean;
}

export interface CreateSessionResponse {
  session_id: string;
  interval: [number, number];
}

/** One drawn-but-unanswered transaction. The server never includes the score. */
export interface PendingItem {
  index: number;
  id: string;
  reported_value: number;
  weight: number;
}

export interface SessionView {
  session_id: string;
  t: number;
  interval: [number, number];
  width: number;
  empty: boolean;
  status: SessionStatus;
  stopped_at: number | null;
  audited: { index: number; f: number }[];
  pending: PendingItem[] | null;
  config: Record<string, unknown>;
  population: { n: number; total_value: number };
  remaining_weight: number;
}

export interface DrawResponse {
  indices: number[];
  t: number;
}

export interface Observation {
  index: number;
  f: number;
}

export interface ObserveResponse {
  interval: [number, number];
  width: number;
  stopped: boolean;
  t: number;
  status: SessionStatus;
  stopped_at: number | null;
}

export interface TraceRow {
  t: number;
  lo: number;
  hi: number;
  width: number;
  empty: boolean;
  prob_lo: number;
  prob_hi: number;
  prob_empty: boolean;
  logical_lo: number;
  logical_hi: number;
}

export interface RemainingResponse {
  interval: [number, number];
  t: number;
}

export interface TestResponse {
  decision: Decision;
  t: number;
}

/**
 * Error raised for any non-2xx response. `kind` and `detail` carry the
 * server's error body verbatim so the UI can surface it unchanged.
 */
export class ApiError extends Error {
  readonly kind: string;
  readonly detail: string;
  readonly status: number;

  constructor(kind: string, detail: string, status: number) {
    super(`${kind}: ${detail}`);
    this.name = "ApiError";
    this.kind = kind;
    this.detail = detail;
    this.status = status;
  }
}

/** What the console needs from the server; ApiClient is the wire implementation. */
export interface AuditApi {
  uploadPopulation(csv: string, filename?: string): Promise<PopulationSummary>;
  createSession(request: SessionRequest): Promise<CreateSessionResponse>;
  getSession(sessionId: string): Promise<SessionView>;
  draw(sessionId: string): Promise<DrawResponse>;
  observe(sessionId: string, observations: Observation[]): Promise<ObserveResponse>;
  trace(sessionId: string): Promise<TraceRow[]>;
  remaining(sessionId: string): Promise<RemainingResponse>;
  testAssertion(sessionId: string, epsilon: number): Promise<TestResponse>;
}

async function raiseFor(response: Response): Promise<never> {
  let kind = "http";
  let detail = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as { error?: { kind?: string; detail?: string } };
    if (body.error) {
      kind = body.error.kind ?? kind;
      detail = body.error.detail ?? detail;
    }
  } catch {
    // Non-JSON body: keep the status-line fallback.
  }
  throw new ApiError(kind, detail, response.status);
}

export class ApiClient implements AuditApi {
  readonly baseUrl: string;

  /** @param baseUrl origin of the API server; "" means same-origin. */
  constructor(baseUrl = "") {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as T;
  }

  /**
   * Upload a population CSV. The multipart body is assembled by hand
   * because the page must run under whichever fetch the host provides,
   * and mixing one realm's FormData with another's fetch breaks.
   */
  async uploadPopulation(csv: string, filename = "population.csv"): Promise<PopulationSummary> {
    const boundary = "auditcs" + Math.random().toString(16).slice(2);
    const body = [
      `--${boundary}`,
      `Content-Disposition: form-data; name="file"; filename="${filename}"`,
      "Content-Type: text/csv",
      "",
      csv,
      `--${boundary}--`,
      "",
    ].join("\r\n");
    const response = await fetch(this.baseUrl + "/populations", {
      method: "POST",
      headers: { "content-type": `multipart/form-data; boundary=${boundary}` },
      body,
    });
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as PopulationSummary;
  }

  createSession(request: SessionRequest): Promise<CreateSessionResponse> {
    return this.request("POST", "/sessions", request);
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  draw(sessionId: string): Promise<DrawResponse> {
    return this.request("POST", `/sessions/${sessionId}/draw`);
  }

  observe(sessionId: string, observations: Observation[]): Promise<ObserveResponse> {
    return this.request("POST", `/sessions/${sessionId}/observe`, { observations });
  }

  async trace(sessionId: string): Promise<TraceRow[]> {
    const body = await this.request<{ trace: TraceRow[] }>("GET", `/sessions/${sessionId}/trace`);
    return body.trace;
  }

  remaining(sessionId: string): Promise<RemainingResponse> {
    return this.request("GET", `/sessions/${sessionId}/remaining`);
  }

  testAssertion(sessionId: string, epsilon: number): Promise<TestResponse> {
    return this.request("GET", `/sessions/${sessionId}/test?epsilon=${encodeURIComponent(epsilon)}`);
  }
}

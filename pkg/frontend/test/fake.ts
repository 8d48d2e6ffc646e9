/**
 * In-memory stand-in for the audit server with a fixed three-step script.
 *
 * Every number it returns is canned and deliberately arbitrary: the tests
 * assert the console displays these exact values, which proves the page
 * renders server output instead of computing statistics of its own.
 */

import {
  ApiError,
  type AuditApi,
  type CreateSessionResponse,
  type DrawResponse,
  type Observation,
  type ObserveResponse,
  type PendingItem,
  type PopulationSummary,
  type RemainingResponse,
  type SessionRequest,
  type SessionStatus,
  type SessionView,
  type TestResponse,
  type TraceRow,
} from "../src/api.js";

interface ScriptRow {
  lo: number;
  hi: number;
  width: number;
}

const ITEMS: PendingItem[] = [
  { index: 0, id: "inv-001", reported_value: 400, weight: 0.4 },
  { index: 1, id: "inv-002", reported_value: 300, weight: 0.3 },
  { index: 2, id: "inv-003", reported_value: 200, weight: 0.2 },
  { index: 3, id: "inv-004", reported_value: 100, weight: 0.1 },
];

export class FakeApi implements AuditApi {
  uploadCalls = 0;
  drawCalls = 0;
  observeCalls = 0;
  lastSessionRequest: SessionRequest | null = null;
  /** When set, the next draw or observe throws this instead of acting. */
  failNext: ApiError | null = null;

  readonly epsilon = 0.15;
  readonly n = ITEMS.length;
  readonly script: ScriptRow[] = [
    { lo: 0.10103, hi: 0.90107, width: 0.80004 },
    { lo: 0.21211, hi: 0.61213, width: 0.40002 },
    { lo: 0.30719, hi: 0.40723, width: 0.10004 },
  ];

  private t = 0;
  private pending: PendingItem[] | null = null;
  private stoppedAt: number | null = null;

  private takeFailure(): void {
    if (this.failNext !== null) {
      const err = this.failNext;
      this.failNext = null;
      throw err;
    }
  }

  private status(): SessionStatus {
    return this.stoppedAt === null ? "running" : "stopped";
  }

  async uploadPopulation(_csv: string, _filename?: string): Promise<PopulationSummary> {
    this.uploadCalls += 1;
    return { population_id: "pop-fake", n: this.n, total_value: 987.65 };
  }

  async createSession(request: SessionRequest): Promise<CreateSessionResponse> {
    this.lastSessionRequest = request;
    return { session_id: "sess-fake", interval: [0, 1] };
  }

  async getSession(_sessionId: string): Promise<SessionView> {
    const last = this.t > 0 ? this.script[this.t - 1]! : null;
    return {
      session_id: "sess-fake",
      t: this.t,
      interval: last === null ? [0, 1] : [last.lo, last.hi],
      width: last === null ? 1 : last.width,
      empty: false,
      status: this.status(),
      stopped_at: this.stoppedAt,
      audited: ITEMS.slice(0, this.t).map((item) => ({ index: item.index, f: 0.1 })),
      pending: this.pending,
      config: { epsilon: this.epsilon, delta: 0.05, strategy: "propM" },
      population: { n: this.n, total_value: 987.65 },
      remaining_weight: 1 - this.t / this.n,
    };
  }

  async draw(_sessionId: string): Promise<DrawResponse> {
    this.takeFailure();
    this.drawCalls += 1;
    if (this.pending !== null) {
      throw new ApiError("sequencing", "a draw is already pending", 409);
    }
    this.pending = [ITEMS[this.t]!];
    return { indices: [this.t], t: this.t + 1 };
  }

  async observe(_sessionId: string, observations: Observation[]): Promise<ObserveResponse> {
    this.takeFailure();
    this.observeCalls += 1;
    if (this.pending === null) {
      throw new ApiError("sequencing", "no draw is pending; call draw first", 409);
    }
    for (const obs of observations) {
      if (obs.f < 0 || obs.f > 1) {
        throw new ApiError("range", `f for index ${obs.index} must lie in [0, 1]`, 422);
      }
    }
    const row = this.script[this.t]!;
    this.t += 1;
    this.pending = null;
    if (this.stoppedAt === null && row.width <= this.epsilon) this.stoppedAt = this.t;
    return {
      interval: [row.lo, row.hi],
      width: row.width,
      stopped: this.stoppedAt !== null,
      t: this.t,
      status: this.status(),
      stopped_at: this.stoppedAt,
    };
  }

  async trace(_sessionId: string): Promise<TraceRow[]> {
    return this.script.slice(0, this.t).map((row, i) => ({
      t: i + 1,
      lo: row.lo,
      hi: row.hi,
      width: row.width,
      empty: false,
      prob_lo: row.lo - 0.001,
      prob_hi: row.hi + 0.001,
      prob_empty: false,
      logical_lo: 0,
      logical_hi: 1,
    }));
  }

  async remaining(_sessionId: string): Promise<RemainingResponse> {
    return { interval: [0.0131 * this.t, 0.5 + 0.0262 * this.t], t: this.t };
  }

  async testAssertion(_sessionId: string, epsilon: number): Promise<TestResponse> {
    if (!(epsilon > 0 && epsilon < 1)) {
      throw new ApiError("validation", "test threshold must lie in (0, 1)", 400);
    }
    return { decision: this.t >= 3 ? "reject" : "continue", t: this.t };
  }
}

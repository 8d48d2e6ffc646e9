/**
 * View model for a single audit session.
 *
 * Holds everything the page renders and funnels every state change
 * through the API: the console does no statistical work of its own, it
 * only displays numbers the server returned. One session per instance,
 * one request in flight at a time (optimistic updates are deliberately
 * absent, each action round-trips before the UI moves).
 */

import {
  ApiError,
  type AuditApi,
  type Decision,
  type PendingItem,
  type PopulationSummary,
  type SessionRequest,
  type SessionView,
  type TraceRow,
} from "./api.js";
import { parseFraction } from "./format.js";

export type Phase = "setup" | "session";

export interface AlertState {
  kind: string;
  detail: string;
}

export interface DecisionState {
  epsilon: number;
  decision: Decision;
}

export interface ConsoleState {
  phase: Phase;
  population: PopulationSummary | null;
  session: SessionView | null;
  /** Per-step trace; drives the chart. Length always equals session.t. */
  series: TraceRow[];
  remaining: [number, number] | null;
  decision: DecisionState | null;
  busy: boolean;
  alert: AlertState | null;
  /** Inline message for the observation form; set means submission was blocked. */
  fieldError: string | null;
}

export type ConfigInput = Omit<SessionRequest, "population_id">;

const INITIAL_STATE: ConsoleState = {
  phase: "setup",
  population: null,
  session: null,
  series: [],
  remaining: null,
  decision: null,
  busy: false,
  alert: null,
  fieldError: null,
};

export type Banner =
  | { kind: "none" }
  | { kind: "running"; t: number; width: number }
  | { kind: "complete"; tau: number; reachedTarget: boolean };

/** Derive the status banner from the latest server view. */
export function bannerFor(session: SessionView | null): Banner {
  if (session === null) return { kind: "none" };
  if (session.status === "running") {
    return { kind: "running", t: session.t, width: session.width };
  }
  return {
    kind: "complete",
    tau: session.stopped_at ?? session.t,
    reachedTarget: session.stopped_at !== null,
  };
}

function toAlert(err: unknown): AlertState {
  if (err instanceof ApiError) return { kind: err.kind, detail: err.detail };
  return { kind: "network", detail: err instanceof Error ? err.message : String(err) };
}

export class ConsoleController {
  private readonly client: AuditApi;
  private current: ConsoleState = INITIAL_STATE;
  private readonly listeners = new Set<(state: ConsoleState) => void>();
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(client: AuditApi) {
    this.client = client;
  }

  get state(): Readonly<ConsoleState> {
    return this.current;
  }

  subscribe(listener: (state: ConsoleState) => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private patch(changes: Partial<ConsoleState>): void {
    this.current = { ...this.current, ...changes };
    for (const listener of this.listeners) listener(this.current);
  }

  /** Run one API action; busy gates overlap, failures become the alert. */
  private async run(action: () => Promise<Partial<ConsoleState>>): Promise<boolean> {
    if (this.current.busy) return false;
    this.patch({ busy: true, alert: null });
    try {
      const changes = await action();
      this.patch({ ...changes, busy: false });
      return true;
    } catch (err) {
      this.patch({ alert: toAlert(err), busy: false });
      return false;
    }
  }

  // -- derived accessors ----------------------------------------------------

  pendingItems(): PendingItem[] {
    return this.current.session?.pending ?? [];
  }

  hasPending(): boolean {
    return this.pendingItems().length > 0;
  }

  /** The draw control stays off while a draw is unanswered or the audit is over. */
  canDraw(): boolean {
    const session = this.current.session;
    if (session === null || this.current.busy) return false;
    return session.status === "running" && !this.hasPending();
  }

  canObserve(): boolean {
    return this.current.session !== null && !this.current.busy && this.hasPending();
  }

  banner(): Banner {
    return bannerFor(this.current.session);
  }

  // -- actions ----------------------------------------------------------------

  uploadPopulation(csv: string, filename = "population.csv"): Promise<boolean> {
    return this.run(async () => {
      const population = await this.client.uploadPopulation(csv, filename);
      return { population };
    });
  }

  createSession(config: ConfigInput): Promise<boolean> {
    const population = this.current.population;
    if (population === null) {
      this.patch({ alert: { kind: "validation", detail: "upload a population first" } });
      return Promise.resolve(false);
    }
    return this.run(async () => {
      const created = await this.client.createSession({
        ...config,
        population_id: population.population_id,
      });
      const refreshed = await this.fetchAll(created.session_id);
      return { ...refreshed, phase: "session", decision: null, fieldError: null };
    });
  }

  drawNext(): Promise<boolean> {
    const session = this.current.session;
    if (session === null || !this.canDraw()) return Promise.resolve(false);
    return this.run(async () => {
      await this.client.draw(session.session_id);
      // Re-fetch for the card: the draw response has indices only, the
      // session view carries their reported values and weights.
      return { session: await this.client.getSession(session.session_id) };
    });
  }

  /**
   * Validate and submit the auditor's observed fractions, keyed by
   * population index. Any out-of-range or non-numeric entry blocks the
   * whole submission client-side; no request is sent.
   */
  submitObservations(raw: ReadonlyMap<number, string>): Promise<boolean> {
    const session = this.current.session;
    if (session === null || !this.hasPending()) return Promise.resolve(false);
    const observations: { index: number; f: number }[] = [];
    for (const item of this.pendingItems()) {
      const value = parseFraction(raw.get(item.index) ?? "");
      if (value === null) {
        this.patch({
          fieldError: `observed fraction for ${item.id} must be a number in [0, 1]`,
        });
        return Promise.resolve(false);
      }
      observations.push({ index: item.index, f: value });
    }
    this.patch({ fieldError: null });
    return this.run(async () => {
      await this.client.observe(session.session_id, observations);
      return this.fetchAll(session.session_id);
    });
  }

  /** Poll the server for the current state (no-op before a session exists). */
  refresh(): Promise<boolean> {
    const session = this.current.session;
    if (session === null) return Promise.resolve(false);
    return this.run(() => this.fetchAll(session.session_id));
  }

  checkAssertion(epsilon: number): Promise<boolean> {
    const session = this.current.session;
    if (session === null) return Promise.resolve(false);
    return this.run(async () => {
      const result = await this.client.testAssertion(session.session_id, epsilon);
      return { decision: { epsilon, decision: result.decision } };
    });
  }

  dismissAlert(): void {
    if (this.current.alert !== null) this.patch({ alert: null });
  }

  clearFieldError(): void {
    if (this.current.fieldError !== null) this.patch({ fieldError: null });
  }

  startPolling(intervalMs: number): void {
    this.stopPolling();
    this.pollTimer = setInterval(() => {
      if (!this.current.busy && this.current.session !== null) void this.refresh();
    }, intervalMs);
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  private async fetchAll(sessionId: string): Promise<Partial<ConsoleState>> {
    const session = await this.client.getSession(sessionId);
    const series = await this.client.trace(sessionId);
    const remaining = await this.client.remaining(sessionId);
    return { session, series, remaining: remaining.interval };
  }
}

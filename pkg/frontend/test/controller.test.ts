import { beforeEach, describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { ConsoleController, bannerFor } from "../src/controller.js";
import { FakeApi } from "./fake.js";

const CSV = "id,reported_value,score\na,1,0\n";

describe("ConsoleController", () => {
  let api: FakeApi;
  let controller: ConsoleController;

  beforeEach(() => {
    api = new FakeApi();
    controller = new ConsoleController(api);
  });

  async function startSession(): Promise<void> {
    await controller.uploadPopulation(CSV);
    await controller.createSession({ epsilon: 0.15, delta: 0.05, strategy: "propM" });
  }

  async function stepOnce(f = "0.1"): Promise<void> {
    await controller.drawNext();
    const index = controller.pendingItems()[0]!.index;
    await controller.submitObservations(new Map([[index, f]]));
  }

  it("moves to the session phase with an empty chart at t = 0", async () => {
    await startSession();
    expect(controller.state.phase).toBe("session");
    expect(controller.state.session?.t).toBe(0);
    expect(controller.state.series).toHaveLength(0);
    expect(api.lastSessionRequest?.population_id).toBe("pop-fake");
  });

  it("refuses to create a session before a population is uploaded", async () => {
    const ok = await controller.createSession({ epsilon: 0.1, delta: 0.05, strategy: "propM" });
    expect(ok).toBe(false);
    expect(controller.state.alert?.kind).toBe("validation");
  });

  it("disables draw while a draw is pending and re-enables it after observe", async () => {
    await startSession();
    expect(controller.canDraw()).toBe(true);

    await controller.drawNext();
    expect(controller.hasPending()).toBe(true);
    expect(controller.canDraw()).toBe(false);

    // The guard refuses a second draw outright: no request reaches the API.
    const again = await controller.drawNext();
    expect(again).toBe(false);
    expect(api.drawCalls).toBe(1);

    const index = controller.pendingItems()[0]!.index;
    await controller.submitObservations(new Map([[index, "0.2"]]));
    expect(controller.hasPending()).toBe(false);
    expect(controller.canDraw()).toBe(true);
  });

  it("blocks out-of-range fractions client-side without sending a request", async () => {
    await startSession();
    await controller.drawNext();
    const index = controller.pendingItems()[0]!.index;

    for (const bad of ["1.5", "-0.2", "2", "", "abc"]) {
      const ok = await controller.submitObservations(new Map([[index, bad]]));
      expect(ok).toBe(false);
      expect(controller.state.fieldError).toMatch(/must be a number in \[0, 1\]/);
    }
    expect(api.observeCalls).toBe(0);

    expect(await controller.submitObservations(new Map([[index, "0.35"]]))).toBe(true);
    expect(api.observeCalls).toBe(1);
    expect(controller.state.fieldError).toBeNull();
  });

  it("shows every number exactly as the server sent it", async () => {
    await startSession();
    await stepOnce();

    const row = api.script[0]!;
    expect(controller.state.session?.interval).toEqual([row.lo, row.hi]);
    expect(controller.state.session?.width).toBe(row.width);
    expect(controller.state.series[0]?.width).toBe(row.width);
    expect(controller.state.remaining).toEqual([0.0131 * 1, 0.5 + 0.0262 * 1]);
  });

  it("keeps the chart series length equal to t at every step", async () => {
    await startSession();
    for (let step = 1; step <= 3; step += 1) {
      await stepOnce();
      expect(controller.state.series).toHaveLength(controller.state.session!.t);
      expect(controller.state.session!.t).toBe(step);
    }
  });

  it("reports completion once the width target is met", async () => {
    await startSession();
    await stepOnce();
    await stepOnce();
    expect(controller.banner()).toEqual({ kind: "running", t: 2, width: api.script[1]!.width });

    await stepOnce();
    expect(controller.banner()).toEqual({ kind: "complete", tau: 3, reachedTarget: true });
    expect(controller.canDraw()).toBe(false);
  });

  it("surfaces API error bodies verbatim and dismisses them", async () => {
    await startSession();
    api.failNext = new ApiError("sequencing", "no draw is pending; call draw first", 409);

    const ok = await controller.drawNext();
    expect(ok).toBe(false);
    expect(controller.state.alert).toEqual({
      kind: "sequencing",
      detail: "no draw is pending; call draw first",
    });

    controller.dismissAlert();
    expect(controller.state.alert).toBeNull();
  });

  it("clears the alert when the next action succeeds", async () => {
    await startSession();
    api.failNext = new ApiError("invariant", "boom", 500);
    await controller.drawNext();
    expect(controller.state.alert?.kind).toBe("invariant");

    await controller.drawNext();
    expect(controller.state.alert).toBeNull();
    expect(controller.hasPending()).toBe(true);
  });

  it("runs the assertion check through the server", async () => {
    await startSession();
    await controller.checkAssertion(0.25);
    expect(controller.state.decision).toEqual({ epsilon: 0.25, decision: "continue" });

    await stepOnce();
    await stepOnce();
    await stepOnce();
    await controller.checkAssertion(0.25);
    expect(controller.state.decision).toEqual({ epsilon: 0.25, decision: "reject" });
  });

  it("exposes the pending card without any score field", async () => {
    await startSession();
    await controller.drawNext();
    const item = controller.pendingItems()[0]!;
    expect(Object.keys(item).sort()).toEqual(["id", "index", "reported_value", "weight"]);
  });
});

describe("bannerFor", () => {
  const base = {
    session_id: "s",
    interval: [0.1, 0.3] as [number, number],
    width: 0.2,
    empty: false,
    audited: [],
    pending: null,
    config: {},
    population: { n: 10, total_value: 1 },
    remaining_weight: 0.5,
  };

  it("maps a running session to the progress banner", () => {
    const banner = bannerFor({ ...base, t: 4, status: "running", stopped_at: null });
    expect(banner).toEqual({ kind: "running", t: 4, width: 0.2 });
  });

  it("uses the stopping time once stopped", () => {
    const banner = bannerFor({ ...base, t: 6, status: "stopped", stopped_at: 5 });
    expect(banner).toEqual({ kind: "complete", tau: 5, reachedTarget: true });
  });

  it("marks exhaustion without a stop as not reaching the target", () => {
    const banner = bannerFor({ ...base, t: 10, status: "exhausted", stopped_at: null });
    expect(banner).toEqual({ kind: "complete", tau: 10, reachedTarget: false });
  });

  it("is empty before a session exists", () => {
    expect(bannerFor(null)).toEqual({ kind: "none" });
  });
});

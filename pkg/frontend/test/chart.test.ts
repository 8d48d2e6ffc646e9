import { describe, expect, it } from "vitest";

import { widthSeriesPoints, type ChartGeometry } from "../src/chart.js";

const GEOM: ChartGeometry = { width: 120, height: 60, pad: 10 };

function points(raw: string): [number, number][] {
  if (raw === "") return [];
  return raw.split(" ").map((pair) => {
    const [x, y] = pair.split(",");
    return [Number(x), Number(y)];
  });
}

describe("widthSeriesPoints", () => {
  it("returns one point per trace row", () => {
    const rows = [
      { t: 1, width: 1.0 },
      { t: 2, width: 0.5 },
      { t: 3, width: 0.25 },
    ];
    expect(points(widthSeriesPoints(rows, "linear", GEOM))).toHaveLength(3);
  });

  it("is empty for an empty series", () => {
    expect(widthSeriesPoints([], "linear", GEOM)).toBe("");
  });

  it("maps the largest width to the top and the smallest to the bottom", () => {
    const rows = [
      { t: 1, width: 1.0 },
      { t: 2, width: 0.0 },
    ];
    const [first, second] = points(widthSeriesPoints(rows, "linear", GEOM));
    expect(first).toEqual([10, 10]);
    expect(second).toEqual([110, 50]);
  });

  it("spaces steps linearly in t", () => {
    const rows = [
      { t: 1, width: 3 },
      { t: 2, width: 2 },
      { t: 3, width: 1 },
    ];
    const xs = points(widthSeriesPoints(rows, "linear", GEOM)).map(([x]) => x);
    expect(xs).toEqual([10, 60, 110]);
  });

  it("log scale separates decades evenly", () => {
    const rows = [
      { t: 1, width: 1.0 },
      { t: 2, width: 0.1 },
      { t: 3, width: 0.01 },
    ];
    const ys = points(widthSeriesPoints(rows, "log", GEOM)).map(([, y]) => y);
    expect(ys[1]! - ys[0]!).toBeCloseTo(ys[2]! - ys[1]!, 6);
  });

  it("log scale clamps zero widths instead of diverging", () => {
    const rows = [
      { t: 1, width: 0.5 },
      { t: 2, width: 0.05 },
      { t: 3, width: 0.0 },
    ];
    for (const [x, y] of points(widthSeriesPoints(rows, "log", GEOM))) {
      expect(Number.isFinite(x)).toBe(true);
      expect(Number.isFinite(y)).toBe(true);
    }
    // The clamp floors zero at the smallest positive width, so the last
    // two points share a y coordinate.
    const ys = points(widthSeriesPoints(rows, "log", GEOM)).map(([, y]) => y);
    expect(ys[2]).toBe(ys[1]);
  });

  it("handles a single-step series without dividing by zero", () => {
    const raw = widthSeriesPoints([{ t: 1, width: 0.8 }], "linear", GEOM);
    const [[x, y]] = points(raw) as [[number, number]];
    expect(Number.isFinite(x)).toBe(true);
    expect(Number.isFinite(y)).toBe(true);
  });
});

/**
 * Width-vs-step chart. The geometry is computed as pure data (testable
 * without a DOM) and painted into an inline SVG. A log-scale toggle is
 * offered because early widths dwarf late ones by orders of magnitude.
 */

import type { TraceRow } from "./api.js";

export type ChartScale = "linear" | "log";

export interface ChartGeometry {
  width: number;
  height: number;
  pad: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = { width: 560, height: 180, pad: 10 };

/**
 * Map trace rows to SVG polyline points ("x,y x,y ...").
 *
 * On the log scale, zero widths (the interval collapses once the whole
 * population is audited) are clamped to the smallest positive width in
 * the series so the polyline stays finite.
 */
export function widthSeriesPoints(
  rows: readonly { t: number; width: number }[],
  scale: ChartScale,
  geom: ChartGeometry = DEFAULT_GEOMETRY,
): string {
  if (rows.length === 0) return "";
  const innerW = geom.width - 2 * geom.pad;
  const innerH = geom.height - 2 * geom.pad;
  const maxT = Math.max(rows[rows.length - 1]!.t, 2);

  let values: number[];
  if (scale === "log") {
    const positive = rows.map((r) => r.width).filter((w) => w > 0);
    const floor = positive.length > 0 ? Math.min(...positive) : 1;
    values = rows.map((r) => Math.log10(Math.max(r.width, floor)));
  } else {
    values = rows.map((r) => r.width);
  }
  const top = Math.max(...values);
  const bottom = Math.min(...values);
  const span = top - bottom || 1;

  return rows
    .map((row, i) => {
      const x = geom.pad + ((row.t - 1) / (maxT - 1)) * innerW;
      const y = geom.pad + ((top - values[i]!) / span) * innerH;
      return `${round2(x)},${round2(y)}`;
    })
    .join(" ");
}

function round2(x: number): number {
  return Math.round(x * 100) / 100;
}

const SVG_NS = "http://www.w3.org/2000/svg";

/** Repaint the chart SVG in place from the current trace. */
export function renderChart(
  svg: SVGSVGElement,
  rows: readonly TraceRow[],
  scale: ChartScale,
  geom: ChartGeometry = DEFAULT_GEOMETRY,
): void {
  svg.setAttribute("viewBox", `0 0 ${geom.width} ${geom.height}`);
  while (svg.firstChild) svg.removeChild(svg.firstChild);

  const frame = svg.ownerDocument.createElementNS(SVG_NS, "rect");
  frame.setAttribute("x", String(geom.pad));
  frame.setAttribute("y", String(geom.pad));
  frame.setAttribute("width", String(geom.width - 2 * geom.pad));
  frame.setAttribute("height", String(geom.height - 2 * geom.pad));
  frame.setAttribute("class", "chart-frame");
  svg.appendChild(frame);

  const points = widthSeriesPoints(rows, scale, geom);
  if (points !== "") {
    const line = svg.ownerDocument.createElementNS(SVG_NS, "polyline");
    line.setAttribute("points", points);
    line.setAttribute("class", "chart-line");
    svg.appendChild(line);
  }
}

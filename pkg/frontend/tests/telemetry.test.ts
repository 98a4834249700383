import { describe, expect, it } from "vitest";

import { TelemetrySeries } from "../src/telemetry.js";
import { fitViewport, sourceColor, worldToCanvas } from "../src/render.js";

describe("telemetry series", () => {
  it("appends and trims to the rolling window", () => {
    const series = new TelemetrySeries(10_000);
    for (let t = 0; t <= 20_000; t += 1000) {
      series.append(t, 0.5, 0.5);
    }
    expect(series.points[0].t_ms).toBeGreaterThanOrEqual(10_000);
    expect(series.latest()?.t_ms).toBe(20_000);
  });

  it("tracks demo segments for shading", () => {
    const series = new TelemetrySeries(60_000);
    series.startSegment(1000);
    series.endSegment(3000);
    series.startSegment(5000);
    series.endSegment(8000);
    expect(series.shadedRanges(10_000)).toEqual([
      [1000, 3000],
      [5000, 8000],
    ]);
  });

  it("clamps an open segment to now", () => {
    const series = new TelemetrySeries(60_000);
    series.startSegment(2000);
    expect(series.shadedRanges(4000)).toEqual([[2000, 4000]]);
    expect(series.openSegment()).not.toBeNull();
  });

  it("ignores nested segment starts", () => {
    const series = new TelemetrySeries(60_000);
    series.startSegment(100);
    series.startSegment(200);
    series.endSegment(300);
    expect(series.segments).toHaveLength(1);
  });

  it("handles an empty series without crashing", () => {
    const series = new TelemetrySeries();
    expect(series.latest()).toBeNull();
    expect(series.shadedRanges(1000)).toEqual([]);
  });
});

describe("render helpers", () => {
  const scene = {
    bounds: [40, 30] as [number, number],
    obstacles: [],
    points_of_interest: [],
    tick_ms: 33,
  };

  it("fits the viewport preserving aspect", () => {
    const view = fitViewport(scene, 800, 600);
    expect(view.scale).toBe(20);
  });

  it("flips world y into canvas y", () => {
    const view = fitViewport(scene, 800, 600);
    expect(worldToCanvas(scene, view, 0, 0)).toEqual([0, 600]);
    expect(worldToCanvas(scene, view, 40, 30)).toEqual([800, 0]);
  });

  it("distinguishes fallback badges from ensemble badges", () => {
    expect(sourceColor("fallback")).not.toBe(sourceColor("ensemble:0"));
    expect(sourceColor("human")).not.toBe(sourceColor("ensemble:0"));
  });
});

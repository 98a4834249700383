/**
 * Canvas drawing: top-down arena plus the telemetry strip.
 *
 * World coordinates have y up; the canvas has y down, so everything flips
 * through worldToCanvas. Pure geometry helpers are exported for tests;
 * the draw functions only touch the 2D context.
 */

import { StateRecord, Scene } from "./protocol.js";
import { TelemetrySeries } from "./telemetry.js";

export interface Viewport {
  width: number;
  height: number;
  scale: number;
}

export function fitViewport(scene: Scene, width: number, height: number): Viewport {
  const [w, h] = scene.bounds;
  return { width, height, scale: Math.min(width / w, height / h) };
}

export function worldToCanvas(
  scene: Scene,
  view: Viewport,
  x: number,
  y: number,
): [number, number] {
  return [x * view.scale, view.height - y * view.scale];
}

export function sourceColor(source: string | undefined): string {
  if (source === undefined) return "#888888";
  if (source === "fallback") return "#e0662e"; // fallback rules: orange badge
  if (source === "human") return "#3fa7dd";
  return "#58c470"; // ensemble:N
}

export function drawArena(
  ctx: CanvasRenderingContext2D,
  scene: Scene,
  frame: StateRecord,
  view: Viewport,
): void {
  ctx.clearRect(0, 0, view.width, view.height);
  ctx.fillStyle = "#141a1f";
  ctx.fillRect(0, 0, view.width, view.height);

  ctx.fillStyle = "#2c3a45";
  for (const [x0, y0, x1, y1] of scene.obstacles) {
    const [cx, cy] = worldToCanvas(scene, view, x0, y1);
    ctx.fillRect(cx, cy, (x1 - x0) * view.scale, (y1 - y0) * view.scale);
  }

  scene.points_of_interest.forEach(([px, py], i) => {
    const [cx, cy] = worldToCanvas(scene, view, px, py);
    ctx.beginPath();
    ctx.arc(cx, cy, 5, 0, 2 * Math.PI);
    ctx.fillStyle = frame.collected.includes(i) ? "#3a4a3a" : "#d9c24a";
    ctx.fill();
  });

  for (const [ax, ay] of frame.adversaries) {
    const [cx, cy] = worldToCanvas(scene, view, ax, ay);
    ctx.beginPath();
    ctx.arc(cx, cy, 6, 0, 2 * Math.PI);
    ctx.fillStyle = "#c94f4f";
    ctx.fill();
  }

  // agent: position from features[0:2], heading from features[4]
  const [x, y, , , heading] = frame.continuous;
  const [cx, cy] = worldToCanvas(scene, view, x, y);
  const blocked = frame.categorical[0] === 1;
  ctx.beginPath();
  ctx.arc(cx, cy, 7, 0, 2 * Math.PI);
  ctx.fillStyle = sourceColor(frame.source);
  ctx.fill();
  if (blocked) {
    ctx.strokeStyle = "#ff3b3b";
    ctx.lineWidth = 3;
    ctx.stroke();
  }
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(cx + 12 * Math.cos(heading), cy - 12 * Math.sin(heading));
  ctx.strokeStyle = "#e8e8e8";
  ctx.lineWidth = 2;
  ctx.stroke();

  if (frame.demo) {
    ctx.fillStyle = "#3fa7dd";
    ctx.font = "12px monospace";
    ctx.fillText("RECORDING DEMO", 10, 16);
  }
}

export function drawTelemetry(
  ctx: CanvasRenderingContext2D,
  series: TelemetrySeries,
  now_ms: number,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10151a";
  ctx.fillRect(0, 0, width, height);
  const lo = now_ms - series.windowMs;
  const xOf = (t: number) => ((t - lo) / series.windowMs) * width;
  const yOf = (v: number) => height - v * (height - 8) - 4;

  ctx.fillStyle = "rgba(63, 167, 221, 0.18)"; // demo segments shaded
  for (const [a, b] of series.shadedRanges(now_ms)) {
    ctx.fillRect(xOf(a), 0, Math.max(1, xOf(b) - xOf(a)), height);
  }

  const trace = (key: "competence" | "confidence", color: string) => {
    ctx.beginPath();
    series.points.forEach((p, i) => {
      const x = xOf(p.t_ms);
      const y = yOf(p[key]);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.stroke();
  };
  trace("competence", "#58c470");
  trace("confidence", "#d9c24a");
}

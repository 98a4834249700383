/**
 * Rolling competence/confidence series with demo-segment shading.
 *
 * Pure data: the canvas chart reads from this, tests drive it directly.
 */

export interface TelemetryPoint {
  t_ms: number;
  competence: number;
  confidence: number;
}

export interface Segment {
  start_ms: number;
  end_ms: number | null; // null while the segment is still recording
}

export class TelemetrySeries {
  readonly windowMs: number;
  points: TelemetryPoint[] = [];
  segments: Segment[] = [];

  constructor(windowMs = 60_000) {
    this.windowMs = windowMs;
  }

  append(t_ms: number, competence: number, confidence: number): void {
    this.points.push({ t_ms, competence, confidence });
    const cutoff = t_ms - this.windowMs;
    while (this.points.length && this.points[0].t_ms < cutoff) {
      this.points.shift();
    }
    // drop segments that scrolled fully out of the window
    this.segments = this.segments.filter(
      (seg) => seg.end_ms === null || seg.end_ms >= cutoff,
    );
  }

  startSegment(t_ms: number): void {
    if (this.openSegment() === null) {
      this.segments.push({ start_ms: t_ms, end_ms: null });
    }
  }

  endSegment(t_ms: number): void {
    const open = this.openSegment();
    if (open !== null) {
      open.end_ms = t_ms;
    }
  }

  openSegment(): Segment | null {
    const last = this.segments[this.segments.length - 1];
    return last && last.end_ms === null ? last : null;
  }

  latest(): TelemetryPoint | null {
    return this.points.length ? this.points[this.points.length - 1] : null;
  }

  /** Shaded x-ranges, clamped to the visible window ending at now_ms. */
  shadedRanges(now_ms: number): [number, number][] {
    const lo = now_ms - this.windowMs;
    return this.segments.map((seg) => [
      Math.max(seg.start_ms, lo),
      Math.min(seg.end_ms ?? now_ms, now_ms),
    ]);
  }
}

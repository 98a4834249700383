/**
 * Client-side session state machine.
 *
 * Holds the latest frame (stale frames are discarded), the control mode,
 * the demo-segment flag, and the rolling telemetry. Outgoing records are
 * returned from the transition methods, never sent implicitly, which is
 * what keeps the "no fabricated actions" guarantee testable: every action
 * record leaving this class is produced by a tick while the human holds
 * control, and idle ticks send explicit no-ops.
 */

import {
  CompetenceRecord,
  Record_,
  Scene,
  StateRecord,
  isCompetence,
  isState,
  makeMessage,
} from "./protocol.js";
import { ActionMessage } from "./input.js";
import { TelemetrySeries } from "./telemetry.js";

export type ConnectionState = "connecting" | "open" | "closed";
export type ControlMode = "watch" | "override";

export class SessionView {
  connection: ConnectionState = "connecting";
  mode: ControlMode = "watch";
  demoActive = false;
  frame: StateRecord | null = null;
  scene: Scene | null = null;
  telemetry = new TelemetrySeries();
  lastCompetence: CompetenceRecord | null = null;
  errors: string[] = [];
  /** set when the socket dropped while a demo segment was open */
  pendingDemoEnd = false;
  framesSeen = 0;
  framesDropped = 0;

  /** Apply one incoming record; returns true when a redraw is warranted. */
  apply(msg: Record_, now_ms: number): boolean {
    if (isState(msg)) {
      this.framesSeen += 1;
      if (this.frame !== null && msg.t < this.frame.t) {
        this.framesDropped += 1; // stale frame: discard
        return false;
      }
      if (msg.scene) {
        this.scene = msg.scene;
      }
      this.frame = msg;
      return true;
    }
    if (isCompetence(msg)) {
      this.lastCompetence = msg;
      this.telemetry.append(now_ms, msg.competence, msg.confidence);
      return true;
    }
    if (msg.kind === "error") {
      this.errors.push(String(msg.reason ?? "unknown error"));
      return true;
    }
    return false;
  }

  /** Socket opened: the reset record plus demo-end owed from a dropped demo. */
  onOpen(mode: "agent" | "mixed", seed: number, clock: "live" | "fast" = "live"): Record_[] {
    this.connection = "open";
    const out: Record_[] = [];
    if (this.pendingDemoEnd) {
      out.push(makeMessage("demo-end"));
      this.pendingDemoEnd = false;
    }
    out.push(makeMessage("reset", { env: "arena", mode, seed, clock }));
    return out;
  }

  onClose(): void {
    this.connection = "closed";
    if (this.demoActive) {
      this.demoActive = false;
      this.pendingDemoEnd = true; // flushed on the reconnect handshake
    }
    this.mode = "watch";
  }

  /** Human takes control: demo-start precedes the first action record. */
  takeControl(now_ms: number): Record_[] {
    if (this.mode === "override" || this.connection !== "open") {
      return [];
    }
    this.mode = "override";
    this.demoActive = true;
    this.telemetry.startSegment(now_ms);
    return [makeMessage("demo-start")];
  }

  /** Human releases control: demo-end, the agent resumes. */
  releaseControl(now_ms: number): Record_[] {
    if (this.mode !== "override") {
      return [];
    }
    this.mode = "watch";
    this.demoActive = false;
    this.telemetry.endSegment(now_ms);
    return [makeMessage("demo-end")];
  }

  /** One input tick while overriding; idle input is an explicit no-op. */
  overrideTick(action: ActionMessage): Record_[] {
    if (this.mode !== "override" || !this.demoActive) {
      return []; // never sends actions while watching
    }
    return [makeMessage("override", { channel: action.channel, args: action.args })];
  }
}

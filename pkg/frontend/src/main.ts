/**
 * Entry point: connect to the gateway WebSocket, render at the incoming
 * frame rate, and stream override actions while the human holds control.
 *
 * Query parameters: ?host=127.0.0.1&port=7902&seed=0&mode=mixed
 */

import { decodeMessage, encodeMessage, Record_ } from "./protocol.js";
import { actionForKeys } from "./input.js";
import { SessionView } from "./sessionView.js";
import { drawArena, drawTelemetry, fitViewport } from "./render.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? window.location.hostname ?? "127.0.0.1";
const port = params.get("port") ?? "7902";
const seed = Number(params.get("seed") ?? "0");
const mode = (params.get("mode") ?? "mixed") as "agent" | "mixed";

const arenaCanvas = document.getElementById("arena") as HTMLCanvasElement;
const chartCanvas = document.getElementById("chart") as HTMLCanvasElement;
const statusLine = document.getElementById("status") as HTMLElement;
const arenaCtx = arenaCanvas.getContext("2d")!;
const chartCtx = chartCanvas.getContext("2d")!;

const view = new SessionView();
const pressed = new Set<string>();
let socket: WebSocket | null = null;
let overrideTimer: number | null = null;

function send(records: Record_[]): void {
  if (socket === null || socket.readyState !== WebSocket.OPEN) return;
  for (const record of records) {
    socket.send(encodeMessage(record));
  }
}

function connect(): void {
  socket = new WebSocket(`ws://${host}:${port}`);
  socket.onopen = () => send(view.onOpen(mode, seed, "live"));
  socket.onclose = () => {
    view.onClose();
    stopOverrideTicks();
    setTimeout(connect, 1000); // reconnect; the handshake flushes demo-end
  };
  socket.onmessage = (event) => {
    let record: Record_;
    try {
      record = decodeMessage(String(event.data));
    } catch (err) {
      console.error("bad record from gateway:", err);
      return;
    }
    if (view.apply(record, performance.now())) {
      redraw();
    }
  };
}

function startOverrideTicks(tickMs: number): void {
  if (overrideTimer !== null) return;
  overrideTimer = window.setInterval(() => {
    send(view.overrideTick(actionForKeys(pressed)));
  }, tickMs);
}

function stopOverrideTicks(): void {
  if (overrideTimer !== null) {
    window.clearInterval(overrideTimer);
    overrideTimer = null;
  }
}

window.addEventListener("keydown", (event) => {
  if (event.code === "Enter") {
    const tickMs = view.scene?.tick_ms ?? 33;
    if (view.mode === "watch") {
      send(view.takeControl(performance.now()));
      startOverrideTicks(tickMs);
    } else {
      stopOverrideTicks();
      send(view.releaseControl(performance.now()));
    }
    event.preventDefault();
    return;
  }
  pressed.add(event.code);
});
window.addEventListener("keyup", (event) => pressed.delete(event.code));
window.addEventListener("blur", () => pressed.clear());

function redraw(): void {
  if (view.frame && view.scene) {
    const vp = fitViewport(view.scene, arenaCanvas.width, arenaCanvas.height);
    drawArena(arenaCtx, view.scene, view.frame, vp);
  }
  drawTelemetry(chartCtx, view.telemetry, performance.now(), chartCanvas.width,
    chartCanvas.height);
  const comp = view.lastCompetence;
  statusLine.textContent =
    `${view.connection} | mode ${view.mode}${view.demoActive ? " (recording)" : ""}` +
    ` | t=${view.frame?.t ?? "-"} | source ${view.frame?.source ?? "-"}` +
    (comp ? ` | competence ${comp.competence.toFixed(2)}` +
            ` confidence ${comp.confidence.toFixed(2)}` : "") +
    ` | frames ${view.framesSeen}` +
    " | Enter toggles control, WASD/arrows move, F fire, E interact";
}

connect();
redraw();

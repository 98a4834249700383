/**
 * Keyboard mapping: pressed keys -> one action per tick.
 *
 * Movement on arrows/WASD, fire and interact on dedicated keys; the map is
 * replaceable. While control is held and nothing is pressed the caller
 * still has to send something each tick, so idle input yields an explicit
 * no-op instead of silence.
 */

export interface ActionMessage {
  channel: string;
  args: number[];
}

export interface KeyMap {
  up: string[];
  down: string[];
  left: string[];
  right: string[];
  fire: string[];
  interact: string[];
  sprint: string[];
}

export const DEFAULT_KEYS: KeyMap = {
  up: ["ArrowUp", "KeyW"],
  down: ["ArrowDown", "KeyS"],
  left: ["ArrowLeft", "KeyA"],
  right: ["ArrowRight", "KeyD"],
  fire: ["Space", "KeyF"],
  interact: ["KeyE"],
  sprint: ["ShiftLeft", "ShiftRight"],
};

function anyDown(pressed: ReadonlySet<string>, codes: string[]): boolean {
  return codes.some((code) => pressed.has(code));
}

/** The action for this tick; canvas y grows downward, world y grows upward. */
export function actionForKeys(
  pressed: ReadonlySet<string>,
  keys: KeyMap = DEFAULT_KEYS,
): ActionMessage {
  if (anyDown(pressed, keys.fire)) {
    return { channel: "fire", args: [] };
  }
  if (anyDown(pressed, keys.interact)) {
    return { channel: "interact", args: [] };
  }
  if (anyDown(pressed, keys.sprint)) {
    return { channel: "sprint-toggle", args: [] };
  }
  let dx = 0;
  let dy = 0;
  if (anyDown(pressed, keys.left)) dx -= 1;
  if (anyDown(pressed, keys.right)) dx += 1;
  if (anyDown(pressed, keys.down)) dy -= 1;
  if (anyDown(pressed, keys.up)) dy += 1;
  if (dx === 0 && dy === 0) {
    return { channel: "no-op", args: [] };
  }
  const norm = Math.hypot(dx, dy);
  return { channel: "move", args: [dx / norm, dy / norm] };
}

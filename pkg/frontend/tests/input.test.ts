import { describe, expect, it } from "vitest";

import { actionForKeys } from "../src/input.js";

const keys = (...codes: string[]) => new Set(codes);

describe("keyboard mapping", () => {
  it("idle input is an explicit no-op", () => {
    expect(actionForKeys(keys())).toEqual({ channel: "no-op", args: [] });
  });

  it("maps arrows and WASD to unit move vectors", () => {
    expect(actionForKeys(keys("ArrowRight"))).toEqual({ channel: "move", args: [1, 0] });
    expect(actionForKeys(keys("KeyW"))).toEqual({ channel: "move", args: [0, 1] });
    const diag = actionForKeys(keys("KeyW", "KeyD"));
    expect(diag.channel).toBe("move");
    expect(Math.hypot(diag.args[0], diag.args[1])).toBeCloseTo(1, 12);
  });

  it("opposed directions cancel to a no-op", () => {
    expect(actionForKeys(keys("ArrowLeft", "ArrowRight"))).toEqual({
      channel: "no-op",
      args: [],
    });
  });

  it("fire and interact take precedence over movement", () => {
    expect(actionForKeys(keys("Space", "KeyW")).channel).toBe("fire");
    expect(actionForKeys(keys("KeyE", "KeyA")).channel).toBe("interact");
  });

  it("is remappable", () => {
    const custom = {
      up: ["KeyI"], down: ["KeyK"], left: ["KeyJ"], right: ["KeyL"],
      fire: ["KeyQ"], interact: ["KeyO"], sprint: ["KeyP"],
    };
    expect(actionForKeys(keys("KeyL"), custom)).toEqual({ channel: "move", args: [1, 0] });
    expect(actionForKeys(keys("KeyQ"), custom).channel).toBe("fire");
  });
});

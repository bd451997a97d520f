// Button-enablement table must equal the controller's transition table
// exactly: both sides consume shared/fsm_table.json.
import { readFileSync } from "node:fs";
import { resolve } from "node:path";
import { describe, expect, it } from "vitest";

import { COMMANDS, STATES, isLegal, legalCommands, transitionTable } from "../src/fsm.js";

// vitest runs with cwd = frontend/; the fixture lives beside the backend
const fixturePath = resolve(process.cwd(), "../shared/fsm_table.json");
const fixture = JSON.parse(readFileSync(fixturePath, "utf-8")) as {
  states: string[];
  commands: string[];
  transitions: { from: string; command: string; to: string }[];
};

describe("fsm mirror", () => {
  it("exposes the fixture's states and commands", () => {
    expect(STATES).toEqual(fixture.states);
    expect(COMMANDS).toEqual(fixture.commands);
  });

  it("enables exactly the fixture's transitions, over all pairs", () => {
    const allowed = new Set(fixture.transitions.map((t) => `${t.from}:${t.command}`));
    for (const state of fixture.states) {
      for (const command of fixture.commands) {
        expect(isLegal(state, command), `${state} x ${command}`).toBe(
          allowed.has(`${state}:${command}`),
        );
      }
    }
  });

  it("matches per-state sets", () => {
    for (const state of fixture.states) {
      const expected = new Set(
        fixture.transitions.filter((t) => t.from === state).map((t) => t.command),
      );
      expect(legalCommands(state)).toEqual(expected);
    }
  });

  it("round-trips the full table", () => {
    expect(transitionTable()).toEqual(fixture.transitions);
  });

  it("gates the documented examples", () => {
    expect(isLegal("ABSENT", "START")).toBe(false); // illegal start
    expect(isLegal("CONFIGURED", "START")).toBe(true);
    expect(isLegal("ERROR", "SHUTDOWN")).toBe(true);
    expect(isLegal("ERROR", "BOOT")).toBe(false);
    expect(legalCommands("TRANSITIONING").size).toBe(0);
  });
});

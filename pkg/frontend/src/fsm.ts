// Command enablement mirrors the controller's transition table. The gateway
// stays the authority; this only decides which buttons are clickable.
import table from "../../shared/fsm_table.json";

export const STATES: string[] = table.states;
export const COMMANDS: string[] = table.commands;

const legal = new Map<string, Set<string>>();
for (const t of table.transitions) {
  if (!legal.has(t.from)) legal.set(t.from, new Set());
  legal.get(t.from)!.add(t.command);
}

export function legalCommands(state: string): Set<string> {
  return legal.get(state) ?? new Set();
}

export function isLegal(state: string, command: string): boolean {
  return legalCommands(state).has(command);
}

export function transitionTable(): { from: string; command: string; to: string }[] {
  return table.transitions.slice();
}

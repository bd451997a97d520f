"""Run lifecycle: states, commands, the transition table, and state
aggregation up the controller tree.

The table is the single authority for which commands a node accepts; the
web console mirrors it through shared/fsm_table.json, which the tests pin
against this module. ERROR and TRANSITIONING sit outside the rank order:
ERROR dominates any aggregate and accepts only SHUTDOWN, TRANSITIONING
marks a subtree that has not settled.
"""
from __future__ import annotations

import enum


class RunState(enum.IntEnum):
    ABSENT = 1
    BOOTED = 2
    CONFIGURED = 3
    PAUSED = 4
    RUNNING = 5
    ERROR = 6
    TRANSITIONING = 7


# Rank order for the settled states (ERROR/TRANSITIONING are outside it).
RANKED = (RunState.ABSENT, RunState.BOOTED, RunState.CONFIGURED,
          RunState.PAUSED, RunState.RUNNING)


class RunCommand(enum.IntEnum):
    BOOT = 1
    CONFIGURE = 2
    START = 3
    PAUSE = 4
    RESUME = 5
    STOP = 6
    UNCONFIGURE = 7
    SHUTDOWN = 8


TRANSITIONS: dict[tuple[RunState, RunCommand], RunState] = {
    (RunState.ABSENT, RunCommand.BOOT): RunState.BOOTED,
    (RunState.BOOTED, RunCommand.CONFIGURE): RunState.CONFIGURED,
    (RunState.CONFIGURED, RunCommand.START): RunState.RUNNING,
    (RunState.RUNNING, RunCommand.PAUSE): RunState.PAUSED,
    (RunState.PAUSED, RunCommand.RESUME): RunState.RUNNING,
    (RunState.RUNNING, RunCommand.STOP): RunState.CONFIGURED,
    (RunState.PAUSED, RunCommand.STOP): RunState.CONFIGURED,
    (RunState.CONFIGURED, RunCommand.UNCONFIGURE): RunState.BOOTED,
    (RunState.BOOTED, RunCommand.SHUTDOWN): RunState.ABSENT,
    (RunState.ERROR, RunCommand.SHUTDOWN): RunState.ABSENT,
}


class FsmError(Exception):
    pass


class IllegalTransition(FsmError):
    def __init__(self, state: RunState, command: RunCommand):
        super().__init__(f"{command.name} is not legal from {state.name}")
        self.state = state
        self.command = command


class EmptyChildren(FsmError):
    pass


def next_state(state: RunState, command: RunCommand) -> RunState:
    try:
        return TRANSITIONS[(state, command)]
    except KeyError:
        raise IllegalTransition(state, command) from None


def legal_commands(state: RunState) -> set[RunCommand]:
    return {cmd for (s, cmd) in TRANSITIONS if s is state}


def aggregate(child_states: list[RunState]) -> RunState:
    """ERROR dominates; unanimity yields the common state; anything mixed or
    still moving is TRANSITIONING."""
    if not child_states:
        raise EmptyChildren("aggregate needs at least one child state")
    if RunState.ERROR in child_states:
        return RunState.ERROR
    first = child_states[0]
    if first is not RunState.TRANSITIONING and all(s is first for s in child_states):
        return first
    return RunState.TRANSITIONING


def table_as_json() -> dict:
    """The shape shared with the console fixture."""
    return {
        "states": [s.name for s in RunState],
        "commands": [c.name for c in RunCommand],
        "transitions": [
            {"from": s.name, "command": c.name, "to": t.name}
            for (s, c), t in sorted(TRANSITIONS.items(), key=lambda kv: (kv[0][0], kv[0][1]))
        ],
    }

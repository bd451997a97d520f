"""Transition-table closure and aggregation properties."""
from __future__ import annotations

import json
import pathlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daqrc.runcontrol.fsm import (
    EmptyChildren,
    IllegalTransition,
    RunCommand,
    RunState,
    TRANSITIONS,
    aggregate,
    legal_commands,
    next_state,
    table_as_json,
)

EXPECTED_TABLE = {
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


class TestTransitionTable:
    def test_exhaustive_all_pairs(self):
        """Every (state, command) pair behaves exactly per the table: listed
        pairs transition, everything else is rejected."""
        for state in RunState:
            for command in RunCommand:
                if (state, command) in EXPECTED_TABLE:
                    assert next_state(state, command) is EXPECTED_TABLE[(state, command)]
                else:
                    with pytest.raises(IllegalTransition):
                        next_state(state, command)

    def test_table_matches_module(self):
        assert TRANSITIONS == EXPECTED_TABLE

    def test_error_accepts_only_shutdown(self):
        assert legal_commands(RunState.ERROR) == {RunCommand.SHUTDOWN}

    def test_transitioning_accepts_nothing(self):
        assert legal_commands(RunState.TRANSITIONING) == set()

    def test_completed_command_not_repeatable(self):
        # re-dispatching a completed command is rejected by the guard
        for state, command in EXPECTED_TABLE:
            landed = EXPECTED_TABLE[(state, command)]
            if (landed, command) not in EXPECTED_TABLE:
                with pytest.raises(IllegalTransition):
                    next_state(landed, command)

    def test_shared_fixture_in_sync(self):
        fixture = pathlib.Path(__file__).resolve().parents[1] / "shared" / "fsm_table.json"
        assert json.loads(fixture.read_text()) == table_as_json()

    def test_full_cycle(self):
        state = RunState.ABSENT
        for command in [RunCommand.BOOT, RunCommand.CONFIGURE, RunCommand.START,
                        RunCommand.PAUSE, RunCommand.RESUME, RunCommand.STOP,
                        RunCommand.UNCONFIGURE, RunCommand.SHUTDOWN]:
            state = next_state(state, command)
        assert state is RunState.ABSENT


settled = st.sampled_from([RunState.ABSENT, RunState.BOOTED, RunState.CONFIGURED,
                           RunState.PAUSED, RunState.RUNNING])
any_state = st.sampled_from(list(RunState))


class TestAggregate:
    def test_unanimity(self):
        assert aggregate([RunState.RUNNING] * 3) is RunState.RUNNING

    def test_error_dominance(self):
        assert aggregate([RunState.RUNNING, RunState.ERROR,
                          RunState.CONFIGURED]) is RunState.ERROR

    def test_mixed_is_transitioning(self):
        assert aggregate([RunState.CONFIGURED, RunState.RUNNING]) is RunState.TRANSITIONING

    def test_any_transitioning_child(self):
        assert aggregate([RunState.RUNNING, RunState.TRANSITIONING]) is RunState.TRANSITIONING

    def test_empty_rejected(self):
        with pytest.raises(EmptyChildren):
            aggregate([])

    @settings(max_examples=300, deadline=None)
    @given(st.lists(any_state, min_size=1, max_size=8))
    def test_error_dominates_always(self, states):
        assert aggregate(states + [RunState.ERROR]) is RunState.ERROR

    @settings(max_examples=300, deadline=None)
    @given(st.lists(any_state, min_size=1, max_size=8))
    def test_result_is_error_transitioning_or_unanimous(self, states):
        result = aggregate(states)
        if RunState.ERROR in states:
            assert result is RunState.ERROR
        elif len(set(states)) == 1 and states[0] is not RunState.TRANSITIONING:
            assert result is states[0]
        else:
            assert result is RunState.TRANSITIONING

    @settings(max_examples=200, deadline=None)
    @given(settled, st.integers(min_value=1, max_value=8))
    def test_unanimous_settled_passthrough(self, state, n):
        assert aggregate([state] * n) is state

"""Turing-machine core: simulation against a naive dict-tape oracle,
tape axioms, and exhaustive small-N halting-bound checks."""

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcsbench.turing import (
    BLANK,
    DEFAULT_BB_BOUNDS,
    Action,
    MachineTable,
    MoveDir,
    Symbol,
    Tape,
    TapeConfig,
    classify,
    init_config,
    simulate,
    step,
)

SYMBOLS = (Symbol.ZERO, Symbol.ONE)
MOVES = (MoveDir.LEFT, MoveDir.RIGHT)


# ── Independent oracle: absolute-position dict tape ──


def oracle_simulate(machine: MachineTable, max_steps: int):
    """Returns (halted, steps_or_bound, state, tape_dict, head_pos)."""
    tape = {}
    pos = 0
    state = 0
    for k in range(1, max_steps + 1):
        sym = tape.get(pos, BLANK)
        action = machine.cells[(state, sym)]
        if action is None:
            return True, k, state, tape, pos
        tape[pos] = action.write
        pos += -1 if action.move is MoveDir.LEFT else 1
        state = action.next_state
    return False, max_steps, state, tape, pos


def machines(n_max=3):
    def build(draw_data):
        n, cells_raw = draw_data
        cells = {}
        for (s, sym), raw in zip(
            [(s, sym) for s in range(n) for sym in SYMBOLS], cells_raw
        ):
            if raw is None:
                cells[(s, sym)] = None
            else:
                ns, mv, wr = raw
                cells[(s, sym)] = Action(ns % n, MOVES[mv], SYMBOLS[wr])
        return MachineTable(n, cells)

    def strat(n):
        cell = st.one_of(
            st.none(),
            st.tuples(st.integers(0, n - 1), st.integers(0, 1), st.integers(0, 1)),
        )
        return st.tuples(st.just(n), st.tuples(*[cell] * (2 * n))).map(build)

    return st.integers(1, n_max).flatmap(strat)


@given(machines(), st.integers(1, 60))
@settings(max_examples=200, deadline=None)
def test_simulate_agrees_with_dict_tape_oracle(machine, max_steps):
    got = simulate(machine, max_steps)
    halted, steps, state, tape, pos = oracle_simulate(machine, max_steps)
    assert got.halted == halted
    if halted:
        assert got.steps == steps
    else:
        assert got.bound == max_steps


@given(machines(), st.integers(1, 40))
@settings(max_examples=120, deadline=None)
def test_step_tape_matches_oracle_cells(machine, n_steps):
    cfg = init_config()
    tape = {}
    pos = 0
    for _ in range(n_steps):
        sym = tape.get(pos, BLANK)
        action = machine.cells[(cfg.state, sym)]
        nxt = step(machine, cfg)
        if action is None:
            assert nxt is None
            return
        tape[pos] = action.write
        pos += -1 if action.move is MoveDir.LEFT else 1
        cfg = nxt
        assert cfg.state == action.next_state
        for off in range(-4, 5):
            assert cfg.tape.read_at(off) == tape.get(pos + off, BLANK)


# ── Tape axioms ──


@given(st.lists(st.sampled_from(SYMBOLS), max_size=6),
       st.sampled_from(SYMBOLS),
       st.lists(st.sampled_from(SYMBOLS), max_size=6))
def test_tape_move_left_then_right_is_identity_on_reads(left, head, right):
    t = Tape(tuple(left), head, tuple(right))
    back = t.move(MoveDir.LEFT).move(MoveDir.RIGHT)
    for off in range(-8, 9):
        assert back.read_at(off) == t.read_at(off)


@given(st.sampled_from(SYMBOLS))
def test_tape_write_then_read(sym):
    assert Tape().write(sym).read_at(0) == sym


def test_fresh_tape_is_blank_everywhere():
    t = Tape()
    assert all(t.read_at(off) == BLANK for off in range(-5, 6))


# ── Step-counting convention ──


def test_immediate_halt_counts_one_step():
    m = MachineTable(1, {(0, Symbol.ZERO): None, (0, Symbol.ONE): None})
    out = simulate(m, 10)
    assert out.halted and out.steps == 1


def test_simulate_rejects_nonpositive_budget():
    m = MachineTable(1, {(0, Symbol.ZERO): None, (0, Symbol.ONE): None})
    with pytest.raises(ValueError):
        simulate(m, 0)


def _all_machines(n):
    options = [None] + [
        Action(ns, mv, wr) for ns in range(n) for mv in MOVES for wr in SYMBOLS
    ]
    keys = [(s, sym) for s in range(n) for sym in SYMBOLS]
    for combo in itertools.product(options, repeat=len(keys)):
        yield MachineTable(n, dict(zip(keys, combo)))


def test_one_state_maximum_halting_steps_is_one():
    # Exhaustive over all 25 collapsed 1-state tables.
    halting_steps = []
    for m in _all_machines(1):
        out = simulate(m, DEFAULT_BB_BOUNDS[1] + 1)
        if out.halted:
            halting_steps.append(out.steps)
    assert halting_steps and max(halting_steps) == DEFAULT_BB_BOUNDS[1] == 1


def test_two_state_maximum_halting_steps_is_six():
    # Exhaustive over all 6561 collapsed 2-state tables: no machine halts
    # in more than 6 steps, and 6 is attained.
    best = 0
    for m in _all_machines(2):
        out = simulate(m, DEFAULT_BB_BOUNDS[2] + 1)
        if out.halted:
            best = max(best, out.steps)
    assert best == DEFAULT_BB_BOUNDS[2] == 6


# ── classify ──


def test_classify_uses_bound_plus_one():
    # Halts at exactly bound+1 lookups -> still classified halting.
    m = MachineTable(
        2,
        {
            (0, Symbol.ZERO): Action(1, MoveDir.RIGHT, Symbol.ONE),
            (0, Symbol.ONE): None,
            (1, Symbol.ZERO): None,
            (1, Symbol.ONE): Action(1, MoveDir.LEFT, Symbol.ONE),
        },
    )
    cls = classify(m, 1)
    assert cls.halting and cls.steps == 2


def test_nonhalting_mover_never_halts():
    m = MachineTable(
        1,
        {(0, Symbol.ZERO): Action(0, MoveDir.RIGHT, Symbol.ONE), (0, Symbol.ONE): None},
    )
    assert not classify(m, 50).halting


@given(machines(2), st.integers(1, 20))
@settings(max_examples=100, deadline=None)
def test_classify_halting_steps_within_bound_plus_one(machine, bound):
    cls = classify(machine, bound)
    if cls.halting:
        assert 1 <= cls.steps <= bound + 1
        assert cls.label == "halting"
    else:
        assert cls.label == "nonhalting"


def test_machine_table_validation():
    with pytest.raises(ValueError):
        MachineTable(1, {(0, Symbol.ZERO): None})  # missing cell
    with pytest.raises(ValueError):
        MachineTable(
            1,
            {
                (0, Symbol.ZERO): Action(3, MoveDir.LEFT, Symbol.ZERO),
                (0, Symbol.ONE): None,
            },
        )

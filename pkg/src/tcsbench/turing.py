"""Deterministic binary Turing machines on a blank bidirectional tape.

Machines have N working states indexed 0..N-1 plus an implicit HALT: a
transition-table cell holding ``None`` means the machine halts when that
(state, symbol) pair is looked up.  The tape is two stacks plus an explicit
head symbol; cells never stored read as the blank symbol ``ZERO``.

Step counting: the first lookup is step 1, and a halting lookup counts as
the final step.  A machine whose very first cell is ``None`` therefore
halts at step 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Symbol(enum.Enum):
    ZERO = "zero"
    ONE = "one"


BLANK = Symbol.ZERO


class MoveDir(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class Action:
    """One defined transition: go to next_state, move, after writing write."""

    next_state: int
    move: MoveDir
    write: Symbol


@dataclass(frozen=True)
class MachineTable:
    """Transition table of an N-state machine.

    ``cells`` must contain all 2N (state, symbol) keys; a ``None`` value is
    the HALT cell.
    """

    n_states: int
    cells: dict[tuple[int, Symbol], Action | None]

    def __post_init__(self):
        if self.n_states < 1:
            raise ValueError(f"n_states must be >= 1, got {self.n_states}")
        for s in range(self.n_states):
            for sym in (Symbol.ZERO, Symbol.ONE):
                if (s, sym) not in self.cells:
                    raise ValueError(f"missing cell ({s}, {sym.value})")
        for key, action in self.cells.items():
            if action is not None and not (0 <= action.next_state < self.n_states):
                raise ValueError(
                    f"cell {key}: next_state {action.next_state} out of range"
                )

    def cell_list(self) -> tuple:
        """Canonical hashable view, ordered by (state, zero-first symbol)."""
        out = []
        for s in range(self.n_states):
            for sym in (Symbol.ZERO, Symbol.ONE):
                a = self.cells[(s, sym)]
                if a is None:
                    out.append((s, sym.value, None))
                else:
                    out.append(
                        (s, sym.value, (a.next_state, a.move.value, a.write.value))
                    )
        return tuple(out)


@dataclass(frozen=True)
class Tape:
    """Two-stack tape: ``left[-1]`` / ``right[-1]`` are the cells adjacent to
    the head.  Missing cells are blank."""

    left: tuple[Symbol, ...] = ()
    head: Symbol = BLANK
    right: tuple[Symbol, ...] = ()

    def write(self, sym: Symbol) -> "Tape":
        return Tape(self.left, sym, self.right)

    def move(self, direction: MoveDir) -> "Tape":
        if direction is MoveDir.LEFT:
            if self.left:
                return Tape(self.left[:-1], self.left[-1], (*self.right, self.head))
            return Tape((), BLANK, (*self.right, self.head))
        if self.right:
            return Tape((*self.left, self.head), self.right[-1], self.right[:-1])
        return Tape((*self.left, self.head), BLANK, ())

    def read_at(self, offset: int) -> Symbol:
        """Symbol at a signed offset from the head (0 = head cell)."""
        if offset == 0:
            return self.head
        if offset < 0:
            idx = len(self.left) + offset
            return self.left[idx] if idx >= 0 else BLANK
        idx = len(self.right) - offset
        return self.right[idx] if idx >= 0 else BLANK


@dataclass(frozen=True)
class TapeConfig:
    state: int
    tape: Tape = field(default_factory=Tape)


@dataclass(frozen=True)
class SimOutcome:
    """Either Halted at step ``steps`` or still running at ``bound``."""

    halted: bool
    steps: int = 0
    bound: int = 0

    @staticmethod
    def halted_at(steps: int) -> "SimOutcome":
        return SimOutcome(halted=True, steps=steps)

    @staticmethod
    def running(bound: int) -> "SimOutcome":
        return SimOutcome(halted=False, bound=bound)


@dataclass(frozen=True)
class Classification:
    """Ground-truth label: Halting{steps} or NonHalting."""

    halting: bool
    steps: int = 0

    @property
    def label(self) -> str:
        return "halting" if self.halting else "nonhalting"


def init_config() -> TapeConfig:
    """State 0 on an all-blank tape."""
    return TapeConfig(state=0, tape=Tape())


def step(machine: MachineTable, cfg: TapeConfig) -> TapeConfig | None:
    """Apply one transition; None means the looked-up cell is HALT.

    The symbol is written before the head moves.
    """
    if not (0 <= cfg.state < machine.n_states):
        raise ValueError(f"state {cfg.state} out of range for N={machine.n_states}")
    action = machine.cells[(cfg.state, cfg.tape.head)]
    if action is None:
        return None
    tape = cfg.tape.write(action.write).move(action.move)
    return TapeConfig(state=action.next_state, tape=tape)


def simulate(machine: MachineTable, max_steps: int) -> SimOutcome:
    """Run from the initial configuration for at most max_steps lookups."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    cfg = init_config()
    for k in range(1, max_steps + 1):
        nxt = step(machine, cfg)
        if nxt is None:
            return SimOutcome.halted_at(k)
        cfg = nxt
    return SimOutcome.running(max_steps)


def classify(machine: MachineTable, bb_bound: int) -> Classification:
    """Halting iff the machine halts within bb_bound + 1 simulated steps.

    Non-halting is sound when bb_bound is the maximal step count any halting
    machine of this size can attain.
    """
    outcome = simulate(machine, bb_bound + 1)
    if outcome.halted:
        return Classification(halting=True, steps=outcome.steps)
    return Classification(halting=False)


# Maximal halting step counts for N-state machines, from published values.
# Overridable wherever they are consumed so the suite never hard-fails on a
# constant.
DEFAULT_BB_BOUNDS = {1: 1, 2: 6, 3: 21, 4: 107}

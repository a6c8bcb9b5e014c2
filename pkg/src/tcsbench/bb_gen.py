"""Busy Beaver challenge generation.

Samples N-state transition tables, classifies them against the known
maximal step bounds, and renders each machine into a Lean 4 file, a
Markdown transition table and an evaluation prompt, all from the same
table so the formal and informal views cannot drift apart.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .turing import (
    DEFAULT_BB_BOUNDS,
    Action,
    Classification,
    MachineTable,
    MoveDir,
    Symbol,
    classify,
)


class SamplingBudgetError(RuntimeError):
    """Raised when the rejection loop cannot find enough machines of a class."""


class CountConvention(enum.Enum):
    # HALT modelled as a distinct target state: each of the 2N cells picks
    # (N+1 states) x (2 moves) x (2 writes) options.
    HALT_EXPANDED = "halt-expanded"
    # HALT modelled as a single absent action: 4N + 1 options per cell.
    HALT_COLLAPSED = "halt-collapsed"


def count_machines(n: int, conv: CountConvention) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    if conv is CountConvention.HALT_EXPANDED:
        return (4 * (n + 1)) ** (2 * n)
    return (4 * n + 1) ** (2 * n)


# ── Markdown table ──

_TABLE_HEADER = "| State | Symbol | Next State | Move | Write |"
_TABLE_SEP = "|------|------|------|------|------|"


def render_markdown_table(machine: MachineTable) -> str:
    """2N body rows ordered by (state, zero first); ends with a newline."""
    lines = [_TABLE_HEADER, _TABLE_SEP]
    for state in range(machine.n_states):
        for sym in (Symbol.ZERO, Symbol.ONE):
            action = machine.cells[(state, sym)]
            if action is None:
                lines.append(f"| {state:03d} | {sym.value} | HALT | - | - |")
            else:
                lines.append(
                    f"| {state:03d} | {sym.value} | {action.next_state:03d} "
                    f"| {action.move.value} | {action.write.value} |"
                )
    return "\n".join(lines) + "\n"


def parse_markdown_table(text: str) -> MachineTable:
    """Inverse of render_markdown_table (tolerant of separator dash counts)."""
    cells: dict[tuple[int, Symbol], Action | None] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line.startswith("|") or line.startswith("|-"):
            continue
        fields = [f.strip() for f in line.strip("|").split("|")]
        if fields[0] == "State":
            continue
        state_s, sym_s, next_s, move_s, write_s = fields
        key = (int(state_s), Symbol(sym_s))
        if next_s == "HALT":
            cells[key] = None
        else:
            cells[key] = Action(int(next_s), MoveDir(move_s), Symbol(write_s))
    n_states = 1 + max(s for s, _ in cells)
    return MachineTable(n_states=n_states, cells=cells)


# ── Lean rendering ──

_LEAN_PREAMBLE = """\
import Mathlib.Computability.TuringMachine

inductive Γ
  | zero
  | one
   deriving DecidableEq

instance : Inhabited Γ := ⟨ Γ.zero ⟩

structure Stmt where
  move : Turing.Dir
  write : Γ

def Machine := Fin {n} → Γ → Option (Fin {n} × Stmt)

structure Cfg where
  q : Fin {n}
  Tape : Turing.Tape Γ

def init (l : List Γ) : Cfg := ⟨⟨0, by omega⟩, Turing.Tape.mk₁ l⟩

def step (M : Machine) : Cfg → Option Cfg :=
  fun ⟨q, T⟩ ↦ (M q T.head).map fun ⟨q', a⟩ ↦ ⟨q', (T.write a.write).move a.move⟩
"""

_NTH_CFG = """\
def nth_cfg : (n : Nat) -> Option Cfg
| 0 => init []
| Nat.succ n => match (nth_cfg n) with
                | none => none
                | some cfg =>  step machine cfg
"""

_THEOREM_NONHALTING = "theorem machine_never_halts : ∀ n, (nth_cfg n).isSome := by"
_THEOREM_HALTING = "theorem machine_halts : ∃ n, nth_cfg n = none := by"


def _machine_arms(machine: MachineTable) -> str:
    lines = ["def machine : Machine"]
    for state in range(machine.n_states):
        for sym in (Symbol.ZERO, Symbol.ONE):
            action = machine.cells[(state, sym)]
            lhs = f"| ⟨{state:03d}, _⟩, Γ.{sym.value}  =>"
            if action is None:
                lines.append(f"{lhs} none")
            else:
                lines.append(
                    f"{lhs} some ⟨⟨{action.next_state:03d}, by omega⟩, "
                    f"⟨Turing.Dir.{action.move.value}, Γ.{action.write.value}⟩⟩"
                )
    lines.append(f"| ⟨_+{machine.n_states}, _⟩, _ => by omega")
    return "\n".join(lines) + "\n"


def render_lean(machine: MachineTable, classification: Classification) -> str:
    """Full Lean file: definitions, machine, informal docstring, theorem stub."""
    n = machine.n_states
    table = render_markdown_table(machine)
    head = "Prove the following Turing Machine with the transition table " + (
        "halts." if classification.halting else "never halts."
    )
    docstring = "/-- \n" + head + "\n" + table + "-/\n"
    theorem = _THEOREM_HALTING if classification.halting else _THEOREM_NONHALTING
    return (
        _LEAN_PREAMBLE.format(n=n)
        + "\n"
        + _machine_arms(machine)
        + "\n"
        + _NTH_CFG
        + "\n"
        + docstring
        + theorem
        + "\n  sorry\n"
    )


PROMPT_TEMPLATE = """Complete the following Lean 4 code:

```lean4
{lean_code}
```

You can make your own auxiliary corollaries and theorems to support the proof, instead of only completing the part with the sorry. Please output the entire program and not just the last part. Please output only the program and add no other comment, such that your answer is a compilable lean code. Make sure to reason enough to make your code correct.
"""


def render_prompt(lean_text: str) -> str:
    return PROMPT_TEMPLATE.format(lean_code=lean_text.rstrip("\n"))


# ── Sampling ──


@dataclass(frozen=True)
class BbChallenge:
    machine: MachineTable
    n_states: int
    classification: Classification
    case_id: int
    file_stem: str
    lean_text: str
    markdown_table: str
    prompt_text: str
    seed: int


def _draw_machine(n: int, rng: random.Random) -> tuple[MachineTable, tuple]:
    """Uniform per cell over the 4(N+1) halt-expanded options.

    Drawing (and deduplicating) in the expanded space matches the published
    machine counts: a halt cell keeps its drawn move/write in the signature
    even though the collapsed table discards them.
    """
    cells: dict[tuple[int, Symbol], Action | None] = {}
    signature = []
    for state in range(n):
        for sym in (Symbol.ZERO, Symbol.ONE):
            next_state = rng.randrange(n + 1)
            move = MoveDir.LEFT if rng.randrange(2) == 0 else MoveDir.RIGHT
            write = Symbol.ZERO if rng.randrange(2) == 0 else Symbol.ONE
            signature.append((next_state, move.value, write.value))
            if next_state == n:
                cells[(state, sym)] = None
            else:
                cells[(state, sym)] = Action(next_state, move, write)
    return MachineTable(n_states=n, cells=cells), tuple(signature)


def make_challenge(
    machine: MachineTable,
    classification: Classification,
    case_id: int,
    seed: int,
) -> BbChallenge:
    stem = f"bb-{machine.n_states}state-case{case_id}-{classification.label}"
    lean_text = render_lean(machine, classification)
    return BbChallenge(
        machine=machine,
        n_states=machine.n_states,
        classification=classification,
        case_id=case_id,
        file_stem=stem,
        lean_text=lean_text,
        markdown_table=render_markdown_table(machine),
        prompt_text=render_prompt(lean_text),
        seed=seed,
    )


def sample_machines(
    n: int,
    count_halting: int,
    count_nonhalting: int,
    seed: int,
    bounds: dict[int, int] | None = None,
    attempt_cap: int | None = None,
) -> list[BbChallenge]:
    """Deterministic rejection sampling until the requested class split is met.

    Duplicate draws (halt-expanded signatures) are suppressed within one call.
    """
    bounds = bounds or DEFAULT_BB_BOUNDS
    if n not in bounds:
        raise ValueError(f"no step bound configured for N={n}")
    bound = bounds[n]
    total = count_halting + count_nonhalting
    cap = attempt_cap if attempt_cap is not None else max(10_000, 400 * total)
    rng = random.Random(seed)
    seen: set[tuple] = set()
    out: list[BbChallenge] = []
    need = {True: count_halting, False: count_nonhalting}
    counters = {True: 0, False: 0}
    for _ in range(cap):
        if need[True] == 0 and need[False] == 0:
            break
        machine, key = _draw_machine(n, rng)
        if key in seen:
            continue
        seen.add(key)
        cls = classify(machine, bound)
        if need[cls.halting] == 0:
            continue
        need[cls.halting] -= 1
        counters[cls.halting] += 1
        out.append(make_challenge(machine, cls, counters[cls.halting], seed))
    if need[True] or need[False]:
        short = "halting" if need[True] else "nonhalting"
        raise SamplingBudgetError(
            f"could not find enough {short} machines for N={n} "
            f"within {cap} attempts"
        )
    return out


# ── File emission ──


def manifest_row(challenge: BbChallenge) -> dict:
    row = {
        "file_name": f"bb/{challenge.file_stem}.lean",
        "table": challenge.markdown_table,
        "n_states": challenge.n_states,
        "classification": challenge.classification.label,
        "seed": challenge.seed,
        "case_id": challenge.case_id,
    }
    if challenge.classification.halting:
        row["halt_steps"] = challenge.classification.steps
    return row


def write_challenges(challenges: list[BbChallenge], out_dir: Path) -> Path:
    """Writes .lean files, prompt files and the JSONL manifest under out_dir/bb."""
    bb_dir = out_dir / "bb"
    prompt_dir = bb_dir / "prompts"
    prompt_dir.mkdir(parents=True, exist_ok=True)
    manifest = bb_dir / "manifest.jsonl"
    with manifest.open("w") as fh:
        for ch in challenges:
            (bb_dir / f"{ch.file_stem}.lean").write_text(ch.lean_text)
            (prompt_dir / f"{ch.file_stem}.txt").write_text(ch.prompt_text)
            fh.write(json.dumps(manifest_row(ch), ensure_ascii=False) + "\n")
    return manifest


def machine_digest(machine: MachineTable) -> str:
    """Stable fingerprint of a transition table (dedup and logging)."""
    payload = json.dumps(machine.cell_list()).encode()
    return hashlib.sha256(payload).hexdigest()[:12]

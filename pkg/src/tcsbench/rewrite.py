"""Rule-based normalization of linear MBA equations to the canonical
weighted-minterm sum, with a recorded goal trace.

Every rewrite rule mirrors one equation of the bv32 lemma library; rules
are verified semantics-preserving by an exhaustive small-width oracle when
the set is loaded.  Normalization proceeds in fixed stages: subtraction
and negation elimination, De Morgan / xor expansion, double-negation
cleanup, positional expansion of bare literals and literal disjunctions
into minterms, disjoint-or to addition, coefficient distribution, and a
final collection into the (¬x∧¬y, ¬x∧y, x∧¬y, x∧y) ordered sum.

The recorded tactic text uses only ``simp only`` / ``rw`` /
``nth_rewrite`` before the closing ``simp``, citing library lemma names.
The collection stage is goal-directed: its result is computed from the
minterm coefficients and oracle-verified, with the justifying
reassociation/commutation lemmas cited as a set.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .mba_ast import (
    MASK32,
    Add,
    And,
    Const,
    Expr,
    Mul,
    Neg,
    Not,
    Or,
    Sub,
    Var,
    X,
    Xor,
    Y,
    exhaustive_equal,
    render,
)


class RuleVerificationError(RuntimeError):
    """A loaded rule failed its oracle check (transcription bug)."""


class NormalizationError(RuntimeError):
    def __init__(self, message: str, stuck_goal: tuple[Expr, Expr] | None = None):
        super().__init__(message)
        self.stuck_goal = stuck_goal


def Meta(name: str) -> Expr:
    return Expr("meta", value=name)


A_ = Meta("A")
B_ = Meta("B")
C_ = Meta("C")
ALL_ONES = Const(MASK32)


@dataclass(frozen=True)
class RewriteRule:
    name: str
    pattern: Expr
    replacement: Expr
    reversed_orientation: bool = False

    @property
    def tactic_name(self) -> str:
        return f"← {self.name}" if self.reversed_orientation else self.name

    def metavars(self) -> set[str]:
        out: set[str] = set()

        def walk(e: Expr):
            if e.op == "meta":
                out.add(e.value)
            for a in e.args:
                walk(a)

        walk(self.pattern)
        walk(self.replacement)
        return out


def _m(i: int, x: Expr, y: Expr) -> Expr:
    """Minterm template in the library's 1..4 numbering."""
    return {
        1: And(x, y),
        2: And(Not(x), y),
        3: And(x, Not(y)),
        4: And(Not(x), Not(y)),
    }[i]


def _library_equations() -> list[tuple[str, Expr, Expr]]:
    eqs = [
        ("bv32_and_not_self", And(A_, Not(A_)), Const(0)),
        ("bv32_not_not", Not(Not(A_)), A_),
        ("bv32_or_not_self", Or(A_, Not(A_)), ALL_ONES),
        ("bv32_not_or_self", Or(Not(A_), A_), ALL_ONES),
        ("bv32_neg_mul", Mul(Neg(A_), B_), Neg(Mul(A_, B_))),
        ("bv32_not_and", Not(And(A_, B_)), Or(Not(A_), Not(B_))),
        ("bv32_not_or", Not(Or(A_, B_)), And(Not(A_), Not(B_))),
        (
            "bv32_not_xor_eq_or",
            Not(Xor(A_, B_)),
            Or(And(Not(A_), Not(B_)), And(A_, B_)),
        ),
        (
            "bv32_xor_eq_or",
            Xor(A_, B_),
            Or(And(Not(A_), B_), And(A_, Not(B_))),
        ),
        ("bv32_x_distr", A_, Or(And(A_, B_), And(A_, Not(B_)))),
        ("bv32_y_distr", B_, Or(And(A_, B_), And(Not(A_), B_))),
        ("bv32_add_assoc", Add(Add(A_, B_), C_), Add(A_, Add(B_, C_))),
        ("bv32_add_comm", Add(A_, B_), Add(B_, A_)),
        ("bv32_add_neg_eq_sub", Add(A_, Neg(B_)), Sub(A_, B_)),
        ("bv32_mul_comm", Mul(A_, B_), Mul(B_, A_)),
        ("bv32_var_mul_comm", Mul(And(A_, B_), C_), Mul(C_, And(A_, B_))),
        ("bv32_mul_add", Mul(A_, Add(B_, C_)), Add(Mul(A_, B_), Mul(A_, C_))),
        ("bv32_neg_eq_mul", Neg(A_), Mul(A_, ALL_ONES)),
        ("bv32_add_mul_one", Add(A_, Mul(A_, B_)), Mul(A_, Add(Const(1), B_))),
        (
            "bv32_or_eq_add_three",
            Or(A_, B_),
            Add(Add(And(A_, Not(B_)), And(A_, B_)), And(Not(A_), B_)),
        ),
        (
            "bv32_sum_all",
            Add(Add(Add(_m(4, A_, B_), _m(2, A_, B_)), _m(1, A_, B_)), _m(3, A_, B_)),
            ALL_ONES,
        ),
        ("bv32_self_eq_neg_mul", A_, Mul(Neg(A_), ALL_ONES)),
        (
            "bv32_not_self_and_not",
            Not(And(A_, Not(A_))),
            Add(Add(Add(_m(4, A_, B_), _m(2, A_, B_)), _m(1, A_, B_)), _m(3, A_, B_)),
        ),
    ]
    for i, j in ((1, 2), (1, 3), (1, 4), (2, 1), (2, 3), (3, 1), (3, 2), (4, 1)):
        eqs.append(
            (
                f"bv32_or_eq_add{i}{j}",
                Or(_m(i, A_, B_), _m(j, A_, B_)),
                Add(_m(i, A_, B_), _m(j, A_, B_)),
            )
        )
    return eqs


# Instantiation pool for oracle checks of rules with metavariables.
ORACLE_POOL: tuple[Expr, ...] = (
    X,
    Y,
    Not(X),
    Not(Y),
    And(X, Y),
    And(X, Not(Y)),
    And(Not(X), Y),
    And(Not(X), Not(Y)),
    Or(X, Y),
    Or(X, Not(Y)),
    Or(Not(X), Y),
    Xor(X, Y),
    Not(And(X, Y)),
    Not(Or(X, Y)),
    Not(Xor(X, Y)),
    Const(1),
    Const(3),
    Add(X, Y),
    Mul(Const(2), X),
    Sub(X, Y),
)


def substitute(template: Expr, bindings: dict[str, Expr]) -> Expr:
    if template.op == "meta":
        return bindings[template.value]
    if not template.args:
        return template
    return Expr(template.op, tuple(substitute(a, bindings) for a in template.args), template.value)


def match(pattern: Expr, expr: Expr, bindings: dict[str, Expr] | None = None) -> dict[str, Expr] | None:
    """One-way syntactic matching; metavariables bind consistently."""
    if bindings is None:
        bindings = {}
    if pattern.op == "meta":
        bound = bindings.get(pattern.value)
        if bound is None:
            bindings[pattern.value] = expr
            return bindings
        return bindings if bound == expr else None
    if pattern.op != expr.op or pattern.value != expr.value:
        return None
    if len(pattern.args) != len(expr.args):
        return None
    for p, e in zip(pattern.args, expr.args):
        if match(p, e, bindings) is None:
            return None
    return bindings


def verify_rule(rule: RewriteRule, instantiations: int = 6, width: int = 8) -> None:
    """Exhaustive small-width check of pattern ≡ replacement over pool picks."""
    mvars = sorted(rule.metavars())
    combos = []
    for k in range(instantiations):
        combos.append({v: ORACLE_POOL[(k * 7 + i * 3) % len(ORACLE_POOL)] for i, v in enumerate(mvars)})
    for env in combos:
        lhs = substitute(rule.pattern, env)
        rhs = substitute(rule.replacement, env)
        if not exhaustive_equal(lhs, rhs, width):
            raise RuleVerificationError(f"rule {rule.name} is unsound for {env}")


_RULESET_CACHE: dict[str, RewriteRule] | None = None


def load_rule_set() -> dict[str, RewriteRule]:
    """All library equations as forward rules, oracle-verified once."""
    global _RULESET_CACHE
    if _RULESET_CACHE is None:
        rules = {}
        for name, lhs, rhs in _library_equations():
            rule = RewriteRule(name, lhs, rhs)
            verify_rule(rule)
            rules[name] = rule
        _RULESET_CACHE = rules
    return dict(_RULESET_CACHE)


def reversed_rule(rule: RewriteRule) -> RewriteRule:
    return RewriteRule(rule.name, rule.replacement, rule.pattern, reversed_orientation=True)


# ── Rewriting machinery ──


def simp_only(rules: list[RewriteRule], expr: Expr, budget: list[int]) -> Expr:
    """Apply the rule set at all matching positions, outermost-first,
    repeating to fixpoint."""

    def visit(e: Expr) -> Expr:
        while True:
            for rule in rules:
                bindings = match(rule.pattern, e)
                if bindings is not None:
                    budget[0] -= 1
                    if budget[0] <= 0:
                        raise NormalizationError("rewrite budget exhausted")
                    e = substitute(rule.replacement, bindings)
                    break
            else:
                break
        if not e.args:
            return e
        new_args = tuple(visit(a) for a in e.args)
        if new_args != e.args:
            return visit(Expr(e.op, new_args, e.value))
        return e

    return visit(expr)


def subterm_paths(e: Expr, path: tuple[int, ...] = ()) -> list[tuple[tuple[int, ...], Expr]]:
    """Leftmost-outermost (pre-order) enumeration of all subterm positions."""
    out = [(path, e)]
    for i, a in enumerate(e.args):
        out.extend(subterm_paths(a, path + (i,)))
    return out


def replace_at(e: Expr, path: tuple[int, ...], new: Expr) -> Expr:
    if not path:
        return new
    i = path[0]
    args = list(e.args)
    args[i] = replace_at(args[i], path[1:], new)
    return Expr(e.op, tuple(args), e.value)


# ── Trace construction ──


@dataclass(frozen=True)
class TraceStep:
    tactic_kind: str  # simp_only | rw | nth_rewrite | final_simp
    rule_names: tuple[str, ...]
    tactic_text: str
    lhs_after: Expr
    rhs_after: Expr
    changed_side: str  # lhs | rhs | both | none (final_simp)
    position: int | None = None  # 1-based occurrence, nth_rewrite only


@dataclass(frozen=True)
class ProofTrace:
    initial_lhs: Expr
    initial_rhs: Expr
    steps: tuple[TraceStep, ...]

    def goal_before(self, index: int) -> tuple[Expr, Expr]:
        if index == 0:
            return (self.initial_lhs, self.initial_rhs)
        prev = self.steps[index - 1]
        return (prev.lhs_after, prev.rhs_after)


LITERALS = (X, Y, Not(X), Not(Y))
_MINTERM_SET = {
    And(Not(X), Not(Y)): 0,
    And(Not(X), Y): 1,
    And(X, Not(Y)): 2,
    And(X, Y): 3,
}
_MINTERM_ORDER = (
    And(Not(X), Not(Y)),
    And(Not(X), Y),
    And(X, Not(Y)),
    And(X, Y),
)


class _Tracer:
    def __init__(self, lhs: Expr, rhs: Expr, rules: dict[str, RewriteRule], verify_steps: bool, budget: int):
        self.lhs = lhs
        self.rhs = rhs
        self.rules = rules
        self.verify = verify_steps
        self.budget = [budget]
        self.steps: list[TraceStep] = []

    def _record(self, kind: str, rule_names: list[str], tactic_text: str,
                new_lhs: Expr, new_rhs: Expr, position: int | None = None) -> None:
        changed_l = new_lhs != self.lhs
        changed_r = new_rhs != self.rhs
        if not changed_l and not changed_r:
            return
        if self.verify:
            for before, after in ((self.lhs, new_lhs), (self.rhs, new_rhs)):
                if before != after and not exhaustive_equal(before, after, 8):
                    raise NormalizationError(
                        f"unsound step {tactic_text!r}", stuck_goal=(new_lhs, new_rhs)
                    )
        side = "both" if (changed_l and changed_r) else ("lhs" if changed_l else "rhs")
        self.steps.append(
            TraceStep(kind, tuple(rule_names), tactic_text, new_lhs, new_rhs, side, position)
        )
        self.lhs, self.rhs = new_lhs, new_rhs

    def simp_stage(self, names: list[str], reverse: bool = False) -> None:
        rules = [reversed_rule(self.rules[n]) if reverse else self.rules[n] for n in names]
        new_lhs = simp_only(rules, self.lhs, self.budget)
        new_rhs = simp_only(rules, self.rhs, self.budget)
        text = "simp only [" + ", ".join(r.tactic_name for r in rules) + "]"
        self._record("simp_only", names, text, new_lhs, new_rhs)

    def _occurrence_index(self, side: str, path: tuple[int, ...], target: Expr) -> int:
        """1-based rank of this occurrence among subterms equal to target,
        scanning the goal lhs-then-rhs in pre-order."""
        rank = 0
        for side_name, root in (("lhs", self.lhs), ("rhs", self.rhs)):
            for p, sub in subterm_paths(root):
                if sub == target:
                    rank += 1
                    if side_name == side and p == path:
                        return rank
        raise AssertionError("occurrence not found")

    def positional(self, rule_name: str, side: str, path: tuple[int, ...], replacement: Expr) -> None:
        root = self.lhs if side == "lhs" else self.rhs
        target = root
        for i in path:
            target = target.args[i]
        occ = self._occurrence_index(side, path, target)
        self.budget[0] -= 1
        if self.budget[0] <= 0:
            raise NormalizationError("rewrite budget exhausted")
        new_root = replace_at(root, path, replacement)
        if occ == 1:
            kind, text = "rw", f"rw [{rule_name}]"
        else:
            kind, text = "nth_rewrite", f"nth_rewrite {occ} [{rule_name}]"
        if side == "lhs":
            self._record(kind, [rule_name], text, new_root, self.rhs, position=occ)
        else:
            self._record(kind, [rule_name], text, self.lhs, new_root, position=occ)


def _coeff_value(node: Expr) -> int | None:
    if node.op == "const":
        return node.value
    if node.op == "neg" and node.args[0].op == "const":
        return (-node.args[0].value) & MASK32
    return None


def _coeff_expr(value: int) -> Expr:
    value &= MASK32
    if value > (1 << 31):
        return Neg(Const((1 << 32) - value))
    return Const(value)


def _flatten_add(e: Expr) -> list[Expr]:
    if e.op == "add":
        return _flatten_add(e.args[0]) + _flatten_add(e.args[1])
    return [e]


def canonical_sum(coeffs: list[int]) -> Expr:
    """Ordered minterm sum with nonzero coefficients only; 0#32 if empty."""
    terms = [
        Mul(_coeff_expr(c), m)
        for c, m in zip(coeffs, _MINTERM_ORDER)
        if c & MASK32 != 0
    ]
    if not terms:
        return Const(0)
    acc = terms[0]
    for t in terms[1:]:
        acc = Add(acc, t)
    return acc


def _side_coeffs(side: Expr) -> list[int]:
    """Minterm coefficients of a distributed sum of Mul(coeff, minterm)."""
    coeffs = [0, 0, 0, 0]
    for term in _flatten_add(side):
        if term.op != "mul":
            raise NormalizationError(f"unexpected term shape: {render(term)}")
        c = _coeff_value(term.args[0])
        idx = _MINTERM_SET.get(term.args[1])
        if c is None or idx is None:
            raise NormalizationError(f"unexpected term shape: {render(term)}")
        coeffs[idx] = (coeffs[idx] + c) & MASK32
    return coeffs


_COLLECT_RULES = ["bv32_add_comm", "bv32_add_assoc", "bv32_var_mul_comm", "bv32_mul_add"]
_OR_TO_ADD_RULES = [
    "bv32_or_eq_add41",
    "bv32_or_eq_add23",
    "bv32_or_eq_add13",
    "bv32_or_eq_add12",
    "bv32_or_eq_add14",
    "bv32_or_eq_add21",
    "bv32_or_eq_add31",
    "bv32_or_eq_add32",
]


def normalize_with_trace(
    lhs: Expr,
    rhs: Expr,
    rules: dict[str, RewriteRule] | None = None,
    verify_steps: bool = True,
    budget: int = 10_000,
) -> ProofTrace:
    """Reduce both equation sides to the canonical minterm sum, recording one
    trace step per goal change.  Raises NormalizationError if the sides do
    not meet or the step budget runs out."""
    rules = rules or load_rule_set()
    tr = _Tracer(lhs, rhs, rules, verify_steps, budget)

    tr.simp_stage(["bv32_add_neg_eq_sub"], reverse=True)
    tr.simp_stage(["bv32_neg_mul"], reverse=True)
    tr.simp_stage(["bv32_not_and"])
    tr.simp_stage(["bv32_not_or"])
    tr.simp_stage(["bv32_not_xor_eq_or"])
    tr.simp_stage(["bv32_xor_eq_or"])
    tr.simp_stage(["bv32_not_not"])

    # Two-literal disjunctions -> three-minterm sums, one positional step each.
    while True:
        target = _find_literal_or(tr)
        if target is None:
            break
        side, path, node = target
        a, b = node.args
        replacement = Add(
            Add(And(a, Not(b)), And(a, b)),
            And(Not(a), b),
        )
        tr.positional("bv32_or_eq_add_three", side, path, replacement)
    tr.simp_stage(["bv32_not_not"])

    # Bare literals under a coefficient -> two-minterm disjunctions.
    while True:
        target = _find_bare_literal(tr)
        if target is None:
            break
        side, path, atom = target
        if atom in (X, Not(X)):
            rule_name = "bv32_x_distr"
            replacement = Or(And(atom, Y), And(atom, Not(Y)))
        else:
            rule_name = "bv32_y_distr"
            replacement = Or(And(X, atom), And(Not(X), atom))
        tr.positional(rule_name, side, path, replacement)

    tr.simp_stage(_OR_TO_ADD_RULES)
    tr.simp_stage(["bv32_mul_add"])

    # Goal-directed collection into the canonical ordered sum, per side.
    for side in ("lhs", "rhs"):
        current = tr.lhs if side == "lhs" else tr.rhs
        canonical = canonical_sum(_side_coeffs(current))
        if canonical != current:
            text = "simp only [" + ", ".join(_COLLECT_RULES) + "]"
            if side == "lhs":
                tr._record("simp_only", _COLLECT_RULES, text, canonical, tr.rhs)
            else:
                tr._record("simp_only", _COLLECT_RULES, text, tr.lhs, canonical)

    if tr.lhs != tr.rhs:
        raise NormalizationError(
            "sides did not meet at a common canonical form", stuck_goal=(tr.lhs, tr.rhs)
        )
    tr.steps.append(
        TraceStep("final_simp", (), "simp", tr.lhs, tr.rhs, "none", None)
    )
    return ProofTrace(lhs, rhs, tuple(tr.steps))


def _find_literal_or(tr: _Tracer):
    for side, root in (("lhs", tr.lhs), ("rhs", tr.rhs)):
        for path, node in subterm_paths(root):
            if node.op == "or" and node.args[0] in LITERALS and node.args[1] in LITERALS:
                return side, path, node
    return None


def _find_bare_literal(tr: _Tracer):
    for side, root in (("lhs", tr.lhs), ("rhs", tr.rhs)):
        for path, node in subterm_paths(root):
            if node.op == "mul" and node.args[1] in LITERALS:
                return side, path + (1,), node.args[1]
    return None


# ── Emission ──


def emit_proof_script(theorem_name: str, informal: str, trace: ProofTrace) -> str:
    """Complete Lean theorem, one tactic line per step, closing with simp."""
    lines = [
        "/-- ",
        informal,
        "-/ ",
        f"theorem {theorem_name} (x y : BitVec 32) : "
        f"{render(trace.initial_lhs)} = {render(trace.initial_rhs)} := by",
    ]
    for k, step in enumerate(trace.steps, start=1):
        if step.tactic_kind == "final_simp":
            lines.append("  simp")
        else:
            lines.append(f"  {step.tactic_text} /- step {k} -/")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class StepLemma:
    name: str
    step_index: int  # 1-based global step number
    side: str  # lhs | rhs
    statement_lhs: Expr
    statement_rhs: Expr
    tactic_text: str
    expected_rule: str

    @property
    def statement_text(self) -> str:
        return (
            f"lemma {self.name} (x y : BitVec 32) : "
            f"{render(self.statement_lhs)} = {render(self.statement_rhs)} := by"
        )

    def full_text(self) -> str:
        return self.statement_text + f"\n  {self.tactic_text}\n"


def extract_step_lemmas(theorem_name: str, trace: ProofTrace) -> list[StepLemma]:
    """One lemma per side change; LHS lemma first when a step changes both."""
    out: list[StepLemma] = []
    prev_lhs, prev_rhs = trace.initial_lhs, trace.initial_rhs
    for k, step in enumerate(trace.steps, start=1):
        if step.tactic_kind == "final_simp":
            continue
        if step.lhs_after != prev_lhs:
            out.append(
                StepLemma(
                    name=f"{theorem_name}_lhs_step_{k}",
                    step_index=k,
                    side="lhs",
                    statement_lhs=prev_lhs,
                    statement_rhs=step.lhs_after,
                    tactic_text=step.tactic_text,
                    expected_rule=step.rule_names[0],
                )
            )
        if step.rhs_after != prev_rhs:
            out.append(
                StepLemma(
                    name=f"{theorem_name}_rhs_step_{k}",
                    step_index=k,
                    side="rhs",
                    statement_lhs=prev_rhs,
                    statement_rhs=step.rhs_after,
                    tactic_text=step.tactic_text,
                    expected_rule=step.rule_names[0],
                )
            )
        prev_lhs, prev_rhs = step.lhs_after, step.rhs_after
    return out


STEP_CHALLENGE_INSTRUCTION = (
    "You are proving a single step of theorem '{theorem}'. Based on the previous "
    "steps, select exactly one appropriate theorem from the Theorem library above "
    "and insert it in place of <Theorem here> to complete the proof of lemma "
    "'{lemma}'. Do not modify any code from previous theorems or lemmas. You are "
    "also not allowed to add any other tactics to the proof body."
)


def emit_step_challenge(
    library_text: str,
    theorem_name: str,
    informal: str,
    trace: ProofTrace,
    lemmas: list[StepLemma],
    target_index: int,
) -> str:
    """Prompt for one step lemma: library, main theorem truncated before the
    target step, all prior step lemmas, and the target with a hole."""
    target = lemmas[target_index]
    main_lines = [
        "/-- ",
        informal,
        "-/ ",
        f"theorem {theorem_name} (x y : BitVec 32) : "
        f"{render(trace.initial_lhs)} = {render(trace.initial_rhs)} := by",
    ]
    for k, step in enumerate(trace.steps, start=1):
        if k >= target.step_index or step.tactic_kind == "final_simp":
            break
        main_lines.append(f"  {step.tactic_text} /- step {k} -/")
    main_lines.append("  sorry")
    prior = "\n".join(lem.full_text() for lem in lemmas[:target_index])
    hole_lemma = target.statement_text + "\n  simp only [<Theorem here>]"
    parts = [library_text, "\n".join(main_lines)]
    if prior:
        parts.append(prior)
    parts.append(hole_lemma)
    code = "\n\n".join(p.strip("\n") for p in parts) + "\n"
    return (
        "Theorem library:\n\n```lean4\n"
        + code
        + "```\n\n"
        + STEP_CHALLENGE_INSTRUCTION.format(theorem=theorem_name, lemma=target.name)
        + "\n"
    )


def grade_step_response(
    response_text: str,
    expected_rule: str,
    prev_goal: Expr,
    next_goal: Expr,
    rules: dict[str, RewriteRule] | None = None,
) -> str:
    """'correct' | 'incorrect' | 'unparseable'.

    Correct iff the single cited library lemma rewrites prev_goal into
    next_goal (name equality with the expected rule is sufficient but not
    necessary: interchangeable duplicates are accepted).
    """
    rules = rules or load_rule_set()
    cited = {m for m in re.findall(r"bv32_\w+", response_text) if m in rules}
    if len(cited) != 1:
        return "unparseable"
    (name,) = cited
    if name == expected_rule:
        return "correct"
    rule = rules[name]
    if rule.pattern.op == "meta":
        # Expansion rules match everything; only exact naming is checkable.
        return "incorrect"
    try:
        for candidate in (rule, reversed_rule(rule)):
            if candidate.pattern.op == "meta":
                continue
            if simp_only([candidate], prev_goal, [10_000]) == next_goal:
                return "correct"
    except NormalizationError:
        return "incorrect"
    return "incorrect"

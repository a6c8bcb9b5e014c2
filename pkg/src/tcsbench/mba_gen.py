"""Generation of provably-equivalent MBA (mixed boolean-arithmetic) equation
pairs over two 32-bit bit-vectors.

Linear pairs come from a zero-sum construction: a random signed combination
of boolean basis terms is completed with minterm-basis corrections so the
whole sum is identically zero, then terms are redistributed across the two
equation sides with flipped signs.  Nonlinear pairs wrap a linear equation
in oracle-verified identity transformations.  Every emitted pair is checked
by exhaustive width-8 and random width-32 evaluation before it is accepted.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .bb_gen import render_prompt
from .mba_ast import (
    BASIS_EXPRS,
    MASK32,
    Add,
    And,
    Const,
    Expr,
    LinearTerm,
    Mul,
    Neg,
    Not,
    Or,
    X,
    Y,
    eval_expr,
    exhaustive_equal,
    random_equal,
    render,
    render_terms,
    render_terms_latex,
    terms_to_expr,
    w2dnf_linear,
)


class GenerationError(RuntimeError):
    """The rejection-sampling budget ran out; retry with another seed."""


class InternalConsistencyError(RuntimeError):
    """A supposedly semantics-preserving transformation changed semantics."""


# Basis indices whose functions are exactly one minterm, keyed by the
# minterm position (m00, m01, m10, m11) they cover.
_CORRECTION_BASES = (9, 10, 6, 2)

# The remaining twelve basis functions, used for the free draw.
_FREE_BASES = tuple(b for b in range(16) if b not in _CORRECTION_BASES)

MAX_COEFF = 11


def _basis_truth(b: int) -> tuple[int, int, int, int]:
    e = BASIS_EXPRS[b]
    return tuple(eval_expr(e, i, j, 1) for i in (0, 1) for j in (0, 1))


def gen_zero_sum(seed: int, n_terms: int, attempts: int = 1000) -> list[LinearTerm]:
    """A list of n_terms signed basis terms whose sum is identically zero.

    The last four terms sit on the minterm bases and cancel, over the
    integers, whatever residual the free draw left at each minterm; draws
    whose corrections fall outside ±11 (or vanish) are rejected.
    """
    if n_terms < 6:
        # With fewer than two free draws some correction coefficient is
        # forced to zero: no single basis function covers all four corners.
        raise ValueError("n_terms must be >= 6")
    if n_terms > 4 + len(_FREE_BASES):
        raise ValueError("n_terms too large for distinct basis terms")
    rng = random.Random(seed)
    for _ in range(attempts):
        bases = rng.sample(_FREE_BASES, n_terms - 4)
        terms = [
            LinearTerm(rng.randint(1, MAX_COEFF) * rng.choice((1, -1)), b)
            for b in bases
        ]
        residual = [0, 0, 0, 0]
        for t in terms:
            truth = _basis_truth(t.basis)
            for p in range(4):
                residual[p] += t.coeff * truth[p]
        corrections = [-r for r in residual]
        if any(c == 0 or abs(c) > MAX_COEFF for c in corrections):
            continue
        terms.extend(
            LinearTerm(c, b) for c, b in zip(corrections, _CORRECTION_BASES)
        )
        assert w2dnf_linear(terms).as_tuple() == (0, 0, 0, 0)
        return terms
    raise GenerationError(f"no zero-sum draw within {attempts} attempts (seed={seed})")


@dataclass(frozen=True)
class MbaEquation:
    """One equivalence challenge; term lists drive rendering and proofs."""

    lhs_terms: tuple[LinearTerm, ...]
    rhs_terms: tuple[LinearTerm, ...]
    seed: int
    nonlinear_lhs: Expr | None = None
    nonlinear_rhs: Expr | None = None
    # Reference equations transcribed from print carry their published id.
    id_override: str | None = None

    @property
    def kind(self) -> str:
        return "nonlinear" if self.nonlinear_lhs is not None else "linear"

    @property
    def lhs_expr(self) -> Expr:
        return self.nonlinear_lhs or terms_to_expr(list(self.lhs_terms))

    @property
    def rhs_expr(self) -> Expr:
        return self.nonlinear_rhs or terms_to_expr(list(self.rhs_terms))

    @property
    def equation_text(self) -> str:
        return f"{render(self.lhs_expr)} = {render(self.rhs_expr)}"

    @property
    def challenge_id(self) -> str:
        return self.id_override or challenge_id(self.equation_text)

    @property
    def theorem_name(self) -> str:
        return f"mba_challenge_{self.challenge_id}"


def challenge_id(statement_text: str) -> str:
    """Stable 8-hex identifier of the rendered statement."""
    return hashlib.sha256(statement_text.encode()).hexdigest()[:8]


def redistribute(zero_terms: list[LinearTerm], seed: int, rhs_count: int = 1) -> MbaEquation:
    """Move rhs_count randomly chosen terms to the right side, signs flipped;
    side order otherwise preserved."""
    if not 1 <= rhs_count < len(zero_terms):
        raise ValueError("rhs_count must leave at least one term per side")
    rng = random.Random(seed)
    rhs_idx = set(rng.sample(range(len(zero_terms)), rhs_count))
    lhs = [t for i, t in enumerate(zero_terms) if i not in rhs_idx]
    rhs = [
        LinearTerm(-t.coeff, t.basis)
        for i, t in enumerate(zero_terms)
        if i in rhs_idx
    ]
    return MbaEquation(lhs_terms=tuple(lhs), rhs_terms=tuple(rhs), seed=seed)


def _merge_duplicates(terms: list[LinearTerm]) -> list[LinearTerm] | None:
    """Merge repeated bases; None when a merge cancels or exceeds ±11."""
    order: list[int] = []
    acc: dict[int, int] = {}
    for t in terms:
        if t.basis not in acc:
            order.append(t.basis)
            acc[t.basis] = 0
        acc[t.basis] += t.coeff
    for c in acc.values():
        if c == 0 or abs(c) > MAX_COEFF:
            return None
    return [LinearTerm(acc[b], b) for b in order]


def generate_linear(seed: int, n_terms: int, rhs_count: int = 1, attempts: int = 100) -> MbaEquation:
    """Zero-sum draw + redistribution, retried over derived seeds until the
    merged sides stay within the coefficient range."""
    for k in range(attempts):
        sub_seed = seed * 1_000_003 + k
        try:
            zero = gen_zero_sum(sub_seed, n_terms)
        except GenerationError:
            continue
        eq = redistribute(zero, sub_seed, rhs_count)
        lhs = _merge_duplicates(list(eq.lhs_terms))
        rhs = _merge_duplicates(list(eq.rhs_terms))
        if lhs is None or rhs is None:
            continue
        return MbaEquation(lhs_terms=tuple(lhs), rhs_terms=tuple(rhs), seed=seed)
    raise GenerationError(f"no linear equation within {attempts} attempts (seed={seed})")


# ── Nonlinear wrapping ──

_ALL_ONES = Const(MASK32)


def _subterm_paths(e: Expr, path=()):
    yield path, e
    for i, a in enumerate(e.args):
        yield from _subterm_paths(a, path + (i,))


def _replace_at(e: Expr, path, new: Expr) -> Expr:
    if not path:
        return new
    args = list(e.args)
    args[path[0]] = _replace_at(args[path[0]], path[1:], new)
    return Expr(e.op, tuple(args), e.value)


def _neg_coeff(c: Expr) -> Expr:
    if c.op == "neg":
        return c.args[0]
    return Neg(c)


def _is_boolean(e: Expr) -> bool:
    return e.op in ("var", "and", "or", "xor", "not")


def _wrap_candidates(root: Expr):
    """(path, replacement) pairs for each identity wrapper applicable here."""
    out = []
    for path, node in _subterm_paths(root):
        if _is_boolean(node) or node.op in ("mul", "add"):
            out.append((path, Mul(Const(1), node)))
        if _is_boolean(node):
            out.append((path, Not(Not(node))))
        if node.op == "mul" and node.args[0].op in ("const", "neg"):
            c, e = node.args
            out.append((path, Mul(_neg_coeff(c), Mul(e, _ALL_ONES))))
        if (
            node.op == "add"
            and node.args[0].op == "mul"
            and node.args[1].op == "mul"
            and node.args[0].args[0] == node.args[1].args[0]
        ):
            a = node.args[0].args[0]
            out.append((path, Mul(a, Add(node.args[0].args[1], node.args[1].args[1]))))
        if node == X:
            out.append((path, Add(And(X, Y), And(X, Not(Y)))))
        if node == Y:
            out.append((path, Add(And(X, Y), And(Not(X), Y))))
    return out


def make_nonlinear(eq: MbaEquation, seed: int, wrap_budget: int) -> MbaEquation:
    """Apply wrap_budget random identity wrappers to random subterms; the
    result is oracle-verified against the linear original before return."""
    if eq.kind != "linear":
        raise ValueError("make_nonlinear expects a linear equation")
    if wrap_budget == 0:
        return eq
    rng = random.Random(seed)
    sides = [eq.lhs_expr, eq.rhs_expr]
    for _ in range(wrap_budget):
        side = rng.randrange(2)
        candidates = _wrap_candidates(sides[side])
        if not candidates:
            side = 1 - side
            candidates = _wrap_candidates(sides[side])
            if not candidates:
                break
        path, replacement = rng.choice(list(candidates))
        sides[side] = _replace_at(sides[side], path, replacement)
    for wrapped, original in zip(sides, (eq.lhs_expr, eq.rhs_expr)):
        if not exhaustive_equal(wrapped, original, 8) or not random_equal(
            wrapped, original, 10_000, seed
        ):
            raise InternalConsistencyError("unsound wrapper; refusing to emit")
    return MbaEquation(
        lhs_terms=eq.lhs_terms,
        rhs_terms=eq.rhs_terms,
        seed=seed,
        nonlinear_lhs=sides[0],
        nonlinear_rhs=sides[1],
    )


# ── Rendering ──

_LATEX_OPS = {"and": r"\land ", "or": r"\lor ", "xor": r"\oplus "}


def _latex(e: Expr, top: bool = False) -> str:
    if e.op == "var":
        return e.value
    if e.op == "const":
        v = e.value
        return str(v - (1 << 32)) if v > (1 << 31) else str(v)
    if e.op == "not":
        return r"\lnot " + _latex(e.args[0])
    if e.op == "neg":
        return "-" + _latex(e.args[0])
    if e.op in _LATEX_OPS:
        body = _LATEX_OPS[e.op].join(_latex(a) for a in e.args)
        return body if top else f"({body})"
    if e.op == "mul":
        return r"\cdot ".join(_latex(a) for a in e.args)
    if e.op == "add":
        return _latex(e.args[0], top) + "+" + _latex(e.args[1])
    if e.op == "sub":
        return _latex(e.args[0], top) + "-" + _latex(e.args[1])
    raise ValueError(f"unknown op {e.op!r}")


def render_mba_informal(eq: MbaEquation) -> str:
    if eq.kind == "linear":
        lhs = render_terms_latex(list(eq.lhs_terms))
        rhs = render_terms_latex(list(eq.rhs_terms))
    else:
        lhs = _latex(eq.lhs_expr, top=True)
        rhs = _latex(eq.rhs_expr, top=True)
    return (
        "Let x,y be 32-bit bit-vectors. Prove the equivalence of the "
        f"following two expressions: ${lhs}$, ${rhs}$"
    )


def render_mba_lean(eq: MbaEquation, library_text: str | None = None) -> str:
    """Challenge file: optional lemma library, docstring, theorem stub."""
    block = (
        "/-- \n"
        + render_mba_informal(eq)
        + "\n-/ \n"
        + f"theorem {eq.theorem_name} (x y : BitVec 32) : {eq.equation_text} := by\n"
        + "  sorry\n"
    )
    if library_text:
        return library_text.rstrip("\n") + "\n\n" + block
    return block


def verify_equation(eq: MbaEquation, seed: int = 0) -> bool:
    """Exhaustive width-8 plus 10^4 random width-32 evaluation equality."""
    return exhaustive_equal(eq.lhs_expr, eq.rhs_expr, 8) and random_equal(
        eq.lhs_expr, eq.rhs_expr, 10_000, seed
    )


# ── File emission ──


def manifest_row(eq: MbaEquation, with_lemmas: bool) -> dict:
    return {
        "challenge_id": eq.challenge_id,
        "kind": eq.kind,
        "with_lemmas": with_lemmas,
        "lean_file": f"mba/{eq.theorem_name}.lean",
        "prompt_file": f"mba/prompts/{eq.theorem_name}.txt",
        "lhs_terms": [[t.coeff, t.basis] for t in eq.lhs_terms],
        "rhs_terms": [[t.coeff, t.basis] for t in eq.rhs_terms],
        "seed": eq.seed,
    }


def write_challenges(
    equations: list[MbaEquation],
    out_dir: Path,
    with_lemmas: bool = False,
    library_text: str | None = None,
) -> Path:
    """Writes .lean files, prompts and the JSONL manifest under out_dir/mba."""
    mba_dir = out_dir / "mba"
    prompt_dir = mba_dir / "prompts"
    prompt_dir.mkdir(parents=True, exist_ok=True)
    manifest = mba_dir / "manifest.jsonl"
    lib = library_text if with_lemmas else None
    with manifest.open("w") as fh:
        for eq in equations:
            lean_text = render_mba_lean(eq, lib)
            (mba_dir / f"{eq.theorem_name}.lean").write_text(lean_text)
            (prompt_dir / f"{eq.theorem_name}.txt").write_text(render_prompt(lean_text))
            fh.write(json.dumps(manifest_row(eq, with_lemmas), ensure_ascii=False) + "\n")
    return manifest


def library_text() -> str:
    """The bv32 lemma library shipped with the package."""
    from importlib import resources

    return (resources.files("tcsbench") / "data" / "lemma_library.lean").read_text()


# The two printed reference equations, entered as term lists.
FIXTURE_02A2F35E = MbaEquation(
    lhs_terms=(
        LinearTerm(2, 14),
        LinearTerm(-1, 5),
        LinearTerm(-7, 7),
        LinearTerm(11, 11),
        LinearTerm(-5, 9),
        LinearTerm(-13, 13),
        LinearTerm(6, 2),
    ),
    rhs_terms=(LinearTerm(10, 6),),
    seed=0,
    id_override="02a2f35e",
)

FIXTURE_88282D89 = MbaEquation(
    lhs_terms=(
        LinearTerm(1, 14),
        LinearTerm(1, 7),
        LinearTerm(-3, 5),
        LinearTerm(1, 9),
        LinearTerm(3, 6),
        LinearTerm(1, 2),
    ),
    rhs_terms=(LinearTerm(1, 13),),
    seed=0,
    id_override="88282d89",
)

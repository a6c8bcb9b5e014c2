"""Bitvector mixed boolean-arithmetic expressions over two variables.

The AST covers the operators &&&, |||, ^^^, ~~~, +, -, unary -, * with
wraparound semantics at a configurable width (32 canonical).  Includes the
16-entry two-variable boolean basis, the weighted-minterm canonical
coefficients (one residue mod 2^32 per conjunction ¬x∧¬y, ¬x∧y, x∧¬y,
x∧y), and the coefficient-equality decision procedure for linear
equations.

Text rendering follows Lean 4 operator precedence so that rendered terms
are valid BitVec 32 expressions: ~~~ tightest, then prefix -, then *,
then + / - (left-associative), then &&&, ^^^, ||| loosest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK32 = (1 << 32) - 1


class UnsupportedShapeError(ValueError):
    """Input expression is not a weighted sum of boolean basis terms."""


@dataclass(frozen=True)
class Expr:
    op: str  # var | const | not | and | or | xor | add | sub | neg | mul
    args: tuple["Expr", ...] = ()
    value: int | str | None = None

    def __repr__(self) -> str:
        if self.op == "var":
            return f"Var({self.value})"
        if self.op == "const":
            return f"Const({self.value})"
        return f"{self.op.capitalize()}({', '.join(map(repr, self.args))})"


def Var(name: str) -> Expr:
    if name not in ("x", "y"):
        raise ValueError("only variables x and y are supported")
    return Expr("var", value=name)


def Const(v: int) -> Expr:
    return Expr("const", value=v & MASK32)


def Not(e: Expr) -> Expr:
    return Expr("not", (e,))


def And(a: Expr, b: Expr) -> Expr:
    return Expr("and", (a, b))


def Or(a: Expr, b: Expr) -> Expr:
    return Expr("or", (a, b))


def Xor(a: Expr, b: Expr) -> Expr:
    return Expr("xor", (a, b))


def Add(a: Expr, b: Expr) -> Expr:
    return Expr("add", (a, b))


def Sub(a: Expr, b: Expr) -> Expr:
    return Expr("sub", (a, b))


def Neg(e: Expr) -> Expr:
    return Expr("neg", (e,))


def Mul(a: Expr, b: Expr) -> Expr:
    return Expr("mul", (a, b))


X = Var("x")
Y = Var("y")


# ── Evaluation ──


def eval_expr(e: Expr, x, y, width: int = 32):
    """Evaluate with two's-complement wraparound at the given width.

    x and y may be ints or numpy uint64 arrays; constants are reinterpreted
    mod 2^width.
    """
    if not (1 <= width <= 32):
        raise ValueError("width must be in 1..32")
    mask = (1 << width) - 1
    if isinstance(x, np.ndarray):
        mask_v = np.uint64(mask)
        return _eval_np(e, x.astype(np.uint64), y.astype(np.uint64), mask_v)
    return _eval_int(e, x & mask, y & mask, mask)


def _eval_int(e: Expr, x: int, y: int, mask: int) -> int:
    op = e.op
    if op == "var":
        return x if e.value == "x" else y
    if op == "const":
        return e.value & mask
    a = _eval_int(e.args[0], x, y, mask)
    if op == "not":
        return a ^ mask
    if op == "neg":
        return (-a) & mask
    b = _eval_int(e.args[1], x, y, mask)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "add":
        return (a + b) & mask
    if op == "sub":
        return (a - b) & mask
    if op == "mul":
        return (a * b) & mask
    raise ValueError(f"unknown op {op!r}")


def _eval_np(e: Expr, x, y, mask):
    op = e.op
    if op == "var":
        return x if e.value == "x" else y
    if op == "const":
        return np.full_like(x, np.uint64(e.value) & mask)
    a = _eval_np(e.args[0], x, y, mask)
    if op == "not":
        return a ^ mask
    if op == "neg":
        return (np.uint64(0) - a) & mask
    b = _eval_np(e.args[1], x, y, mask)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "add":
        return (a + b) & mask
    if op == "sub":
        return (a - b) & mask
    if op == "mul":
        return (a * b) & mask
    raise ValueError(f"unknown op {op!r}")


def exhaustive_equal(e1: Expr, e2: Expr, width: int = 8) -> bool:
    """Evaluation equality over all 2^(2w) input pairs (vectorized)."""
    n = 1 << width
    xs = np.repeat(np.arange(n, dtype=np.uint64), n)
    ys = np.tile(np.arange(n, dtype=np.uint64), n)
    return bool(np.array_equal(eval_expr(e1, xs, ys, width), eval_expr(e2, xs, ys, width)))


def random_equal(e1: Expr, e2: Expr, n_samples: int, seed: int = 0) -> bool:
    """Evaluation equality on n_samples random 32-bit pairs."""
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, 1 << 32, size=n_samples, dtype=np.uint64)
    ys = rng.integers(0, 1 << 32, size=n_samples, dtype=np.uint64)
    return bool(np.array_equal(eval_expr(e1, xs, ys, 32), eval_expr(e2, xs, ys, 32)))


# ── Boolean basis: 4x4 grid, row-major ──

BASIS_EXPRS: tuple[Expr, ...] = (
    X,                      # 0
    Or(X, Y),               # 1
    And(X, Y),              # 2
    Xor(X, Y),              # 3
    Not(X),                 # 4
    Or(X, Not(Y)),          # 5
    And(X, Not(Y)),         # 6
    Not(Xor(X, Y)),         # 7
    Y,                      # 8
    Not(Or(X, Y)),          # 9
    And(Not(X), Y),         # 10
    Not(And(X, Y)),         # 11
    Not(Y),                 # 12
    Not(Or(X, Not(Y))),     # 13
    Not(And(X, Not(Y))),    # 14
    Not(And(Not(X), Y)),    # 15
)

BASIS_LATEX: tuple[str, ...] = (
    "x",
    r"(x\lor y)",
    r"(x\land y)",
    r"(x\oplus y)",
    r"\lnot x",
    r"(x\lor \lnot y)",
    r"(x\land \lnot y)",
    r"\lnot (x\oplus y)",
    "y",
    r"\lnot (x\lor y)",
    r"(\lnot x\land y)",
    r"\lnot (x\land y)",
    r"\lnot y",
    r"\lnot (x\lor \lnot y)",
    r"\lnot (x\land \lnot y)",
    r"\lnot (\lnot x\land y)",
)

# Minterms in canonical order m00, m01, m10, m11 (m_ij: x-literal i, y-literal j;
# 0 = negated literal).
MINTERM_EXPRS: tuple[Expr, ...] = (
    And(Not(X), Not(Y)),
    And(Not(X), Y),
    And(X, Not(Y)),
    And(X, Y),
)


@dataclass(frozen=True)
class LinearTerm:
    coeff: int  # signed, nonzero, |coeff| <= 11 for generated challenges
    basis: int  # index into BASIS_EXPRS

    def __post_init__(self):
        if self.coeff == 0:
            raise ValueError("coefficient must be nonzero")
        if not (0 <= self.basis < 16):
            raise ValueError("basis index out of range")


@dataclass(frozen=True)
class W2dnfCoeffs:
    """Weights of the four minterms, each reduced mod 2^32."""

    c00: int
    c01: int
    c10: int
    c11: int

    def __post_init__(self):
        for name in ("c00", "c01", "c10", "c11"):
            object.__setattr__(self, name, getattr(self, name) & MASK32)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.c00, self.c01, self.c10, self.c11)

    def __add__(self, other: "W2dnfCoeffs") -> "W2dnfCoeffs":
        return W2dnfCoeffs(*[(a + b) & MASK32 for a, b in zip(self.as_tuple(), other.as_tuple())])

    def scale(self, s: int) -> "W2dnfCoeffs":
        return W2dnfCoeffs(*[(a * s) & MASK32 for a in self.as_tuple()])


def basis_w2dnf(b: int) -> W2dnfCoeffs:
    """0/1 indicator of which minterms the basis function covers.

    Computed from the 1-bit truth table: entry c_ij is the function value at
    x = i, y = j.
    """
    e = BASIS_EXPRS[b]
    return W2dnfCoeffs(*(eval_expr(e, i, j, 1) for i in (0, 1) for j in (0, 1)))


def w2dnf_linear(terms: list[LinearTerm]) -> W2dnfCoeffs:
    acc = W2dnfCoeffs(0, 0, 0, 0)
    for t in terms:
        acc = acc + basis_w2dnf(t.basis).scale(t.coeff)
    return acc


def is_linear(e: Expr) -> bool:
    """Weighted sum of pure-boolean terms: no products of variable-dependent
    subterms, no arithmetic beneath a bitwise operator."""

    def pure_bool(node: Expr) -> bool:
        if node.op == "var":
            return True
        if node.op in ("not", "and", "or", "xor"):
            return all(pure_bool(a) for a in node.args)
        return False

    def term(node: Expr) -> bool:
        if node.op == "neg":
            return term(node.args[0])
        if node.op == "const":
            return True
        if node.op == "mul":
            lhs, rhs = node.args
            coeff_ok = lhs.op == "const" or (lhs.op == "neg" and lhs.args[0].op == "const")
            return coeff_ok and (pure_bool(rhs) or rhs.op == "const")
        return pure_bool(node)

    def chain(node: Expr) -> bool:
        if node.op in ("add", "sub"):
            return chain(node.args[0]) and term(node.args[1])
        return term(node)

    return chain(e)


def corner_probe(e: Expr) -> W2dnfCoeffs:
    """Minterm coefficients of a linear expression via the four corner inputs.

    At x, y ∈ {0, allOnes} exactly one minterm evaluates to allOnes = -1,
    so each corner value is the negated coefficient of that minterm.
    """
    if not is_linear(e):
        raise UnsupportedShapeError(f"not a linear MBA expression: {e!r}")
    ones = MASK32
    vals = []
    for i in (0, 1):
        for j in (0, 1):
            v = eval_expr(e, ones if i else 0, ones if j else 0, 32)
            vals.append((-v) & MASK32)
    return W2dnfCoeffs(*vals)


def equivalent(lhs: list[LinearTerm], rhs: list[LinearTerm]) -> bool:
    """Linear MBA equivalence: identical minterm coefficients mod 2^32."""
    return w2dnf_linear(lhs) == w2dnf_linear(rhs)


# ── Rendering ──

_PREC = {
    "or": 55,
    "xor": 58,
    "and": 60,
    "add": 65,
    "sub": 65,
    "mul": 70,
    "neg": 75,
    "not": 100,
    "var": 1000,
    "const": 1000,
}
_INFIX = {"or": "|||", "xor": "^^^", "and": "&&&", "add": "+", "sub": "-", "mul": "*"}


def render(e: Expr, min_prec: int = 0) -> str:
    """Lean 4 source text of the expression (constants as k#32)."""
    op = e.op
    if op == "var":
        return str(e.value)
    if op == "const":
        return f"{e.value}#32"
    if op == "not":
        text = "~~~" + render(e.args[0], _PREC["not"])
        return f"({text})" if _PREC["not"] < min_prec else text
    if op == "neg":
        text = "-" + render(e.args[0], _PREC["neg"] + 1)
        return f"({text})" if _PREC["neg"] < min_prec else text
    prec = _PREC[op]
    text = (
        render(e.args[0], prec)
        + f" {_INFIX[op]} "
        + render(e.args[1], prec + 1)
    )
    return f"({text})" if prec < min_prec else text


# ── Parsing (inverse of render; test oracle and manifest round-trips) ──


class ParseError(ValueError):
    pass


def _tokenize(text: str) -> list[str]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        for sym in ("~~~", "|||", "^^^", "&&&"):
            if text.startswith(sym, i):
                tokens.append(sym)
                i += len(sym)
                break
        else:
            if c in "()+-*":
                tokens.append(c)
                i += 1
            elif c.isdigit():
                j = i
                while j < n and text[j].isdigit():
                    j += 1
                if not text.startswith("#32", j):
                    raise ParseError(f"constant missing #32 suffix at {i}")
                tokens.append(text[i:j] + "#32")
                i = j + 3
            elif c in "xy":
                tokens.append(c)
                i += 1
            else:
                raise ParseError(f"unexpected character {c!r} at {i}")
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input")
        self.pos += 1
        return tok

    _BIN = {"|||": 55, "^^^": 58, "&&&": 60, "+": 65, "-": 65, "*": 70}
    _CTOR = {"|||": Or, "^^^": Xor, "&&&": And, "+": Add, "-": Sub, "*": Mul}

    def expr(self, min_prec: int = 0) -> Expr:
        left = self.atom()
        while True:
            tok = self.peek()
            if tok not in self._BIN or self._BIN[tok] < min_prec:
                return left
            self.next()
            right = self.expr(self._BIN[tok] + 1)
            left = self._CTOR[tok](left, right)

    def atom(self) -> Expr:
        tok = self.next()
        if tok == "(":
            inner = self.expr()
            if self.next() != ")":
                raise ParseError("expected ')'")
            return inner
        if tok == "~~~":
            return Not(self.atom())
        if tok == "-":
            return Neg(self.expr(_PREC["neg"] + 1))
        if tok in ("x", "y"):
            return Var(tok)
        if tok.endswith("#32"):
            return Const(int(tok[:-3]))
        raise ParseError(f"unexpected token {tok!r}")


def parse(text: str) -> Expr:
    parser = _Parser(_tokenize(text))
    e = parser.expr()
    if parser.peek() is not None:
        raise ParseError(f"trailing input at token {parser.pos}")
    return e


def terms_to_expr(terms: list[LinearTerm]) -> Expr:
    """Coefficient-sum AST in rendering order: magnitudes with +/- joins and a
    prefix-negated leading coefficient."""
    if not terms:
        return Const(0)
    acc = _coeff_term(terms[0], leading=True)
    for t in terms[1:]:
        mag = _coeff_term(t, leading=False)
        acc = Add(acc, mag) if t.coeff > 0 else Sub(acc, mag)
    return acc


def _coeff_term(t: LinearTerm, leading: bool) -> Expr:
    mag = Mul(Const(abs(t.coeff)), BASIS_EXPRS[t.basis])
    if leading and t.coeff < 0:
        return Mul(Neg(Const(abs(t.coeff))), BASIS_EXPRS[t.basis])
    return mag


def expr_to_terms(e: Expr) -> list[LinearTerm]:
    """Inverse of terms_to_expr on rendered linear sums."""
    flat: list[tuple[int, Expr]] = []

    def walk(node: Expr, sign: int):
        if node.op == "add":
            walk(node.args[0], sign)
            walk(node.args[1], sign)
        elif node.op == "sub":
            walk(node.args[0], sign)
            walk(node.args[1], -sign)
        else:
            flat.append((sign, node))

    walk(e, 1)
    out = []
    for sign, node in flat:
        if node.op != "mul":
            raise UnsupportedShapeError(f"term without coefficient: {node!r}")
        coeff_node, basis_node = node.args
        if coeff_node.op == "neg" and coeff_node.args[0].op == "const":
            coeff = -coeff_node.args[0].value * sign
        elif coeff_node.op == "const":
            coeff = coeff_node.value * sign
        else:
            raise UnsupportedShapeError(f"non-constant coefficient: {coeff_node!r}")
        try:
            basis = BASIS_EXPRS.index(basis_node)
        except ValueError:
            raise UnsupportedShapeError(f"not a basis term: {basis_node!r}") from None
        out.append(LinearTerm(coeff, basis))
    return out


def render_terms(terms: list[LinearTerm]) -> str:
    return render(terms_to_expr(terms))


def render_terms_latex(terms: list[LinearTerm]) -> str:
    """Informal-description sum, e.g. ``2\\cdot \\lnot (x\\land \\lnot y)-1\\cdot ...``."""
    parts = []
    for k, t in enumerate(terms):
        body = f"{abs(t.coeff)}\\cdot {BASIS_LATEX[t.basis]}"
        if k == 0:
            parts.append(("-" if t.coeff < 0 else "") + body)
        else:
            parts.append(("-" if t.coeff < 0 else "+") + body)
    return "".join(parts)

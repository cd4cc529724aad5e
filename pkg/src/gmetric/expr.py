"""A small arithmetic language for writing maps in scenario files.

Grammar (left-associative, unary minus binds tightest)::

    program   := piecewise | sum
    piecewise := ("on" labels ":" sum ";")+ "else" ":" sum
    labels    := NAME ("," NAME)*
    sum       := product (("+" | "-") product)*
    product   := unary (("*" | "/") unary)*
    unary     := "-" unary | atom
    atom      := NUMBER | "x" | "pi" | FUNC "(" sum ("," sum)* ")" | "(" sum ")"

``sin``, ``cos`` and ``abs`` take one argument; ``min`` and ``max`` take two
or more. Evaluation is vectorised over an array of abscissae that all come
from the same region.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ExprDivisionByZero, ExprSyntaxError, UnboundRegionLabel

DIV_EPS = 1e-300
UNARY_FUNCS = {"sin": np.sin, "cos": np.cos, "abs": np.abs}
NARY_FUNCS = {"min": np.minimum, "max": np.maximum}
CONSTANTS = {"pi": math.pi}
KEYWORDS = {"on", "else"}


@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError("literals are finite and nonnegative; use Neg for signs")


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class Piecewise:
    """``branches`` is a tuple of ``(labels, expr)``; ``default`` is the else arm."""

    branches: tuple
    default: object


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),:;])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _lex(text: str) -> list[_Tok]:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", len(text[:pos].encode("utf-8")))
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text.encode("utf-8"))))
    return toks


# ---------------------------------------------------------------------------
# parser

_ATOM_START = frozenset({"number", "'x'", "'pi'", "'('", "'-'"} | {f"'{f}'" for f in (*UNARY_FUNCS, *NARY_FUNCS)})


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _lex(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _offset(self, tok: _Tok) -> int:
        # byte offset, so non-ASCII input before the error still counts correctly
        return len(self.text[: tok.offset].encode("utf-8")) if tok.kind != "end" else tok.offset

    def fail(self, expected, what: str | None = None):
        tok = self.tok
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(what or f"unexpected {found}", self._offset(tok), expected)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("op", "name") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str, expected=None):
        if not self.accept(text):
            self.fail(expected or {f"'{text}'"})

    def program(self):
        if self.tok.kind == "name" and self.tok.text == "on":
            node = self.piecewise()
        else:
            node = self.sum()
        if self.tok.kind != "end":
            self.fail({"'+'", "'-'", "'*'", "'/'", "end of input"})
        return node

    def piecewise(self):
        branches, seen = [], set()
        while self.accept("on"):
            labels = [self.label()]
            while self.accept(","):
                labels.append(self.label())
            self.expect(":")
            body = self.sum()
            self.expect(";", {"';'", "'+'", "'-'", "'*'", "'/'"})
            dup = seen.intersection(labels)
            if dup:
                raise ExprSyntaxError(f"label {sorted(dup)[0]} guarded twice", self._offset(self.tok))
            seen.update(labels)
            branches.append((tuple(labels), body))
        self.expect("else", {"'on'", "'else'"})
        self.expect(":")
        return Piecewise(tuple(branches), self.sum())

    def label(self) -> str:
        tok = self.tok
        if tok.kind != "name" or tok.text in KEYWORDS:
            self.fail({"region label"})
        self.i += 1
        return tok.text

    def sum(self):
        node = self.product()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.product())
        return node

    def product(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            if tok.text == "x":
                self.i += 1
                return Var()
            if tok.text in CONSTANTS:
                self.i += 1
                return Const(tok.text)
            if tok.text in UNARY_FUNCS or tok.text in NARY_FUNCS:
                self.i += 1
                return self.call(tok)
            self.fail(_ATOM_START, f"unknown name {tok.text!r}")
        if self.accept("("):
            node = self.sum()
            self.expect(")", {"')'", "'+'", "'-'", "'*'", "'/'"})
            return node
        self.fail(_ATOM_START)

    def call(self, name_tok: _Tok):
        self.expect("(")
        args = [self.sum()]
        while self.accept(","):
            args.append(self.sum())
        self.expect(")", {"')'", "','", "'+'", "'-'", "'*'", "'/'"})
        name = name_tok.text
        want = "1" if name in UNARY_FUNCS else "at least 2"
        if (name in UNARY_FUNCS and len(args) != 1) or (name in NARY_FUNCS and len(args) < 2):
            raise ExprSyntaxError(f"{name} takes {want} argument(s), got {len(args)}", self._offset(name_tok))
        return Call(name, tuple(args))


def parse_expr(text: str):
    """Parse ``text`` into an expression tree."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0, {"expression"})
    return _Parser(text).program()


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    return 4


def _fmt_num(v: float) -> str:
    return repr(float(v))


def to_source(e) -> str:
    """Source text with only the parentheses the grammar needs."""
    if isinstance(e, Piecewise):
        arms = " ".join(f"on {', '.join(labels)}: {to_source(body)};" for labels, body in e.branches)
        return f"{arms} else: {to_source(e.default)}"
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Const):
        return e.name
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        return f"-({inner})" if _prec(e.arg) < 3 else f"-{inner}"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_source(a) for a in e.args)})"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left, right = to_source(e.left), to_source(e.right)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# evaluation


def labels_of(e) -> set:
    """Every region label used in a guard."""
    if isinstance(e, Piecewise):
        out = set().union(*(set(lb) for lb, _ in e.branches)) if e.branches else set()
        for _, body in e.branches:
            out |= labels_of(body)
        return out | labels_of(e.default)
    if isinstance(e, Neg):
        return labels_of(e.arg)
    if isinstance(e, BinOp):
        return labels_of(e.left) | labels_of(e.right)
    if isinstance(e, Call):
        return set().union(*(labels_of(a) for a in e.args))
    return set()


def eval_expr(e, x, region: str | None = None, known_labels=None):
    """Evaluate ``e`` at ``x`` (scalar or array) taken from region ``region``.

    Piecewise nodes need ``region``. When ``known_labels`` is given, a guard
    naming any other label raises ``UnboundRegionLabel``.
    """
    arr = np.asarray(x, dtype=float)
    out = _eval(e, arr, region, None if known_labels is None else frozenset(known_labels))
    out = np.broadcast_to(out, arr.shape).astype(float)
    return float(out) if out.ndim == 0 else out


def _eval(e, x, region, known):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        return x
    if isinstance(e, Const):
        return np.float64(CONSTANTS[e.name])
    if isinstance(e, Neg):
        return -_eval(e.arg, x, region, known)
    if isinstance(e, BinOp):
        a = _eval(e.left, x, region, known)
        b = _eval(e.right, x, region, known)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if np.any(np.abs(b) < DIV_EPS):
            raise ExprDivisionByZero(f"division by a value below {DIV_EPS:g} in {to_source(e)}")
        return a / b
    if isinstance(e, Call):
        args = [_eval(a, x, region, known) for a in e.args]
        if e.func in UNARY_FUNCS:
            return UNARY_FUNCS[e.func](args[0])
        return NARY_FUNCS[e.func].reduce(np.broadcast_arrays(*args))
    if isinstance(e, Piecewise):
        if known is not None:
            unknown = labels_of(e) - known
            if unknown:
                raise UnboundRegionLabel(f"guard uses undefined region {sorted(unknown)[0]}")
        if region is None:
            raise UnboundRegionLabel("piecewise expression evaluated without a region label")
        for labels, body in e.branches:
            if region in labels:
                return _eval(body, x, region, known)
        return _eval(e.default, x, region, known)
    raise TypeError(f"not an expression node: {e!r}")

"""AST node types for the rule language.

Nodes are frozen dataclasses.  Every node carries a source ``span`` excluded
from equality, so a parse -> print -> parse round trip compares equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Span:
    """Line/column range (1-based, end-exclusive columns)."""

    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"line {self.line}, col {self.col}"


_SPAN = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Node:
    pass


# --- expressions ---------------------------------------------------------


@dataclass(frozen=True)
class TextPart:
    """Literal segment of a text literal."""

    text: str


@dataclass(frozen=True)
class InterpPart:
    """Interpolated ``{expr}`` or ``{expr:.Nf}`` segment."""

    expr: Expr
    decimals: int | None = None


@dataclass(frozen=True)
class TextLit(Node):
    parts: tuple[TextPart | InterpPart, ...]
    span: Span | None = _SPAN


@dataclass(frozen=True)
class NumberLit(Node):
    value: float
    span: Span | None = _SPAN


@dataclass(frozen=True)
class BoolLit(Node):
    value: bool
    span: Span | None = _SPAN


@dataclass(frozen=True)
class ListLit(Node):
    items: tuple[Expr, ...]
    span: Span | None = _SPAN


@dataclass(frozen=True)
class MapLit(Node):
    pairs: tuple[tuple[str, Expr], ...]
    span: Span | None = _SPAN


@dataclass(frozen=True)
class Var(Node):
    name: str
    span: Span | None = _SPAN


@dataclass(frozen=True)
class Field(Node):
    obj: Expr
    name: str  # "subj" | "pred" | "obj"
    span: Span | None = _SPAN


@dataclass(frozen=True)
class Index(Node):
    obj: Expr
    index: Expr
    span: Span | None = _SPAN


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Expr
    right: Expr
    span: Span | None = _SPAN


@dataclass(frozen=True)
class Not(Node):
    operand: Expr
    span: Span | None = _SPAN


@dataclass(frozen=True)
class Neg(Node):
    operand: Expr
    span: Span | None = _SPAN


@dataclass(frozen=True)
class Call(Node):
    name: str
    args: tuple[Expr, ...]
    span: Span | None = _SPAN


Expr = TextLit | NumberLit | BoolLit | ListLit | MapLit | Var | Field | Index | Binary | Not | Neg | Call


# --- statements ----------------------------------------------------------


@dataclass(frozen=True)
class Let(Node):
    name: str
    value: Expr
    span: Span | None = _SPAN


@dataclass(frozen=True)
class Assign(Node):
    name: str
    value: Expr
    span: Span | None = _SPAN


@dataclass(frozen=True)
class AugAssign(Node):
    """``name += expr`` (combines via the ``+`` semantics)."""

    name: str
    value: Expr
    span: Span | None = _SPAN


@dataclass(frozen=True)
class If(Node):
    arms: tuple[tuple[Expr, tuple[Stmt, ...]], ...]
    orelse: tuple[Stmt, ...] | None
    span: Span | None = _SPAN


@dataclass(frozen=True)
class For(Node):
    var: str
    iterable: Expr
    body: tuple[Stmt, ...]
    span: Span | None = _SPAN


Stmt = Let | Assign | AugAssign | If | For


@dataclass(frozen=True)
class Program(Node):
    statements: tuple[Stmt, ...]
    span: Span | None = _SPAN

"""Canonical source printer: one statement per line, 2-space block indent.

``parse(canonical_print(ast))`` reproduces an equal AST (spans aside), so
printed bodies are stable under repeated load/save cycles.
"""

from __future__ import annotations

import math

from .interpreter import render_number
from .nodes import (
    Assign,
    AugAssign,
    Binary,
    BoolLit,
    Call,
    Expr,
    Field,
    For,
    If,
    Index,
    InterpPart,
    Let,
    ListLit,
    MapLit,
    Neg,
    Not,
    NumberLit,
    Program,
    Stmt,
    TextLit,
    TextPart,
    Var,
)

_PREC = {
    "or": 1,
    "and": 2,
    "==": 4,
    "!=": 4,
    "<": 4,
    "<=": 4,
    ">": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
}
_PREC_NOT = 3
_PREC_NEG = 7
_PREC_POSTFIX = 8
_ATOM = 9


def canonical_print(program: Program) -> str:
    lines: list[str] = []
    for stmt in program.statements:
        _print_stmt(stmt, 0, lines)
    return "\n".join(lines)


def _print_stmt(stmt: Stmt, indent: int, lines: list[str]) -> None:
    pad = "  " * indent
    if isinstance(stmt, Let):
        lines.append(f"{pad}let {stmt.name} = {_expr(stmt.value, 0)};")
    elif isinstance(stmt, Assign):
        lines.append(f"{pad}{stmt.name} = {_expr(stmt.value, 0)};")
    elif isinstance(stmt, AugAssign):
        lines.append(f"{pad}{stmt.name} += {_expr(stmt.value, 0)};")
    elif isinstance(stmt, If):
        for i, (cond, block) in enumerate(stmt.arms):
            head = f"{pad}if" if i == 0 else f"{pad}}} else if"
            lines.append(f"{head} {_expr(cond, 0)} {{")
            for inner in block:
                _print_stmt(inner, indent + 1, lines)
        if stmt.orelse is not None:
            lines.append(f"{pad}}} else {{")
            for inner in stmt.orelse:
                _print_stmt(inner, indent + 1, lines)
        lines.append(f"{pad}}}")
    elif isinstance(stmt, For):
        lines.append(f"{pad}for {stmt.var} in {_expr(stmt.iterable, 0)} {{")
        for inner in stmt.body:
            _print_stmt(inner, indent + 1, lines)
        lines.append(f"{pad}}}")
    else:  # pragma: no cover - grammar is closed
        raise ValueError(f"unknown statement {type(stmt).__name__}")


def _expr(node: Expr, context: int) -> str:
    text, prec = _expr_prec(node)
    if prec < context:
        return f"({text})"
    return text


def _expr_prec(node: Expr) -> tuple[str, int]:
    if isinstance(node, TextLit):
        return _text_literal(node), _ATOM
    if isinstance(node, NumberLit):
        if not math.isfinite(node.value):
            raise ValueError("non-finite numbers have no literal form")
        return render_number(node.value), _ATOM
    if isinstance(node, BoolLit):
        return ("true" if node.value else "false"), _ATOM
    if isinstance(node, ListLit):
        return "[" + ", ".join(_expr(item, 0) for item in node.items) + "]", _ATOM
    if isinstance(node, MapLit):
        pairs = ", ".join(f"{_quote_key(key)}: {_expr(value, 0)}" for key, value in node.pairs)
        return "{" + pairs + "}", _ATOM
    if isinstance(node, Var):
        return node.name, _ATOM
    if isinstance(node, Field):
        return f"{_expr(node.obj, _PREC_POSTFIX)}.{node.name}", _PREC_POSTFIX
    if isinstance(node, Index):
        return f"{_expr(node.obj, _PREC_POSTFIX)}[{_expr(node.index, 0)}]", _PREC_POSTFIX
    if isinstance(node, Call):
        args = ", ".join(_expr(arg, 0) for arg in node.args)
        return f"{node.name}({args})", _ATOM
    if isinstance(node, Not):
        return f"not {_expr(node.operand, _PREC_NOT)}", _PREC_NOT
    if isinstance(node, Neg):
        return f"-{_expr(node.operand, _PREC_NEG)}", _PREC_NEG
    if isinstance(node, Binary):
        prec = _PREC[node.op]
        left = _expr(node.left, prec)
        right = _expr(node.right, prec + 1)  # all binops are left-associative
        return f"{left} {node.op} {right}", prec
    raise ValueError(f"unknown expression {type(node).__name__}")  # pragma: no cover


def _escape(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\t", "\\t")
        .replace("{", "{{")
        .replace("}", "}}")
    )


def _text_literal(node: TextLit) -> str:
    pieces = ['"']
    for part in node.parts:
        if isinstance(part, TextPart):
            pieces.append(_escape(part.text))
        else:
            assert isinstance(part, InterpPart)
            fmt = f":.{part.decimals}f" if part.decimals is not None else ""
            pieces.append("{" + _expr(part.expr, 0) + fmt + "}")
    pieces.append('"')
    return "".join(pieces)


def _quote_key(key: str) -> str:
    return f'"{_escape(key)}"'

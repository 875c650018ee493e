"""Resource-limited evaluator for rule-language programs.

The interpreter is pure: no I/O, no clock access, no randomness.  Every
expression evaluation, statement execution and loop iteration consumes at
least one step, so ``max_steps`` bounds total work linearly.  All produced
text is capped at ``max_output_chars``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from ..core import NormalizationError, Triple, normalize_predicate
from .lexer import ParseError
from .nodes import (
    Assign,
    AugAssign,
    Binary,
    BoolLit,
    Call,
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
    Span,
    TextLit,
    TextPart,
    Var,
)

# ExecOutcome statuses
OK = "ok"
PARSE_ERROR = "parse-error"
RUNTIME_ERROR = "runtime-error"
LIMIT_EXCEEDED = "limit-exceeded"

# RuntimeError kinds
UNDEFINED_VARIABLE = "undefined-variable"
REDECLARED_VARIABLE = "redeclared-variable"
TYPE_MISMATCH = "type-mismatch"
INDEX_OUT_OF_RANGE = "index-out-of-range"
FIND_MISS = "find-miss"
NUMBER_PARSE = "number-parse"
BAD_OUTPUT = "bad-output"

# Limit names
MAX_STEPS = "max_steps"
MAX_OUTPUT_CHARS = "max_output_chars"
WALL_CLOCK = "wall_clock"

_CLOCK_CHECK_MASK = 1023  # consult the wall clock every 1024 steps


@dataclass(frozen=True)
class Limits:
    max_steps: int = 100_000
    max_output_chars: int = 10_000
    wall_clock_s: float = 5.0

    def __post_init__(self) -> None:
        if self.max_steps <= 0 or self.max_output_chars <= 0 or self.wall_clock_s <= 0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class ExecOutcome:
    """Result of running a rule body: Ok text or a classified failure."""

    status: str
    text: str | None = None
    span: Span | None = None
    kind: str | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OK

    @classmethod
    def success(cls, text: str) -> "ExecOutcome":
        return cls(OK, text=text)

    @classmethod
    def from_parse_error(cls, err: ParseError) -> "ExecOutcome":
        return cls(PARSE_ERROR, span=err.span, message=err.message)

    @classmethod
    def runtime(cls, span: Span | None, kind: str, message: str) -> "ExecOutcome":
        return cls(RUNTIME_ERROR, span=span, kind=kind, message=message)

    @classmethod
    def limit(cls, which: str) -> "ExecOutcome":
        return cls(LIMIT_EXCEEDED, kind=which, message=f"limit exceeded: {which}")

    def describe(self) -> str:
        """One-line summary, suitable for repair prompts and traces."""
        if self.status == OK:
            return "ok"
        if self.status == PARSE_ERROR:
            where = f" at {self.span}" if self.span else ""
            return f"parse error{where}: {self.message}"
        if self.status == RUNTIME_ERROR:
            where = f" at {self.span}" if self.span else ""
            return f"runtime error ({self.kind}){where}: {self.message}"
        return self.message


class _Fault(Exception):
    def __init__(self, span: Span | None, kind: str, message: str):
        self.span = span
        self.kind = kind
        self.message = message


class _LimitHit(Exception):
    def __init__(self, which: str):
        self.which = which


def execute(program: Program, triples: list[Triple] | tuple[Triple, ...], limits: Limits | None = None) -> ExecOutcome:
    """Run ``program`` with ``triples`` bound; return the final ``output`` text.

    The caller is responsible for having sorted ``triples`` to the owning
    rule's spec order.
    """
    limits = limits or Limits()
    interp = _Interpreter(list(triples), limits)
    try:
        interp.run(program)
    except _Fault as fault:
        return ExecOutcome.runtime(fault.span, fault.kind, fault.message)
    except _LimitHit as hit:
        return ExecOutcome.limit(hit.which)
    output = interp.env.get("output")
    if not isinstance(output, str):
        kind = "unset" if "output" not in interp.env else f"of type {_type_name(output)}"
        return ExecOutcome.runtime(None, BAD_OUTPUT, f"variable 'output' is {kind} at end of rule")
    if len(output) > limits.max_output_chars:
        return ExecOutcome.limit(MAX_OUTPUT_CHARS)
    return ExecOutcome.success(output)


def run_source(source: str, triples: list[Triple] | tuple[Triple, ...], limits: Limits | None = None) -> ExecOutcome:
    """Parse then execute; parse failures become a parse-error outcome."""
    from .parser import parse

    try:
        program = parse(source)
    except ParseError as err:
        return ExecOutcome.from_parse_error(err)
    return execute(program, triples, limits)


def _type_name(value: object) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, str):
        return "text"
    if isinstance(value, float):
        return "number"
    if isinstance(value, list):
        return "list"
    if isinstance(value, dict):
        return "map"
    if isinstance(value, Triple):
        return "triple"
    return type(value).__name__


def render_number(x: float) -> str:
    """Canonical text for a number: no fractional part when integral,
    otherwise the shortest round-trip decimal."""
    if math.isfinite(x) and x == int(x):
        return str(int(x))
    return repr(x)


def values_equal(a: object, b: object) -> bool:
    """Structural equality; values of different types are never equal."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, float) and isinstance(b, float):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, Triple) and isinstance(b, Triple):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(values_equal(v, b[k]) for k, v in a.items())
    return False


class _Interpreter:
    def __init__(self, triples: list[Triple], limits: Limits):
        self.env: dict[str, object] = {"triples": triples}
        self.limits = limits
        self.steps = 0
        self.deadline = time.monotonic() + limits.wall_clock_s
        self._eval_dispatch = {
            TextLit: self._eval_text,
            NumberLit: self._eval_number,
            BoolLit: self._eval_bool,
            ListLit: self._eval_list,
            MapLit: self._eval_map,
            Var: self._eval_var,
            Field: self._eval_field,
            Index: self._eval_index,
            Binary: self._eval_binary,
            Not: self._eval_not,
            Neg: self._eval_neg,
            Call: self._eval_call,
        }
        self._exec_dispatch = {
            Let: self._exec_let,
            Assign: self._exec_assign,
            AugAssign: self._exec_aug,
            If: self._exec_if,
            For: self._exec_for,
        }

    # -- accounting ----------------------------------------------------------

    def _step(self) -> None:
        self.steps += 1
        if self.steps > self.limits.max_steps:
            raise _LimitHit(MAX_STEPS)
        if not (self.steps & _CLOCK_CHECK_MASK) and time.monotonic() > self.deadline:
            raise _LimitHit(WALL_CLOCK)

    def _capped(self, text: str) -> str:
        if len(text) > self.limits.max_output_chars:
            raise _LimitHit(MAX_OUTPUT_CHARS)
        return text

    # -- program -------------------------------------------------------------

    def run(self, program: Program) -> None:
        for stmt in program.statements:
            self._exec(stmt)

    def _exec(self, stmt) -> None:
        self._step()
        self._exec_dispatch[type(stmt)](stmt)

    def _eval(self, expr) -> object:
        self._step()
        return self._eval_dispatch[type(expr)](expr)

    # -- statements ------------------------------------------------------------

    def _exec_let(self, stmt: Let) -> None:
        if stmt.name in self.env:
            raise _Fault(stmt.span, REDECLARED_VARIABLE, f"'{stmt.name}' is already defined")
        self.env[stmt.name] = self._eval(stmt.value)

    def _exec_assign(self, stmt: Assign) -> None:
        if stmt.name not in self.env and stmt.name != "output":
            raise _Fault(stmt.span, UNDEFINED_VARIABLE, f"'{stmt.name}' is not defined (use 'let')")
        self.env[stmt.name] = self._eval(stmt.value)

    def _exec_aug(self, stmt: AugAssign) -> None:
        if stmt.name not in self.env:
            raise _Fault(stmt.span, UNDEFINED_VARIABLE, f"'{stmt.name}' is not defined (use 'let')")
        self.env[stmt.name] = self._add(self.env[stmt.name], self._eval(stmt.value), stmt.span)

    def _exec_if(self, stmt: If) -> None:
        for cond, block in stmt.arms:
            value = self._eval(cond)
            if not isinstance(value, bool):
                raise _Fault(stmt.span, TYPE_MISMATCH, f"if condition must be bool, got {_type_name(value)}")
            if value:
                for s in block:
                    self._exec(s)
                return
        if stmt.orelse is not None:
            for s in stmt.orelse:
                self._exec(s)

    def _exec_for(self, stmt: For) -> None:
        iterable = self._eval(stmt.iterable)
        if not isinstance(iterable, list):
            raise _Fault(stmt.span, TYPE_MISMATCH, f"for iterates lists only, got {_type_name(iterable)}")
        for item in iterable:
            self._step()  # one step per iteration
            self.env[stmt.var] = item
            for s in stmt.body:
                self._exec(s)

    # -- expressions -------------------------------------------------------------

    def _eval_text(self, node: TextLit) -> str:
        pieces = []
        for part in node.parts:
            if isinstance(part, TextPart):
                pieces.append(part.text)
            else:
                pieces.append(self._interpolate(part, node.span))
        return self._capped("".join(pieces))

    def _interpolate(self, part: InterpPart, span: Span | None) -> str:
        value = self._eval(part.expr)
        if part.decimals is not None:
            if not isinstance(value, float) or isinstance(value, bool):
                raise _Fault(
                    getattr(part.expr, "span", span),
                    TYPE_MISMATCH,
                    f"':.{part.decimals}f' needs a number, got {_type_name(value)}",
                )
            return format(value, f".{part.decimals}f")
        return self._stringify(value, getattr(part.expr, "span", span))

    def _eval_number(self, node: NumberLit) -> float:
        return node.value

    def _eval_bool(self, node: BoolLit) -> bool:
        return node.value

    def _eval_list(self, node: ListLit) -> list:
        return [self._eval(item) for item in node.items]

    def _eval_map(self, node: MapLit) -> dict:
        return {key: self._eval(value) for key, value in node.pairs}

    def _eval_var(self, node: Var) -> object:
        try:
            return self.env[node.name]
        except KeyError:
            raise _Fault(node.span, UNDEFINED_VARIABLE, f"'{node.name}' is not defined") from None

    def _eval_field(self, node: Field) -> str:
        obj = self._eval(node.obj)
        if not isinstance(obj, Triple):
            raise _Fault(node.span, TYPE_MISMATCH, f".{node.name} needs a triple, got {_type_name(obj)}")
        return getattr(obj, node.name)

    def _eval_index(self, node: Index) -> object:
        obj = self._eval(node.obj)
        idx = self._eval(node.index)
        if isinstance(obj, (list, str)):
            if not _is_number(idx) or not math.isfinite(idx) or idx != int(idx):
                raise _Fault(node.span, TYPE_MISMATCH, f"index must be an integer, got {_type_name(idx)}")
            i = int(idx)
            if not -len(obj) <= i < len(obj):
                raise _Fault(node.span, INDEX_OUT_OF_RANGE, f"index {i} out of range for length {len(obj)}")
            return obj[i]
        if isinstance(obj, dict):
            if not isinstance(idx, str):
                raise _Fault(node.span, TYPE_MISMATCH, f"map key must be text, got {_type_name(idx)}")
            if idx not in obj:
                raise _Fault(node.span, INDEX_OUT_OF_RANGE, f"key {idx!r} not present in map")
            return obj[idx]
        raise _Fault(node.span, TYPE_MISMATCH, f"cannot index {_type_name(obj)}")

    def _eval_binary(self, node: Binary) -> object:
        op = node.op
        if op == "and" or op == "or":
            left = self._eval(node.left)
            if not isinstance(left, bool):
                raise _Fault(node.span, TYPE_MISMATCH, f"'{op}' needs bool operands, got {_type_name(left)}")
            if (op == "and" and not left) or (op == "or" and left):
                return left
            right = self._eval(node.right)
            if not isinstance(right, bool):
                raise _Fault(node.span, TYPE_MISMATCH, f"'{op}' needs bool operands, got {_type_name(right)}")
            return right
        left = self._eval(node.left)
        right = self._eval(node.right)
        if op == "==":
            return values_equal(left, right)
        if op == "!=":
            return not values_equal(left, right)
        if op == "+":
            return self._add(left, right, node.span)
        if op in ("-", "*", "/"):
            if not _is_number(left) or not _is_number(right):
                raise _Fault(
                    node.span,
                    TYPE_MISMATCH,
                    f"'{op}' needs numbers, got {_type_name(left)} and {_type_name(right)}",
                )
            if op == "-":
                return left - right
            if op == "*":
                return left * right
            return _ieee_div(left, right)
        # comparisons: < <= > >=
        if isinstance(left, str) and isinstance(right, str):
            pass
        elif _is_number(left) and _is_number(right):
            pass
        else:
            raise _Fault(
                node.span,
                TYPE_MISMATCH,
                f"'{op}' needs two texts or two numbers, got {_type_name(left)} and {_type_name(right)}",
            )
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        return left >= right

    def _add(self, left: object, right: object, span: Span | None) -> object:
        if isinstance(left, str) or isinstance(right, str):
            return self._capped(self._stringify(left, span) + self._stringify(right, span))
        if _is_number(left) and _is_number(right):
            return left + right
        raise _Fault(
            span, TYPE_MISMATCH, f"'+' needs numbers or text, got {_type_name(left)} and {_type_name(right)}"
        )

    def _eval_not(self, node: Not) -> bool:
        value = self._eval(node.operand)
        if not isinstance(value, bool):
            raise _Fault(node.span, TYPE_MISMATCH, f"'not' needs a bool, got {_type_name(value)}")
        return not value

    def _eval_neg(self, node: Neg) -> float:
        value = self._eval(node.operand)
        if not _is_number(value):
            raise _Fault(node.span, TYPE_MISMATCH, f"unary '-' needs a number, got {_type_name(value)}")
        return -value

    def _stringify(self, value: object, span: Span | None) -> str:
        if isinstance(value, str):
            return value
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return render_number(value)
        raise _Fault(span, TYPE_MISMATCH, f"cannot render {_type_name(value)} as text")

    # -- builtins ---------------------------------------------------------------

    def _eval_call(self, node: Call) -> object:
        args = [self._eval(arg) for arg in node.args]
        return getattr(self, f"_builtin_{node.name}")(node, *args)

    def _text_arg(self, node: Call, value: object, pos: int) -> str:
        if not isinstance(value, str):
            raise _Fault(
                node.span, TYPE_MISMATCH, f"{node.name} argument {pos} must be text, got {_type_name(value)}"
            )
        return value

    def _triples_arg(self, node: Call, value: object) -> list[Triple]:
        if not isinstance(value, list) or not all(isinstance(t, Triple) for t in value):
            raise _Fault(node.span, TYPE_MISMATCH, f"{node.name} needs a list of triples")
        return value

    def _pred_arg(self, node: Call, value: object) -> str:
        text = self._text_arg(node, value, 2)
        try:
            return normalize_predicate(text)
        except NormalizationError:
            raise _Fault(node.span, TYPE_MISMATCH, f"{node.name}: empty predicate") from None

    def _builtin_lower(self, node: Call, t: object) -> str:
        return self._capped(self._text_arg(node, t, 1).lower())

    def _builtin_upper(self, node: Call, t: object) -> str:
        return self._capped(self._text_arg(node, t, 1).upper())

    def _builtin_capitalize(self, node: Call, t: object) -> str:
        return self._capped(self._text_arg(node, t, 1).capitalize())

    def _builtin_title(self, node: Call, t: object) -> str:
        return self._capped(self._text_arg(node, t, 1).title())

    def _builtin_trim(self, node: Call, t: object) -> str:
        return self._text_arg(node, t, 1).strip()

    def _builtin_replace(self, node: Call, t: object, frm: object, to: object) -> str:
        text = self._text_arg(node, t, 1)
        old = self._text_arg(node, frm, 2)
        new = self._text_arg(node, to, 3)
        if not old:
            raise _Fault(node.span, TYPE_MISMATCH, "replace: 'from' must be non-empty")
        return self._capped(text.replace(old, new))

    def _builtin_split(self, node: Call, t: object, sep: object) -> list:
        text = self._text_arg(node, t, 1)
        separator = self._text_arg(node, sep, 2)
        if not separator:
            raise _Fault(node.span, TYPE_MISMATCH, "split: separator must be non-empty")
        return text.split(separator)

    def _builtin_join(self, node: Call, items: object, sep: object) -> str:
        separator = self._text_arg(node, sep, 2)
        if not isinstance(items, list):
            raise _Fault(node.span, TYPE_MISMATCH, f"join needs a list, got {_type_name(items)}")
        return self._capped(separator.join(self._stringify(item, node.span) for item in items))

    def _builtin_len(self, node: Call, x: object) -> float:
        if isinstance(x, (str, list, dict)):
            return float(len(x))
        raise _Fault(node.span, TYPE_MISMATCH, f"len needs text, list or map, got {_type_name(x)}")

    def _builtin_str(self, node: Call, x: object) -> str:
        return self._stringify(x, node.span)

    def _builtin_num(self, node: Call, t: object) -> float:
        if isinstance(t, float) and not isinstance(t, bool):
            return t
        text = self._text_arg(node, t, 1)
        try:
            return float(text.strip())
        except ValueError:
            raise _Fault(node.span, NUMBER_PARSE, f"cannot parse {text!r} as a number") from None

    def _builtin_contains(self, node: Call, t: object, sub: object) -> bool:
        return self._text_arg(node, sub, 2) in self._text_arg(node, t, 1)

    def _builtin_startswith(self, node: Call, t: object, prefix: object) -> bool:
        return self._text_arg(node, t, 1).startswith(self._text_arg(node, prefix, 2))

    def _builtin_endswith(self, node: Call, t: object, suffix: object) -> bool:
        return self._text_arg(node, t, 1).endswith(self._text_arg(node, suffix, 2))

    def _builtin_find(self, node: Call, triples: object, pred: object) -> Triple:
        wanted = self._pred_arg(node, pred)
        for triple in self._triples_arg(node, triples):
            if triple.norm_pred == wanted:
                return triple
        raise _Fault(node.span, FIND_MISS, f"no triple with predicate {wanted!r}")

    def _builtin_filter_pred(self, node: Call, triples: object, pred: object) -> list:
        wanted = self._pred_arg(node, pred)
        return [t for t in self._triples_arg(node, triples) if t.norm_pred == wanted]

    def _builtin_has(self, node: Call, triples: object, pred: object) -> bool:
        wanted = self._pred_arg(node, pred)
        return any(t.norm_pred == wanted for t in self._triples_arg(node, triples))


def _is_number(value: object) -> bool:
    return isinstance(value, float) and not isinstance(value, bool)


def _ieee_div(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b

"""The sandboxed rule language: parser, interpreter, canonical printer.

Rule bodies convert a list of input triples into a text left in the
variable ``output``.  Execution is deterministic and resource-limited; the
language has no I/O, no clock and no randomness.
"""

from .interpreter import (
    BAD_OUTPUT,
    FIND_MISS,
    INDEX_OUT_OF_RANGE,
    LIMIT_EXCEEDED,
    MAX_OUTPUT_CHARS,
    MAX_STEPS,
    NUMBER_PARSE,
    OK,
    PARSE_ERROR,
    REDECLARED_VARIABLE,
    RUNTIME_ERROR,
    TYPE_MISMATCH,
    UNDEFINED_VARIABLE,
    WALL_CLOCK,
    ExecOutcome,
    Limits,
    execute,
    render_number,
    run_source,
    values_equal,
)
from .lexer import ParseError
from .nodes import Program, Span
from .parser import BUILTINS, parse, parse_expression
from .printer import canonical_print

#: The rule-language grammar, embedded in LLM prompts and shipped in docs.
GRAMMAR = """\
program   := statement*
statement := "let" IDENT "=" expr ";"
           | IDENT "=" expr ";"
           | IDENT "+=" expr ";"
           | "if" expr block ("else" "if" expr block)* ("else" block)?
           | "for" IDENT "in" expr block
block     := "{" statement* "}"
expr      := text literal (double-quoted; {expr} and {expr:.Nf} interpolate, {{ and }} escape braces)
           | number | "true" | "false"
           | list "[expr, ...]" | map "{key: expr, ...}" (text keys)
           | IDENT
           | expr "." ("subj" | "pred" | "obj")
           | expr "[" expr "]"
           | expr binop expr | "not" expr | "-" expr | "(" expr ")"
           | call
binop     := "+" | "-" | "*" | "/" | "==" | "!=" | "<" | "<=" | ">" | ">=" | "and" | "or"
call      := lower(t) | upper(t) | capitalize(t) | title(t) | trim(t)
           | replace(t, from, to) | split(t, sep) | join(list, sep)
           | len(x) | str(x) | num(t)
           | contains(t, sub) | startswith(t, p) | endswith(t, p)
           | find(triples, pred)          first triple with that predicate; error if absent
           | filter_pred(triples, pred)   possibly-empty list of matching triples
           | has(triples, pred)           true if any triple has that predicate

The input is bound to the variable `triples`, a list whose elements have the
fields .subj, .pred and .obj.  The rule must leave its result, a text value,
in the variable `output`.  Every statement ends with ";".  `let` introduces a
new name; plain `=` assigns to an existing name (`output` and loop variables
are introduced implicitly).  `+` concatenates when either operand is text
(numbers render without a fractional part when integral) and adds when both
are numbers.  Text comparisons are lexicographic.  `for` iterates lists only.
find/filter_pred/has match predicates ignoring case, spacing, underscores and
camelCase differences.
"""

__all__ = [
    "BAD_OUTPUT",
    "BUILTINS",
    "FIND_MISS",
    "GRAMMAR",
    "INDEX_OUT_OF_RANGE",
    "LIMIT_EXCEEDED",
    "MAX_OUTPUT_CHARS",
    "MAX_STEPS",
    "NUMBER_PARSE",
    "OK",
    "PARSE_ERROR",
    "REDECLARED_VARIABLE",
    "RUNTIME_ERROR",
    "TYPE_MISMATCH",
    "UNDEFINED_VARIABLE",
    "WALL_CLOCK",
    "ExecOutcome",
    "Limits",
    "ParseError",
    "Program",
    "Span",
    "canonical_print",
    "execute",
    "parse",
    "parse_expression",
    "render_number",
    "run_source",
    "values_equal",
]

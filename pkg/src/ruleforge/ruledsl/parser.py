"""Recursive-descent parser producing the rule-language AST."""

from __future__ import annotations

from .lexer import KEYWORDS, ExprSegment, Lexer, LitSegment, ParseError, Token
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
    Span,
    Stmt,
    TextLit,
    TextPart,
    Var,
)

#: Builtin function name -> arity.  The call grammar admits exactly these;
#: there is no I/O, no clock and no randomness among them.
BUILTINS: dict[str, int] = {
    "lower": 1,
    "upper": 1,
    "capitalize": 1,
    "title": 1,
    "trim": 1,
    "replace": 3,
    "split": 2,
    "join": 2,
    "len": 1,
    "str": 1,
    "num": 1,
    "contains": 2,
    "startswith": 2,
    "endswith": 2,
    "find": 2,
    "filter_pred": 2,
    "has": 2,
}

FIELD_NAMES = ("subj", "pred", "obj")

_COMPARISON_OPS = ("==", "!=", "<", "<=", ">", ">=")
_MAX_DEPTH = 64


def parse(source: str) -> Program:
    """Parse rule-language source into a :class:`Program`.

    Raises :class:`ParseError` with the first offending span; never returns
    a partial AST.
    """
    return Parser(source).parse_program()


def parse_expression(source: str, line: int = 1, col: int = 1) -> Expr:
    parser = Parser(source, line=line, col=col)
    expr = parser._expression()
    parser._expect_eof()
    return expr


class Parser:
    def __init__(self, source: str, line: int = 1, col: int = 1):
        self._tokens = Lexer(source, line=line, col=col).tokens()
        self._pos = 0
        self._depth = 0

    # -- token plumbing ----------------------------------------------------

    def _peek(self) -> Token:
        return self._tokens[self._pos]

    def _advance(self) -> Token:
        tok = self._tokens[self._pos]
        if tok.kind != "eof":
            self._pos += 1
        return tok

    def _check(self, kind: str) -> bool:
        return self._peek().kind == kind

    def _check_word(self, word: str) -> bool:
        tok = self._peek()
        return tok.kind == "ident" and tok.value == word

    def _eat_word(self, word: str) -> bool:
        if self._check_word(word):
            self._advance()
            return True
        return False

    def _expect(self, kind: str, what: str | None = None) -> Token:
        tok = self._peek()
        if tok.kind != kind:
            raise ParseError(tok.span, f"expected {what or kind!r}, found {_describe(tok)}")
        return self._advance()

    def _expect_ident(self, what: str = "a name") -> Token:
        tok = self._peek()
        if tok.kind != "ident" or tok.value in KEYWORDS:
            raise ParseError(tok.span, f"expected {what}, found {_describe(tok)}")
        return self._advance()

    def _expect_eof(self) -> None:
        tok = self._peek()
        if tok.kind != "eof":
            raise ParseError(tok.span, f"unexpected {_describe(tok)}")

    def _nest(self) -> None:
        self._depth += 1
        if self._depth > _MAX_DEPTH:
            raise ParseError(self._peek().span, "nesting too deep")

    # -- statements ----------------------------------------------------------

    def parse_program(self) -> Program:
        first = self._peek()
        statements = []
        while not self._check("eof"):
            statements.append(self._statement())
        last = self._tokens[self._pos - 1] if self._pos else first
        return Program(tuple(statements), span=_cover(first, last))

    def _statement(self) -> Stmt:
        tok = self._peek()
        if tok.kind != "ident":
            raise ParseError(tok.span, f"expected a statement, found {_describe(tok)}")
        if tok.value == "let":
            return self._let()
        if tok.value == "if":
            return self._if()
        if tok.value == "for":
            return self._for()
        if tok.value in KEYWORDS:
            raise ParseError(tok.span, f"expected a statement, found {_describe(tok)}")
        name = self._advance()
        op = self._peek()
        if op.kind == "=":
            self._advance()
            value = self._expression()
            end = self._expect(";")
            return Assign(name.value, value, span=_cover(name, end))
        if op.kind == "+=":
            self._advance()
            value = self._expression()
            end = self._expect(";")
            return AugAssign(name.value, value, span=_cover(name, end))
        raise ParseError(op.span, f"expected '=' or '+=' after {name.value!r}")

    def _let(self) -> Stmt:
        start = self._advance()  # 'let'
        name = self._expect_ident()
        self._expect("=")
        value = self._expression()
        end = self._expect(";")
        return Let(name.value, value, span=_cover(start, end))

    def _if(self) -> Stmt:
        start = self._advance()  # 'if'
        arms = [(self._expression(), self._block())]
        orelse = None
        while self._check_word("else"):
            self._advance()
            if self._eat_word("if"):
                arms.append((self._expression(), self._block()))
            else:
                orelse = self._block()
                break
        last = self._tokens[self._pos - 1]
        return If(tuple(arms), orelse, span=_cover(start, last))

    def _for(self) -> Stmt:
        start = self._advance()  # 'for'
        var = self._expect_ident("a loop variable")
        if not self._eat_word("in"):
            raise ParseError(self._peek().span, "expected 'in'")
        iterable = self._expression()
        body = self._block()
        last = self._tokens[self._pos - 1]
        return For(var.value, iterable, body, span=_cover(start, last))

    def _block(self) -> tuple[Stmt, ...]:
        self._nest()
        try:
            self._expect("{", "'{'")
            statements = []
            while not self._check("}"):
                if self._check("eof"):
                    raise ParseError(self._peek().span, "unclosed block (missing '}')")
                statements.append(self._statement())
            self._advance()  # '}'
            return tuple(statements)
        finally:
            self._depth -= 1

    # -- expressions ---------------------------------------------------------

    def _expression(self) -> Expr:
        self._nest()
        try:
            return self._or()
        finally:
            self._depth -= 1

    def _or(self) -> Expr:
        left = self._and()
        while self._check_word("or"):
            op = self._advance()
            right = self._and()
            left = Binary("or", left, right, span=_span_of(left, right, op))
        return left

    def _and(self) -> Expr:
        left = self._not()
        while self._check_word("and"):
            op = self._advance()
            right = self._not()
            left = Binary("and", left, right, span=_span_of(left, right, op))
        return left

    def _not(self) -> Expr:
        if self._check_word("not"):
            tok = self._advance()
            operand = self._not()
            return Not(operand, span=_prefix_span(tok, operand))
        return self._comparison()

    def _comparison(self) -> Expr:
        left = self._additive()
        while self._peek().kind in _COMPARISON_OPS:
            op = self._advance()
            right = self._additive()
            left = Binary(op.kind, left, right, span=_span_of(left, right, op))
        return left

    def _additive(self) -> Expr:
        left = self._multiplicative()
        while self._peek().kind in ("+", "-"):
            op = self._advance()
            right = self._multiplicative()
            left = Binary(op.kind, left, right, span=_span_of(left, right, op))
        return left

    def _multiplicative(self) -> Expr:
        left = self._unary()
        while self._peek().kind in ("*", "/"):
            op = self._advance()
            right = self._unary()
            left = Binary(op.kind, left, right, span=_span_of(left, right, op))
        return left

    def _unary(self) -> Expr:
        if self._check("-"):
            tok = self._advance()
            operand = self._unary()
            return Neg(operand, span=_prefix_span(tok, operand))
        return self._postfix()

    def _postfix(self) -> Expr:
        expr = self._primary()
        while True:
            if self._check("."):
                self._advance()
                name = self._expect_ident("a field name")
                if name.value not in FIELD_NAMES:
                    raise ParseError(name.span, f"unknown field {name.value!r} (expected subj, pred or obj)")
                expr = Field(expr, name.value, span=_postfix_span(expr, name))
            elif self._check("["):
                self._advance()
                index = self._expression()
                end = self._expect("]")
                expr = Index(expr, index, span=_postfix_span(expr, end))
            else:
                return expr

    def _primary(self) -> Expr:
        tok = self._peek()
        if tok.kind == "number":
            self._advance()
            return NumberLit(tok.value, span=tok.span)
        if tok.kind == "string":
            self._advance()
            return self._text_literal(tok)
        if tok.kind == "(":
            self._advance()
            expr = self._expression()
            self._expect(")")
            return expr
        if tok.kind == "[":
            return self._list_literal()
        if tok.kind == "{":
            return self._map_literal()
        if tok.kind == "ident":
            if tok.value in ("true", "false"):
                self._advance()
                return BoolLit(tok.value == "true", span=tok.span)
            if tok.value in KEYWORDS:
                raise ParseError(tok.span, f"expected an expression, found {_describe(tok)}")
            self._advance()
            if self._check("("):
                return self._call(tok)
            return Var(tok.value, span=tok.span)
        raise ParseError(tok.span, f"expected an expression, found {_describe(tok)}")

    def _call(self, name: Token) -> Expr:
        arity = BUILTINS.get(name.value)
        if arity is None:
            raise ParseError(name.span, f"unknown function {name.value!r}")
        self._expect("(")
        args = []
        if not self._check(")"):
            args.append(self._expression())
            while self._check(","):
                self._advance()
                args.append(self._expression())
        end = self._expect(")")
        if len(args) != arity:
            raise ParseError(
                name.span, f"{name.value} takes {arity} argument{'s' if arity != 1 else ''}, got {len(args)}"
            )
        return Call(name.value, tuple(args), span=_cover(name, end))

    def _list_literal(self) -> Expr:
        start = self._advance()  # '['
        items = []
        if not self._check("]"):
            items.append(self._expression())
            while self._check(","):
                self._advance()
                items.append(self._expression())
        end = self._expect("]")
        return ListLit(tuple(items), span=_cover(start, end))

    def _map_literal(self) -> Expr:
        start = self._advance()  # '{'
        pairs = []
        seen = set()
        if not self._check("}"):
            pairs.append(self._map_pair(seen))
            while self._check(","):
                self._advance()
                pairs.append(self._map_pair(seen))
        end = self._expect("}")
        return MapLit(tuple(pairs), span=_cover(start, end))

    def _map_pair(self, seen: set[str]) -> tuple[str, Expr]:
        tok = self._peek()
        if tok.kind == "string":
            self._advance()
            if len(tok.value) > 1 or (tok.value and not isinstance(tok.value[0], LitSegment)):
                raise ParseError(tok.span, "map keys must be plain text (no interpolation)")
            key = tok.value[0].text if tok.value else ""
        elif tok.kind == "ident" and tok.value not in KEYWORDS:
            self._advance()
            key = tok.value
        else:
            raise ParseError(tok.span, f"expected a map key, found {_describe(tok)}")
        if key in seen:
            raise ParseError(tok.span, f"duplicate map key {key!r}")
        seen.add(key)
        self._expect(":")
        return key, self._expression()

    def _text_literal(self, tok: Token) -> TextLit:
        parts: list[TextPart | InterpPart] = []
        for segment in tok.value:
            if isinstance(segment, LitSegment):
                parts.append(TextPart(segment.text))
            else:
                assert isinstance(segment, ExprSegment)
                expr = parse_expression(segment.source, line=segment.line, col=segment.col)
                parts.append(InterpPart(expr, segment.decimals))
        return TextLit(tuple(parts), span=tok.span)


def _describe(tok: Token) -> str:
    if tok.kind == "eof":
        return "end of input"
    if tok.kind == "ident":
        return f"{tok.value!r}"
    if tok.kind in ("number", "string"):
        return f"a {tok.kind}"
    return f"{tok.kind!r}"


def _cover(start: Token, end: Token) -> Span:
    return Span(start.line, start.col, end.end_line, end.end_col)


def _span_of(left: Expr, right: Expr, tok: Token) -> Span:
    lspan = getattr(left, "span", None) or tok.span
    rspan = getattr(right, "span", None) or tok.span
    return Span(lspan.line, lspan.col, rspan.end_line, rspan.end_col)


def _prefix_span(tok: Token, operand: Expr) -> Span:
    ospan = getattr(operand, "span", None) or tok.span
    return Span(tok.line, tok.col, ospan.end_line, ospan.end_col)


def _postfix_span(expr: Expr, end: Token) -> Span:
    espan = getattr(expr, "span", None) or end.span
    return Span(espan.line, espan.col, end.end_line, end.end_col)

"""Tokenizer for the rule language.

Text literals are scanned with interpolation awareness: a string token's
value is a sequence of raw segments, either literal text or the source of an
embedded ``{expr}`` / ``{expr:.Nf}`` interpolation (sub-parsed later).
"""

from __future__ import annotations

from dataclasses import dataclass

from .nodes import Span

KEYWORDS = frozenset({"let", "if", "else", "for", "in", "not", "and", "or", "true", "false"})

_TWO_CHAR_OPS = ("==", "!=", "<=", ">=", "+=")
_ONE_CHAR_OPS = "=<>+-*/()[]{},;:."

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


class ParseError(ValueError):
    """Syntax error with the first offending source span."""

    def __init__(self, span: Span | None, message: str):
        self.span = span
        self.message = message
        where = str(span) if span else "end of input"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class LitSegment:
    text: str


@dataclass(frozen=True)
class ExprSegment:
    source: str
    line: int
    col: int
    decimals: int | None


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "number" | "string" | an operator lexeme | "eof"
    value: object
    line: int
    col: int
    end_line: int
    end_col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col, self.end_line, self.end_col)


class Lexer:
    def __init__(self, source: str, line: int = 1, col: int = 1):
        self.src = source
        self.pos = 0
        self.line = line
        self.col = col

    def tokens(self) -> list[Token]:
        out = []
        while True:
            tok = self._next()
            out.append(tok)
            if tok.kind == "eof":
                return out

    # -- scanning helpers --------------------------------------------------

    def _peek(self, ahead: int = 0) -> str | None:
        i = self.pos + ahead
        return self.src[i] if i < len(self.src) else None

    def _advance(self) -> str:
        ch = self.src[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def _here(self) -> Span:
        return Span(self.line, self.col, self.line, self.col + 1)

    def _next(self) -> Token:
        while (c := self._peek()) is not None and c.isspace():
            self._advance()
        start_line, start_col = self.line, self.col
        c = self._peek()
        if c is None:
            return Token("eof", None, start_line, start_col, start_line, start_col)
        if c == '"':
            return self._string()
        if c.isdigit():
            return self._number()
        if c.isalpha() or c == "_":
            return self._ident()
        two = self.src[self.pos : self.pos + 2]
        if two in _TWO_CHAR_OPS:
            self._advance()
            self._advance()
            return Token(two, None, start_line, start_col, self.line, self.col)
        if c in _ONE_CHAR_OPS:
            self._advance()
            return Token(c, None, start_line, start_col, self.line, self.col)
        raise ParseError(self._here(), f"unexpected character {c!r}")

    def _ident(self) -> Token:
        start_line, start_col = self.line, self.col
        chars = []
        while (c := self._peek()) is not None and (c.isalnum() or c == "_"):
            chars.append(self._advance())
        return Token("ident", "".join(chars), start_line, start_col, self.line, self.col)

    def _number(self) -> Token:
        start_line, start_col = self.line, self.col
        chars = []
        while (c := self._peek()) is not None and c.isdigit():
            chars.append(self._advance())
        if self._peek() == "." and (nxt := self._peek(1)) is not None and nxt.isdigit():
            chars.append(self._advance())
            while (c := self._peek()) is not None and c.isdigit():
                chars.append(self._advance())
        if self._peek() in ("e", "E"):
            mark = self.pos, self.line, self.col
            exp = [self._advance()]
            if self._peek() in ("+", "-"):
                exp.append(self._advance())
            if (c := self._peek()) is not None and c.isdigit():
                while (c := self._peek()) is not None and c.isdigit():
                    exp.append(self._advance())
                chars.extend(exp)
            else:  # not an exponent after all (e.g. `1e` then ident); back off
                self.pos, self.line, self.col = mark
        return Token("number", float("".join(chars)), start_line, start_col, self.line, self.col)

    # -- text literals -------------------------------------------------------

    def _string(self) -> Token:
        start_line, start_col = self.line, self.col
        self._advance()  # opening quote
        segments: list[LitSegment | ExprSegment] = []
        lit: list[str] = []

        def flush() -> None:
            if lit:
                segments.append(LitSegment("".join(lit)))
                lit.clear()

        while True:
            c = self._peek()
            if c is None or c == "\n":
                raise ParseError(
                    Span(start_line, start_col, self.line, self.col), "unterminated text literal"
                )
            if c == '"':
                self._advance()
                break
            if c == "\\":
                self._advance()
                esc = self._peek()
                if esc is None or esc not in _ESCAPES:
                    raise ParseError(self._here(), f"unknown escape \\{esc or ''}")
                lit.append(_ESCAPES[esc])
                self._advance()
                continue
            if c == "{":
                if self._peek(1) == "{":
                    self._advance()
                    self._advance()
                    lit.append("{")
                    continue
                flush()
                segments.append(self._interpolation())
                continue
            if c == "}":
                if self._peek(1) == "}":
                    self._advance()
                    self._advance()
                    lit.append("}")
                    continue
                raise ParseError(self._here(), "single '}' in text literal (write '}}')")
            lit.append(self._advance())
        flush()
        return Token("string", tuple(segments), start_line, start_col, self.line, self.col)

    def _interpolation(self) -> ExprSegment:
        open_span = self._here()
        self._advance()  # '{'
        expr_line, expr_col = self.line, self.col
        buf: list[str] = []
        depth = 1
        decimals: int | None = None
        while True:
            c = self._peek()
            if c is None or c == "\n":
                raise ParseError(open_span, "unterminated interpolation")
            if c == '"':
                self._copy_inner_string(buf, open_span)
                continue
            if c == "{":
                depth += 1
                buf.append(self._advance())
                continue
            if c == "}":
                depth -= 1
                if depth == 0:
                    self._advance()
                    break
                buf.append(self._advance())
                continue
            if c == ":" and depth == 1:
                self._advance()
                decimals = self._format_spec()
                break
            buf.append(self._advance())
        source = "".join(buf)
        if not source.strip():
            raise ParseError(open_span, "empty interpolation")
        return ExprSegment(source, expr_line, expr_col, decimals)

    def _copy_inner_string(self, buf: list[str], open_span: Span) -> None:
        """Copy a quoted string inside an interpolation verbatim into ``buf``."""
        buf.append(self._advance())  # opening quote
        while True:
            c = self._peek()
            if c is None or c == "\n":
                raise ParseError(open_span, "unterminated interpolation")
            buf.append(self._advance())
            if c == "\\":
                nxt = self._peek()
                if nxt is not None:
                    buf.append(self._advance())
                continue
            if c == '"':
                return

    def _format_spec(self) -> int:
        span = self._here()
        if self._peek() != ".":
            raise ParseError(span, "bad interpolation format (expected ':.Nf')")
        self._advance()
        digits = []
        while (c := self._peek()) is not None and c.isdigit():
            digits.append(self._advance())
        if not digits or self._peek() != "f":
            raise ParseError(span, "bad interpolation format (expected ':.Nf')")
        self._advance()  # 'f'
        if self._peek() != "}":
            raise ParseError(self._here(), "expected '}' after interpolation format")
        self._advance()
        return int("".join(digits))

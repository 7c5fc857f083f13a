"""Tokenizer shared by the SCDL and hazard-log readers."""

from __future__ import annotations

import bisect
import enum
import re
from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 0

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1 or self.length < 0:
            raise ValueError(f"invalid span {self}")

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    span: SourceSpan
    severity: str
    message: str

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("diagnostic message must be non-empty")

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}: {self.message}"


class Tok(enum.Enum):
    STRING = "string"
    NUMBER = "number"
    IDENT = "identifier"
    PUNCT = "punctuation"
    EOF = "end of input"


@dataclass(frozen=True)
class Token:
    kind: Tok
    text: str
    value: object
    span: SourceSpan

    def describe(self) -> str:
        return "end of input" if self.kind is Tok.EOF else repr(self.text)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n\ufeff]+)
  | (?P<comment>//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<punct><=|>=|[{}:,;])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
    """,
    re.VERBOSE,
)

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


class Lexer:
    def __init__(self, text: str) -> None:
        self.text = text
        self._line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def span(self, start: int, end: int) -> SourceSpan:
        line = bisect.bisect_right(self._line_starts, start) - 1
        column = start - self._line_starts[line] + 1
        # Clip to the line so the span never runs past the text it names.
        line_end = self._line_starts[line + 1] - 1 if line + 1 < len(self._line_starts) else len(self.text)
        return SourceSpan(line + 1, column, max(0, min(end, line_end) - start))

    def tokenize(self) -> tuple[list[Token], list[Diagnostic]]:
        tokens: list[Token] = []
        diagnostics: list[Diagnostic] = []
        pos, n = 0, len(self.text)
        while pos < n:
            m = _TOKEN_RE.match(self.text, pos)
            if m is None:
                if self.text[pos] == '"':
                    end = self.text.find("\n", pos)
                    end = n if end < 0 else end
                    diagnostics.append(Diagnostic(self.span(pos, end), "error", "unterminated string"))
                    pos = end
                else:
                    diagnostics.append(Diagnostic(self.span(pos, pos + 1), "error",
                                                  f"unexpected character {self.text[pos]!r}"))
                    pos += 1
                continue
            kind = m.lastgroup
            text = m.group()
            span = self.span(m.start(), m.end())
            if kind == "string":
                value, bad = _unescape(text[1:-1])
                if bad:
                    diagnostics.append(Diagnostic(span, "error", f"unknown escape sequence \\{bad}"))
                tokens.append(Token(Tok.STRING, text, value, span))
            elif kind == "number":
                tokens.append(Token(Tok.NUMBER, text, float(text), span))
            elif kind == "punct":
                tokens.append(Token(Tok.PUNCT, text, text, span))
            elif kind == "ident":
                tokens.append(Token(Tok.IDENT, text, text, span))
            pos = m.end()
        tokens.append(Token(Tok.EOF, "", None, self.span(n, n)))
        return tokens, diagnostics


def _unescape(body: str) -> tuple[str, str | None]:
    out: list[str] = []
    bad = None
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            if nxt in _ESCAPES:
                out.append(_ESCAPES[nxt])
            else:
                bad = bad or nxt
                out.append(nxt)
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out), bad


def quote(value: str) -> str:
    return '"' + (
        value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        .replace("\t", "\\t").replace("\r", "\\r")
    ) + '"'


def format_number(value: float) -> str:
    return repr(float(value))


class SyntaxProblem(Exception):
    """Raised inside a parser to abandon the current item."""

    def __init__(self, token: Token, message: str) -> None:
        super().__init__(message)
        self.token = token
        self.message = message


class TokenStream:
    """Cursor over tokens with the expect/accept helpers parsers need."""

    def __init__(self, tokens: list[Token]) -> None:
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind is not Tok.EOF:
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.current
        return tok.kind in (Tok.PUNCT, Tok.IDENT) and tok.text == text

    def accept(self, text: str) -> Token | None:
        return self.advance() if self.at(text) else None

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise SyntaxProblem(self.current, f"expected {text!r}, found {self.current.describe()}")
        return self.advance()

    def expect_kind(self, kind: Tok, what: str) -> Token:
        if self.current.kind is not kind:
            raise SyntaxProblem(self.current, f"expected {what}, found {self.current.describe()}")
        return self.advance()

    def expect_one_of(self, options, what: str) -> Token:
        tok = self.current
        if tok.kind is Tok.IDENT and tok.text in options:
            return self.advance()
        raise SyntaxProblem(tok, f"expected {what} ({' | '.join(options)}), found {tok.describe()}")

    def recover(self, item_start: int) -> None:
        """Skip to the next ``;`` or closing ``}`` at the nesting level of the item
        that began at token index ``item_start``."""
        depth = 0
        for tok in self.tokens[item_start:self.pos]:
            if tok.kind is Tok.PUNCT and tok.text == "{":
                depth += 1
            elif tok.kind is Tok.PUNCT and tok.text == "}":
                depth -= 1
        while self.current.kind is not Tok.EOF:
            tok = self.current
            if tok.kind is Tok.PUNCT and tok.text == "{":
                depth += 1
            elif tok.kind is Tok.PUNCT and tok.text == "}":
                if depth <= 0:
                    return
                depth -= 1
                self.advance()
                if depth == 0:
                    return
                continue
            elif tok.kind is Tok.PUNCT and tok.text == ";" and depth == 0:
                self.advance()
                return
            self.advance()

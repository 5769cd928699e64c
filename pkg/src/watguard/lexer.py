"""Tokenizer for the supported WebAssembly text-format subset.

Line comments (``;;``) and block comments (``(; ;)``, nesting allowed)
are skipped.  Every token records the 1-based line/column and byte offset
where it starts, and keeps its raw lexeme so that token streams cover the
input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LexError

LPAREN = "lparen"
RPAREN = "rparen"
KEYWORD = "keyword"
ID = "id"
INT = "int"
FLOAT = "float"
STRING = "string"


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    offset: int


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    value: object
    span: SourceSpan


# Characters allowed inside words (wat "idchar" set).
_IDCHARS = set(
    "0123456789"
    "abcdefghijklmnopqrstuvwxyz"
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    "!#$%&'*+-./:<=>?@\\^_`|~"
)

_SIMPLE_ESCAPES = {
    "n": 0x0A,
    "t": 0x09,
    "r": 0x0D,
    '"': 0x22,
    "'": 0x27,
    "\\": 0x5C,
}


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.col, self.pos)

    def peek(self, ahead: int = 0) -> str:
        i = self.pos + ahead
        return self.text[i] if i < len(self.text) else ""

    def advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos >= len(self.text):
                return
            if self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1


def _skip_trivia(cur: _Cursor) -> None:
    while True:
        ch = cur.peek()
        if ch == "":
            return
        if ch in " \t\r\n":
            cur.advance()
        elif ch == ";" and cur.peek(1) == ";":
            while cur.peek() not in ("", "\n"):
                cur.advance()
        elif ch == "(" and cur.peek(1) == ";":
            open_span = cur.span()
            cur.advance(2)
            depth = 1
            while depth:
                if cur.peek() == "":
                    raise LexError("unterminated block comment", open_span)
                if cur.peek() == "(" and cur.peek(1) == ";":
                    depth += 1
                    cur.advance(2)
                elif cur.peek() == ";" and cur.peek(1) == ")":
                    depth -= 1
                    cur.advance(2)
                else:
                    cur.advance()
        else:
            return


def _lex_string(cur: _Cursor) -> Token:
    start = cur.span()
    start_pos = cur.pos
    cur.advance()  # opening quote
    out = bytearray()
    while True:
        ch = cur.peek()
        if ch == "" or ch == "\n":
            raise LexError("unterminated string literal", start)
        if ch == '"':
            cur.advance()
            text = cur.text[start_pos:cur.pos]
            return Token(STRING, text, bytes(out), start)
        if ch == "\\":
            esc_span = cur.span()
            esc = cur.peek(1)
            if esc in _SIMPLE_ESCAPES:
                out.append(_SIMPLE_ESCAPES[esc])
                cur.advance(2)
            else:
                pair = cur.text[cur.pos + 1:cur.pos + 3]
                if len(pair) == 2 and all(c in "0123456789abcdefABCDEF" for c in pair):
                    out.append(int(pair, 16))
                    cur.advance(3)
                else:
                    raise LexError(f"invalid string escape \\{esc}", esc_span)
        else:
            out.extend(ch.encode("utf-8"))
            cur.advance()


def _lex_word(cur: _Cursor) -> Token:
    start = cur.span()
    start_pos = cur.pos
    while cur.peek() in _IDCHARS:
        cur.advance()
    text = cur.text[start_pos:cur.pos]
    if text.startswith("$"):
        if len(text) == 1:
            raise LexError("empty identifier", start)
        return Token(ID, text, text[1:], start)
    value = _try_number(text)
    if value is not None:
        kind, num = value
        return Token(kind, text, num, start)
    if text[0].isdigit() or text[0] in "+-":
        raise LexError(f"malformed number literal {text!r}", start)
    return Token(KEYWORD, text, text, start)


def _try_number(text: str):
    body = text
    sign = 1
    if body and body[0] in "+-":
        sign = -1 if body[0] == "-" else 1
        body = body[1:]
    if not body or not body[0].isdigit():
        return None
    body = body.replace("_", "")
    try:
        if body.startswith(("0x", "0X")):
            return (INT, sign * int(body[2:], 16))
        if any(c in body for c in ".eE") and not body.startswith(("0x", "0X")):
            return (FLOAT, sign * float(body))
        return (INT, sign * int(body, 10))
    except ValueError:
        return None


def tokenize(text: str) -> list[Token]:
    """Split source text into tokens, raising LexError with a span on bad input."""
    cur = _Cursor(text)
    tokens: list[Token] = []
    while True:
        _skip_trivia(cur)
        ch = cur.peek()
        if ch == "":
            return tokens
        if ch == "(":
            tokens.append(Token(LPAREN, "(", "(", cur.span()))
            cur.advance()
        elif ch == ")":
            tokens.append(Token(RPAREN, ")", ")", cur.span()))
            cur.advance()
        elif ch == '"':
            tokens.append(_lex_string(cur))
        elif ch in _IDCHARS:
            tokens.append(_lex_word(cur))
        else:
            raise LexError(f"unexpected character {ch!r}", cur.span())

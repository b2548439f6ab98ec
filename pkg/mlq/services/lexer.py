# mlq/services/lexer.py
"""
Lossless tokenizer for the modeling language.

Whitespace and `/* ... */` comments are kept as trivia on the following token,
so `TokenList.reconstruct()` gives back the exact input text.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List

from .diagnostics import Diagnostic, Span, error

logger = logging.getLogger(__name__)


class TokenKind(str, Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    INTEGER = "integer-literal"
    FLOAT = "float-literal"
    STRING = "string-literal"
    PUNCTUATION = "punctuation"
    ANNOTATION = "annotation-marker"
    ERROR = "error"


KEYWORDS = frozenset({
    "thing", "fragment", "includes", "provided", "required", "port", "receives", "sends",
    "message", "property", "data_analytics", "statechart", "init", "state", "final",
    "on", "entry", "exit", "transition", "event", "action", "do", "end",
    "configuration", "instance", "connector", "print", "if", "else",
    "da_preprocess", "da_train", "da_predict", "da_save",
    "labels", "features", "prediction_results", "dataset", "automl", "sequential",
    "timestamps", "preprocess_feature_scaler", "model_algorithm", "training_results",
    "blackbox_ml", "blackbox_ml_model", "blackbox_import_algorithm",
    "ON", "OFF", "TRUE", "FALSE", "true", "false", "and", "or", "not",
})

PUNCTUATION_2 = ("->", "=>", "==", "!=", "<=", ">=")
PUNCTUATION_1 = "{}(),:=!?.+-*/<>"

ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    span: Span
    leading_trivia: str = ""

    def is_keyword(self, *words: str) -> bool:
        return self.kind is TokenKind.KEYWORD and self.lexeme in words

    def is_punct(self, *symbols: str) -> bool:
        return self.kind is TokenKind.PUNCTUATION and self.lexeme in symbols


class TokenList(List[Token]):
    """Token sequence plus the trivia after the last token and any lexical errors."""

    def __init__(self, tokens=(), trailing_trivia: str = "", diagnostics=()):
        super().__init__(tokens)
        self.trailing_trivia = trailing_trivia
        self.diagnostics: List[Diagnostic] = list(diagnostics)

    def reconstruct(self) -> str:
        return "".join(t.leading_trivia + t.lexeme for t in self) + self.trailing_trivia


def unescape(body: str) -> str:
    """Decode the escapes of a string literal body (without the quotes)."""
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def escape(value: str) -> str:
    """Inverse of `unescape`, producing a quoted literal."""
    body = value.replace("\\", "\\\\").replace('"', '\\"')
    body = body.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return f'"{body}"'


@dataclass
class _Cursor:
    source: str
    pos: int = 0
    line: int = 1
    column: int = 1
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def peek(self, ahead: int = 0) -> str:
        i = self.pos + ahead
        return self.source[i] if i < len(self.source) else ""

    def advance(self, count: int = 1) -> str:
        chunk = self.source[self.pos:self.pos + count]
        for ch in chunk:
            if ch == "\n":
                self.line += 1
                self.column = 1
            else:
                self.column += 1
        self.pos += len(chunk)
        return chunk

    def span_from(self, offset: int, line: int, column: int) -> Span:
        return Span(line, column, offset, self.pos - offset)


def _read_trivia(cur: _Cursor) -> str:
    start = cur.pos
    while cur.pos < len(cur.source):
        ch = cur.peek()
        if ch.isspace():
            cur.advance()
        elif ch == "/" and cur.peek(1) == "*":
            offset, line, column = cur.pos, cur.line, cur.column
            cur.advance(2)
            closed = False
            while cur.pos < len(cur.source):
                if cur.peek() == "*" and cur.peek(1) == "/":
                    cur.advance(2)
                    closed = True
                    break
                cur.advance()
            if not closed:
                cur.diagnostics.append(error("P010", "unterminated comment", cur.span_from(offset, line, column)))
        else:
            break
    return cur.source[start:cur.pos]


def _is_ident_start(ch: str) -> bool:
    return ch.isascii() and (ch.isalpha() or ch == "_")


def _is_ident_char(ch: str) -> bool:
    return ch.isascii() and (ch.isalnum() or ch == "_")


def _read_token(cur: _Cursor, trivia: str) -> Token:
    offset, line, column = cur.pos, cur.line, cur.column
    ch = cur.peek()

    if _is_ident_start(ch):
        while _is_ident_char(cur.peek()):
            cur.advance()
        text = cur.source[offset:cur.pos]
        kind = TokenKind.KEYWORD if text in KEYWORDS else TokenKind.IDENTIFIER
        return Token(kind, text, cur.span_from(offset, line, column), trivia)

    if ch.isascii() and ch.isdigit():
        kind = TokenKind.INTEGER
        while cur.peek().isascii() and cur.peek().isdigit():
            cur.advance()
        if cur.peek() == "." and cur.peek(1).isascii() and cur.peek(1).isdigit():
            kind = TokenKind.FLOAT
            cur.advance()
            while cur.peek().isascii() and cur.peek().isdigit():
                cur.advance()
        if cur.peek() in ("e", "E"):
            sign = 1 if cur.peek(1) in ("+", "-") else 0
            if cur.peek(1 + sign).isascii() and cur.peek(1 + sign).isdigit():
                kind = TokenKind.FLOAT
                cur.advance(1 + sign)
                while cur.peek().isascii() and cur.peek().isdigit():
                    cur.advance()
        return Token(kind, cur.source[offset:cur.pos], cur.span_from(offset, line, column), trivia)

    if ch == '"':
        cur.advance()
        while True:
            nxt = cur.peek()
            if nxt == "" or nxt == "\n":
                span = cur.span_from(offset, line, column)
                cur.diagnostics.append(error("P010", "unterminated string literal", span))
                return Token(TokenKind.ERROR, cur.source[offset:cur.pos], span, trivia)
            if nxt == "\\" and cur.peek(1) not in ("", "\n"):
                cur.advance(2)
                continue
            cur.advance()
            if nxt == '"':
                break
        return Token(TokenKind.STRING, cur.source[offset:cur.pos], cur.span_from(offset, line, column), trivia)

    if ch == "@" and _is_ident_start(cur.peek(1)):
        cur.advance()
        while _is_ident_char(cur.peek()):
            cur.advance()
        return Token(TokenKind.ANNOTATION, cur.source[offset:cur.pos], cur.span_from(offset, line, column), trivia)

    two = ch + cur.peek(1)
    if two in PUNCTUATION_2:
        cur.advance(2)
        return Token(TokenKind.PUNCTUATION, two, cur.span_from(offset, line, column), trivia)
    if ch in PUNCTUATION_1:
        cur.advance()
        return Token(TokenKind.PUNCTUATION, ch, cur.span_from(offset, line, column), trivia)

    cur.advance()
    span = cur.span_from(offset, line, column)
    cur.diagnostics.append(error("P011", f"unexpected character {ch!r}", span))
    return Token(TokenKind.ERROR, ch, span, trivia)


def tokenize(source: str) -> TokenList:
    """Split `source` into tokens; never raises, lexical problems land in `.diagnostics`."""
    cur = _Cursor(source)
    tokens: List[Token] = []
    while True:
        trivia = _read_trivia(cur)
        if cur.pos >= len(source):
            return TokenList(tokens, trivia, cur.diagnostics)
        tokens.append(_read_token(cur, trivia))

"""Lexical layer: text to tokens.

The lexer knows no keywords; every word is looked up in the image later.
Quoted segments ('MyProc') are proper names and keep their case; "//" starts
a comment running to end of line.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..errors import IllegalCharacter, UnterminatedQuote


class TokenKind(Enum):
    WORD = "Word"
    PROPER_NAME = "ProperName"
    NUMBER = "Number"
    PUNCT = "Punct"
    OPEN_BRACE = "OpenBrace"
    CLOSE_BRACE = "CloseBrace"
    OPEN_PAREN = "OpenParen"
    CLOSE_PAREN = "CloseParen"
    OPERATOR = "Operator"
    COLON = "Colon"
    COMMA = "Comma"
    SEMICOLON = "Semicolon"
    PERIOD = "Period"


_PUNCT = {
    "{": TokenKind.OPEN_BRACE,
    "}": TokenKind.CLOSE_BRACE,
    "(": TokenKind.OPEN_PAREN,
    ")": TokenKind.CLOSE_PAREN,
    "=": TokenKind.OPERATOR,
    ":": TokenKind.COLON,
    ",": TokenKind.COMMA,
    ";": TokenKind.SEMICOLON,
    ".": TokenKind.PERIOD,
}


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind
    offset: int
    ws: str = ""  # whitespace and comments preceding the token

    @property
    def raw(self) -> str:
        """The exact source spelling (quotes included for proper names)."""
        if self.kind is TokenKind.PROPER_NAME:
            return f"'{self.text}'"
        return self.text

    def __repr__(self):
        return f"{self.kind.value}({self.text!r}@{self.offset})"


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ws_start = i
        while i < n:
            if text[i].isspace():
                i += 1
            elif text.startswith("//", i):
                while i < n and text[i] != "\n":
                    i += 1
            else:
                break
        if i >= n:
            break
        ws = text[ws_start:i]
        start = i
        c = text[i]
        if c == "'":
            j = i + 1
            while j < n and text[j] != "'" and text[j] != "\n":
                j += 1
            if j >= n or text[j] != "'":
                raise UnterminatedQuote("unterminated quoted name", start)
            tokens.append(Token(text[i + 1:j], TokenKind.PROPER_NAME, start, ws))
            i = j + 1
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token(text[i:j], TokenKind.WORD, start, ws))
            i = j
        elif c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            # take a decimal point only when digits follow, so "2." stays
            # Number(2) Period
            if j + 1 < n and text[j] == "." and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(Token(text[i:j], TokenKind.NUMBER, start, ws))
            i = j
        elif c in _PUNCT:
            tokens.append(Token(c, _PUNCT[c], start, ws))
            i += 1
        else:
            raise IllegalCharacter(f"illegal character {c!r}", start)
    return tokens


def reassemble(tokens: list[Token]) -> str:
    """Inverse of tokenize up to trailing whitespace."""
    return "".join(t.ws + t.raw for t in tokens)

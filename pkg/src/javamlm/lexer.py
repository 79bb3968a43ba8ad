"""Java SE 8 lexical analysis.

Turns Java source into a flat stream of categorized lexemes. Comments and
whitespace are dropped; unicode escapes are translated first, as javac does.
"""

from __future__ import annotations

import enum
import re
import unicodedata
from dataclasses import dataclass
from typing import Iterator, NamedTuple


class TokenKind(str, enum.Enum):
    IDENTIFIER = "Identifier"
    LITERAL = "Literal"
    KEYWORD = "Keyword"
    SEPARATOR = "Separator"
    OPERATOR = "Operator"


KEYWORDS = (
    "abstract", "assert", "boolean", "break", "byte", "case", "catch",
    "char", "class", "const", "continue", "default", "do", "double", "else",
    "enum", "extends", "final", "finally", "float", "for", "goto", "if",
    "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return",
    "short", "static", "strictfp", "super", "switch", "synchronized", "this",
    "throw", "throws", "transient", "try", "void", "volatile", "while",
)

SEPARATORS = ("(", ")", "{", "}", "[", "]", ";", ",", ".", "...", "@", "::")

OPERATORS = (
    "=", ">", "<", "!", "~", "?", ":", "->",
    "==", ">=", "<=", "!=", "&&", "||", "++", "--",
    "+", "-", "*", "/", "&", "|", "^", "%", "<<", ">>", ">>>",
    "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=", "<<=", ">>=", ">>>=",
)

PSEUDO_KEYWORDS = ("true", "false", "null")

CONTROL_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")

_KEYWORD_SET = frozenset(KEYWORDS)
_PSEUDO_SET = frozenset(PSEUDO_KEYWORDS)
_SEPARATOR_SET = frozenset(SEPARATORS)
_OPERATOR_SET = frozenset(OPERATORS)
_SYMBOLS_BY_LEN = [
    frozenset(s for s in SEPARATORS + OPERATORS if len(s) == n) for n in (4, 3, 2, 1)
]
_SYMBOL_START = frozenset(s[0] for s in SEPARATORS + OPERATORS)

_IDENT_START_CATEGORIES = frozenset({"Lu", "Ll", "Lt", "Lm", "Lo", "Nl", "Pc", "Sc"})
_IDENT_PART_CATEGORIES = _IDENT_START_CATEGORIES | {"Mc", "Mn", "Nd", "Cf"}

_DIGITS = r"[0-9](?:[0-9_]*[0-9])?"
_HEX = r"[0-9a-fA-F](?:[0-9a-fA-F_]*[0-9a-fA-F])?"
_EXP = rf"[eE][+-]?{_DIGITS}"
_NUMBER = re.compile(
    "|".join(
        [
            rf"0[xX](?:{_HEX}\.?|(?:{_HEX})?\.{_HEX})[pP][+-]?{_DIGITS}[fFdD]?",
            rf"0[xX]{_HEX}[lL]?",
            r"0[bB][01](?:[01_]*[01])?[lL]?",
            rf"{_DIGITS}\.(?:{_DIGITS})?(?:{_EXP})?[fFdD]?",
            rf"\.{_DIGITS}(?:{_EXP})?[fFdD]?",
            rf"{_DIGITS}{_EXP}[fFdD]?",
            rf"{_DIGITS}[fFdDlL]?",
        ]
    )
)
_WHITESPACE = re.compile(r"[ \t\f\r\n]+")
_ASCII_IDENT_START = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_$")
_ASCII_IDENT_PART = _ASCII_IDENT_START | frozenset("0123456789")
_ESCAPE = re.compile(r"\\(?:[btnfr\"'\\]|[0-3][0-7]{0,2}|[4-7][0-7]?)")


class LexError(ValueError):
    """Malformed Java source; ``offset`` points into the translated text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True, slots=True)
class JavaToken:
    text: str
    kind: TokenKind
    start: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return self.start, self.end

    def to_json(self) -> dict:
        return {"text": self.text, "kind": self.kind.value, "start": self.start, "end": self.end}


@dataclass(frozen=True)
class SpecialTokenInventory:
    java_fixed: tuple[str, ...]
    pseudo_keywords: tuple[str, ...]
    control: tuple[str, ...]

    def all_tokens(self) -> tuple[str, ...]:
        return self.control + self.java_fixed + self.pseudo_keywords

    def __contains__(self, token: str) -> bool:
        return token in self.java_fixed or token in self.pseudo_keywords or token in self.control


class TokenCount(NamedTuple):
    count: int
    error: bool


def special_inventory() -> SpecialTokenInventory:
    return SpecialTokenInventory(
        java_fixed=KEYWORDS + SEPARATORS + OPERATORS,
        pseudo_keywords=PSEUDO_KEYWORDS,
        control=CONTROL_TOKENS,
    )


def is_protected(token: JavaToken) -> bool:
    """True for lexemes the subword tokenizer must never split."""
    return token.kind is not TokenKind.IDENTIFIER and (
        token.kind is not TokenKind.LITERAL or token.text in _PSEUDO_SET
    )


def translate_unicode_escapes(source: str) -> str:
    """Replace eligible ``\\uXXXX`` escapes with the characters they denote.

    A backslash is eligible only when preceded by an even number of
    backslashes, so ``\\\\u0041`` is left alone.
    """
    if "\\u" not in source:
        return source
    out = []
    i = 0
    n = len(source)
    run = 0  # consecutive raw backslashes before i
    while i < n:
        c = source[i]
        if c == "\\" and run % 2 == 0 and i + 1 < n and source[i + 1] == "u":
            j = i + 1
            while j < n and source[j] == "u":
                j += 1
            digits = source[j:j + 4]
            if len(digits) != 4 or not all(d in "0123456789abcdefABCDEF" for d in digits):
                raise LexError("malformed unicode escape", i)
            out.append(chr(int(digits, 16)))
            i = j + 4
            run = 0
            continue
        run = run + 1 if c == "\\" else 0
        out.append(c)
        i += 1
    return "".join(out)


def _is_ident_start(c: str) -> bool:
    return unicodedata.category(c) in _IDENT_START_CATEGORIES


def _is_ident_part(c: str) -> bool:
    if unicodedata.category(c) in _IDENT_PART_CATEGORIES:
        return True
    # identifier-ignorable C1 controls
    return "\x80" <= c <= "\x9f"


def _scan_quoted(text: str, i: int, quote: str) -> int:
    n = len(text)
    j = i + 1
    while True:
        if j >= n or text[j] in "\r\n":
            kind = "string" if quote == '"' else "character"
            raise LexError(f"unterminated {kind} literal", i)
        c = text[j]
        if c == quote:
            break
        if c == "\\":
            m = _ESCAPE.match(text, j)
            if m is None:
                raise LexError("illegal escape sequence", j)
            j = m.end()
        else:
            j += 1
    if quote == "'" and j == i + 1:
        raise LexError("empty character literal", i)
    return j + 1


def _scan_number(text: str, i: int) -> int:
    m = _NUMBER.match(text, i)
    if m is None:
        raise LexError("malformed numeric literal", i)
    end = m.end()
    lit = m.group()
    if end < len(text) and text[end] == "_":
        raise LexError("illegal underscore in numeric literal", end)
    if lit == "0" and end < len(text) and text[end] in "xXbB":
        raise LexError("malformed numeric literal", i)
    digits = lit.rstrip("lL").replace("_", "")
    if len(digits) > 1 and digits[0] == "0" and digits.isdigit() and any(d in "89" for d in digits):
        raise LexError("malformed octal literal", i)
    return end


def iter_tokens(source: str) -> Iterator[JavaToken]:
    """Yield tokens lazily; raises LexError when it reaches malformed input."""
    text = translate_unicode_escapes(source)
    n = len(text)
    if n and text[-1] == "\x1a":
        n -= 1
    i = 0
    while i < n:
        c = text[i]
        if c in " \t\f\r\n":
            i = _WHITESPACE.match(text, i).end()
            continue
        if c == "/" and i + 1 < n and text[i + 1] in "/*":
            if text[i + 1] == "/":
                j = i + 2
                while j < n and text[j] not in "\r\n":
                    j += 1
                i = j
            else:
                j = text.find("*/", i + 2)
                if j < 0 or j + 2 > n:
                    raise LexError("unterminated comment", i)
                i = j + 2
            continue
        if c in "\"'":
            j = _scan_quoted(text, i, c)
            yield JavaToken(text[i:j], TokenKind.LITERAL, i, j)
            i = j
            continue
        if "0" <= c <= "9" or (c == "." and i + 1 < n and "0" <= text[i + 1] <= "9"):
            j = _scan_number(text, i)
            yield JavaToken(text[i:j], TokenKind.LITERAL, i, j)
            i = j
            continue
        if c in _ASCII_IDENT_START or (c >= "\x80" and _is_ident_start(c)):
            j = i + 1
            while j < n:
                d = text[j]
                if d in _ASCII_IDENT_PART or (d >= "\x80" and _is_ident_part(d)):
                    j += 1
                else:
                    break
            word = text[i:j]
            if word in _KEYWORD_SET:
                kind = TokenKind.KEYWORD
            elif word in _PSEUDO_SET:
                kind = TokenKind.LITERAL
            else:
                kind = TokenKind.IDENTIFIER
            yield JavaToken(word, kind, i, j)
            i = j
            continue
        if c in _SYMBOL_START:
            for size, table in zip((4, 3, 2, 1), _SYMBOLS_BY_LEN):
                sym = text[i:i + size]
                if sym in table:
                    kind = TokenKind.SEPARATOR if sym in _SEPARATOR_SET else TokenKind.OPERATOR
                    yield JavaToken(sym, kind, i, i + size)
                    i += size
                    break
            continue
        raise LexError(f"illegal character {c!r}", i)


def lex(source: str) -> list[JavaToken]:
    return list(iter_tokens(source))


def count_tokens(source: str) -> TokenCount:
    count = 0
    try:
        for _ in iter_tokens(source):
            count += 1
    except LexError:
        return TokenCount(count, True)
    return TokenCount(count, False)

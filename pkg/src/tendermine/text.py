"""Tokenisation, number-like detection and per-language resources.

Everything downstream (lexicon building, feature extraction, lot parsing)
tokenises through this module so that counts agree across stages.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterator

# Letters/digits runs, allowing internal "." or "," between alphanumerics so
# that "1.15mg", "II.1" and "7.500,000000" survive as single tokens.
TOKEN_RE = re.compile(r"[^\W_]+(?:[.,][^\W_]+)*")

_ARABIC_RE = re.compile(r"^\d+(?:[.,]\d+)*$")
_ROMAN_RE = re.compile(r"^M{0,3}(CM|CD|D?C{0,3})(XC|XL|L?X{0,3})(IX|IV|V?I{0,3})$")
_FUSED_QUANTITY_RE = re.compile(r"^(\d+(?:[.,]\d+)*)([^\W\d_]+)$")
_ROMAN_VALUES = {"I": 1, "V": 5, "X": 10, "L": 50, "C": 100, "D": 500, "M": 1000}

ROMAN_MAX_LENGTH = 6
ROMAN_MAX_VALUE = 100


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int

    @property
    def lower(self) -> str:
        return self.text.lower()


def tokenize(text: str) -> list[str]:
    """Lowercased tokens of ``text``; punctuation is discarded."""
    return [m.group(0).lower() for m in TOKEN_RE.finditer(text)]


def tokenize_spans(text: str) -> list[Token]:
    """Tokens with their character offsets in ``text`` (original casing)."""
    return [Token(m.group(0), m.start(), m.end()) for m in TOKEN_RE.finditer(text)]


def roman_value(token: str) -> int | None:
    upper = token.upper()
    if not upper or len(upper) > ROMAN_MAX_LENGTH or not _ROMAN_RE.match(upper):
        return None
    total = 0
    for i, ch in enumerate(upper):
        value = _ROMAN_VALUES[ch]
        if i + 1 < len(upper) and _ROMAN_VALUES[upper[i + 1]] > value:
            total -= value
        else:
            total += value
    return total


def _is_roman(token: str) -> bool:
    value = roman_value(token)
    return value is not None and 0 < value <= ROMAN_MAX_VALUE


def is_number_like(token: str) -> bool:
    """True for arabic numbers, small roman numerals and dotted section ids.

    >>> [is_number_like(t) for t in ("94", "II.1", "X.2", "1,115", "mg", "mix")]
    [True, True, True, True, False, False]
    """
    token = token.strip()
    if not token:
        return False
    if _ARABIC_RE.match(token):
        return True
    parts = token.split(".")
    if any(not p for p in parts):
        return False
    return all(p.isdigit() or _is_roman(p) for p in parts)


def has_digit(token: str) -> bool:
    return any(ch.isdigit() for ch in token)


def split_fused_quantity(token: str) -> tuple[str, str] | None:
    """Split "3mg" into ("3", "mg"); None when the token is not of that shape."""
    m = _FUSED_QUANTITY_RE.match(token)
    if m is None:
        return None
    return m.group(1), m.group(2)


def unit_suffix(token: str) -> str | None:
    parts = split_fused_quantity(token)
    return parts[1].lower() if parts else None


def parse_number(text: str, decimal_mark: str | None = None) -> float | None:
    """Parse an arabic number written with "." and/or "," separators.

    With both separators present the last one is the decimal mark. A single
    separator kind used more than once is a thousands mark. A lone separator
    is decimal when it equals ``decimal_mark``, thousands when followed by
    exactly three digits, decimal otherwise.
    """
    text = text.strip()
    if not _ARABIC_RE.match(text):
        return None
    seps = [ch for ch in text if ch in ".,"]
    if not seps:
        return float(text)
    if len(set(seps)) == 2:
        dec = seps[-1]
        head, _, tail = text.rpartition(dec)
        return float(re.sub(r"[.,]", "", head) + "." + tail)
    sep = seps[0]
    if len(seps) > 1:
        return float(text.replace(sep, ""))
    head, tail = text.split(sep)
    if decimal_mark is not None and sep == decimal_mark:
        return float(f"{head}.{tail}")
    if len(tail) == 3:
        return float(head + tail)
    return float(f"{head}.{tail}")


@dataclass(frozen=True)
class LanguageConfig:
    code: str
    lot_words: tuple[str, ...]
    number_words: tuple[str, ...]
    reference_connectors: tuple[str, ...]
    terminators: tuple[str, ...]
    decimal_mark: str
    stopwords: frozenset[str]


def _data_text(name: str) -> str:
    return resources.files("tendermine.data").joinpath(name).read_text(encoding="utf-8")


def read_word_list(text: str) -> list[str]:
    words = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line.lower())
    return words


def data_word_list(name: str) -> list[str]:
    return read_word_list(_data_text(name))


@lru_cache(maxsize=None)
def language_config(code: str) -> LanguageConfig:
    table = json.loads(_data_text("languages.json"))
    if code not in table:
        raise KeyError(f"no language resources for {code!r}; known: {sorted(table)}")
    entry = table[code]
    return LanguageConfig(
        code=code,
        lot_words=tuple(entry["lot_words"]),
        number_words=tuple(entry["number_words"]),
        reference_connectors=tuple(entry["reference_connectors"]),
        terminators=tuple(entry["terminators"]),
        decimal_mark=entry["decimal_mark"],
        stopwords=frozenset(data_word_list(entry["stopwords"])),
    )


def is_lot_header(text: str, language: str = "en") -> bool:
    """Header cell of the form "lot [token]" with one optional trailing word."""
    cfg = language_config(language)
    words = text.split()
    if not 1 <= len(words) <= 2:
        return False
    return words[0].lower().rstrip(".:") in cfg.lot_words


def iter_ngrams(tokens: list[str], n: int) -> Iterator[tuple[str, ...]]:
    for i in range(len(tokens) - n + 1):
        yield tuple(tokens[i : i + n])

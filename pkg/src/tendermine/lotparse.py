"""Lot boundaries, lot references and structured item parsing."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .itemdetect import CandidateSentence
from .lexicon import NGramDictionary, WordDictionary
from .text import Token, has_digit, is_number_like, language_config, parse_number, split_fused_quantity, tokenize_spans

UNASSIGNED = "unassigned"
CLOSE_POLICIES = ("none", "table", "page")
DEFAULT_WINDOW = 3

# Enumeration markers that may precede "Lot": bullets and section ids like "1.15".
_LEADING_MARKER_RE = re.compile(r"^\s*(?:[•\-*–·▪]\s*)?(?:\d+(?:\.\d+)*[.)]?\s+)?")
_REMAINDER_TRIM = " \t:;,.-–—)"


class UnparseableItem(ValueError):
    pass


class SpanKind(str, Enum):
    NGRAM = "ngram"
    FORM = "form"
    MEASURE = "measure"


# Tie-break when two spans of different kinds have equal length and start.
_KIND_PRIORITY = {SpanKind.MEASURE: 0, SpanKind.FORM: 1, SpanKind.NGRAM: 2}


@dataclass(frozen=True)
class MatchSpan:
    start: int
    end: int
    kind: SpanKind
    text: str

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"empty span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "MatchSpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Measurement:
    quantity: float | None
    unit: str

    def __post_init__(self):
        if self.quantity is not None and self.quantity <= 0:
            raise ValueError("quantity must be positive")

    def to_dict(self) -> dict:
        q = self.quantity
        if q is not None and q.is_integer():
            q = int(q)
        return {"quantity": q, "unit": self.unit}


@dataclass(frozen=True)
class Item:
    id: str
    name: str
    form: str | None
    measurements: tuple[Measurement, ...]
    raw_text: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("item name is empty")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "form": self.form,
            "measurements": [m.to_dict() for m in self.measurements],
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Item":
        ms = tuple(
            Measurement(None if m["quantity"] is None else float(m["quantity"]), m["unit"])
            for m in data["measurements"]
        )
        return cls(data["id"], data["name"], data["form"], ms, data["raw_text"])


@dataclass
class Lot:
    reference: str
    doc_id: str = ""
    items: list[Item] = field(default_factory=list)
    source: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    tender_id: str = ""

    def __post_init__(self):
        if not self.reference:
            raise ValueError("lot reference is empty")

    def to_dict(self) -> dict:
        return {
            "ref": self.reference,
            "doc_id": self.doc_id,
            "items": [i.to_dict() for i in self.items],
            "source": list(self.source),
            "notes": list(self.notes),
            "tender_id": self.tender_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Lot":
        return cls(
            data["ref"],
            data.get("doc_id", ""),
            [Item.from_dict(i) for i in data["items"]],
            list(data.get("source", ())),
            list(data.get("notes", ())),
            data.get("tender_id", ""),
        )


# ---------------------------------------------------------------------------
# lot references

def _connector_pattern(connectors: Iterable[str]) -> str:
    alts = []
    for c in sorted(connectors, key=len, reverse=True):
        if c.endswith(".") and len(c) > 1:
            # "no." also accepts "No" followed by ":" as in "Lot No: 94"
            alts.append(rf"{re.escape(c[:-1])}\.?(?![^\W_])")
        elif c[0].isalnum():
            alts.append(rf"{re.escape(c)}(?![^\W_])")
        else:
            alts.append(re.escape(c))
    return "|".join(alts)


def _reference_regex(language: str) -> re.Pattern:
    cfg = language_config(language)
    lots = "|".join(re.escape(w) for w in sorted(cfg.lot_words, key=len, reverse=True))
    connectors = _connector_pattern(set(cfg.number_words) | set(cfg.reference_connectors))
    return re.compile(
        rf"(?:{lots})(?![^\W_])(?:\s*(?:{connectors})){{0,2}}\s*([^\W_]+(?:[.,][^\W_]+)*)",
        re.IGNORECASE,
    )


def split_lot_reference(sentence: str, language: str = "en") -> tuple[str, str] | None:
    """``(reference, remainder)`` when the sentence opens with a lot reference.

    A leading bullet or section number ("1.15 Lote 15") is skipped first.
    """
    body = sentence[_LEADING_MARKER_RE.match(sentence).end():]
    m = _reference_regex(language).match(body)
    if m is None or not is_number_like(m.group(1)):
        return None
    return m.group(1), body[m.end():].lstrip(_REMAINDER_TRIM).rstrip()


def extract_lot_reference(sentence: str, language: str = "en") -> str | None:
    found = split_lot_reference(sentence, language)
    return found[0] if found else None


def normalize_reference(reference: str) -> str:
    """Trailing token with leading zeros removed, so "Lot 094" and "94" compare equal."""
    tokens = [t.text for t in tokenize_spans(reference)]
    if not tokens:
        return reference.strip().lower()
    last = tokens[-1]
    if last.isdigit():
        return last.lstrip("0") or "0"
    return last.lower()


# ---------------------------------------------------------------------------
# matching

def _lower_tokens(tokens: Sequence[Token]) -> list[str]:
    return [t.text.lower() for t in tokens]


def match_spans(
    tokens: Sequence[Token],
    ngrams: NGramDictionary,
    form: WordDictionary,
    measure: WordDictionary,
    stopwords: frozenset[str] = frozenset(),
) -> list[MatchSpan]:
    """All dictionary hits, overlapping n-gram hits included.

    N-gram hits never contain digit-bearing tokens and never start or end
    with a stopword. Measure hits also fire on fused quantities ("3mg"); the
    tokenizer already splits "3mg/10ml" in two.
    """
    words = _lower_tokens(tokens)
    spans: list[MatchSpan] = []
    max_n = ngrams.max_n
    for i in range(len(words)):
        for n in range(1, max_n + 1):
            gram = tuple(words[i : i + n])
            if len(gram) < n or any(has_digit(w) for w in gram):
                break
            if gram in ngrams and gram[0] not in stopwords and gram[-1] not in stopwords:
                spans.append(MatchSpan(i, i + n, SpanKind.NGRAM, " ".join(gram)))
    for i, w in enumerate(words):
        if w in form:
            spans.append(MatchSpan(i, i + 1, SpanKind.FORM, w))
        fused = split_fused_quantity(w)
        unit = fused[1] if fused else w
        if unit in measure:
            spans.append(MatchSpan(i, i + 1, SpanKind.MEASURE, unit))
    spans.sort(key=lambda s: (s.start, s.end, _KIND_PRIORITY[s.kind]))
    return spans


def union_spans(spans: Sequence[MatchSpan]) -> list[MatchSpan]:
    """Union overlapping or touching spans of one kind."""
    out: list[list[int]] = []
    for s in sorted(spans, key=lambda s: (s.start, s.end)):
        if out and s.start <= out[-1][1]:
            out[-1][1] = max(out[-1][1], s.end)
        else:
            out.append([s.start, s.end])
    kind = spans[0].kind if spans else SpanKind.NGRAM
    return [MatchSpan(a, b, kind, "") for a, b in out]


def merge_overlaps(spans: Sequence[MatchSpan], tokens: Sequence[Token] | None = None) -> list[MatchSpan]:
    """Union n-gram spans, then settle cross-kind conflicts.

    A conflict keeps the longer span, then the leftmost, then measure over
    form over n-gram. ``tokens`` (when given) fills in the merged span text.
    """
    ngram = union_spans([s for s in spans if s.kind == SpanKind.NGRAM])
    if tokens is not None:
        words = _lower_tokens(tokens)
        ngram = [MatchSpan(s.start, s.end, s.kind, " ".join(words[s.start : s.end])) for s in ngram]
    else:
        by_range = {(s.start, s.end): s.text for s in spans if s.kind == SpanKind.NGRAM}
        ngram = [MatchSpan(s.start, s.end, s.kind, by_range.get((s.start, s.end), "")) for s in ngram]
    others = [s for s in spans if s.kind != SpanKind.NGRAM]
    ranked = sorted(set(ngram) | set(others), key=lambda s: (-len(s), s.start, _KIND_PRIORITY[s.kind]))
    kept: list[MatchSpan] = []
    for s in ranked:
        if not any(s.overlaps(k) for k in kept):
            kept.append(s)
    return sorted(kept, key=lambda s: (s.start, s.end))


# ---------------------------------------------------------------------------
# quantities and items

def extract_quantities(
    tokens: Sequence[Token],
    measure_spans: Sequence[MatchSpan],
    window: int = DEFAULT_WINDOW,
    decimal_mark: str | None = None,
) -> list[Measurement]:
    """Attach to each unit the fused digit prefix or the nearest number up to ``window`` tokens left."""
    words = _lower_tokens(tokens)
    unit_positions = {s.start for s in measure_spans}
    out = []
    for span in sorted(measure_spans, key=lambda s: s.start):
        quantity = None
        fused = split_fused_quantity(words[span.start])
        if fused:
            quantity = parse_number(fused[0], decimal_mark)
        else:
            for j in range(span.start - 1, max(span.start - window, 0) - 1, -1):
                if j in unit_positions:
                    break
                value = parse_number(words[j], decimal_mark)
                if value is not None:
                    quantity = value
                    break
        if quantity is not None and quantity <= 0:
            quantity = None
        out.append(Measurement(quantity, span.text))
    return out


def _slice(text: str, tokens: Sequence[Token], start: int, end: int) -> str:
    return " ".join(text[tokens[start].start : tokens[end - 1].end].lower().split())


@dataclass(frozen=True)
class LotParser:
    """Dictionaries and settings for turning positive sentences into lots."""

    ngrams: NGramDictionary
    form: WordDictionary
    measure: WordDictionary
    language: str = "en"
    window: int = DEFAULT_WINDOW
    close_at: str = "table"

    def __post_init__(self):
        if self.close_at not in CLOSE_POLICIES:
            raise ValueError(f"close_at must be one of {CLOSE_POLICIES}")

    def spans(self, text: str) -> tuple[list[Token], list[MatchSpan]]:
        tokens = tokenize_spans(text)
        stop = language_config(self.language).stopwords
        return tokens, merge_overlaps(match_spans(tokens, self.ngrams, self.form, self.measure, stop), tokens)

    def has_dictionary_hit(self, text: str) -> bool:
        return bool(self.spans(text)[1])

    def parse_item(self, text: str, item_id: str = "index-1") -> Item:
        tokens, spans = self.spans(text)
        stop = language_config(self.language).stopwords
        name_spans = [s for s in spans if s.kind == SpanKind.NGRAM]
        if name_spans:
            best = max(name_spans, key=lambda s: (len(s), -s.start))
            name = _slice(text, tokens, best.start, best.end)
        else:
            taken = {i for s in spans for i in range(s.start, s.end)}
            best_run: tuple[int, int] | None = None
            run_start = None
            for i in range(len(tokens) + 1):
                ok = (
                    i < len(tokens)
                    and i not in taken
                    and not has_digit(tokens[i].text)
                    and not is_number_like(tokens[i].text)
                    and tokens[i].text.lower() not in stop
                )
                if ok and run_start is None:
                    run_start = i
                elif not ok and run_start is not None:
                    if best_run is None or i - run_start > best_run[1] - best_run[0]:
                        best_run = (run_start, i)
                    run_start = None
            if best_run is None:
                raise UnparseableItem(f"no name candidate in {text!r}")
            name = _slice(text, tokens, *best_run)
        form = next((s.text for s in spans if s.kind == SpanKind.FORM), None)
        measures = [s for s in spans if s.kind == SpanKind.MEASURE]
        decimal = language_config(self.language).decimal_mark
        measurements = extract_quantities(tokens, measures, self.window, decimal)
        return Item(item_id, name, form, tuple(measurements), text)


def parse_item(sentence: CandidateSentence | str, parser: LotParser, item_id: str = "index-1") -> Item:
    text = sentence if isinstance(sentence, str) else sentence.sentence.text
    return parser.parse_item(text, item_id)


# ---------------------------------------------------------------------------
# grouping

def _container(c: CandidateSentence) -> tuple:
    s = c.sentence
    if s.table_index is not None:
        return (c.doc_id, s.page_index, "t", s.table_index)
    return (c.doc_id, s.page_index, "p")


def _closes(prev: tuple | None, cur: tuple, policy: str) -> bool:
    if prev is None:
        return False
    if prev[0] != cur[0]:
        return True
    if policy == "table" or policy == "page":
        if prev[2] == "t" and prev != cur:
            return True
    if policy == "page":
        return prev[1] != cur[1]
    return False


def group_lots(positives: Sequence[CandidateSentence], parser: LotParser) -> list[Lot]:
    """Apply the boundary rule over positives in document order.

    A reference-bearing sentence opens a lot; a repeated reference (a
    row-spanned lot number) reopens the lot of that reference. Following
    positives attach to the open lot. Positives with no open lot go to the
    document's "unassigned" lot. Text after a reference becomes an item only
    when it holds a dictionary hit; otherwise it is kept as a note.
    """
    lots: dict[tuple[str, str], Lot] = {}
    open_key: tuple[str, str] | None = None
    prev = None
    for cand in positives:
        cur = _container(cand)
        if _closes(prev, cur, parser.close_at):
            open_key = None
        prev = cur
        text = cand.sentence.text
        found = split_lot_reference(text, parser.language)
        if found is not None:
            ref, remainder = found
            open_key = (cand.doc_id, ref)
            body = remainder if remainder and parser.has_dictionary_hit(remainder) else None
            note = remainder if remainder and body is None else None
        else:
            body, note = text, None
        key = open_key or (cand.doc_id, UNASSIGNED)
        lot = lots.get(key)
        if lot is None:
            lot = lots[key] = Lot(key[1], cand.doc_id)
        lot.source.append(cand.unit_id)
        if note:
            lot.notes.append(note)
        if body:
            try:
                lot.items.append(parser.parse_item(body, f"index-{len(lot.items) + 1}"))
            except UnparseableItem:
                lot.notes.append(body)
    return list(lots.values())


def dumps_lots(lots: Iterable[Lot]) -> str:
    return json.dumps([lot.to_dict() for lot in lots], ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def save_lots(lots: Iterable[Lot], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_lots(lots))


def load_lots(path) -> list[Lot]:
    with open(path, encoding="utf-8") as fh:
        return [Lot.from_dict(d) for d in json.load(fh)]

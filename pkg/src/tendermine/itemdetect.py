"""Lot item detection: classify sentences and table rows as lot/item bearing."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .classify import IRRELEVANT, RELEVANT, ManifestMismatch, TrainedModel, predict_many
from .docmodel import Origin, Paragraph, Sentence, Table, UniversalDocument, expand_spans, split_sentences
from .features import FeatureContext, manifest_version, sentence_features
from .lexicon import FIELD_NAMES, TARGET_FIELD, FieldCorpus
from .text import is_lot_header, is_number_like
from .zoning import ZoningResult

MIN_GOLD_WORDS = 2
MAX_GOLD_WORDS = 20


class RowOutOfRange(IndexError):
    pass


@dataclass(frozen=True)
class CandidateSentence:
    doc_id: str
    sentence: Sentence
    score: float
    label: str
    synthesized_prefix: str | None = None

    @property
    def positive(self) -> bool:
        return self.label == RELEVANT

    @property
    def unit_id(self) -> str:
        return f"{self.doc_id}:{self.sentence.sentence_id}"

    def to_record(self) -> dict:
        s = self.sentence
        return {
            "doc_id": self.doc_id,
            "origin": s.origin.value,
            "page": s.page_index,
            "table": s.table_index,
            "row": s.row_index,
            "position": s.position,
            "index": s.index,
            "text": s.text,
            "score": self.score,
            "prefix": self.synthesized_prefix,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CandidateSentence":
        sentence = Sentence(
            rec["text"],
            Origin(rec["origin"]),
            page_index=rec["page"],
            table_index=rec["table"],
            row_index=rec["row"],
            position=rec.get("position", 0),
            index=rec.get("index", 0),
        )
        return cls(rec["doc_id"], sentence, rec["score"], RELEVANT, rec.get("prefix"))


def lot_column(grid: Sequence[Sequence[str]], header_row: int | None, language: str = "en") -> int | None:
    """Leftmost column whose header reads "lot [token]" and whose body cells are all number-like."""
    if header_row is None or not grid:
        return None
    body = [row for r, row in enumerate(grid) if r != header_row]
    if not body:
        return None
    for c, header in enumerate(grid[header_row]):
        if is_lot_header(header, language) and all(is_number_like(row[c]) for row in body):
            return c
    return None


def row_to_sentence(
    table: Table,
    row_index: int,
    language: str = "en",
    page_index: int = 0,
    table_index: int = 0,
    grid: Sequence[Sequence[str]] | None = None,
) -> tuple[Sentence, str | None]:
    """Join a row's non-empty cells with single spaces.

    When the table has a lot-number column, the header text is inserted
    before the cell value ("1" becomes "Lot Number 1"). Returns the sentence
    and the inserted prefix, if any.
    """
    if not 0 <= row_index < table.n_rows:
        raise RowOutOfRange(f"row {row_index} outside 0..{table.n_rows - 1}")
    grid = grid if grid is not None else expand_spans(table)
    col = lot_column(grid, table.header_row_index, language)
    prefix = None
    parts = []
    for c, text in enumerate(grid[row_index]):
        text = text.strip()
        if not text:
            continue
        if c == col and row_index != table.header_row_index:
            prefix = grid[table.header_row_index][c].strip()
            text = f"{prefix} {text}"
        parts.append(" ".join(text.split()))
    sentence = Sentence(
        " ".join(parts),
        Origin.TABLE_ROW,
        page_index=page_index,
        table_index=table_index,
        row_index=row_index,
        position=table.position,
        index=row_index,
    )
    return sentence, prefix


def table_sentences(table: Table, language: str, page_index: int, table_index: int) -> list[tuple[Sentence, str | None]]:
    grid = expand_spans(table)
    out = []
    for r in range(table.n_rows):
        sentence, prefix = row_to_sentence(table, r, language, page_index, table_index, grid)
        if sentence.text:
            out.append((sentence, prefix))
    return out


def candidate_sentences(doc: UniversalDocument, zoning: ZoningResult) -> list[tuple[Sentence, str | None]]:
    """Sentences of relevant pages and rows of relevant tables, in reading order."""
    pages = {p.page_index for p in zoning.relevant_pages}
    tables = {(t.page_index, t.table_index) for t in zoning.relevant_tables}
    out = []
    for page in doc.pages:
        if page.index in pages:
            for para in page.paragraphs:
                out.extend((s, None) for s in split_sentences(para, doc.language, page.index))
        for t_idx, table in enumerate(page.tables):
            if (page.index, t_idx) in tables:
                out.extend(table_sentences(table, doc.language, page.index, t_idx))
    out.sort(key=lambda item: (item[0].page_index, item[0].position, item[0].index))
    return out


def score_sentences(
    units: Iterable[tuple[UniversalDocument, ZoningResult]],
    model: TrainedModel,
    ctx: FeatureContext,
    threshold: float | None = None,
) -> list[CandidateSentence]:
    if model.feature_manifest_version != manifest_version("sentence"):
        raise ManifestMismatch(f"item detection needs a sentence model, got {model.feature_manifest_version}")
    out = []
    for doc, zoning in units:
        cands = candidate_sentences(doc, zoning)
        preds = predict_many(model, [sentence_features(s, ctx) for s, _ in cands], threshold)
        out.extend(
            CandidateSentence(doc.doc_id, s, p.score, p.label, prefix) for (s, prefix), p in zip(cands, preds)
        )
    return out


def detect_items(
    units: Iterable[tuple[UniversalDocument, ZoningResult]],
    model: TrainedModel,
    ctx: FeatureContext,
    threshold: float | None = None,
) -> list[CandidateSentence]:
    """Positive sentences in document order."""
    return [c for c in score_sentences(units, model, ctx, threshold) if c.positive]


def write_detections(detections: Iterable[CandidateSentence], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in detections:
            fh.write(json.dumps(c.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def read_detections(path) -> list[CandidateSentence]:
    with open(path, encoding="utf-8") as fh:
        return [CandidateSentence.from_record(json.loads(line)) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# gold standard from tender fields

@dataclass(frozen=True)
class GoldSentence:
    text: str
    label: str
    field_name: str


def _field_sentences(values: Iterable[str], language: str) -> list[str]:
    seen: dict[str, None] = {}
    for value in values:
        for s in split_sentences(Paragraph(value), language):
            if MIN_GOLD_WORDS <= len(s.text.split()) <= MAX_GOLD_WORDS:
                seen.setdefault(s.text, None)
    return list(seen)


def build_gold_standard(corpora: Sequence[FieldCorpus], language: str = "en") -> list[GoldSentence]:
    """Unique 2-20 word sentences; lot/item field values are positive, the rest negative.

    A sentence found in both the lot field and another field stays positive.
    """
    by_name = {c.field_name: c for c in corpora}
    if set(by_name) != set(FIELD_NAMES):
        raise ValueError("one corpus per field is required")
    positives = _field_sentences(by_name[TARGET_FIELD].values, language)
    taken = set(positives)
    out = [GoldSentence(t, RELEVANT, TARGET_FIELD) for t in positives]
    for name in FIELD_NAMES:
        if name == TARGET_FIELD:
            continue
        for t in _field_sentences(by_name[name].values, language):
            if t not in taken:
                taken.add(t)
                out.append(GoldSentence(t, IRRELEVANT, name))
    return out

"""Universal document model: pages holding paragraphs and tables.

Raw inputs (plain text or span-annotated CSV) are normalised into
:class:`UniversalDocument`, which is also the on-disk JSON interchange format.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Union

import jsonschema

from .text import is_lot_header, language_config


class SchemaViolation(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class TableError(ValueError):
    pass


class OverlappingSpans(TableError):
    pass


@dataclass(frozen=True)
class Paragraph:
    text: str
    position: int = 0


@dataclass(frozen=True)
class Cell:
    row: int
    col: int
    text: str
    row_span: int = 1
    col_span: int = 1


@dataclass(frozen=True)
class Table:
    cells: tuple[Cell, ...]
    n_rows: int
    n_cols: int
    header_row_index: int | None = None
    position: int = 0
    source_pages: tuple[int, ...] = ()

    def grid(self) -> list[list[str]]:
        return expand_spans(self)

    def transpose(self) -> "Table":
        cells = tuple(
            Cell(c.col, c.row, c.text, row_span=c.col_span, col_span=c.row_span) for c in self.cells
        )
        return replace(self, cells=cells, n_rows=self.n_cols, n_cols=self.n_rows, header_row_index=None)


@dataclass(frozen=True)
class Page:
    index: int
    paragraphs: tuple[Paragraph, ...] = ()
    tables: tuple[Table, ...] = ()

    def blocks(self) -> list[Union[Paragraph, Table]]:
        """Paragraphs and tables in reading order."""
        return sorted([*self.paragraphs, *self.tables], key=lambda b: b.position)


@dataclass(frozen=True)
class UniversalDocument:
    doc_id: str
    language: str = "en"
    pages: tuple[Page, ...] = ()
    tender_id: str | None = None

    @property
    def tender(self) -> str:
        return self.tender_id or self.doc_id


class Origin(str, Enum):
    PARAGRAPH = "paragraph"
    TABLE_ROW = "table_row"


@dataclass(frozen=True)
class Sentence:
    text: str
    origin: Origin = Origin.PARAGRAPH
    page_index: int = 0
    table_index: int | None = None
    row_index: int | None = None
    position: int = 0
    index: int = 0

    def __post_init__(self):
        if self.origin is Origin.TABLE_ROW and (self.table_index is None or self.row_index is None):
            raise ValueError("table_row sentences need table_index and row_index")

    @property
    def sentence_id(self) -> str:
        if self.origin is Origin.TABLE_ROW:
            return f"p{self.page_index}.t{self.table_index}.r{self.row_index}"
        return f"p{self.page_index}.b{self.position}.s{self.index}"


# ---------------------------------------------------------------------------
# segmentation

_PARAGRAPH_BREAK = re.compile(r"\n(?:[ \t]*\n)+")
_BULLET_RE = re.compile(r"^\s*[•\-*–·▪]\s+")
_NUMBERED_RE = re.compile(r"^\s*(?:\d+(?:\.\d+)*\.?|\([a-z0-9]{1,3}\)|[a-z]\)|[ivx]{1,4}\.)\s+", re.I)


def segment_paragraphs(raw_text: str) -> list[Paragraph]:
    """Split text on runs of two or more newlines; drop blank blocks."""
    text = raw_text.replace("\r\n", "\n").replace("\r", "\n")
    out = []
    for block in _PARAGRAPH_BREAK.split(text):
        block = block.strip()
        if block:
            out.append(Paragraph(block, position=len(out)))
    return out


def _line_segments(text: str) -> list[str]:
    segments: list[str] = []
    for line in text.split("\n"):
        stripped = line.strip()
        if not stripped:
            continue
        bullet = _BULLET_RE.match(line)
        if bullet:
            segments.append(line[bullet.end() :].strip())
        elif _NUMBERED_RE.match(line) or not segments:
            segments.append(stripped)
        else:
            segments[-1] = f"{segments[-1]} {stripped}"
    return [s for s in segments if s]


def _split_on_terminators(segment: str, terminators: tuple[str, ...]) -> list[str]:
    pieces = []
    start = 0
    i = 0
    n = len(segment)
    while i < n:
        if segment[i] in terminators:
            j = i + 1
            while j < n and segment[j].isspace():
                j += 1
            if j > i + 1 and j < n and segment[j].isupper():
                pieces.append(segment[start : i + 1].strip())
                start = j
                i = j
                continue
        i += 1
    pieces.append(segment[start:].strip())
    return [p for p in pieces if p]


def split_sentences(paragraph: Paragraph, language: str = "en", page_index: int = 0) -> list[Sentence]:
    """Rule-based sentence splitting.

    A new sentence starts at every bulleted or numbered line, and after a
    terminator followed by whitespace and an uppercase letter.
    """
    terminators = language_config(language).terminators
    texts = []
    for segment in _line_segments(paragraph.text):
        texts.extend(_split_on_terminators(segment, terminators))
    return [
        Sentence(t, Origin.PARAGRAPH, page_index=page_index, position=paragraph.position, index=k)
        for k, t in enumerate(texts)
    ]


def page_sentences(page: Page, language: str = "en") -> list[Sentence]:
    out = []
    for para in page.paragraphs:
        out.extend(split_sentences(para, language, page_index=page.index))
    return out


# ---------------------------------------------------------------------------
# tables

def expand_spans(table: Table) -> list[list[str]]:
    """Dense ``n_rows x n_cols`` grid with spanned text copied into every slot."""
    grid: list[list[str | None]] = [[None] * table.n_cols for _ in range(table.n_rows)]
    for cell in table.cells:
        if cell.row_span < 1 or cell.col_span < 1:
            raise TableError(f"non-positive span at ({cell.row}, {cell.col})")
        if (
            cell.row < 0
            or cell.col < 0
            or cell.row + cell.row_span > table.n_rows
            or cell.col + cell.col_span > table.n_cols
        ):
            raise TableError(f"cell at ({cell.row}, {cell.col}) extends past the table bounds")
        for r in range(cell.row, cell.row + cell.row_span):
            for c in range(cell.col, cell.col + cell.col_span):
                if grid[r][c] is not None:
                    raise OverlappingSpans(f"grid position ({r}, {c}) claimed twice")
                grid[r][c] = cell.text
    return [[v if v is not None else "" for v in row] for row in grid]


def _concat_tables(first: Table, second: Table, second_page: int) -> Table:
    shifted = tuple(replace(c, row=c.row + first.n_rows) for c in second.cells)
    pages = list(first.source_pages)
    for p in second.source_pages or (second_page,):
        if p not in pages:
            pages.append(p)
    return replace(
        first,
        cells=first.cells + shifted,
        n_rows=first.n_rows + second.n_rows,
        source_pages=tuple(pages),
    )


def _merged_with_pages(pages: Iterable[Page]) -> list[tuple[int, Table]]:
    out: list[tuple[int, Table]] = []
    previous_was_table = False
    for page in pages:
        for block in page.blocks():
            if isinstance(block, Table):
                table = block if block.source_pages else replace(block, source_pages=(page.index,))
                if previous_was_table and out[-1][1].n_cols == table.n_cols:
                    home, last = out[-1]
                    out[-1] = (home, _concat_tables(last, table, page.index))
                else:
                    out.append((page.index, table))
                previous_was_table = True
            else:
                previous_was_table = False
    return out


def merge_tables(pages: Iterable[Page]) -> list[Table]:
    """Merge consecutive tables with equal column counts and nothing between."""
    return [t for _, t in _merged_with_pages(pages)]


def merge_document_tables(doc: UniversalDocument) -> UniversalDocument:
    """Return ``doc`` with merged tables attached to their first source page."""
    by_page: dict[int, list[Table]] = {}
    for home, table in _merged_with_pages(doc.pages):
        by_page.setdefault(home, []).append(table)
    pages = tuple(replace(p, tables=tuple(by_page.get(p.index, ()))) for p in doc.pages)
    return replace(doc, pages=pages)


def detect_header_row(table: Table, language: str = "en") -> int | None:
    row0 = [c.text for c in table.cells if c.row == 0]
    return 0 if any(is_lot_header(t, language) for t in row0) else None


# ---------------------------------------------------------------------------
# ingestion

def document_from_text(raw_text: str, doc_id: str, language: str = "en", tender_id: str | None = None) -> UniversalDocument:
    """Plain text input; form feeds separate pages."""
    raw_text = raw_text.replace("\r\n", "\n")
    chunks = raw_text.split("\f")
    pages = tuple(Page(i, paragraphs=tuple(segment_paragraphs(chunk))) for i, chunk in enumerate(chunks))
    return UniversalDocument(doc_id, language, pages, tender_id)


def table_from_csv(path: Union[str, Path], language: str = "en") -> Table:
    """Read a long-format CSV with columns row,col,row_span,col_span,text."""
    cells = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"row", "col", "text"} - set(reader.fieldnames or ())
        if missing:
            raise SchemaViolation(str(path), f"missing CSV columns {sorted(missing)}")
        for line_no, rec in enumerate(reader, start=2):
            try:
                cells.append(
                    Cell(
                        row=int(rec["row"]),
                        col=int(rec["col"]),
                        text=rec["text"] or "",
                        row_span=int(rec.get("row_span") or 1),
                        col_span=int(rec.get("col_span") or 1),
                    )
                )
            except ValueError as exc:
                raise SchemaViolation(f"{path}:{line_no}", str(exc)) from None
    n_rows = max((c.row + c.row_span for c in cells), default=0)
    n_cols = max((c.col + c.col_span for c in cells), default=0)
    table = Table(tuple(cells), n_rows, n_cols, source_pages=(0,))
    return replace(table, header_row_index=detect_header_row(table, language))


def document_from_csv(path: Union[str, Path], doc_id: str, language: str = "en", tender_id: str | None = None) -> UniversalDocument:
    table = table_from_csv(path, language)
    return UniversalDocument(doc_id, language, (Page(0, tables=(table,)),), tender_id)


# ---------------------------------------------------------------------------
# JSON format

_CELL_SCHEMA = {
    "type": "object",
    "required": ["row", "col", "text"],
    "properties": {
        "row": {"type": "integer", "minimum": 0},
        "col": {"type": "integer", "minimum": 0},
        "row_span": {"type": "integer", "minimum": 1},
        "col_span": {"type": "integer", "minimum": 1},
        "text": {"type": "string"},
    },
}

DOCUMENT_SCHEMA = {
    "type": "object",
    "required": ["doc_id", "language", "pages"],
    "properties": {
        "doc_id": {"type": "string"},
        "language": {"type": "string"},
        "tender_id": {"type": ["string", "null"]},
        "pages": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "blocks"],
                "properties": {
                    "index": {"type": "integer", "minimum": 0},
                    "blocks": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["kind"],
                            "properties": {"position": {"type": "integer", "minimum": 0}},
                            "oneOf": [
                                {
                                    "properties": {"kind": {"const": "paragraph"}, "text": {"type": "string"}},
                                    "required": ["text"],
                                },
                                {
                                    "properties": {
                                        "kind": {"const": "table"},
                                        "cells": {"type": "array", "items": _CELL_SCHEMA},
                                        "n_rows": {"type": "integer", "minimum": 0},
                                        "n_cols": {"type": "integer", "minimum": 0},
                                        "header_row": {"type": ["integer", "null"]},
                                        "source_pages": {"type": "array", "items": {"type": "integer"}},
                                    },
                                    "required": ["cells", "n_rows", "n_cols"],
                                },
                            ],
                        },
                    },
                },
            },
        },
    },
}


def document_to_dict(doc: UniversalDocument) -> dict:
    pages = []
    for page in doc.pages:
        blocks = []
        for block in page.blocks():
            if isinstance(block, Paragraph):
                blocks.append({"kind": "paragraph", "text": block.text, "position": block.position})
            else:
                blocks.append(
                    {
                        "kind": "table",
                        "cells": [
                            {"row": c.row, "col": c.col, "row_span": c.row_span, "col_span": c.col_span, "text": c.text}
                            for c in block.cells
                        ],
                        "n_rows": block.n_rows,
                        "n_cols": block.n_cols,
                        "header_row": block.header_row_index,
                        "position": block.position,
                        "source_pages": list(block.source_pages),
                    }
                )
        pages.append({"index": page.index, "blocks": blocks})
    out = {"doc_id": doc.doc_id, "language": doc.language, "pages": pages}
    if doc.tender_id is not None:
        out["tender_id"] = doc.tender_id
    return out


def document_from_dict(data: dict) -> UniversalDocument:
    try:
        jsonschema.validate(data, DOCUMENT_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaViolation(path, exc.message) from None
    pages = []
    for expected, pdata in enumerate(data["pages"]):
        if pdata["index"] != expected:
            raise SchemaViolation(f"pages/{expected}/index", f"expected {expected}, got {pdata['index']}")
        paragraphs, tables = [], []
        for pos, b in enumerate(pdata["blocks"]):
            pos = b.get("position", pos)
            if b["kind"] == "paragraph":
                paragraphs.append(Paragraph(b["text"], position=pos))
            else:
                cells = tuple(
                    Cell(c["row"], c["col"], c["text"], c.get("row_span", 1), c.get("col_span", 1)) for c in b["cells"]
                )
                tables.append(
                    Table(
                        cells,
                        b["n_rows"],
                        b["n_cols"],
                        header_row_index=b.get("header_row"),
                        position=pos,
                        source_pages=tuple(b.get("source_pages", (expected,))),
                    )
                )
        pages.append(Page(expected, tuple(paragraphs), tuple(tables)))
    return UniversalDocument(data["doc_id"], data["language"], tuple(pages), data.get("tender_id"))


def dumps_document(doc: UniversalDocument) -> str:
    return json.dumps(document_to_dict(doc), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def save_document(doc: UniversalDocument, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_document(doc), encoding="utf-8")


def load_document(path: Union[str, Path]) -> UniversalDocument:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(str(path), f"invalid JSON: {exc}") from None
    return document_from_dict(data)

"""Lot zoning: pick the pages and tables of a document that describe lots."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from .classify import ManifestMismatch, TrainedModel, predict_many
from .docmodel import UniversalDocument, page_sentences
from .features import FeatureContext, manifest_version, page_features, table_features


@dataclass(frozen=True)
class PageScore:
    page_index: int
    score: float

    @property
    def unit_id(self) -> str:
        return f"p{self.page_index}"


@dataclass(frozen=True)
class TableScore:
    page_index: int
    table_index: int
    score: float

    @property
    def unit_id(self) -> str:
        return f"p{self.page_index}.t{self.table_index}"


@dataclass(frozen=True)
class ZoningResult:
    doc_id: str
    relevant_pages: tuple[PageScore, ...] = ()
    relevant_tables: tuple[TableScore, ...] = ()
    recovered: tuple[str, ...] = ()
    page_scores: tuple[PageScore, ...] = field(default=(), repr=False)
    table_scores: tuple[TableScore, ...] = field(default=(), repr=False)

    @property
    def is_empty(self) -> bool:
        return not self.relevant_pages and not self.relevant_tables

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "pages": [{"page_index": p.page_index, "score": p.score} for p in self.relevant_pages],
            "tables": [
                {"page_index": t.page_index, "table_index": t.table_index, "score": t.score}
                for t in self.relevant_tables
            ],
            "recovered": list(self.recovered),
            "all_pages": [{"page_index": p.page_index, "score": p.score} for p in self.page_scores],
            "all_tables": [
                {"page_index": t.page_index, "table_index": t.table_index, "score": t.score}
                for t in self.table_scores
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ZoningResult":
        return cls(
            doc_id=data["doc_id"],
            relevant_pages=tuple(PageScore(p["page_index"], p["score"]) for p in data["pages"]),
            relevant_tables=tuple(TableScore(t["page_index"], t["table_index"], t["score"]) for t in data["tables"]),
            recovered=tuple(data.get("recovered", ())),
            page_scores=tuple(PageScore(p["page_index"], p["score"]) for p in data.get("all_pages", ())),
            table_scores=tuple(
                TableScore(t["page_index"], t["table_index"], t["score"]) for t in data.get("all_tables", ())
            ),
        )


def score_pages(doc: UniversalDocument, model: TrainedModel, ctx: FeatureContext) -> list[PageScore]:
    if model.feature_manifest_version != manifest_version("page"):
        raise ManifestMismatch(f"page zoning needs a page model, got {model.feature_manifest_version}")
    vectors = [
        page_features(page, ctx, page_sentences(page, doc.language), lenient=True) for page in doc.pages
    ]
    preds = predict_many(model, vectors)
    return [PageScore(page.index, p.score) for page, p in zip(doc.pages, preds)]


def score_tables(doc: UniversalDocument, model: TrainedModel, ctx: FeatureContext) -> list[TableScore]:
    if model.feature_manifest_version != manifest_version("table"):
        raise ManifestMismatch(f"table zoning needs a table model, got {model.feature_manifest_version}")
    keys, vectors = [], []
    for page in doc.pages:
        for t_idx, table in enumerate(page.tables):
            keys.append((page.index, t_idx))
            vectors.append(table_features(table, ctx))
    preds = predict_many(model, vectors)
    return [TableScore(pi, ti, p.score) for (pi, ti), p in zip(keys, preds)]


def select_pages(
    doc: UniversalDocument, model: TrainedModel, ctx: FeatureContext, threshold: float | None = None
) -> list[PageScore]:
    cut = model.threshold if threshold is None else threshold
    return [s for s in score_pages(doc, model, ctx) if s.score >= cut]


def select_tables(
    doc: UniversalDocument, model: TrainedModel, ctx: FeatureContext, threshold: float | None = None
) -> list[TableScore]:
    cut = model.threshold if threshold is None else threshold
    return [s for s in score_tables(doc, model, ctx) if s.score >= cut]


def zone_document(
    doc: UniversalDocument,
    page_model: TrainedModel,
    table_model: TrainedModel,
    ctx: FeatureContext,
    threshold: float | None = None,
) -> ZoningResult:
    """Score every unit and keep those at or above the decision threshold."""
    pages = score_pages(doc, page_model, ctx)
    tables = score_tables(doc, table_model, ctx)
    page_cut = page_model.threshold if threshold is None else threshold
    table_cut = table_model.threshold if threshold is None else threshold
    return ZoningResult(
        doc.doc_id,
        relevant_pages=tuple(p for p in pages if p.score >= page_cut),
        relevant_tables=tuple(t for t in tables if t.score >= table_cut),
        page_scores=tuple(pages),
        table_scores=tuple(tables),
    )


def apply_recovery(results: Sequence[ZoningResult]) -> list[ZoningResult]:
    """Ensure a tender yields at least one unit.

    ``results`` are the zoning results for all documents of one tender. If
    none selected anything, the single best-scoring unit is added and listed
    in ``recovered``. Ties prefer tables, then document and source order.
    """
    results = list(results)
    if any(not r.is_empty for r in results):
        return results
    best = None
    for d_idx, r in enumerate(results):
        for t in r.table_scores:
            key = (t.score, 1, -d_idx, -t.page_index, -t.table_index)
            if best is None or key > best[0]:
                best = (key, d_idx, t)
        for p in r.page_scores:
            key = (p.score, 0, -d_idx, -p.page_index, 0)
            if best is None or key > best[0]:
                best = (key, d_idx, p)
    if best is None:
        return results
    _, d_idx, unit = best
    r = results[d_idx]
    if isinstance(unit, TableScore):
        r = replace(r, relevant_tables=(unit,), recovered=(unit.unit_id,))
    else:
        r = replace(r, relevant_pages=(unit,), recovered=(unit.unit_id,))
    results[d_idx] = r
    return results

"""End-to-end orchestration, training sets from labeled corpora, and stage evaluation."""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import MISSING, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, Union

from .classify import (
    IRRELEVANT,
    RELEVANT,
    EvaluationReport,
    LabeledExample,
    ManifestMismatch,
    TrainedModel,
    evaluate,
    load_model,
    scores_from_counts,
    train,
)
from .docmodel import SchemaViolation, TableError, UniversalDocument, merge_document_tables, page_sentences
from .features import EmptyPage, FeatureContext, manifest_version, page_features, sentence_features, table_features
from .itemdetect import CandidateSentence, detect_items, table_sentences, write_detections
from .lexicon import (
    NGramDictionary,
    SpecificityLexicon,
    default_dictionary,
    load_dictionary,
    load_lexicon,
    load_ngram_dictionary,
)
from .lotparse import CLOSE_POLICIES, Lot, LotParser, group_lots, save_lots
from .records import AwardFields, AwardRecord, RecordStore, TenderFields, assemble_records
from .synth import SyntheticTender, TenderGold, page_id, table_id
from .zoning import ZoningResult, apply_recovery, zone_document

PathLike = Union[str, Path]
log = logging.getLogger("tendermine")


class StructuralError(RuntimeError):
    """A stage failed on malformed input; the pipeline stops."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


class GoldMismatch(ValueError):
    pass


class ConfigError(ValueError):
    pass


STRUCTURAL_ERRORS = (SchemaViolation, TableError, ManifestMismatch)


def log_event(event: str, **fields_: Any) -> None:
    log.info(json.dumps({"event": event, **fields_}, sort_keys=True))


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class PipelineConfig:
    lexicon: str
    page_model: str
    table_model: str
    sentence_model: str
    ngrams: str
    form: str | None = None
    measure: str | None = None
    language: str = "en"
    threshold: float | None = None
    recovery: bool = True
    unigram_filter: bool = False
    close_at: str = "table"
    window: int = 3
    seed: int = 0
    workers: int = 1
    floors: dict[str, float] = field(default_factory=dict)
    base_dir: str = "."

    FILE_KEYS = ("lexicon", "page_model", "table_model", "sentence_model", "ngrams", "form", "measure")

    def path(self, key: str) -> Path | None:
        value = getattr(self, key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def validate(self) -> None:
        if self.close_at not in CLOSE_POLICIES:
            raise ConfigError(f"close_at must be one of {CLOSE_POLICIES}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for key in self.FILE_KEYS:
            p = self.path(key)
            if p is not None and not p.exists():
                raise ConfigError(f"{key}: {p} does not exist")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: PathLike = ".") -> "PipelineConfig":
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        missing = sorted(f.name for f in fields(cls) if f.default is MISSING and f.default_factory is MISSING and f.name not in data)
        if missing:
            raise ConfigError(f"missing config keys: {missing}")
        config = cls(**dict(data), base_dir=str(base_dir))
        config.validate()
        return config

    @classmethod
    def load(cls, path: PathLike) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "base_dir"}
        return out


@dataclass(frozen=True)
class Resources:
    ctx: FeatureContext
    page_model: TrainedModel
    table_model: TrainedModel
    sentence_model: TrainedModel
    parser: LotParser


def load_resources(config: PipelineConfig) -> Resources:
    lexicon = load_lexicon(config.path("lexicon"))
    if config.unigram_filter:
        lexicon = lexicon.without_unigrams()
    form = load_dictionary(config.path("form"), "form") if config.form else default_dictionary("form", config.language)
    measure = (
        load_dictionary(config.path("measure"), "measure") if config.measure else default_dictionary("measure", config.language)
    )
    ctx = FeatureContext(lexicon, form, measure, config.language)
    return Resources(
        ctx,
        load_model(config.path("page_model"), manifest_version("page")),
        load_model(config.path("table_model"), manifest_version("table")),
        load_model(config.path("sentence_model"), manifest_version("sentence")),
        LotParser(load_ngram_dictionary(config.path("ngrams")), form, measure, config.language, config.window, config.close_at),
    )


# ---------------------------------------------------------------------------
# running

@dataclass
class PipelineResult:
    zoning: list[ZoningResult] = field(default_factory=list)
    detections: list[CandidateSentence] = field(default_factory=list)
    lots: list[Lot] = field(default_factory=list)
    records: list[AwardRecord] = field(default_factory=list)
    counters: Counter = field(default_factory=Counter)


def _by_tender(docs: Sequence[UniversalDocument]) -> dict[str, list[UniversalDocument]]:
    out: dict[str, list[UniversalDocument]] = {}
    for doc in docs:
        out.setdefault(doc.tender, []).append(doc)
    return out


def prepare_documents(documents: Iterable[UniversalDocument]) -> list[UniversalDocument]:
    """Merge cross-page tables and fix the processing order to (tender, doc_id)."""
    return sorted((merge_document_tables(d) for d in documents), key=lambda d: (d.tender, d.doc_id))


def zone_stage(
    docs: Sequence[UniversalDocument], res: Resources, config: PipelineConfig, counters: Counter | None = None
) -> list[ZoningResult]:
    counters = counters if counters is not None else Counter()

    def zone(doc: UniversalDocument) -> ZoningResult:
        try:
            return zone_document(doc, res.page_model, res.table_model, res.ctx, config.threshold)
        except STRUCTURAL_ERRORS as exc:
            raise StructuralError("zoning", exc) from exc
        except EmptyPage as exc:  # per-unit failure: skip the document's units
            log_event("unit_error", stage="zoning", doc_id=doc.doc_id, error=str(exc))
            return ZoningResult(doc.doc_id)

    # pool.map yields in submission order, so completion order never leaks out
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        zoning = list(pool.map(zone, docs))
    if config.recovery:
        by_doc = {z.doc_id: z for z in zoning}
        for group in _by_tender(docs).values():
            for z in apply_recovery([by_doc[d.doc_id] for d in group]):
                by_doc[z.doc_id] = z
        zoning = [by_doc[d.doc_id] for d in docs]
    counters["pages_seen"] += sum(len(d.pages) for d in docs)
    counters["tables_seen"] += sum(len(p.tables) for d in docs for p in d.pages)
    counters["pages_selected"] += sum(len(z.relevant_pages) for z in zoning)
    counters["tables_selected"] += sum(len(z.relevant_tables) for z in zoning)
    counters["units_recovered"] += sum(len(z.recovered) for z in zoning)
    log_event("zoning", **{k: counters[k] for k in ("pages_seen", "pages_selected", "tables_seen", "tables_selected", "units_recovered")})
    return zoning


def detect_stage(
    docs: Sequence[UniversalDocument],
    zoning: Sequence[ZoningResult],
    res: Resources,
    config: PipelineConfig,
    counters: Counter | None = None,
) -> list[CandidateSentence]:
    counters = counters if counters is not None else Counter()
    by_doc = {z.doc_id: z for z in zoning}
    missing = [d.doc_id for d in docs if d.doc_id not in by_doc]
    if missing:
        raise StructuralError("detect", ValueError(f"no zoning result for {missing[0]}"))
    try:
        detections = detect_items([(d, by_doc[d.doc_id]) for d in docs], res.sentence_model, res.ctx, config.threshold)
    except STRUCTURAL_ERRORS as exc:
        raise StructuralError("detect", exc) from exc
    counters["sentences_positive"] += len(detections)
    log_event("detect", sentences_positive=len(detections))
    return detections


def parse_stage(
    detections: Sequence[CandidateSentence],
    res: Resources,
    tender_of: Mapping[str, str],
    counters: Counter | None = None,
) -> list[Lot]:
    counters = counters if counters is not None else Counter()
    lots = [replace(lot, tender_id=tender_of.get(lot.doc_id, "")) for lot in group_lots(detections, res.parser)]
    counters["lots_parsed"] += len(lots)
    counters["items_parsed"] += sum(len(lot.items) for lot in lots)
    log_event("parse", lots_parsed=counters["lots_parsed"], items_parsed=counters["items_parsed"])
    return lots


def assemble_stage(
    lots: Sequence[Lot],
    tenders: Sequence[TenderFields],
    awards: Sequence[AwardFields],
    counters: Counter | None = None,
) -> list[AwardRecord]:
    counters = counters if counters is not None else Counter()
    lots_by_tender: dict[str, list[Lot]] = {}
    for lot in lots:
        lots_by_tender.setdefault(lot.tender_id, []).append(lot)
    records = assemble_records(sorted(awards, key=lambda a: a.award_id), tenders, lots_by_tender)
    counters["records"] += len(records)
    counters["records_joined"] += sum(1 for r in records if r.lots)
    log_event("assemble", records=counters["records"], records_joined=counters["records_joined"])
    return records


def run_pipeline(
    config: PipelineConfig,
    documents: Iterable[UniversalDocument],
    tenders: Sequence[TenderFields] = (),
    awards: Sequence[AwardFields] = (),
    out_dir: PathLike | None = None,
    resources: Resources | None = None,
) -> PipelineResult:
    """docmodel -> zoning -> item detection -> lot parsing -> records, in document-id order."""
    res = resources or load_resources(config)
    docs = prepare_documents(documents)
    result = PipelineResult()
    c = result.counters
    result.zoning = zone_stage(docs, res, config, c)
    result.detections = detect_stage(docs, result.zoning, res, config, c)
    result.lots = parse_stage(result.detections, res, {d.doc_id: d.tender for d in docs}, c)
    result.records = assemble_stage(result.lots, tenders, awards, c)
    if out_dir is not None:
        write_artifacts(result, out_dir)
    return result


def save_zoning(zoning: Sequence[ZoningResult], path: PathLike) -> None:
    Path(path).write_text(json.dumps([z.to_dict() for z in zoning], sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_zoning(path: PathLike) -> list[ZoningResult]:
    return [ZoningResult.from_dict(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]


def write_records(records: Sequence[AwardRecord], path: PathLike) -> RecordStore:
    """A fresh store holding exactly ``records``; an existing store at ``path`` is replaced."""
    path = Path(path)
    for stale in (path, path.with_name(path.name + ".index.json")):
        if stale.exists():
            stale.unlink()
    store = RecordStore(path)
    store.append(records)
    return store


def write_artifacts(result: PipelineResult, out_dir: PathLike) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_zoning(result.zoning, out / "zoning.json")
    write_detections(result.detections, out / "detections.jsonl")
    save_lots(result.lots, out / "lots.json")
    write_records(result.records, out / "records.jsonl")


# ---------------------------------------------------------------------------
# labeled examples

def page_examples(docs: Sequence[UniversalDocument], labels: Mapping[str, str], ctx: FeatureContext) -> list[LabeledExample]:
    out = []
    for doc in docs:
        for page in doc.pages:
            uid = page_id(doc.doc_id, page.index)
            vec = page_features(page, ctx, page_sentences(page, doc.language), lenient=True)
            out.append(LabeledExample(vec.values, _gold_label(labels, uid), uid))
    return out


def table_examples(docs: Sequence[UniversalDocument], labels: Mapping[str, str], ctx: FeatureContext) -> list[LabeledExample]:
    out = []
    for doc in docs:
        for page in doc.pages:
            for t_idx, table in enumerate(page.tables):
                uid = table_id(doc.doc_id, page.index, t_idx)
                out.append(LabeledExample(table_features(table, ctx).values, _gold_label(labels, uid), uid))
    return out


def sentence_examples(docs: Sequence[UniversalDocument], labels: Mapping[str, str], ctx: FeatureContext) -> list[LabeledExample]:
    out = []
    for doc in docs:
        for page in doc.pages:
            units = [(s, None) for s in page_sentences(page, doc.language)]
            for t_idx, table in enumerate(page.tables):
                units += table_sentences(table, doc.language, page.index, t_idx)
            for s, _ in units:
                uid = f"{doc.doc_id}:{s.sentence_id}"
                out.append(LabeledExample(sentence_features(s, ctx).values, _gold_label(labels, uid), uid))
    return out


def _gold_label(labels: Mapping[str, str], uid: str) -> str:
    try:
        return labels[uid]
    except KeyError:
        raise GoldMismatch(f"no gold label for {uid}") from None


def examples_for(kind: str, docs: Sequence[UniversalDocument], gold: "PipelineGold", ctx: FeatureContext) -> list[LabeledExample]:
    if kind == "page":
        return page_examples(docs, gold.page_labels, ctx)
    if kind == "table":
        return table_examples(docs, gold.table_labels, ctx)
    if kind == "sentence":
        return sentence_examples(docs, gold.sentence_labels, ctx)
    raise ValueError(f"unknown unit kind {kind!r}")


UNIT_KINDS = ("page", "table", "sentence")


def train_models(
    docs: Sequence[UniversalDocument],
    gold: "PipelineGold",
    ctx: FeatureContext,
    algorithm: str = "random_forest",
    seed: int = 0,
    hyperparams: Mapping[str, Any] | None = None,
) -> dict[str, TrainedModel]:
    return {
        kind: train(examples_for(kind, docs, gold, ctx), algorithm, hyperparams, seed, manifest_version(kind))
        for kind in UNIT_KINDS
    }


# ---------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class PipelineGold:
    page_labels: Mapping[str, str]
    table_labels: Mapping[str, str]
    sentence_labels: Mapping[str, str]
    lots: Mapping[tuple[str, str], tuple[str, ...]]

    @classmethod
    def from_tenders(cls, tenders: Sequence[SyntheticTender]) -> "PipelineGold":
        pages, tables, sentences, lots = {}, {}, {}, {}
        for t in tenders:
            g: TenderGold = t.gold
            pages.update(g.page_labels)
            tables.update(g.table_labels)
            sentences.update(g.sentence_labels)
            lots.update({(lot.doc_id, lot.reference): lot.items for lot in g.lots})
        return cls(pages, tables, sentences, lots)

    def to_dict(self) -> dict:
        return {
            "pages": dict(sorted(self.page_labels.items())),
            "tables": dict(sorted(self.table_labels.items())),
            "sentences": dict(sorted(self.sentence_labels.items())),
            "lots": [{"doc_id": d, "ref": r, "items": list(items)} for (d, r), items in sorted(self.lots.items())],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineGold":
        lots = {(e["doc_id"], e["ref"]): tuple(e["items"]) for e in data.get("lots", ())}
        return cls(data["pages"], data["tables"], data["sentences"], lots)


def _stage_report(gold: Mapping[str, str], positives: set[str], stage: str) -> EvaluationReport:
    stray = sorted(positives - set(gold))
    if stray:
        raise GoldMismatch(f"{stage}: {len(stray)} predicted ids without gold, e.g. {stray[0]}")
    ids = sorted(gold)
    return evaluate([RELEVANT if i in positives else IRRELEVANT for i in ids], [gold[i] for i in ids])


def evaluate_pipeline(gold: PipelineGold, outputs: PipelineResult) -> dict[str, Any]:
    """Page zoning, table zoning and item detection reports, plus item precision."""
    pages = {page_id(z.doc_id, p.page_index) for z in outputs.zoning for p in z.relevant_pages}
    tables = {table_id(z.doc_id, t.page_index, t.table_index) for z in outputs.zoning for t in z.relevant_tables}
    sentences = {c.unit_id for c in outputs.detections}
    report = {
        "page_zoning": _stage_report(gold.page_labels, pages, "page_zoning"),
        "table_zoning": _stage_report(gold.table_labels, tables, "table_zoning"),
        "item_detection": _stage_report(gold.sentence_labels, sentences, "item_detection"),
    }
    correct = total = 0
    for lot in outputs.lots:
        expected = [e.lower() for e in gold.lots.get((lot.doc_id, lot.reference), ())]
        for item in lot.items:
            total += 1
            correct += any(e in item.raw_text.lower() for e in expected)
    report["item_precision"] = scores_from_counts(correct, total - correct, 0).precision if total else 0.0
    return report


def corpus_documents(tenders: Sequence[SyntheticTender]) -> list[UniversalDocument]:
    return [d for t in tenders for d in t.documents]


def build_context(
    lexicon: SpecificityLexicon, language: str = "en", form_path: PathLike | None = None, measure_path: PathLike | None = None
) -> FeatureContext:
    form = load_dictionary(form_path, "form") if form_path else default_dictionary("form", language)
    measure = load_dictionary(measure_path, "measure") if measure_path else default_dictionary("measure", language)
    return FeatureContext(lexicon, form, measure, language)


def parser_for(ctx: FeatureContext, ngrams: NGramDictionary, close_at: str = "table", window: int = 3) -> LotParser:
    return LotParser(ngrams, ctx.form, ctx.measure, ctx.language, window, close_at)

"""Command-line entry point: one subcommand per pipeline stage plus synth, evaluate and run.

Every subcommand reads and writes files, so stages can be rerun from persisted
artifacts. Configuration is a single JSON file; ``--seed``, ``--workers`` and
``--threshold`` override it. Exit codes: 0 success, 2 structural or
configuration error, 3 evaluation below a configured floor.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import xml.etree.ElementTree as ET
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from .classify import ALGORITHMS, EvaluationReport, InsufficientData, SingleClassData, format_report_table, save_model, train
from .docmodel import (
    SchemaViolation,
    TableError,
    UniversalDocument,
    document_from_csv,
    document_from_text,
    load_document,
    save_document,
)
from .features import manifest_version
from .itemdetect import read_detections, write_detections
from .lexicon import (
    FIELD_NAMES,
    FieldCorpus,
    build_lexicon,
    build_ngram_dictionary,
    load_lexicon,
    load_reference,
    save_lexicon,
    save_ngram_dictionary,
    save_reference,
)
from .lotparse import load_lots, save_lots
from .metrics import MetricPoint, RiskMetricSeries, compute_risk_metrics, emit_report
from .pipeline import (
    STRUCTURAL_ERRORS,
    UNIT_KINDS,
    ConfigError,
    GoldMismatch,
    PipelineConfig,
    PipelineGold,
    StructuralError,
    assemble_stage,
    build_context,
    corpus_documents,
    detect_stage,
    evaluate_pipeline,
    examples_for,
    load_resources,
    load_zoning,
    log_event,
    parse_stage,
    prepare_documents,
    run_pipeline,
    save_zoning,
    write_artifacts,
    write_records,
    zone_stage,
)
from .records import RecordStore, award_to_xml, parse_award_xml, parse_tender_xml, tender_to_xml
from .synth import field_corpora, synth_corpus, synth_reference

EXIT_OK = 0
EXIT_STRUCTURAL = 2
EXIT_BELOW_FLOOR = 3

log = logging.getLogger("tendermine")


# ---------------------------------------------------------------------------
# file helpers

def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _out(path: str) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _expand(paths: Sequence[str], pattern: str) -> list[Path]:
    """Files named directly, plus ``pattern`` matches inside named directories, sorted."""
    out: list[Path] = []
    for p in map(Path, paths):
        out.extend(sorted(p.glob(pattern)) if p.is_dir() else [p])
    return out


def load_documents(paths: Sequence[str]) -> list[UniversalDocument]:
    return [load_document(p) for p in _expand(paths, "*.json")]


def load_tenders(paths: Sequence[str]):
    return [parse_tender_xml(p) for p in _expand(paths, "*.xml")]


def load_awards(paths: Sequence[str]):
    return [parse_award_xml(p) for p in _expand(paths, "*.xml")]


def _config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.load(args.config)
    overrides = {k: getattr(args, k) for k in ("seed", "workers", "threshold") if getattr(args, k, None) is not None}
    if overrides:
        config = replace(config, **overrides)
        config.validate()
    return config


def series_to_dict(series: Sequence[RiskMetricSeries]) -> dict:
    out: dict[str, dict[str, list]] = {}
    for s in series:
        out.setdefault(s.supplier_id, {})[s.metric_name] = [[p.period, p.value] for p in s.points]
    return out


def series_from_dict(data: dict) -> dict[str, list[RiskMetricSeries]]:
    return {
        sid: [RiskMetricSeries(sid, name, tuple(MetricPoint(int(p), float(v)) for p, v in points)) for name, points in metrics.items()]
        for sid, metrics in data.items()
    }


# ---------------------------------------------------------------------------
# subcommands

def cmd_ingest(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for path in map(Path, args.inputs):
        doc_id = path.stem
        suffix = path.suffix.lower()
        if suffix == ".txt":
            doc = document_from_text(path.read_text(encoding="utf-8"), doc_id, args.language, args.tender)
        elif suffix == ".csv":
            doc = document_from_csv(path, doc_id, args.language, args.tender)
        elif suffix == ".json":
            doc = load_document(path)
        else:
            raise ConfigError(f"{path}: expected .txt, .csv or .json")
        save_document(doc, out / f"{doc.doc_id}.json")
        count += 1
    log_event("ingest", documents=count)
    return EXIT_OK


def cmd_build_lexicon(args: argparse.Namespace) -> int:
    fields = _read_json(args.fields)
    missing = set(FIELD_NAMES) - set(fields)
    if missing:
        raise ConfigError(f"{args.fields}: missing fields {sorted(missing)}")
    corpora = [FieldCorpus(name, tuple(fields[name])) for name in FIELD_NAMES]
    lexicon = build_lexicon(corpora, load_reference(args.reference), args.language, args.smoothing)
    save_lexicon(lexicon, args.out)
    if args.ngrams:
        save_ngram_dictionary(build_ngram_dictionary(fields["lot_item_descriptions"], language=args.language), args.ngrams)
    log_event("build_lexicon", words=len(lexicon.entries))
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    docs = prepare_documents(load_documents(args.docs))
    gold = PipelineGold.from_dict(_read_json(args.gold))
    ctx = build_context(load_lexicon(args.lexicon), args.language)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kinds = UNIT_KINDS if args.kind == "all" else (args.kind,)
    for kind in kinds:
        examples = examples_for(kind, docs, gold, ctx)
        model = train(examples, args.algorithm, None, args.seed, manifest_version(kind))
        save_model(model, out / f"{kind}_model.json")
        log_event("train", kind=kind, algorithm=args.algorithm, examples=len(examples))
    return EXIT_OK


def cmd_zone(args: argparse.Namespace) -> int:
    config = _config(args)
    docs = prepare_documents(load_documents(args.docs))
    save_zoning(zone_stage(docs, load_resources(config), config), _out(args.out))
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    config = _config(args)
    docs = prepare_documents(load_documents(args.docs))
    detections = detect_stage(docs, load_zoning(args.zoning), load_resources(config), config)
    write_detections(detections, _out(args.out))
    return EXIT_OK


def cmd_parse(args: argparse.Namespace) -> int:
    config = _config(args)
    tender_of = {d.doc_id: d.tender for d in load_documents(args.docs)} if args.docs else {}
    save_lots(parse_stage(read_detections(args.detections), load_resources(config), tender_of), _out(args.out))
    return EXIT_OK


def cmd_assemble(args: argparse.Namespace) -> int:
    records = assemble_stage(load_lots(args.lots), load_tenders(args.tenders), load_awards(args.awards))
    write_records(records, _out(args.out))
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    store = RecordStore(args.store)
    suppliers = [args.supplier] if args.supplier else store.suppliers()
    series = [s for sid in suppliers for s in compute_risk_metrics(store.by_supplier(sid), sid)]
    _write_json(Path(args.out), series_to_dict(series))
    log_event("metrics", suppliers=len(suppliers))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    by_supplier = series_from_dict(_read_json(args.metrics))
    if args.supplier:
        by_supplier = {args.supplier: by_supplier.get(args.supplier, [])}
    written = 0
    for sid in sorted(by_supplier):
        written += len(emit_report(sid, by_supplier[sid], args.out))
    log_event("report", suppliers=len(by_supplier), files=written)
    return EXIT_OK


def _report_to_dict(report: EvaluationReport | float) -> Any:
    if isinstance(report, EvaluationReport):
        return {
            "macro": {"precision": report.macro.precision, "recall": report.macro.recall, "f1": report.macro.f1},
            "per_class": {
                label: {"precision": s.precision, "recall": s.recall, "f1": s.f1} for label, s in report.per_class.items()
            },
        }
    return report


def _stage_score(value: EvaluationReport | float) -> float:
    return value.macro.f1 if isinstance(value, EvaluationReport) else float(value)


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config(args)
    gold = PipelineGold.from_dict(_read_json(args.gold))
    result = run_pipeline(config, load_documents(args.docs), load_tenders(args.tenders), load_awards(args.awards))
    report = evaluate_pipeline(gold, result)
    print(format_report_table({k: v for k, v in report.items() if isinstance(v, EvaluationReport)}, "Pipeline"))
    print(f"{'item precision':<22}{report['item_precision']:>10.2f}")
    if args.out:
        _write_json(Path(args.out), {k: _report_to_dict(v) for k, v in report.items()})
    unknown = sorted(set(config.floors) - set(report))
    if unknown:
        raise ConfigError(f"floors name unknown stages: {unknown}")
    failed = {k: _stage_score(report[k]) for k, floor in config.floors.items() if _stage_score(report[k]) < floor}
    log_event("evaluate", **{k: _stage_score(v) for k, v in report.items()}, below_floor=sorted(failed))
    return EXIT_BELOW_FLOOR if failed else EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = _config(args)
    result = run_pipeline(config, load_documents(args.docs), load_tenders(args.tenders), load_awards(args.awards))
    write_artifacts(result, args.out)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    """Write a synthetic corpus directory: documents, gold labels, field values, reference and XML."""
    tenders = synth_corpus(args.seed, args.size, args.noise, args.positive_ratio)
    out = Path(args.out)
    for doc in corpus_documents(tenders):
        (out / "docs").mkdir(parents=True, exist_ok=True)
        save_document(doc, out / "docs" / f"{doc.doc_id}.json")
    _write_json(out / "gold.json", PipelineGold.from_tenders(tenders).to_dict())
    _write_json(out / "fields.json", {c.field_name: list(c.values) for c in field_corpora(tenders)})
    save_reference(synth_reference(args.seed), out / "reference.tsv")
    for sub in ("tenders", "awards"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for t in tenders:
        (out / "tenders" / f"{t.tender_id}.xml").write_text(tender_to_xml(t.tender), encoding="utf-8")
        if t.award is not None:
            (out / "awards" / f"{t.award.award_id}.xml").write_text(award_to_xml(t.award), encoding="utf-8")
    log_event("synth", tenders=len(tenders), documents=sum(len(t.documents) for t in tenders))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="pipeline configuration (JSON)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--threshold", type=float)


def _add_sources(p: argparse.ArgumentParser) -> None:
    p.add_argument("--docs", nargs="+", default=[], help="document JSON files or directories")
    p.add_argument("--tenders", nargs="*", default=[], help="tender XML files or directories")
    p.add_argument("--awards", nargs="*", default=[], help="award XML files or directories")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tendermine", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="suppress structured logs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert text, CSV or JSON inputs into document JSON")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--language", default="en")
    p.add_argument("--tender")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-lexicon", help="specificity lexicon and n-gram dictionary from field values")
    p.add_argument("--fields", required=True, help="JSON object mapping field name to a list of values")
    p.add_argument("--reference", required=True, help="word<TAB>count reference frequencies")
    p.add_argument("--out", required=True)
    p.add_argument("--ngrams", help="also write the lot/item n-gram dictionary here")
    p.add_argument("--language", default="en")
    p.add_argument("--smoothing", type=float, default=1.0)
    p.set_defaults(func=cmd_build_lexicon)

    p = sub.add_parser("train", help="train page, table and sentence classifiers")
    p.add_argument("--docs", nargs="+", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True, help="directory receiving <kind>_model.json")
    p.add_argument("--kind", choices=(*UNIT_KINDS, "all"), default="all")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="random_forest")
    p.add_argument("--language", default="en")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("zone", help="select relevant pages and tables")
    _add_overrides(p)
    p.add_argument("--docs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_zone)

    p = sub.add_parser("detect", help="classify candidate sentences in zoned units")
    _add_overrides(p)
    p.add_argument("--docs", nargs="+", required=True)
    p.add_argument("--zoning", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("parse", help="group detections into lots and parse items")
    _add_overrides(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--docs", nargs="*", default=[], help="documents, used to tag lots with their tender")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("assemble", help="join parsed lots with tender and award fields")
    p.add_argument("--lots", required=True)
    p.add_argument("--tenders", nargs="*", default=[])
    p.add_argument("--awards", nargs="*", default=[])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("metrics", help="yearly risk metrics per supplier")
    p.add_argument("--store", required=True)
    p.add_argument("--supplier")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("report", help="CSV and SVG files per supplier and metric")
    p.add_argument("--metrics", required=True)
    p.add_argument("--supplier")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("evaluate", help="run the pipeline against gold labels and check floors")
    _add_overrides(p)
    _add_sources(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", help="write the report as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="run every stage and write all artifacts")
    _add_overrides(p)
    _add_sources(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="write a seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--positive-ratio", type=float, default=0.5)
    p.set_defaults(func=cmd_synth)
    return parser


_HANDLED = (
    ConfigError,
    StructuralError,
    GoldMismatch,
    SingleClassData,
    InsufficientData,
    FileNotFoundError,
    json.JSONDecodeError,
    ET.ParseError,
    SchemaViolation,
    TableError,
    *STRUCTURAL_ERRORS,
)


def _setup_logging(quiet: bool) -> None:
    log.handlers.clear()
    log.propagate = False
    if quiet:
        log.addHandler(logging.NullHandler())
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.quiet)
    try:
        return args.func(args)
    except _HANDLED as exc:
        stage = exc.stage if isinstance(exc, StructuralError) else args.command
        log_event("error", stage=stage, error_type=type(exc).__name__, message=str(exc))
        print(f"tendermine {args.command}: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL


if __name__ == "__main__":
    sys.exit(main())

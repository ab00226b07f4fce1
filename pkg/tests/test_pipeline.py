import json
from dataclasses import replace

import pytest

from tendermine.classify import IRRELEVANT, RELEVANT
from tendermine.itemdetect import read_detections, write_detections
from tendermine.lotparse import load_lots, save_lots
from tendermine.pipeline import (
    ConfigError,
    GoldMismatch,
    PipelineConfig,
    PipelineGold,
    StructuralError,
    assemble_stage,
    corpus_documents,
    detect_stage,
    evaluate_pipeline,
    load_resources,
    load_zoning,
    parse_stage,
    prepare_documents,
    run_pipeline,
    save_zoning,
    zone_stage,
)
from tendermine.records import RecordStore, parse_award_xml, parse_tender_xml
from tendermine.synth import synth_corpus


@pytest.fixture(scope="module")
def resources(pipeline_config):
    return load_resources(pipeline_config)


@pytest.fixture(scope="module")
def fixture_inputs(fixtures_dir, figure2_doc, figure3_doc):
    return (
        [figure3_doc, figure2_doc],
        [parse_tender_xml(fixtures_dir / "figure2_tender.xml")],
        [parse_award_xml(fixtures_dir / "figure2_award.xml")],
    )


def test_unknown_config_key(config_dir):
    data = json.loads((config_dir / "config.json").read_text())
    with pytest.raises(ConfigError, match="treshold"):
        PipelineConfig.from_dict({**data, "treshold": 0.5}, config_dir)


def test_missing_resource_file(config_dir):
    data = json.loads((config_dir / "config.json").read_text())
    with pytest.raises(ConfigError, match="lexicon"):
        PipelineConfig.from_dict({**data, "lexicon": "nope.tsv"}, config_dir)
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({**data, "close_at": "chapter"}, config_dir)


def test_config_round_trip(pipeline_config, config_dir):
    assert PipelineConfig.from_dict(pipeline_config.to_dict(), config_dir) == pipeline_config


def test_empty_input(pipeline_config, resources, tmp_path):
    result = run_pipeline(pipeline_config, [], out_dir=tmp_path, resources=resources)
    assert (result.zoning, result.detections, result.lots, result.records) == ([], [], [], [])
    assert list(RecordStore(tmp_path / "records.jsonl")) == []


def test_fixture_records(pipeline_config, resources, fixture_inputs):
    docs, tenders, awards = fixture_inputs
    result = run_pipeline(pipeline_config, docs, tenders, awards, resources=resources)
    fig3 = [lot.reference for lot in result.lots if lot.doc_id == "fig3"]
    assert fig3 == ["1", "2", "3", "4", "5", "6"]
    records = {r.supplier_id: r for r in result.records}
    assert [lot.reference for lot in records["northwind-pharma"].lots] == ["1", "2", "3"]
    assert records["helix-biologics"].unresolved == ("9",)
    assert result.counters["records"] == 2


def test_stagewise_equals_end_to_end(pipeline_config, resources, fixture_inputs, tmp_path):
    docs, tenders, awards = fixture_inputs
    whole = run_pipeline(pipeline_config, docs, tenders, awards, resources=resources)
    prepared = prepare_documents(docs)
    save_zoning(zone_stage(prepared, resources, pipeline_config), tmp_path / "z.json")
    write_detections(detect_stage(prepared, load_zoning(tmp_path / "z.json"), resources, pipeline_config), tmp_path / "d.jsonl")
    save_lots(parse_stage(read_detections(tmp_path / "d.jsonl"), resources, {d.doc_id: d.tender for d in prepared}), tmp_path / "l.json")
    records = assemble_stage(load_lots(tmp_path / "l.json"), tenders, awards)
    assert records == whole.records


def test_worker_count_does_not_change_output(pipeline_config, resources, fixture_inputs):
    docs, tenders, awards = fixture_inputs
    one = run_pipeline(pipeline_config, docs, tenders, awards, resources=resources)
    four = run_pipeline(replace(pipeline_config, workers=4), docs, tenders, awards, resources=resources)
    assert (one.zoning, one.lots, one.records) == (four.zoning, four.lots, four.records)


def test_detect_without_zoning(pipeline_config, resources, figure3_doc):
    with pytest.raises(StructuralError):
        detect_stage([figure3_doc], [], resources, pipeline_config)


@pytest.fixture(scope="module")
def held_out():
    tenders = synth_corpus(11, 12)
    return corpus_documents(tenders), PipelineGold.from_tenders(tenders)


def test_held_out_evaluation(pipeline_config, resources, held_out):
    docs, gold = held_out
    result = run_pipeline(replace(pipeline_config, recovery=False), docs, resources=resources)
    report = evaluate_pipeline(gold, result)
    for stage in ("page_zoning", "table_zoning", "item_detection"):
        assert report[stage].macro.f1 >= 0.9, stage
    assert report["item_precision"] >= 0.7


def _flip(labels):
    return {k: IRRELEVANT if v == RELEVANT else RELEVANT for k, v in labels.items()}


def test_inverted_gold_scores_zero(pipeline_config, resources, held_out):
    docs, gold = held_out
    result = run_pipeline(replace(pipeline_config, recovery=False), docs, resources=resources)
    inverted = PipelineGold(_flip(gold.page_labels), _flip(gold.table_labels), _flip(gold.sentence_labels), gold.lots)
    report = evaluate_pipeline(inverted, result)
    assert report["item_detection"].per_class[RELEVANT].f1 == 0.0


def test_gold_must_cover_predictions(pipeline_config, resources, held_out):
    docs, gold = held_out
    result = run_pipeline(pipeline_config, docs, resources=resources)
    partial = PipelineGold({}, gold.table_labels, gold.sentence_labels, gold.lots)
    with pytest.raises(GoldMismatch):
        evaluate_pipeline(partial, result)


def test_gold_json_round_trip(held_out):
    gold = held_out[1]
    assert PipelineGold.from_dict(json.loads(json.dumps(gold.to_dict()))) == gold

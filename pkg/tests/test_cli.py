import json

import pytest

from tendermine.cli import main
from tendermine.docmodel import load_document


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic corpus, lexicon, models and config built through the CLI alone."""
    w = tmp_path_factory.mktemp("cli")
    c = w / "corpus"
    assert main(["--quiet", "synth", "--out", str(c), "--seed", "5", "--size", "12"]) == 0
    assert main(["--quiet", "build-lexicon", "--fields", str(c / "fields.json"), "--reference", str(c / "reference.tsv"),
                 "--out", str(w / "lexicon.tsv"), "--ngrams", str(w / "ngrams.tsv")]) == 0
    assert main(["--quiet", "train", "--docs", str(c / "docs"), "--gold", str(c / "gold.json"),
                 "--lexicon", str(w / "lexicon.tsv"), "--out", str(w / "models")]) == 0
    config = {
        "lexicon": "lexicon.tsv",
        "page_model": "models/page_model.json",
        "table_model": "models/table_model.json",
        "sentence_model": "models/sentence_model.json",
        "ngrams": "ngrams.tsv",
        "recovery": False,
        "floors": {"page_zoning": 0.9, "item_detection": 0.9},
    }
    write_config(w / "config.json", config)
    return w


def write_config(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def corpus_args(w):
    c = w / "corpus"
    return ["--docs", str(c / "docs"), "--tenders", str(c / "tenders"), "--awards", str(c / "awards")]


def test_evaluate_meets_floors(workspace, capsys):
    out = workspace / "eval.json"
    code = main(["--quiet", "evaluate", "--config", str(workspace / "config.json"), *corpus_args(workspace),
                 "--gold", str(workspace / "corpus" / "gold.json"), "--out", str(out)])
    assert code == 0
    assert "Macro" in capsys.readouterr().out or "macro" in out.read_text()
    assert json.loads(out.read_text())["page_zoning"]["macro"]["f1"] >= 0.9


def test_evaluate_below_floor(workspace):
    cfg = json.loads((workspace / "config.json").read_text())
    cfg["floors"] = {"item_detection": 1.01}
    path = write_config(workspace / "strict.json", cfg)
    assert main(["--quiet", "evaluate", "--config", path, *corpus_args(workspace),
                 "--gold", str(workspace / "corpus" / "gold.json")]) == 3


def test_unknown_floor_is_config_error(workspace):
    cfg = json.loads((workspace / "config.json").read_text())
    cfg["floors"] = {"parsing": 0.5}
    path = write_config(workspace / "typo.json", cfg)
    assert main(["--quiet", "evaluate", "--config", path, *corpus_args(workspace),
                 "--gold", str(workspace / "corpus" / "gold.json")]) == 2


def test_stage_commands_match_run(workspace):
    cfg = str(workspace / "config.json")
    docs = str(workspace / "corpus" / "docs")
    s = workspace / "stages"
    assert main(["--quiet", "run", "--config", cfg, *corpus_args(workspace), "--out", str(workspace / "run")]) == 0
    assert main(["--quiet", "zone", "--config", cfg, "--docs", docs, "--out", str(s / "zoning.json")]) == 0
    assert main(["--quiet", "detect", "--config", cfg, "--docs", docs, "--zoning", str(s / "zoning.json"),
                 "--out", str(s / "detections.jsonl")]) == 0
    assert main(["--quiet", "parse", "--config", cfg, "--detections", str(s / "detections.jsonl"), "--docs", docs,
                 "--out", str(s / "lots.json")]) == 0
    assert main(["--quiet", "assemble", "--lots", str(s / "lots.json"), "--tenders", str(workspace / "corpus" / "tenders"),
                 "--awards", str(workspace / "corpus" / "awards"), "--out", str(s / "records.jsonl")]) == 0
    for name in ("zoning.json", "detections.jsonl", "lots.json", "records.jsonl"):
        assert (s / name).read_bytes() == (workspace / "run" / name).read_bytes(), name


def test_metrics_and_report(workspace):
    run = workspace / "run"
    if not (run / "records.jsonl").exists():
        main(["--quiet", "run", "--config", str(workspace / "config.json"), *corpus_args(workspace), "--out", str(run)])
    assert main(["--quiet", "metrics", "--store", str(run / "records.jsonl"), "--out", str(workspace / "metrics.json")]) == 0
    metrics = json.loads((workspace / "metrics.json").read_text())
    assert metrics
    assert main(["--quiet", "report", "--metrics", str(workspace / "metrics.json"), "--out", str(workspace / "report")]) == 0
    assert len(list((workspace / "report").rglob("*.csv"))) == len(list((workspace / "report").rglob("*.svg"))) > 0


def test_ingest(fixtures_dir, tmp_path):
    code = main(["--quiet", "ingest", str(fixtures_dir / "figure3_page.txt"), str(fixtures_dir / "figure2_table.csv"),
                 "--out", str(tmp_path), "--tender", "T1"])
    assert code == 0
    docs = [load_document(p) for p in sorted(tmp_path.glob("*.json"))]
    assert len(docs) == 2 and all(d.tender == "T1" for d in docs)


def test_config_errors_exit_2(workspace, tmp_path, capsys):
    bad = write_config(tmp_path / "bad.json", {"lexicon": "x.tsv"})
    assert main(["zone", "--config", bad, "--docs", str(workspace / "corpus" / "docs"), "--out", str(tmp_path / "z.json")]) == 2
    event = json.loads(capsys.readouterr().err.splitlines()[0])
    assert event["event"] == "error" and event["error_type"] == "ConfigError"
    assert main(["--quiet", "zone", "--config", str(tmp_path / "missing.json"), "--docs", str(tmp_path),
                 "--out", str(tmp_path / "z.json")]) == 2


def test_malformed_document_exits_2(workspace, tmp_path):
    (tmp_path / "broken.json").write_text('{"doc_id": "x", "pages": "nope"}', encoding="utf-8")
    assert main(["--quiet", "zone", "--config", str(workspace / "config.json"), "--docs", str(tmp_path / "broken.json"),
                 "--out", str(tmp_path / "z.json")]) == 2


def test_malformed_xml_exits_2(tmp_path, workspace):
    (tmp_path / "award.xml").write_text("<award><entry>", encoding="utf-8")
    (tmp_path / "lots.json").write_text("[]", encoding="utf-8")
    assert main(["--quiet", "assemble", "--lots", str(tmp_path / "lots.json"), "--awards", str(tmp_path / "award.xml"),
                 "--out", str(tmp_path / "r.jsonl")]) == 2

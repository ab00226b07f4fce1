import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import interval_union
from tendermine.classify import RELEVANT
from tendermine.docmodel import Origin, Sentence, document_from_csv
from tendermine.itemdetect import CandidateSentence, table_sentences
from tendermine.lexicon import NGramDictionary, WordDictionary, default_dictionary
from tendermine.lotparse import (
    UNASSIGNED,
    Lot,
    LotParser,
    MatchSpan,
    Measurement,
    SpanKind,
    UnparseableItem,
    dumps_lots,
    extract_lot_reference,
    extract_quantities,
    group_lots,
    load_lots,
    match_spans,
    merge_overlaps,
    normalize_reference,
    parse_item,
    save_lots,
)
from tendermine.text import tokenize_spans


def ngram_dict(*phrases):
    return NGramDictionary({tuple(p.split()): 5 for p in phrases}, {1: 1, 2: 1, 3: 1})


FORM = default_dictionary("form")
MEASURE = default_dictionary("measure")


def para(text, doc_id="d", page=0, position=0, index=0):
    return CandidateSentence(doc_id, Sentence(text, Origin.PARAGRAPH, page, position=position, index=index), 1.0, RELEVANT)


def row(text, table=0, r=0, doc_id="d", page=0):
    return CandidateSentence(doc_id, Sentence(text, Origin.TABLE_ROW, page, table, r, index=r), 1.0, RELEVANT)


@pytest.mark.parametrize(
    "sentence,expected",
    [
        ("Lot No: 94 Gentamicin solution", "94"),
        ("Lot 1: Atropine sulfate solution for injection 3mg/10ml pre-filled syringe", "1"),
        ("Lot Number 1 Atezolizumab 1200mg/250ml", "1"),
        ("Bevacizumab 400mg/100ml solution", None),
        ("Lots 1,2,3,4 and 5 must be licensed", None),
        ("- Lot 6: Prussian blue", "6"),
    ],
)
def test_extract_lot_reference(sentence, expected):
    assert extract_lot_reference(sentence) == expected


def test_portuguese_section_numbered_reference():
    assert extract_lot_reference("1.15 Lote 15 Artigos (IVA excluído)", "pt") == "15"


@given(st.text(max_size=40))
def test_reference_needs_lot_literal(text):
    if extract_lot_reference(text) is not None:
        words = text.lower().replace("-", " ").replace("•", " ").split()
        assert "lot" in [w.strip(".:") for w in words[:3]]


@pytest.mark.parametrize("ref,expected", [("094", "94"), ("Lot 15", "15"), ("1.15", "1.15"), ("II", "ii")])
def test_normalize_reference(ref, expected):
    assert normalize_reference(ref) == expected


def test_overlapping_ngram_spans_found():
    tokens = tokenize_spans("atropine sulfate solution")
    spans = match_spans(tokens, ngram_dict("atropine sulfate", "sulfate solution"), FORM, MEASURE)
    assert [(s.start, s.end, s.kind) for s in spans] == [(0, 2, SpanKind.NGRAM), (1, 3, SpanKind.NGRAM)]


def test_form_span():
    spans = match_spans(tokenize_spans("pre-filled syringe"), ngram_dict("atropine"), FORM, MEASURE)
    assert [(s.kind, s.text) for s in spans] == [(SpanKind.FORM, "syringe")]


def test_no_dictionary_words():
    assert match_spans(tokenize_spans("delivery to the warehouse"), ngram_dict("atropine"), FORM, MEASURE) == []


def test_merge_worked_example():
    tokens = tokenize_spans("atropine sulfate solution")
    spans = [MatchSpan(0, 2, SpanKind.NGRAM, "atropine sulfate"), MatchSpan(1, 3, SpanKind.NGRAM, "sulfate solution")]
    assert merge_overlaps(spans, tokens) == [MatchSpan(0, 3, SpanKind.NGRAM, "atropine sulfate solution")]


def test_disjoint_spans_unchanged():
    spans = [MatchSpan(0, 1, SpanKind.NGRAM, "a"), MatchSpan(3, 4, SpanKind.FORM, "tablets")]
    assert merge_overlaps(spans) == spans


def test_form_never_merges_with_ngram():
    spans = [MatchSpan(0, 2, SpanKind.NGRAM, "a b"), MatchSpan(2, 3, SpanKind.FORM, "tablets")]
    assert merge_overlaps(spans) == spans


def test_conflict_keeps_longer_span():
    spans = [MatchSpan(0, 2, SpanKind.NGRAM, "solution bag"), MatchSpan(1, 2, SpanKind.FORM, "bag")]
    assert merge_overlaps(spans) == [spans[0]]


@pytest.mark.parametrize("seed", range(25))
def test_ngram_union_matches_oracle(seed):
    rng = random.Random(seed)
    intervals = []
    for _ in range(rng.randint(0, 8)):
        a = rng.randint(0, 15)
        intervals.append((a, a + rng.randint(1, 4)))
    spans = [MatchSpan(a, b, SpanKind.NGRAM, "") for a, b in intervals]
    assert [(s.start, s.end) for s in merge_overlaps(spans)] == interval_union(intervals)


def quantities(text):
    tokens = tokenize_spans(text)
    spans = [s for s in match_spans(tokens, ngram_dict("x"), FORM, MEASURE) if s.kind == SpanKind.MEASURE]
    return [(m.quantity, m.unit) for m in extract_quantities(tokens, spans)]


def test_quantities_fused():
    assert quantities("3mg/10ml") == [(3, "mg"), (10, "ml")]


def test_quantities_spaced():
    assert quantities("40 mg/2ml") == [(40, "mg"), (2, "ml")]


def test_quantity_absent():
    assert quantities("price per mg") == [(None, "mg")]


def test_quantity_window_stops_at_other_unit():
    assert quantities("5 mg ml") == [(5, "mg"), (None, "ml")]


def test_measurement_rejects_non_positive():
    with pytest.raises(ValueError):
        Measurement(0, "mg")


def test_figure6_item():
    parser = LotParser(ngram_dict("atropine sulfate", "sulfate solution"), FORM, MEASURE)
    item = parse_item("Atropine sulfate solution for injection 3mg/10ml pre-filled syringe", parser)
    assert item.to_dict() == {
        "id": "index-1",
        "name": "atropine sulfate solution",
        "form": "syringe",
        "measurements": [{"quantity": 3, "unit": "mg"}, {"quantity": 10, "unit": "ml"}],
        "raw_text": "Atropine sulfate solution for injection 3mg/10ml pre-filled syringe",
    }


def test_ciprofloxacin_item():
    parser = LotParser(ngram_dict("ciprofloxacin"), FORM, MEASURE)
    item = parse_item("Ciprofloxacin tablets 100mg", parser)
    assert (item.name, item.form, [(m.quantity, m.unit) for m in item.measurements]) == ("ciprofloxacin", "tablets", [(100, "mg")])


def test_stopword_only_item():
    parser = LotParser(ngram_dict("x"), FORM, MEASURE)
    with pytest.raises(UnparseableItem):
        parse_item("for the of", parser)


def test_name_falls_back_to_longest_plain_run():
    parser = LotParser(ngram_dict("x"), FORM, MEASURE)
    assert parse_item("Sterile gauze swabs 100 units", parser).name == "sterile gauze swabs"


@given(st.text(alphabet="abc mgl0123456789/ ", max_size=30))
def test_item_parts_never_overlap(text):
    parser = LotParser(ngram_dict("a b", "b c", "c"), WordDictionary("form", frozenset({"c", "ab"})), WordDictionary("measure", frozenset({"mg", "ml"})))
    _, spans = parser.spans(text)
    covered = [i for s in spans for i in range(s.start, s.end)]
    assert len(covered) == len(set(covered))


def test_figure3_grouping(parser):
    lines = ["Lot 1: Atropine sulfate solution for injection 3mg/10ml pre-filled syringe", "Lot 2: Ciprofloxacin tablets 100mg"]
    lots = group_lots([para(t, index=i) for i, t in enumerate(lines)], parser)
    assert [(lot.reference, len(lot.items)) for lot in lots] == [("1", 1), ("2", 1)]


def test_figure7_grouping(fixtures_dir, parser):
    doc = document_from_csv(fixtures_dir / "figure7_table.csv", "fig7", language="pt")
    (table,) = doc.pages[0].tables
    rows = [s.text for s, _ in table_sentences(table, "pt", 0, 0)]
    ref_row = next(t for t in rows if t.startswith("1.15 Lote 15"))
    item_row = next(t for t in rows if "MASCARA" in t)
    pt_parser = LotParser(parser.ngrams, parser.form, parser.measure, "pt")
    lots = group_lots([row(ref_row, r=0), row(item_row, r=2)], pt_parser)
    assert [(lot.reference, len(lot.items)) for lot in lots] == [("15", 1)]
    assert lots[0].items[0].name.startswith("mascara dupla")


def test_figure2_grouping(figure2_doc, parser):
    (table,) = figure2_doc.pages[0].tables
    sentences = table_sentences(table, "en", 0, 0)
    positives = [row(s.text, r=s.row_index, doc_id="fig2") for s, _ in sentences[1:]]
    lots = group_lots(positives, parser)
    assert [lot.reference for lot in lots] == ["1", "2", "3", "4"]
    atezo = lots[0].items[0]
    assert atezo.name == "atezolizumab"
    assert [(m.quantity, m.unit) for m in atezo.measurements][:2] == [(1200, "mg"), (250, "ml")]
    # every positive lands in exactly one lot
    assert sorted(u for lot in lots for u in lot.source) == sorted(c.unit_id for c in positives)


def test_positives_before_any_reference_are_unassigned(parser):
    lots = group_lots([para("Ciprofloxacin tablets 100mg"), para("Lot 2: Atropine sulfate", index=1)], parser)
    assert [lot.reference for lot in lots] == [UNASSIGNED, "2"]


def test_table_end_closes_lot(parser):
    lots = group_lots([row("Lot 1 Ciprofloxacin tablets", table=0), row("Bleomycin 15000 units", table=1)], parser)
    assert [lot.reference for lot in lots] == ["1", UNASSIGNED]
    open_parser = LotParser(parser.ngrams, parser.form, parser.measure, close_at="none")
    assert [lot.reference for lot in group_lots([row("Lot 1 Ciprofloxacin tablets", table=0), row("Bleomycin 15000 units", table=1)], open_parser)] == ["1"]


def test_reference_without_item_text_is_a_note(parser):
    (lot,) = group_lots([para("Lot 3: (must not include glucose)")], parser)
    assert lot.items == [] and lot.notes == ["(must not include glucose)"]


@given(st.lists(st.sampled_from(["Lot 1: Ciprofloxacin tablets", "Lot 2", "Bleomycin 15 mg", "for the", "Lot 1 bags"]), max_size=12))
def test_grouping_partitions_positives(texts):
    from tendermine.lexicon import load_ngram_dictionary
    from pathlib import Path

    parser = LotParser(load_ngram_dictionary(Path(__file__).parent / "fixtures" / "ngrams.tsv"), FORM, MEASURE)
    positives = [para(t, index=i) for i, t in enumerate(texts)]
    lots = group_lots(positives, parser)
    ids = [u for lot in lots for u in lot.source]
    assert sorted(ids) == sorted(c.unit_id for c in positives)


def test_lot_file_round_trip(tmp_path, parser):
    lots = group_lots([para("Lot 1: Atropine sulfate solution 3mg/10ml pre-filled syringe")], parser)
    save_lots(lots, tmp_path / "lots.json")
    assert load_lots(tmp_path / "lots.json") == lots
    assert '"ref": "1"' in dumps_lots(lots)
    assert isinstance(lots[0], Lot)

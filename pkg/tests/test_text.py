import pytest

from tendermine.text import (
    is_lot_header,
    is_number_like,
    parse_number,
    roman_value,
    split_fused_quantity,
    tokenize,
)


@pytest.mark.parametrize("token", ["94", "II.1", "X.2", "1.1", "1.21", "1,115", "IV"])
def test_number_like(token):
    assert is_number_like(token)


@pytest.mark.parametrize("token", ["mg", "mix", "", "1..2", "lot"])
def test_not_number_like(token):
    assert not is_number_like(token)


def test_roman_values():
    assert roman_value("XIV") == 14
    assert roman_value("mg") is None


def test_tokenize_drops_separators_and_lowercases():
    assert tokenize("Atropine 3mg/10ml pre-filled") == ["atropine", "3mg", "10ml", "pre", "filled"]
    assert tokenize("7.500 UNI.D.") == ["7.500", "uni.d"]


def test_fused_quantity():
    assert split_fused_quantity("1200mg") == ("1200", "mg")
    assert split_fused_quantity("mg") is None


@pytest.mark.parametrize(
    "text,mark,expected",
    [("7.500", ",", 7500.0), ("7,5", ",", 7.5), ("1,200.50", None, 1200.5), ("1.234.567", None, 1234567.0), ("2.5", ".", 2.5)],
)
def test_parse_number(text, mark, expected):
    assert parse_number(text, mark) == expected


def test_lot_header():
    assert is_lot_header("Lot Number")
    assert is_lot_header("Lot No.")
    assert not is_lot_header("Product Description")

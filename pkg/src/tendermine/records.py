"""Supplier-centric contract award records built from tender/award fields and parsed lots."""

from __future__ import annotations

import json
import re
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

from .lotparse import UNASSIGNED, Lot, normalize_reference
from .text import data_word_list

RECORD_SCHEMA = "tendermine-record/1"
PathLike = Union[str, Path]


class AmbiguousBuyer(ValueError):
    pass


class DuplicateRecordId(ValueError):
    pass


@dataclass(frozen=True)
class Party:
    name: str
    address: str = ""
    country: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "address": self.address, "country": self.country}

    @classmethod
    def from_dict(cls, data: dict) -> "Party":
        return cls(data["name"], data.get("address", ""), data.get("country", ""))


@dataclass(frozen=True)
class Money:
    amount: float
    currency: str

    def to_dict(self) -> dict:
        return {"amount": self.amount, "currency": self.currency}


@dataclass(frozen=True)
class LotStub:
    reference: str
    title: str = ""


@dataclass(frozen=True)
class TenderFields:
    tender_id: str
    buyer: Party
    lot_stubs: tuple[LotStub, ...] = ()
    criteria: tuple[str, ...] = ()


@dataclass(frozen=True)
class AwardEntry:
    supplier: Party
    buyer_name: str
    lot_references: tuple[str, ...] = ()
    value: Money | None = None
    quantity: float | None = None
    start_date: date | None = None
    end_date: date | None = None

    def __post_init__(self):
        if not self.supplier.name.strip():
            raise ValueError("award entry without a supplier")


@dataclass(frozen=True)
class AwardFields:
    award_id: str
    tender_id: str
    entries: tuple[AwardEntry, ...]
    award_date: date | None = None


@dataclass(frozen=True)
class AwardRecord:
    record_id: str
    supplier: Party
    buyer: Party
    tender_id: str
    year: int
    lot_references: tuple[str, ...] = ()
    lots: tuple[Lot, ...] = ()
    unresolved: tuple[str, ...] = ()
    value: Money | None = None
    quantity: float | None = None
    start_date: date | None = None
    end_date: date | None = None
    buyer_matched: bool = False
    flags: tuple[str, ...] = ()

    @property
    def supplier_id(self) -> str:
        return supplier_id(self.supplier.name)

    def item_names(self) -> list[str]:
        return [item.name for lot in self.lots for item in lot.items]

    def to_dict(self) -> dict:
        return {
            "schema": RECORD_SCHEMA,
            "record_id": self.record_id,
            "supplier": self.supplier.to_dict(),
            "buyer": self.buyer.to_dict(),
            "buyer_matched": self.buyer_matched,
            "tender_id": self.tender_id,
            "year": self.year,
            "lot_references": list(self.lot_references),
            "lots": [lot.to_dict() for lot in self.lots],
            "unresolved": list(self.unresolved),
            "value": self.value.to_dict() if self.value else None,
            "quantity": self.quantity,
            "start_date": self.start_date.isoformat() if self.start_date else None,
            "end_date": self.end_date.isoformat() if self.end_date else None,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AwardRecord":
        if data.get("schema") != RECORD_SCHEMA:
            raise ValueError(f"unsupported record schema {data.get('schema')!r}")
        value = data.get("value")
        return cls(
            record_id=data["record_id"],
            supplier=Party.from_dict(data["supplier"]),
            buyer=Party.from_dict(data["buyer"]),
            tender_id=data["tender_id"],
            year=data["year"],
            lot_references=tuple(data["lot_references"]),
            lots=tuple(Lot.from_dict(d) for d in data["lots"]),
            unresolved=tuple(data["unresolved"]),
            value=Money(value["amount"], value["currency"]) if value else None,
            quantity=data.get("quantity"),
            start_date=_parse_date(data.get("start_date")),
            end_date=_parse_date(data.get("end_date")),
            buyer_matched=data.get("buyer_matched", False),
            flags=tuple(data.get("flags", ())),
        )


def _parse_date(text: str | None) -> date | None:
    return date.fromisoformat(text) if text else None


# ---------------------------------------------------------------------------
# names

_PUNCT_RE = re.compile(r"[^\w\s]")


def normalize_name(name: str, legal_suffixes: Iterable[str] | None = None) -> str:
    """Lowercase, drop punctuation and trailing legal suffixes, collapse whitespace."""
    suffixes = set(legal_suffixes if legal_suffixes is not None else data_word_list("legal_suffixes.txt"))
    text = unicodedata.normalize("NFKC", name).lower()
    words = _PUNCT_RE.sub(" ", text).split()
    while words and words[-1] in suffixes:
        words.pop()
    return " ".join(words)


def supplier_id(name: str) -> str:
    """Filesystem-safe id derived from the normalized supplier name."""
    slug = re.sub(r"\s+", "-", normalize_name(name))
    return slug or "unknown"


def match_buyer(award_buyer_name: str, tender_buyers: Sequence[Party]) -> Party | None:
    """The unique tender buyer whose normalized name equals the award's buyer name."""
    target = normalize_name(award_buyer_name)
    hits = {b for b in tender_buyers if normalize_name(b.name) == target}
    if len(hits) > 1:
        raise AmbiguousBuyer(f"{award_buyer_name!r} matches {sorted(b.name for b in hits)}")
    return next(iter(hits), None)


# ---------------------------------------------------------------------------
# flattening and joining

def _merge_values(values: Sequence[Money]) -> tuple[Money | None, bool]:
    if not values:
        return None, False
    currencies = {v.currency for v in values}
    if len(currencies) > 1:
        return None, True
    return Money(sum(v.amount for v in values), values[0].currency), False


def flatten_awards(award: AwardFields) -> list[AwardRecord]:
    """One record per distinct (supplier, buyer) pair, in order of first appearance."""
    groups: dict[tuple[str, str], list[AwardEntry]] = {}
    for entry in award.entries:
        key = (normalize_name(entry.supplier.name), normalize_name(entry.buyer_name))
        groups.setdefault(key, []).append(entry)
    records = []
    for k, entries in enumerate(groups.values(), start=1):
        first = entries[0]
        refs: dict[str, None] = {}
        for e in entries:
            refs.update(dict.fromkeys(e.lot_references))
        value, mixed = _merge_values([e.value for e in entries if e.value is not None])
        quantities = [e.quantity for e in entries if e.quantity is not None]
        starts = [e.start_date for e in entries if e.start_date]
        ends = [e.end_date for e in entries if e.end_date]
        start = min(starts) if starts else None
        anchor = start or award.award_date
        if anchor is None:
            raise ValueError(f"award {award.award_id} has no date to place record {k} in a year")
        records.append(
            AwardRecord(
                record_id=f"{award.award_id}:{k}",
                supplier=first.supplier,
                buyer=Party(first.buyer_name),
                tender_id=award.tender_id,
                year=anchor.year,
                lot_references=tuple(refs),
                value=value,
                quantity=sum(quantities) if quantities else None,
                start_date=start,
                end_date=max(ends) if ends else None,
                flags=("mixed_currency",) if mixed else (),
            )
        )
    return records


def attach_buyer(record: AwardRecord, tenders: Sequence[TenderFields]) -> AwardRecord:
    """Fill buyer address/country from the tender when the names match."""
    candidates = [t.buyer for t in tenders if t.tender_id == record.tender_id] or [t.buyer for t in tenders]
    buyer = match_buyer(record.buyer.name, candidates)
    if buyer is None:
        return replace(record, flags=record.flags + ("buyer_unmatched",))
    return replace(record, buyer=Party(record.buyer.name, buyer.address, buyer.country), buyer_matched=True)


def join_lots(record: AwardRecord, parsed_lots: Sequence[Lot]) -> AwardRecord:
    """Resolve each lot reference against the parsed lots of the record's tender."""
    by_ref: dict[str, list[Lot]] = {}
    for lot in parsed_lots:
        if lot.reference != UNASSIGNED:
            by_ref.setdefault(normalize_reference(lot.reference), []).append(lot)
    joined: list[Lot] = []
    unresolved = []
    for ref in record.lot_references:
        hits = by_ref.get(normalize_reference(ref))
        if hits:
            joined.extend(h for h in hits if h not in joined)
        else:
            unresolved.append(ref)
    flags = tuple(f for f in record.flags if f != "lots_unresolved")
    if unresolved:
        flags += ("lots_unresolved",)
    return replace(record, lots=tuple(joined), unresolved=tuple(unresolved), flags=flags)


def assemble_records(
    awards: Sequence[AwardFields],
    tenders: Sequence[TenderFields],
    lots_by_tender: dict[str, Sequence[Lot]],
) -> list[AwardRecord]:
    out = []
    for award in awards:
        for record in flatten_awards(award):
            record = attach_buyer(record, tenders)
            out.append(join_lots(record, lots_by_tender.get(record.tender_id, ())))
    return out


# ---------------------------------------------------------------------------
# store

class RecordStore:
    """Append-only JSON-lines store with a supplier index sidecar."""

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.index_path = self.path.with_name(self.path.name + ".index.json")

    def _read_index(self) -> dict[str, list[str]]:
        if not self.index_path.exists():
            return {}
        return json.loads(self.index_path.read_text(encoding="utf-8"))

    def append(self, records: Iterable[AwardRecord]) -> None:
        records = list(records)
        known = {r.record_id for r in self.all()}
        fresh = set()
        for r in records:
            if r.record_id in known or r.record_id in fresh:
                raise DuplicateRecordId(r.record_id)
            fresh.add(r.record_id)
        index = self._read_index()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
                index.setdefault(r.supplier_id, []).append(r.record_id)
        self.index_path.write_text(json.dumps(index, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def __iter__(self) -> Iterator[AwardRecord]:
        if not self.path.exists():
            return iter(())
        with open(self.path, encoding="utf-8") as fh:
            return iter([AwardRecord.from_dict(json.loads(line)) for line in fh if line.strip()])

    def all(self) -> list[AwardRecord]:
        return list(self)

    def suppliers(self) -> list[str]:
        return sorted(self._read_index())

    def by_supplier(self, supplier: str) -> list[AwardRecord]:
        """Records of a supplier, given by id or by name."""
        sid = supplier if supplier in self._read_index() else supplier_id(supplier)
        wanted = set(self._read_index().get(sid, ()))
        return [r for r in self if r.record_id in wanted]

    def by_years(self, first: int, last: int) -> list[AwardRecord]:
        return [r for r in self if first <= r.year <= last]

    def by_item(self, substring: str) -> list[AwardRecord]:
        needle = substring.lower()
        return [r for r in self if any(needle in name for name in r.item_names())]


# ---------------------------------------------------------------------------
# simplified tender/award XML

def _text(node: ET.Element | None, tag: str, default: str = "") -> str:
    child = node.find(tag) if node is not None else None
    return (child.text or "").strip() if child is not None else default


def _party(node: ET.Element | None) -> Party:
    return Party(_text(node, "name"), _text(node, "address"), _text(node, "country"))


def parse_tender_xml(source: PathLike | str) -> TenderFields:
    """Read ``<tender id=..>`` with buyer, lots and criteria children."""
    root = _xml_root(source)
    stubs = tuple(LotStub(e.get("reference", ""), (e.text or "").strip()) for e in root.iter("lot"))
    criteria = tuple((e.text or "").strip() for e in root.iter("criterion"))
    return TenderFields(root.get("id", ""), _party(root.find("buyer")), stubs, criteria)


def parse_award_xml(source: PathLike | str) -> AwardFields:
    """Read ``<award id=.. tender=.. date=..>`` with one ``<entry>`` per awarded supplier."""
    root = _xml_root(source)
    entries = []
    for e in root.iter("entry"):
        value_node = e.find("value")
        value = None
        if value_node is not None and (value_node.text or "").strip():
            value = Money(float(value_node.text), value_node.get("currency", ""))
        qty = _text(e, "quantity")
        entries.append(
            AwardEntry(
                supplier=_party(e.find("supplier")),
                buyer_name=_text(e, "buyer"),
                lot_references=tuple((n.text or "").strip() for n in e.iter("lot")),
                value=value,
                quantity=float(qty) if qty else None,
                start_date=_parse_date(_text(e, "start") or None),
                end_date=_parse_date(_text(e, "end") or None),
            )
        )
    return AwardFields(root.get("id", ""), root.get("tender", ""), tuple(entries), _parse_date(root.get("date")))


def _xml_root(source: PathLike | str) -> ET.Element:
    if isinstance(source, str) and source.lstrip().startswith("<"):
        return ET.fromstring(source)
    return ET.parse(source).getroot()


def _sub(parent: ET.Element, tag: str, text: str | None) -> ET.Element:
    node = ET.SubElement(parent, tag)
    if text is not None:
        node.text = text
    return node


def _party_xml(parent: ET.Element, tag: str, party: Party) -> None:
    node = ET.SubElement(parent, tag)
    _sub(node, "name", party.name)
    _sub(node, "address", party.address)
    _sub(node, "country", party.country)


def tender_to_xml(tender: TenderFields) -> str:
    root = ET.Element("tender", id=tender.tender_id)
    _party_xml(root, "buyer", tender.buyer)
    lots = ET.SubElement(root, "lots")
    for stub in tender.lot_stubs:
        _sub(lots, "lot", stub.title).set("reference", stub.reference)
    criteria = ET.SubElement(root, "criteria")
    for c in tender.criteria:
        _sub(criteria, "criterion", c)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def award_to_xml(award: AwardFields) -> str:
    attrs = {"id": award.award_id, "tender": award.tender_id}
    if award.award_date:
        attrs["date"] = award.award_date.isoformat()
    root = ET.Element("award", attrs)
    for e in award.entries:
        node = ET.SubElement(root, "entry")
        _party_xml(node, "supplier", e.supplier)
        _sub(node, "buyer", e.buyer_name)
        lots = ET.SubElement(node, "lots")
        for ref in e.lot_references:
            _sub(lots, "lot", ref)
        if e.value is not None:
            _sub(node, "value", repr(e.value.amount)).set("currency", e.value.currency)
        if e.quantity is not None:
            _sub(node, "quantity", repr(e.quantity))
        if e.start_date:
            _sub(node, "start", e.start_date.isoformat())
        if e.end_date:
            _sub(node, "end", e.end_date.isoformat())
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"

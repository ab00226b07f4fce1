"""Seeded synthetic tenders with gold labels for desk-scale training and evaluation.

Lot content is templated on bullet-list lot pages, lot-number tables with
row spans, and tables whose lots open with a "1.N Lot N" row followed by a
repeated header. Boilerplate pages reuse legal and requirement prose. At
noise level 0 the two classes share no content words; only structural words
(lot words, number words, digits, stopwords) occur on both sides.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Sequence

from .classify import IRRELEVANT, RELEVANT
from .docmodel import Cell, Page, Paragraph, Table, UniversalDocument, page_sentences
from .itemdetect import table_sentences
from .lexicon import FIELD_NAMES, TARGET_FIELD, FieldCorpus, ReferenceCorpusFrequencies
from .records import AwardEntry, AwardFields, LotStub, Money, Party, TenderFields
from .text import tokenize

DRUGS = (
    "Atropine sulfate", "Ciprofloxacin", "Atezolizumab", "Bevacizumab", "Bleomycin", "Bortezomib",
    "Gentamicin", "Prussian blue", "Amoxicillin", "Paracetamol", "Ibuprofen", "Morphine sulfate",
    "Oxaliplatin", "Cisplatin", "Carboplatin", "Docetaxel", "Paclitaxel", "Trastuzumab", "Rituximab",
    "Pembrolizumab", "Nivolumab", "Vancomycin", "Meropenem", "Ceftriaxone", "Heparin sodium",
    "Enoxaparin", "Insulin glargine", "Adrenaline", "Lidocaine", "Ondansetron", "Dexamethasone",
    "Methotrexate", "Fluorouracil", "Gemcitabine", "Doxorubicin", "Azacitidine", "Pemetrexed",
    "Zoledronic acid", "Filgrastim", "Omeprazole",
)
# {mg} is a strength, {mgml} a strength per volume
PRESENTATIONS = (
    "solution for injection {mgml} pre-filled syringe",
    "tablets {mg}",
    "capsules {mg}",
    "intravenous infusion {mgml}",
    "{mgml} solution for infusion bags",
    "{mg} powder for concentrate vials",
    "oral suspension {mgml} bottles",
    "{mgml} solution for injection ampoules",
)
SUPPLIES = (
    "Surgical mask FFP2", "Nasal tampon small", "Nasal tampon large", "Examination gloves nitrile",
    "Sterile gauze swabs", "Disposable apron", "Cannula 20 gauge", "Suture kit sterile",
)
PRICE_ROW = "Price per mg for any infusion bag dose outside the above sizes"
REGIONS = ("ELS", "ELSN")
SHELF_LIFE = ("1 Day", "14 Days", "21 Days", "42 Days")
ARTICLES = "Articles"
VAT_NOTE = "(VAT excluded)"

LOT_TABLE_HEADER = (
    "Lot Number", "Product Description", "Medicine", "Pack Size", "Regions to Supply",
    "Estimated total annual usage in single units (EoE)", "Estimated total annual usage in single units (LDN)",
    "Estimated total annual usage in single units (SEC)", "Estimated total annual usage in single units (NoE)",
    "Minimum Clinically Acceptable Shelf Life",
)
USAGE_COLUMNS = 4
ARTICLE_HEADER = ("Code", "Internal Reference", "Description", "Qty", "Unit")

SUBJECTS = (
    "The Authority", "The contracting authority", "The supplier", "Each bidder", "The tenderer",
    "The buyer", "The successful bidder", "The storage agent", "The framework agreement",
)
VERBS = (
    "must ensure", "shall provide", "will require", "must demonstrate", "shall maintain",
    "will accept", "must submit", "shall retain", "may request",
)
OBJECTS = (
    "evidence of compliance with the regulations", "a marketing authorisation covering its use",
    "the terms of offer in full", "details of the quality management system",
    "confirmation of the delivery schedule", "a statement of financial standing",
    "copies of the relevant certificates", "the completed declaration",
    "information about subcontracting arrangements", "records of previous contract performance",
    "a named contact for emergency deployment", "audited accounts for recent years",
)
TAILS = (
    "before the closing date", "at the time of delivery", "within the contract period",
    "as set out in the terms of offer", "in accordance with the directive",
    "prior to the award decision", "on request", "",
)
HEADINGS = (
    "Introduction", "Products and mandatory requirements", "Volume required and mandatory requirements",
    "Shelf life and mandatory requirements", "Legal basis", "Contracting authority", "Award procedure",
    "Conditions of participation", "Complaints procedure", "Confidentiality",
)
LOT_MENTIONS = (
    "For Lot {k}, the Authority will accept medicines which are subject to equivalent approval.",
    "The requirement is split into {n} Lots as set out in the terms of offer.",
    "Bidders may submit offers for one or more Lots.",
    "For Lots {ks} the medicine must be subject to a marketing authorisation.",
)
COVER_LINES = (
    "Invitation to offer for the supply of {title}",
    "Offer reference number: {code}",
    "Tender Ref: {code}",
    "Delivery period: 1 April {year} through to 31 March {next_year}",
)
NOTICE_LINES = (
    "Legal Basis: Directive 2014/24/EU",
    "Section I: Contracting authority",
    "Official name: {buyer}",
    "Postal address: {address}",
    "NUTS code: 00 Not specified",
    "Postal code: {postal}",
    "II.2.2) Additional CPV code(s)",
    "II.2.5) Award criteria",
    "II.2.6) Estimated value",
)
CRITERIA = ("Quality", "Cost", "Technical merit", "Delivery performance", "Sustainability", "Social value")
TITLES = (
    "Strategic stockpile of medicines", "Aseptically prepared cytotoxic medicines",
    "Pharmaceutical products framework", "Medical consumables framework", "Oncology treatments framework",
)
BUYERS = (
    ("Public Health Institute Hospital Strumica", "Mladinska 2", "MK"),
    ("Department of Health and Social Care", "Victoria Street 39", "UK"),
    ("University Hospital Leuven", "Herestraat 49", "BE"),
    ("Regional Health Board Lisbon", "Avenida Central 12", "PT"),
    ("County Hospital Trust Bristol", "Marlborough Street 4", "UK"),
    ("Central Purchasing Agency Madrid", "Calle Mayor 80", "ES"),
    ("National Blood Service Dublin", "James Street 21", "IE"),
    ("City Clinical Centre Riga", "Pilsonu iela 13", "LV"),
)
SUPPLIERS = (
    ("Northwind Pharma Ltd", "UK"), ("Helix Biologics GmbH", "DE"), ("Iberia Farma SA", "ES"),
    ("Baltic Med SIA", "LV"), ("Meridian Healthcare BV", "NL"), ("Aurora Therapeutics SpA", "IT"),
)
GENERAL_WORDS = (
    "time year people way day man thing woman life child world school state family student group "
    "country problem hand part place case week company system program question work government "
    "number night point home water room mother area money story fact month lot right study book "
    "eye job word business issue side kind head house service friend father power hour game line "
    "end member law car city community name president team minute idea kid body information back "
    "parent face others level office door health person art war history party result change morning "
    "reason research girl guy moment air teacher force education"
).split()


@dataclass(frozen=True)
class GoldLot:
    doc_id: str
    reference: str
    items: tuple[str, ...]


@dataclass(frozen=True)
class TenderGold:
    page_labels: dict[str, str]
    table_labels: dict[str, str]
    sentence_labels: dict[str, str]
    lots: tuple[GoldLot, ...] = ()


@dataclass(frozen=True)
class SyntheticTender:
    tender_id: str
    documents: tuple[UniversalDocument, ...]
    gold: TenderGold
    fields: dict[str, tuple[str, ...]]
    tender: TenderFields
    award: AwardFields | None
    has_lots: bool


def page_id(doc_id: str, page_index: int) -> str:
    return f"{doc_id}:p{page_index}"


def table_id(doc_id: str, page_index: int, table_index: int) -> str:
    return f"{doc_id}:p{page_index}.t{table_index}"


@dataclass
class _PageDraft:
    paragraphs: list[str] = field(default_factory=list)
    tables: list[tuple[Table, frozenset[int]]] = field(default_factory=list)
    order: list[str] = field(default_factory=list)
    positive_texts: set[str] = field(default_factory=set)
    relevant: bool = False

    def para(self, text: str) -> None:
        self.order.append("p")
        self.paragraphs.append(text)

    def table(self, cells: list[Cell], n_rows: int, n_cols: int, header: int | None, positive_rows: set[int]) -> None:
        self.order.append("t")
        self.tables.append((Table(tuple(cells), n_rows, n_cols, header), frozenset(positive_rows)))


class _Generator:
    def __init__(self, seed: int, noise: float):
        self.rng = random.Random(seed)
        self.noise = noise

    # -- text pieces

    def dose(self, kind: str) -> str:
        r = self.rng
        mg = r.choice((1, 2, 5, 10, 20, 40, 50, 100, 250, 400, 500, 1000, 1200))
        if kind == "mg":
            return f"{mg}mg"
        ml = r.choice((1, 2, 5, 10, 50, 100, 200, 250))
        sep = r.choice(("", " "))
        return f"{mg}{sep}mg/{ml}ml"

    def item_line(self) -> str:
        drug = self.rng.choice(DRUGS)
        pres = self.rng.choice(PRESENTATIONS)
        text = f"{drug} " + pres.format(mg=self.dose("mg"), mgml=self.dose("mgml"))
        if self.rng.random() < self.noise:
            text += " " + self.rng.choice(TAILS[:-1])
        return text

    def boiler_sentence(self) -> str:
        r = self.rng
        tail = r.choice(TAILS)
        text = f"{r.choice(SUBJECTS)} {r.choice(VERBS)} {r.choice(OBJECTS)}" + (f" {tail}" if tail else "")
        if r.random() < self.noise:
            text += f" for {r.choice(DRUGS)}"
        return text + "."

    def boiler_paragraph(self, section: str) -> str:
        n = self.rng.randint(1, 3)
        return f"{section} " + " ".join(self.boiler_sentence() for _ in range(n))

    def heading(self, number: int) -> str:
        return f"{number}. {self.rng.choice(HEADINGS)}"

    # -- pages

    def cover_paragraph(self) -> str:
        r = self.rng
        code = f"{r.choice(('CM', 'PHS', 'EMP'))}/{r.choice(('PHS', 'EMP', 'LDN'))}/{r.randint(10, 21)}/{r.randint(1000, 9999)}"
        year = r.randint(2018, 2022)
        lines = [COVER_LINES[0]] + r.sample(COVER_LINES[1:], 2)
        return "\n".join(
            line.format(title=r.choice(TITLES).lower(), code=code, year=year, next_year=year + 1) for line in lines
        )

    def notice_paragraph(self) -> str:
        r = self.rng
        name, address, _ = r.choice(BUYERS)
        lines = r.sample(NOTICE_LINES, r.randint(2, 4))
        return "\n\n".join(line.format(buyer=name, address=address, postal=r.randint(1000, 9999)) for line in lines)

    def boiler_page(self, with_table: bool) -> _PageDraft:
        page = _PageDraft()
        roll = self.rng.random()
        if roll < 0.3:
            page.para(self.cover_paragraph())
        elif roll < 0.5:
            for text in self.notice_paragraph().split("\n\n"):
                page.para(text)
        base = self.rng.randint(1, 9)
        page.para(self.heading(base))
        for k in range(self.rng.randint(1, 3)):
            page.para(self.boiler_paragraph(f"{base}.{k + 1}"))
        if with_table:
            self.negative_table(page)
        return page

    def negative_table(self, page: _PageDraft) -> None:
        if self.rng.random() < 0.5:
            rows = [("Criterion", "Weighting")]
            for c in self.rng.sample(CRITERIA, self.rng.randint(2, 4)):
                rows.append((c, f"{self.rng.choice((10, 20, 30, 40, 60))}%"))
        else:
            rows = [("Contact", "Telephone", "Role")]
            for _ in range(self.rng.randint(1, 3)):
                rows.append((self.rng.choice(SUBJECTS).split()[-1].title(), f"0{self.rng.randint(1000, 9999)} {self.rng.randint(100000, 999999)}", "Procurement officer"))
        cells = [Cell(r, c, text) for r, row in enumerate(rows) for c, text in enumerate(row)]
        page.table(cells, len(rows), len(rows[0]), 0, set())

    def bullet_page(self, n_lots: int) -> tuple[_PageDraft, list[tuple[str, tuple[str, ...]]]]:
        page = _PageDraft(relevant=True)
        page.para("2. Products and mandatory requirements:")
        page.para(
            f"2.1 The Authority's requirement for this exercise is split into {n_lots} Lots as set out in the terms of offer. "
            "In respect of each of the individual Lots the medicines required by the Authority are as follows:"
        )
        lots = []
        lines = []
        for k in range(1, n_lots + 1):
            item = self.item_line()
            line = f"Lot {k}: {item}"
            lines.append(f"- {line}")
            page.positive_texts.add(line)
            lots.append((str(k), (item,)))
        page.para("\n".join(lines))
        ks = ",".join(str(k) for k in range(1, n_lots))
        mention = self.rng.choice(LOT_MENTIONS).format(k=n_lots, n=n_lots, ks=ks or "1")
        page.para(f"2.2 {mention} " + self.boiler_sentence())
        page.para(self.boiler_paragraph("3.1"))
        return page, lots

    def lot_number_table_page(self, n_lots: int) -> tuple[_PageDraft, list[tuple[str, tuple[str, ...]]]]:
        page = _PageDraft()
        page.para("Table 1: Pricing schedule")
        n_cols = len(LOT_TABLE_HEADER)
        cells = [Cell(0, c, h) for c, h in enumerate(LOT_TABLE_HEADER)]
        row = 1
        lots = []
        positive_rows = set()
        for k in range(1, n_lots + 1):
            drug = self.rng.choice(DRUGS)
            n_items = self.rng.randint(1, 3)
            items = []
            region = self.rng.choice(REGIONS)
            shelf = self.rng.choice(SHELF_LIFE)
            cells.append(Cell(row, 0, str(k), row_span=n_items + (1 if n_items > 1 else 0)))
            for i in range(n_items):
                desc = f"{drug} {self.dose('mgml')} solution for infusion bags"
                items.append(desc)
                usage = [str(self.rng.randint(0, 400)) for _ in range(USAGE_COLUMNS)]
                cells += [Cell(row, 1, desc), Cell(row, 2, drug.split()[0]), Cell(row, 3, "1"), Cell(row, 4, region)]
                cells += [Cell(row, 5 + u, v) for u, v in enumerate(usage)]
                cells.append(Cell(row, n_cols - 1, shelf))
                positive_rows.add(row)
                row += 1
            if n_items > 1:
                items.append(PRICE_ROW)
                cells += [Cell(row, 1, PRICE_ROW), Cell(row, 2, drug.split()[0]), Cell(row, 3, "1"), Cell(row, 4, region)]
                cells += [Cell(row, 5 + u, "") for u in range(USAGE_COLUMNS)]
                cells.append(Cell(row, n_cols - 1, shelf))
                positive_rows.add(row)
                row += 1
            lots.append((str(k), tuple(items)))
        page.table(cells, row, n_cols, 0, positive_rows)
        return page, lots

    def article_table_page(self, n_lots: int) -> tuple[_PageDraft, list[tuple[str, tuple[str, ...]]]]:
        page = _PageDraft()
        page.para("Annex: Itemised schedule")
        n_cols = len(ARTICLE_HEADER)
        cells: list[Cell] = []
        row = 0
        lots = []
        positive_rows = set()
        section = self.rng.randint(1, 3)
        for k in range(1, n_lots + 1):
            cells += [Cell(row, 0, f"{section}.{k} Lot {k}"), Cell(row, 1, ""), Cell(row, 2, ARTICLES),
                      Cell(row, 3, ""), Cell(row, 4, VAT_NOTE)]
            positive_rows.add(row)
            row += 1
            cells += [Cell(row, c, h) for c, h in enumerate(ARTICLE_HEADER)]
            row += 1
            items = []
            for _ in range(self.rng.randint(1, 2)):
                supply = self.rng.choice(SUPPLIES)
                qty = f"{self.rng.choice((100, 250, 1000, 7500)):,}.00"
                cells += [Cell(row, 0, str(self.rng.randint(200000000, 299999999))), Cell(row, 1, ""),
                          Cell(row, 2, supply), Cell(row, 3, qty), Cell(row, 4, "UNI.D.")]
                items.append(supply)
                positive_rows.add(row)
                row += 1
            lots.append((str(k), tuple(items)))
        page.table(cells, row, n_cols, None, positive_rows)
        return page, lots


def _finish_page(index: int, draft: _PageDraft) -> Page:
    paragraphs, tables = [], []
    p_iter, t_iter = iter(draft.paragraphs), iter(draft.tables)
    for position, kind in enumerate(draft.order):
        if kind == "p":
            paragraphs.append(Paragraph(next(p_iter), position))
        else:
            table, _ = next(t_iter)
            tables.append(Table(table.cells, table.n_rows, table.n_cols, table.header_row_index, position, (index,)))
    return Page(index, tuple(paragraphs), tuple(tables))


def _label(flag: bool) -> str:
    return RELEVANT if flag else IRRELEVANT


def _build_document(doc_id: str, tender_id: str, drafts: Sequence[_PageDraft]) -> tuple[UniversalDocument, dict, dict, dict]:
    pages = tuple(_finish_page(i, d) for i, d in enumerate(drafts))
    doc = UniversalDocument(doc_id, "en", pages, tender_id)
    page_labels, table_labels, sentence_labels = {}, {}, {}
    for page, draft in zip(pages, drafts):
        page_labels[page_id(doc_id, page.index)] = _label(draft.relevant)
        for s in page_sentences(page, "en"):
            sentence_labels[f"{doc_id}:{s.sentence_id}"] = _label(s.text in draft.positive_texts)
        for t_idx, (table, (_, positive_rows)) in enumerate(zip(page.tables, draft.tables)):
            table_labels[table_id(doc_id, page.index, t_idx)] = _label(bool(positive_rows))
            for s, _ in table_sentences(table, "en", page.index, t_idx):
                sentence_labels[f"{doc_id}:{s.sentence_id}"] = _label(s.row_index in positive_rows)
    return doc, page_labels, table_labels, sentence_labels


def _variant(name: str, rng: random.Random) -> str:
    """Case or punctuation variant that still normalizes to ``name``."""
    return rng.choice((name, name.upper(), name.lower(), f"{name}."))


def _fields(gen: _Generator, buyer: Party, items: Sequence[str], title: str) -> dict[str, tuple[str, ...]]:
    r = gen.rng
    lot_values = list(items)
    if r.random() < 0.2:
        lot_values.append(f"{ARTICLES} {VAT_NOTE}")
    if r.random() < 0.2:
        lot_values.append(PRICE_ROW)
    if r.random() < gen.noise:
        lot_values.append(gen.boiler_sentence())
    other_noise = f" {r.choice(DRUGS)}" if r.random() < gen.noise else ""
    return {
        "buyer_name_address": (f"{buyer.name}, {buyer.address}, {buyer.country}",),
        "notice_title": (title + other_noise,),
        "short_description": (gen.boiler_sentence(),),
        TARGET_FIELD: tuple(lot_values),
        "contract_criteria": tuple(r.sample(CRITERIA, r.randint(1, 3))),
    }


def synth_tender(gen: _Generator, tender_id: str, has_lots: bool) -> SyntheticTender:
    r = gen.rng
    n_lots = r.randint(2, 6)
    lots_per_doc: list[tuple[str, list[tuple[str, tuple[str, ...]]]]] = []
    docs, page_labels, table_labels, sentence_labels = [], {}, {}, {}
    doc_drafts: list[list[_PageDraft]] = []
    if has_lots:
        layout = r.choice(("bullets", "lot_table", "article_table", "bullets+lot_table"))
        drafts = [gen.boiler_page(with_table=r.random() < 0.3)]
        lot_pages = []
        if "bullets" in layout:
            lot_pages.append(gen.bullet_page(n_lots))
        if "lot_table" in layout:
            lot_pages.append(gen.lot_number_table_page(n_lots))
        if layout == "article_table":
            lot_pages.append(gen.article_table_page(n_lots))
        doc_lots = []
        for draft, lots in lot_pages:
            drafts.append(draft)
            doc_lots.extend(lots)
        drafts.append(gen.boiler_page(with_table=r.random() < 0.3))
        doc_drafts.append(drafts)
        lots_per_doc.append((f"{tender_id}-d1", doc_lots))
    n_extra = r.randint(0, 1) if has_lots else r.randint(1, 2)
    for _ in range(n_extra):
        doc_drafts.append([gen.boiler_page(with_table=r.random() < 0.4) for _ in range(r.randint(1, 3))])
    for d, drafts in enumerate(doc_drafts, start=1):
        doc, pl, tl, sl = _build_document(f"{tender_id}-d{d}", tender_id, drafts)
        docs.append(doc)
        page_labels.update(pl)
        table_labels.update(tl)
        sentence_labels.update(sl)

    gold_lots = []
    for doc_id, lots in lots_per_doc:
        merged: dict[str, list[str]] = {}
        for ref, items in lots:
            merged.setdefault(ref, []).extend(items)
        gold_lots += [GoldLot(doc_id, ref, tuple(items)) for ref, items in merged.items()]

    name, address, country = r.choice(BUYERS)
    buyer = Party(name, address, country)
    title = r.choice(TITLES)
    item_values = [gen.item_line() for _ in range(n_lots)]
    item_values += [i for lot in gold_lots for i in lot.items if i != PRICE_ROW]
    tender = TenderFields(
        tender_id,
        buyer,
        tuple(LotStub(str(k), "") for k in range(1, n_lots + 1)),
        tuple(r.sample(CRITERIA, 2)),
    )
    award = None
    if r.random() < 0.9:
        entries = []
        year = r.randint(2018, 2022)
        for _ in range(r.randint(1, 3)):
            sname, scountry = r.choice(SUPPLIERS)
            start = date(year, r.randint(1, 12), 1)
            refs = tuple(sorted(r.sample([str(k) for k in range(1, n_lots + 1)], r.randint(1, min(2, n_lots))), key=int))
            entries.append(
                AwardEntry(
                    supplier=Party(sname, "", scountry),
                    buyer_name=_variant(name, r),
                    lot_references=refs,
                    value=Money(float(r.randint(10, 900) * 1000), "EUR" if country != "UK" else "GBP"),
                    quantity=float(r.randint(1, 50) * 10),
                    start_date=start,
                    end_date=start + timedelta(days=r.randint(90, 720)),
                )
            )
        award = AwardFields(f"{tender_id}-a1", tender_id, tuple(entries), date(year, 1, 1))
    gold = TenderGold(page_labels, table_labels, sentence_labels, tuple(gold_lots))
    return SyntheticTender(tender_id, tuple(docs), gold, _fields(gen, buyer, item_values, title), tender, award, has_lots)


def synth_corpus(seed: int, size: int, noise_level: float = 0.0, positive_ratio: float = 0.5) -> list[SyntheticTender]:
    """``size`` tenders, ``round(size * positive_ratio)`` of them carrying lot attachments."""
    if size < 1:
        raise ValueError("size must be at least 1")
    if not 0.0 <= noise_level <= 1.0 or not 0.0 <= positive_ratio <= 1.0:
        raise ValueError("noise_level and positive_ratio must lie in [0, 1]")
    gen = _Generator(seed, noise_level)
    n_pos = round(size * positive_ratio)
    flags = [True] * n_pos + [False] * (size - n_pos)
    gen.rng.shuffle(flags)
    return [synth_tender(gen, f"T{k + 1:04d}", flag) for k, flag in enumerate(flags)]


def field_corpora(tenders: Sequence[SyntheticTender]) -> list[FieldCorpus]:
    return [FieldCorpus(name, tuple(v for t in tenders for v in t.fields[name])) for name in FIELD_NAMES]


def synth_reference(seed: int = 0) -> ReferenceCorpusFrequencies:
    """General-language frequencies: boilerplate and common words are frequent, item words rare."""
    rng = random.Random(seed)
    counts: Counter = Counter()
    general = set(GENERAL_WORDS)
    for text in (*SUBJECTS, *VERBS, *OBJECTS, *TAILS, *HEADINGS, *LOT_MENTIONS, *CRITERIA, *TITLES, *COVER_LINES, *NOTICE_LINES, *LOT_TABLE_HEADER):
        general.update(tokenize(text))
    for w in sorted(general):
        counts[w] = rng.randint(50, 500)
    rare = set()
    for text in (*DRUGS, *PRESENTATIONS, *SUPPLIES):
        rare.update(t for t in tokenize(text) if t.isalpha())
    for w in sorted(rare - general):
        c = rng.randint(0, 3)
        if c:
            counts[w] = c
    return ReferenceCorpusFrequencies.from_counts(counts)

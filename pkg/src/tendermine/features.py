"""Language-independent feature vectors for pages (52), tables (80) and sentences (27).

All features are aggregates of lexicon scores or dictionary hits over
bag-of-words counts, so the same code serves any language once the lexicon
and dictionaries are available for it.
"""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .docmodel import Page, Sentence, Table, expand_spans, page_sentences
from .lexicon import METRICS, SpecificityLexicon, WordDictionary
from .text import has_digit, is_number_like, language_config, tokenize, unit_suffix

LAYOUT_VERSION = "tendermine-features/1"
STATS = ("sum", "avg", "min", "max")
DICTIONARIES = ("form", "measure")


class EmptyPage(ValueError):
    pass


@dataclass(frozen=True)
class AggregateBlock:
    sum: float = 0.0
    avg: float = 0.0
    min: float = 0.0
    max: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.sum, self.avg, self.min, self.max)


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    manifest: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) != len(self.manifest):
            raise ValueError("values and manifest differ in length")

    def __len__(self) -> int:
        return len(self.values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.manifest, self.values))


def _block_names(prefix: str) -> list[str]:
    names = [f"{prefix}.lex.{m}.{s}" for m in METRICS for s in STATS]
    names += [f"{prefix}.dict.{d}.{s}" for d in DICTIONARIES for s in STATS]
    return names


def _coverage_names(prefix: str) -> list[str]:
    return [f"{prefix}.cov.{k}" for k in ("number", "lexicon", "form", "measure")]


PAGE_MANIFEST = tuple(_block_names("page") + _block_names("sent") + _coverage_names("sent"))
TABLE_MANIFEST = tuple(
    _block_names("flat")
    + _block_names("row") + _coverage_names("row")
    + _block_names("col") + _coverage_names("col")
)
SENTENCE_MANIFEST = tuple(_block_names("sent") + ["flag.lot", "flag.number_word", "flag.number_like"])
MANIFESTS = {"page": PAGE_MANIFEST, "table": TABLE_MANIFEST, "sentence": SENTENCE_MANIFEST}


def manifest_version(manifest: Sequence[str] | str) -> str:
    """Versioned layout id, e.g. ``tendermine-features/1:page``."""
    if isinstance(manifest, str):
        kind = manifest
    else:
        kind = next((k for k, names in MANIFESTS.items() if tuple(manifest) == names), None)
        if kind is None:
            return f"unversioned:{len(manifest)}"
    return f"{LAYOUT_VERSION}:{kind}"


def aggregate(token_counts: Mapping[str, int], scored: Mapping[str, float]) -> AggregateBlock:
    """Count-weighted sum/avg/min/max of scores over words present in both maps."""
    products = []
    n_matched = 0
    for word, count in token_counts.items():
        if count > 0 and word in scored:
            products.append(count * scored[word])
            n_matched += count
    if not products:
        return AggregateBlock()
    total = sum(products)
    return AggregateBlock(total, total / n_matched, min(products), max(products))


def dictionary_view(counts: Mapping[str, int]) -> Counter:
    """Re-key fused quantity tokens ("3mg") to their unit ("mg") for dictionary lookup."""
    out: Counter = Counter()
    for word, count in counts.items():
        out[unit_suffix(word) or word] += count
    return out


@dataclass(frozen=True)
class FeatureContext:
    """Lexicon, dictionaries and language resources shared by the extractors."""

    lexicon: SpecificityLexicon
    form: WordDictionary
    measure: WordDictionary
    language: str = "en"

    def __post_init__(self):
        object.__setattr__(self, "_scores", {m: self.lexicon.scores(m) for m in METRICS})
        object.__setattr__(self, "_dict_scores", {
            "form": dict.fromkeys(self.form.words, 1.0),
            "measure": dict.fromkeys(self.measure.words, 1.0),
        })
        object.__setattr__(self, "_stopwords", language_config(self.language).stopwords)

    def bow(self, texts: Iterable[str]) -> Counter:
        stop = self._stopwords
        counts: Counter = Counter()
        for text in texts:
            counts.update(t for t in tokenize(text) if t not in stop)
        return counts

    def blocks(self, counts: Mapping[str, int]) -> list[AggregateBlock]:
        """Four lexicon blocks followed by the form and measure blocks."""
        out = [aggregate(counts, self._scores[m]) for m in METRICS]
        view = dictionary_view(counts)
        out += [aggregate(view, self._dict_scores[d]) for d in DICTIONARIES]
        return out

    def coverage(self, counts: Mapping[str, int]) -> tuple[bool, bool, bool, bool]:
        view = dictionary_view(counts)
        return (
            any(is_number_like(w) or has_digit(w) for w in counts),
            any(w in self._scores["ntf"] for w in counts),
            any(w in self.form.words for w in view),
            any(w in self.measure.words for w in view),
        )


def _flatten(blocks: Sequence[AggregateBlock]) -> list[float]:
    return [v for b in blocks for v in b.as_tuple()]


def _across_units(per_unit: Sequence[list[AggregateBlock]]) -> list[AggregateBlock]:
    """Combine per-sentence blocks: sum of sums, mean of avgs, min of mins, max of maxes."""
    if not per_unit:
        return [AggregateBlock()] * (len(METRICS) + len(DICTIONARIES))
    n = len(per_unit)
    out = []
    for k in range(len(per_unit[0])):
        col = [blocks[k] for blocks in per_unit]
        out.append(
            AggregateBlock(
                sum(b.sum for b in col),
                sum(b.avg for b in col) / n,
                min(b.min for b in col),
                max(b.max for b in col),
            )
        )
    return out


def _unit_level(ctx: FeatureContext, unit_counts: Sequence[Counter]) -> list[float]:
    """24 unit-level aggregates plus 4 coverage fractions (28 values)."""
    per_unit = [ctx.blocks(c) for c in unit_counts]
    values = _flatten(_across_units(per_unit))
    n = len(unit_counts)
    if n == 0:
        return values + [0.0] * 4
    flags = [ctx.coverage(c) for c in unit_counts]
    values += [sum(f[k] for f in flags) / n for k in range(4)]
    return values


def page_features(
    page: Page,
    ctx: FeatureContext,
    sentences: Sequence[Sentence] | None = None,
    lenient: bool = False,
) -> FeatureVector:
    if sentences is None:
        sentences = page_sentences(page, ctx.language)
    page_counts = ctx.bow(p.text for p in page.paragraphs)
    if not sentences and not page_counts:
        if not lenient:
            raise EmptyPage(f"page {page.index} has no text")
        return FeatureVector((0.0,) * len(PAGE_MANIFEST), PAGE_MANIFEST)
    values = _flatten(ctx.blocks(page_counts))
    values += _unit_level(ctx, [ctx.bow([s.text]) for s in sentences])
    return FeatureVector(tuple(values), PAGE_MANIFEST)


def table_features(table: Table, ctx: FeatureContext) -> FeatureVector:
    grid = expand_spans(table)
    flat = ctx.bow(text for row in grid for text in row)
    rows = [ctx.bow(row) for row in grid]
    cols = [ctx.bow(row[c] for row in grid) for c in range(table.n_cols)]
    values = _flatten(ctx.blocks(flat)) + _unit_level(ctx, rows) + _unit_level(ctx, cols)
    return FeatureVector(tuple(values), TABLE_MANIFEST)


def _number_word_patterns(language: str) -> list[re.Pattern]:
    pats = []
    for word in language_config(language).number_words:
        if word.endswith("."):
            stem = re.escape(word[:-1])
            pats.append(re.compile(rf"(?<!\w){stem}[.:]", re.I))
        else:
            pats.append(re.compile(rf"(?<!\w){re.escape(word)}(?!\w)", re.I))
    return pats


def sentence_flags(text: str, language: str = "en") -> tuple[int, int, int]:
    cfg = language_config(language)
    tokens = tokenize(text)
    has_lot = any(t in cfg.lot_words for t in tokens)
    has_number_word = any(p.search(text) for p in _number_word_patterns(language))
    has_number_like = any(is_number_like(t) for t in tokens)
    return int(has_lot), int(has_number_word), int(has_number_like)


def sentence_features(sentence: Sentence | str, ctx: FeatureContext) -> FeatureVector:
    text = sentence if isinstance(sentence, str) else sentence.text
    values = _flatten(ctx.blocks(ctx.bow([text])))
    values += [float(f) for f in sentence_flags(text, ctx.language)]
    return FeatureVector(tuple(values), SENTENCE_MANIFEST)


def write_feature_csv(rows: Iterable[tuple[str, str, FeatureVector]], path, label_of=None) -> None:
    """Training export: one row per (doc_id, unit_id) with optional label column."""
    rows = list(rows)
    manifest = rows[0][2].manifest if rows else ()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["doc_id", "unit_id", *manifest]
        if label_of is not None:
            header.append("label")
        writer.writerow(header)
        for doc_id, unit_id, vec in rows:
            row = [doc_id, unit_id, *(repr(v) for v in vec.values)]
            if label_of is not None:
                row.append(label_of(doc_id, unit_id))
            writer.writerow(row)


def write_manifest(kind: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{LAYOUT_VERSION}\n")
        for name in MANIFESTS[kind]:
            fh.write(f"{name}\n")

"""Domain specificity lexicon, word dictionaries and the lot/item n-gram dictionary."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Union

from .docmodel import Paragraph, split_sentences
from .text import data_word_list, iter_ngrams, language_config, read_word_list, tokenize

FIELD_NAMES = (
    "buyer_name_address",
    "notice_title",
    "short_description",
    "lot_item_descriptions",
    "contract_criteria",
)
TARGET_FIELD = "lot_item_descriptions"
METRICS = ("ntf", "ndf", "ntf_ndf", "weirdness")

PathLike = Union[str, Path]


class EmptyTargetField(ValueError):
    pass


@dataclass(frozen=True)
class FieldCorpus:
    field_name: str
    values: tuple[str, ...]

    def __post_init__(self):
        if self.field_name not in FIELD_NAMES:
            raise ValueError(f"unknown field {self.field_name!r}")


@dataclass
class BagOfWords:
    counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __contains__(self, word: str) -> bool:
        return self.counts.get(word, 0) > 0


@dataclass(frozen=True)
class ReferenceCorpusFrequencies:
    counts: Mapping[str, int]
    total: int

    def __post_init__(self):
        if self.total <= 0:
            raise ValueError("reference corpus total must be positive")

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "ReferenceCorpusFrequencies":
        return cls(dict(counts), sum(counts.values()))


@dataclass(frozen=True)
class LexiconEntry:
    ntf: float
    ndf: float
    ntf_ndf: float
    weirdness: float

    def metric(self, name: str) -> float:
        return getattr(self, name)


@dataclass(frozen=True)
class SpecificityLexicon:
    entries: Mapping[str, LexiconEntry]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def scores(self, metric: str) -> dict[str, float]:
        return {w: e.metric(metric) for w, e in self.entries.items()}

    def scaled(self, factor: float) -> "SpecificityLexicon":
        return SpecificityLexicon(
            {
                w: LexiconEntry(e.ntf * factor, e.ndf * factor, e.ntf_ndf * factor, e.weirdness * factor)
                for w, e in self.entries.items()
            }
        )

    def without_unigrams(self, min_tokens: int = 2) -> "SpecificityLexicon":
        """Drop entries shorter than ``min_tokens`` whitespace-separated tokens."""
        return SpecificityLexicon({w: e for w, e in self.entries.items() if len(w.split()) >= min_tokens})


@dataclass(frozen=True)
class WordDictionary:
    name: str
    words: frozenset[str]

    def __post_init__(self):
        if not self.words:
            raise ValueError(f"dictionary {self.name!r} is empty")

    def __contains__(self, word: str) -> bool:
        return word in self.words


@dataclass(frozen=True)
class NGramDictionary:
    entries: Mapping[tuple[str, ...], int]
    thresholds: Mapping[int, int]

    @property
    def max_n(self) -> int:
        return max((len(k) for k in self.entries), default=0)

    def __contains__(self, ngram: tuple[str, ...]) -> bool:
        return ngram in self.entries


# ---------------------------------------------------------------------------
# construction

def build_bow(values: Iterable[str], stopwords: Iterable[str] = (), language: str = "en") -> BagOfWords:
    stop = frozenset(stopwords)
    counts: Counter = Counter()
    for value in values:
        counts.update(t for t in tokenize(value) if t not in stop)
    return BagOfWords(counts)


def compute_specificity(
    field_bows: Mapping[str, BagOfWords],
    reference: ReferenceCorpusFrequencies,
    smoothing: float = 1.0,
) -> SpecificityLexicon:
    """Score every word of the lot/item BOW by ntf, ndf, ntf/ndf and weirdness.

    Weirdness compares ntf against the add-``smoothing`` relative frequency in
    the reference corpus, over the vocabulary ``reference ∪ target``.
    """
    missing = set(FIELD_NAMES) - set(field_bows)
    if missing:
        raise ValueError(f"missing field BOWs: {sorted(missing)}")
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    target = field_bows[TARGET_FIELD]
    total = target.total
    if total == 0:
        raise EmptyTargetField("lot_item_descriptions BOW is empty")

    vocab = set(reference.counts) | set(target.counts)
    ref_denominator = reference.total + smoothing * len(vocab)
    n_fields = len(FIELD_NAMES)
    entries = {}
    for word, count in target.counts.items():
        ntf = count / total
        ndf = sum(1 for name in FIELD_NAMES if word in field_bows[name]) / n_fields
        ref_rel = (reference.counts.get(word, 0) + smoothing) / ref_denominator
        if ref_rel == 0:
            raise ValueError(f"{word!r} is absent from the reference corpus and smoothing is 0")
        entries[word] = LexiconEntry(ntf, ndf, ntf / ndf, ntf / ref_rel)
    return SpecificityLexicon(entries)


def build_lexicon(
    corpora: Iterable[FieldCorpus],
    reference: ReferenceCorpusFrequencies,
    language: str = "en",
    smoothing: float = 1.0,
) -> SpecificityLexicon:
    corpora = list(corpora)
    if sorted(c.field_name for c in corpora) != sorted(FIELD_NAMES):
        raise ValueError("exactly one corpus per field is required")
    stop = language_config(language).stopwords
    bows = {c.field_name: build_bow(c.values, stop, language) for c in corpora}
    return compute_specificity(bows, reference, smoothing)


DEFAULT_NGRAM_THRESHOLDS = {1: 20, 2: 5, 3: 3, 4: 3, 5: 3}


def build_ngram_dictionary(
    values: Iterable[str],
    n_max: int = 5,
    thresholds: Mapping[int, int] | None = None,
    language: str = "en",
) -> NGramDictionary:
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    thresholds = dict(thresholds or {n: DEFAULT_NGRAM_THRESHOLDS.get(n, 3) for n in range(1, n_max + 1)})
    undefined = [n for n in range(1, n_max + 1) if n not in thresholds]
    if undefined:
        raise ValueError(f"no threshold for n in {undefined}")
    counts: Counter = Counter()
    for value in values:
        for sentence in split_sentences(Paragraph(value), language):
            tokens = tokenize(sentence.text)
            for n in range(1, n_max + 1):
                counts.update(iter_ngrams(tokens, n))
    kept = {g: c for g, c in counts.items() if c >= thresholds[len(g)]}
    return NGramDictionary(kept, thresholds)


# ---------------------------------------------------------------------------
# file formats

def save_lexicon(lexicon: SpecificityLexicon, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("word\tntf\tndf\tntf_ndf\tweirdness\n")
        for word in sorted(lexicon.entries):
            e = lexicon.entries[word]
            fh.write(f"{word}\t{e.ntf:.6f}\t{e.ndf:.6f}\t{e.ntf_ndf:.6f}\t{e.weirdness:.6f}\n")


def load_lexicon(path: PathLike) -> SpecificityLexicon:
    entries = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader)
        if header != ["word", *METRICS]:
            raise ValueError(f"{path}: unexpected lexicon header {header}")
        for row in reader:
            entries[row[0]] = LexiconEntry(*(float(v) for v in row[1:]))
    return SpecificityLexicon(entries)


def load_reference(path: PathLike) -> ReferenceCorpusFrequencies:
    """Word-frequency table, one ``word<TAB>count`` per line."""
    counts: Counter = Counter()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            word, count = line.split("\t")
            counts[word.lower()] += int(count)
    return ReferenceCorpusFrequencies.from_counts(counts)


def save_reference(reference: ReferenceCorpusFrequencies, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(reference.counts):
            fh.write(f"{word}\t{reference.counts[word]}\n")


def load_dictionary(path: PathLike, name: str | None = None) -> WordDictionary:
    words = read_word_list(Path(path).read_text(encoding="utf-8"))
    return WordDictionary(name or Path(path).stem, frozenset(words))


def save_dictionary(dictionary: WordDictionary, path: PathLike) -> None:
    Path(path).write_text("".join(f"{w}\n" for w in sorted(dictionary.words)), encoding="utf-8")


def default_dictionary(name: str, language: str = "en") -> WordDictionary:
    """Bundled form or measure dictionary."""
    if name not in ("form", "measure"):
        raise ValueError(name)
    return WordDictionary(name, frozenset(data_word_list(f"{name}_{language}.txt")))


def save_ngram_dictionary(ngrams: NGramDictionary, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for gram in sorted(ngrams.entries, key=lambda g: (len(g), g)):
            fh.write(f"{' '.join(gram)}\t{len(gram)}\t{ngrams.entries[gram]}\n")


def load_ngram_dictionary(path: PathLike) -> NGramDictionary:
    entries = {}
    thresholds: dict[int, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            text, n, freq = line.split("\t")
            gram = tuple(text.split(" "))
            if len(gram) != int(n):
                raise ValueError(f"{path}: n-gram {text!r} does not have {n} tokens")
            entries[gram] = int(freq)
            thresholds[len(gram)] = min(thresholds.get(len(gram), int(freq)), int(freq))
    return NGramDictionary(entries, thresholds)

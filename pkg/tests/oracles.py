"""Independent, deliberately naive recomputations used as test oracles."""

from __future__ import annotations

import math
import re

from tendermine.lexicon import FIELD_NAMES, TARGET_FIELD, FieldCorpus
from tendermine.text import language_config, tokenize

METRICS = ("ntf", "ndf", "ntf_ndf", "weirdness")
_FUSED = re.compile(r"^\d+(?:[.,]\d+)*([a-zµμ]+)$")


def word_list(texts, language="en"):
    stop = language_config(language).stopwords
    words = []
    for text in texts:
        for t in tokenize(text):
            if t not in stop:
                words.append(t)
    return words


def block(words, score):
    """sum, avg, min, max of count * score over distinct scored words."""
    distinct = []
    for w in words:
        if w in score and w not in distinct:
            distinct.append(w)
    if not distinct:
        return [0.0, 0.0, 0.0, 0.0]
    products = []
    matched = 0
    for w in distinct:
        c = 0
        for x in words:
            if x == w:
                c += 1
        products.append(c * score[w])
        matched += c
    total = 0.0
    for p in products:
        total += p
    return [total, total / matched, min(products), max(products)]


def dict_words(words):
    out = []
    for w in words:
        m = _FUSED.match(w)
        out.append(m.group(1) if m else w)
    return out


def blocks(words, lexicon, form, measure):
    out = []
    for m in METRICS:
        out += block(words, {w: getattr(e, m) for w, e in lexicon.entries.items()})
    view = dict_words(words)
    out += block(view, {w: 1.0 for w in form})
    out += block(view, {w: 1.0 for w in measure})
    return out


def unit_level(units, lexicon, form, measure):
    if not units:
        return [0.0] * 28
    per = [blocks(u, lexicon, form, measure) for u in units]
    out = []
    for k in range(0, 24, 4):
        sums = [p[k] for p in per]
        avgs = [p[k + 1] for p in per]
        mins = [p[k + 2] for p in per]
        maxs = [p[k + 3] for p in per]
        out += [math.fsum(sums), math.fsum(avgs) / len(per), min(mins), max(maxs)]
    n = len(units)
    num = lex = frm = mea = 0
    for u in units:
        view = dict_words(u)
        num += any(any(ch.isdigit() for ch in w) or _roman_or_number(w) for w in u)
        lex += any(w in lexicon.entries for w in u)
        frm += any(w in form for w in view)
        mea += any(w in measure for w in view)
    return out + [num / n, lex / n, frm / n, mea / n]


def _roman_or_number(w):
    # valid for the test vocabularies, whose only letter-only numerals are small romans
    return w in ("ii", "iv", "xii")


def page_vector(paragraph_texts, sentence_texts, lexicon, form, measure, language="en"):
    return blocks(word_list(paragraph_texts, language), lexicon, form, measure) + unit_level(
        [word_list([s], language) for s in sentence_texts], lexicon, form, measure
    )


def table_vector(grid, lexicon, form, measure, language="en"):
    flat = word_list([c for row in grid for c in row], language)
    rows = [word_list(row, language) for row in grid]
    cols = [word_list([row[c] for row in grid], language) for c in range(len(grid[0]))] if grid else []
    return blocks(flat, lexicon, form, measure) + unit_level(rows, lexicon, form, measure) + unit_level(cols, lexicon, form, measure)


def interval_union(intervals):
    """Repeatedly merge any two overlapping or touching half-open intervals until none remain."""
    spans = [list(iv) for iv in intervals]
    changed = True
    while changed:
        changed = False
        for i in range(len(spans)):
            for j in range(i + 1, len(spans)):
                a, b = spans[i], spans[j]
                if a[0] <= b[1] and b[0] <= a[1]:
                    spans[i] = [min(a[0], b[0]), max(a[1], b[1])]
                    del spans[j]
                    changed = True
                    break
            if changed:
                break
    return sorted(tuple(s) for s in spans)


def population_z(values, target):
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return (target - mean) / math.sqrt(var)


# ---------------------------------------------------------------------------
# random inputs for the feature oracle

VOCAB = (
    "atropine", "sulfate", "solution", "ciprofloxacin", "tablets", "syringe", "capsules", "infusion",
    "price", "quality", "authority", "contract", "lot", "no", "the", "of", "for", "ii", "iv", "xii",
    "3mg", "10ml", "100mg", "250", "7.500", "1.1", "mg", "ml", "bags", "supply",
)
FORM_WORDS = frozenset({"tablets", "syringe", "capsules", "bags"})
MEASURE_WORDS = frozenset({"mg", "ml"})


def random_lexicon(rng):
    from tendermine.lexicon import LexiconEntry, SpecificityLexicon

    words = rng.sample(VOCAB, rng.randint(0, 15))
    return SpecificityLexicon(
        {w: LexiconEntry(rng.random(), rng.choice((0.2, 0.4, 0.6, 0.8, 1.0)), rng.random() * 5, rng.random() * 50) for w in words}
    )


def random_sentence(rng, max_words=8):
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(0, max_words)))


# ---------------------------------------------------------------------------
# specificity lexicon

WORDS = [f"w{i}" for i in range(40)]


def random_corpora(rng, n_values=200):
    per_field = n_values // len(FIELD_NAMES)
    return [
        FieldCorpus(name, tuple(" ".join(rng.choices(WORDS, k=rng.randint(1, 6))) for _ in range(per_field)))
        for name in FIELD_NAMES
    ]


def brute_force(corpora, ref_counts, smoothing):
    """Naive loops over raw values."""
    fields = {c.field_name: c.values for c in corpora}
    target_words = [t for v in fields[TARGET_FIELD] for t in tokenize(v)]
    vocab = set(ref_counts) | set(target_words)
    ref_total = sum(ref_counts.values())
    out = {}
    for w in set(target_words):
        count = 0
        for t in target_words:
            if t == w:
                count += 1
        ntf = count / len(target_words)
        present = 0
        for name in FIELD_NAMES:
            found = False
            for v in fields[name]:
                if w in tokenize(v):
                    found = True
            present += found
        ndf = present / 5
        rel = (ref_counts.get(w, 0) + smoothing) / (ref_total + smoothing * len(vocab))
        out[w] = (ntf, ndf, ntf / ndf, ntf / rel)
    return out

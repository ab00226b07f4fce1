from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from tendermine.classify import save_model
from tendermine.docmodel import document_from_csv, document_from_text
from tendermine.lexicon import build_lexicon, load_ngram_dictionary, save_lexicon
from tendermine.pipeline import PipelineConfig, PipelineGold, build_context, corpus_documents, parser_for, train_models
from tendermine.synth import field_corpora, synth_corpus, synth_reference

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def figure3_doc():
    return document_from_text((FIXTURES / "figure3_page.txt").read_text(encoding="utf-8"), "fig3")


@pytest.fixture(scope="session")
def figure2_doc():
    return document_from_csv(FIXTURES / "figure2_table.csv", "fig2", tender_id="2019-S-180-437985")


@pytest.fixture(scope="session")
def corpus():
    return synth_corpus(1, 60)


@pytest.fixture(scope="session")
def ctx(corpus):
    return build_context(build_lexicon(field_corpora(corpus), synth_reference(1)))


@pytest.fixture(scope="session")
def models(corpus, ctx):
    return train_models(corpus_documents(corpus), PipelineGold.from_tenders(corpus), ctx, "random_forest", 0)


@pytest.fixture(scope="session")
def fixture_ngrams():
    return load_ngram_dictionary(FIXTURES / "ngrams.tsv")


@pytest.fixture(scope="session")
def parser(ctx, fixture_ngrams):
    return parser_for(ctx, fixture_ngrams)


@pytest.fixture(scope="session")
def config_dir(tmp_path_factory, ctx, models):
    """Lexicon, models, n-grams and a config.json on disk, as the CLI expects them."""
    out = tmp_path_factory.mktemp("config")
    save_lexicon(ctx.lexicon, out / "lexicon.tsv")
    for kind, model in models.items():
        save_model(model, out / f"{kind}_model.json")
    shutil.copy(FIXTURES / "ngrams.tsv", out / "ngrams.tsv")
    config = {
        "lexicon": "lexicon.tsv",
        "page_model": "page_model.json",
        "table_model": "table_model.json",
        "sentence_model": "sentence_model.json",
        "ngrams": "ngrams.tsv",
    }
    (out / "config.json").write_text(json.dumps(config), encoding="utf-8")
    return out


@pytest.fixture(scope="session")
def pipeline_config(config_dir):
    return PipelineConfig.load(config_dir / "config.json")

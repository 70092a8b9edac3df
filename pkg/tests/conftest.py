from __future__ import annotations

from pathlib import Path

import pytest

from emagent.corpus import chunk_documents, load_corpus
from emagent.efrec import load_ef_records
from emagent.inventory import build_registry, load_inventory
from emagent.providers import ProviderConfig
from emagent.retrieval import build_index

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def stub_provider() -> ProviderConfig:
    return ProviderConfig()


@pytest.fixture
def corpus_docs():
    return load_corpus(FIXTURES / "corpus.jsonl")


@pytest.fixture
def corpus_chunks(corpus_docs):
    return chunk_documents(corpus_docs)


@pytest.fixture
def corpus_index(corpus_chunks, stub_provider):
    return build_index(corpus_chunks, stub_provider)


@pytest.fixture
def inventory_store():
    return load_inventory(FIXTURES / "inventory.csv")


@pytest.fixture
def registry():
    return build_registry()


@pytest.fixture
def guideline_db():
    return load_ef_records(FIXTURES / "guidelines.jsonl")


@pytest.fixture
def literature_db():
    return load_ef_records(FIXTURES / "literature.jsonl")

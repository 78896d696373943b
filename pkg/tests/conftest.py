import json
from pathlib import Path

import pytest

from fdkit.alignment import load_alignments, seneca_batch
from fdkit.store import ingest_files

FIXTURE_DIR = Path(__file__).parent / "fixtures" / "mini"


@pytest.fixture(scope="session")
def mini_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture(scope="session")
def manifest():
    return json.loads((FIXTURE_DIR / "manifest.json").read_text())


@pytest.fixture(scope="session")
def mini_store():
    store, stats = ingest_files([FIXTURE_DIR / "entities.nt",
                                 FIXTURE_DIR / "aux_links.nt.gz"])
    return store


@pytest.fixture(scope="session")
def mini_graph():
    return load_alignments([FIXTURE_DIR / "align.tsv"])


@pytest.fixture(scope="session")
def mini_verdicts(mini_store, mini_graph):
    return seneca_batch(mini_store, mini_graph)

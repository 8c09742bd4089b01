import math
import sys

import pytest

from textnet.corpus import Document, bundled_path, load_corpus, normalize_corpus

TOY_STOPWORDS = {"the", "and"}

# reference toy tf-idf table, keyed by the displayed term
TOY_TABLE = {
    "did": (0.264, 0.000, 0.000),
    "image": (0.000, 0.000, 0.264),
    "match": (0.264, 0.000, 0.000),
    "mismatch": (0.000, 0.176, 0.000),
    "monitor": (0.000, 0.000, 0.264),
    "not": (0.097, 0.000, 0.097),
    "patient": (0.097, None, 0.000),  # Doc2 cell is a misprint: that report lacks the word
    "schedule": (0.097, 0.130, 0.000),
    "script": (0.097, 0.130, 0.000),
    "state": (0.000, 0.176, 0.000),
    "vasculab": (0.000, 0.176, 0.000),
    "will": (0.000, 0.000, 0.264),
    "xray": (0.000, 0.065, 0.097),
}


@pytest.fixture
def toy_docs():
    return normalize_corpus(load_corpus(bundled_path("toy_corpus.jsonl")), stopwords=TOY_STOPWORDS)


@pytest.fixture
def toy_docs_with_patient():
    """The toy reports with "patient" added to the second one, which the table's numbers imply."""
    raw = load_corpus(bundled_path("toy_corpus.jsonl"))
    raw[1] = Document(raw[1].id, raw[1].raw_text.replace("Script stated", "Script stated patient"))
    return normalize_corpus(raw, stopwords=TOY_STOPWORDS)


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

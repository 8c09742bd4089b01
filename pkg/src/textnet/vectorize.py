"""Sparse tf-idf term-document matrix.

Term frequency is length-normalized over a document's post-stopword,
post-stemming tokens; inverse document frequency uses a base-2 logarithm.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from .corpus import Document


class EmptyDocumentError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]  # stems, column ordinal = position
    display: tuple[str, ...]
    doc_freq: tuple[int, ...]

    def __len__(self):
        return len(self.terms)

    @cached_property
    def _lookup(self):
        return {t: i for i, t in enumerate(self.terms)}

    def index(self, stem: str) -> int:
        return self._lookup[stem]

    def to_json(self) -> dict:
        return {"terms": list(self.terms), "display": list(self.display), "doc_freq": list(self.doc_freq)}

    @classmethod
    def from_json(cls, rec: dict) -> "Vocabulary":
        return cls(tuple(rec["terms"]), tuple(rec["display"]), tuple(rec["doc_freq"]))


@dataclass(frozen=True)
class TermDocMatrix:
    """``m x n`` tf-idf weights, stored column-major (one column per document)."""

    X: sp.csc_matrix
    vocabulary: Vocabulary
    doc_ids: tuple[str, ...]

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def entry(self, stem: str, doc_id: str) -> float:
        return float(self.X[self.vocabulary.index(stem), self.doc_ids.index(doc_id)])

    def dense_table(self) -> list[tuple[str, list[float]]]:
        dense = self.X.toarray()
        return [(self.vocabulary.display[i], dense[i].tolist()) for i in range(self.m)]


def term_frequency(term: str, doc: Document) -> float:
    """Share of ``doc.tokens`` equal to ``term``."""
    if not doc.tokens:
        raise EmptyDocumentError("empty document")
    return doc.tokens.count(term) / len(doc.tokens)


def inverse_document_frequency(term: str, corpus: Sequence[Document]) -> float:
    df = sum(1 for d in corpus if term in d.tokens)
    if df == 0:
        raise KeyError("term not in corpus")
    return math.log2(len(corpus) / df)


def build_tfidf_matrix(corpus: Sequence[Document], min_df: int = 1) -> TermDocMatrix:
    """Build the tf-idf matrix; terms are ordered alphabetically by stem.

    Terms occurring in every document get idf 0 and therefore no stored
    entries, though they keep their row.
    """
    empty = [d.id for d in corpus if not d.tokens]
    if empty:
        raise EmptyDocumentError(f"empty document(s): {', '.join(empty)}")
    counts = [Counter(d.tokens) for d in corpus]
    df = Counter()
    for c in counts:
        df.update(c.keys())
    terms = sorted(t for t, f in df.items() if f >= min_df)
    index = {t: i for i, t in enumerate(terms)}

    display = {}
    for d in corpus:
        for t in d.tokens:
            form = d.surface.get(t, t)
            best = display.get(t)
            if best is None or (len(form), form) < (len(best), best):
                display[t] = form

    n = len(corpus)
    idf = np.array([math.log2(n / df[t]) for t in terms])
    rows, cols, vals = [], [], []
    for j, (d, c) in enumerate(zip(corpus, counts)):
        length = len(d.tokens)
        for t, f in sorted(c.items()):
            i = index.get(t)
            if i is None or idf[i] == 0.0:
                continue
            rows.append(i)
            cols.append(j)
            vals.append(f / length * idf[i])
    X = sp.csc_matrix((vals, (rows, cols)), shape=(len(terms), n), dtype=np.float64)
    X.sort_indices()
    vocab = Vocabulary(
        terms=tuple(terms),
        display=tuple(display[t] for t in terms),
        doc_freq=tuple(df[t] for t in terms),
    )
    return TermDocMatrix(X=X, vocabulary=vocab, doc_ids=tuple(d.id for d in corpus))


def write_matrix_market(tdm: TermDocMatrix, path: str | Path) -> None:
    scipy.io.mmwrite(str(path), tdm.X.tocoo(), comment="tf-idf term-document matrix", precision=17)


def write_table_csv(tdm: TermDocMatrix, path: str | Path) -> None:
    """Dense terms-by-documents view with 3-decimal weights; small corpora only."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", *tdm.doc_ids])
        for term, row in sorted(tdm.dense_table()):
            w.writerow([term, *(f"{v:.3f}" for v in row)])


def save(tdm: TermDocMatrix, directory: str | Path) -> None:
    directory = Path(directory)
    write_matrix_market(tdm, directory / "tfidf.mtx")
    meta = {"doc_ids": list(tdm.doc_ids), "vocabulary": tdm.vocabulary.to_json()}
    (directory / "vocabulary.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")


def load(directory: str | Path) -> TermDocMatrix:
    directory = Path(directory)
    X = sp.csc_matrix(scipy.io.mmread(str(directory / "tfidf.mtx")))
    X.sort_indices()
    meta = json.loads((directory / "vocabulary.json").read_text(encoding="utf-8"))
    return TermDocMatrix(X=X, vocabulary=Vocabulary.from_json(meta["vocabulary"]), doc_ids=tuple(meta["doc_ids"]))

"""Corpus loading and text normalization.

Raw narratives are lowercased, corrected with a spelling dictionary, have
dates, doses and clock times replaced by the literal words ``date``, ``dose``
and ``time``, and are stripped of digits and special characters (periods are
kept). Tokens are then split, filtered against a stopword list and stemmed.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .porter import stem

DEFAULT_STOPWORDS = frozenset({"the", "and", "a", "an", "of", "to"})


class CorpusError(ValueError):
    """Raised for malformed corpus, dictionary or stopword files."""


@dataclass(frozen=True)
class Document:
    id: str
    raw_text: str
    tokens: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()
    # stem -> shortest surface word, only where it differs from the stem
    surface: Mapping[str, str] = field(default_factory=dict, compare=False, repr=False)

    def to_json(self) -> dict:
        rec = {"id": self.id, "text": self.raw_text, "tokens": list(self.tokens)}
        if self.tags:
            rec["tags"] = list(self.tags)
        if self.surface:
            rec["surface"] = dict(sorted(self.surface.items()))
        return rec

    @classmethod
    def from_json(cls, rec: dict) -> "Document":
        return cls(
            id=rec["id"],
            raw_text=rec["text"],
            tokens=tuple(rec.get("tokens", ())),
            tags=tuple(rec.get("tags", ())),
            surface=dict(rec.get("surface", {})),
        )


class SpellingDictionary(dict):
    """Map of misspelled word -> correction.

    Keys and values are lowercase; no key maps to itself, and no correction
    is itself a key (chains would make normalization order dependent).
    """

    def __init__(self, entries: Mapping[str, str] | Iterable[tuple[str, str]] = ()):
        super().__init__()
        items = entries.items() if isinstance(entries, Mapping) else entries
        for wrong, right in items:
            wrong, right = wrong.strip(), right.strip()
            if not wrong or not right:
                raise CorpusError(f"empty spelling entry {wrong!r} -> {right!r}")
            if wrong != wrong.lower() or right != right.lower():
                raise CorpusError(f"spelling entry must be lowercase: {wrong!r} -> {right!r}")
            if wrong == right:
                raise CorpusError(f"spelling entry maps to itself: {wrong!r}")
            self[wrong] = right
        chained = sorted(set(self) & set(self.values()))
        if chained:
            raise CorpusError(f"corrections that are also keys: {', '.join(chained)}")
        self._pattern = None

    def pattern(self) -> re.Pattern | None:
        if self._pattern is None and self:
            alts = "|".join(re.escape(k) for k in sorted(self, key=lambda k: (-len(k), k)))
            self._pattern = re.compile(rf"(?<![a-z0-9])(?:{alts})(?![a-z0-9])")
        return self._pattern

    def apply(self, text: str) -> str:
        pat = self.pattern()
        if pat is None:
            return text
        return pat.sub(lambda m: self[m.group(0)], text)


def load_spelling_dictionary(path: str | Path) -> SpellingDictionary:
    """Read a two-column ``wrong,right`` CSV; a header row is optional."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise CorpusError(f"{path}: line {lineno}: expected 2 columns, got {len(row)}")
            if lineno == 1 and [c.strip().lower() for c in row] == ["wrong", "right"]:
                continue
            rows.append((row[0].lower(), row[1].lower()))
    return SpellingDictionary(rows)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """One token per line; blank lines and ``#`` comments are ignored."""
    if path is None:
        return DEFAULT_STOPWORDS
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip().lower()
            if line:
                words.add(line)
    return frozenset(words)


def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    if suffix == ".csv":
        return "csv"
    raise CorpusError(f"cannot infer corpus format from {path.name!r}; pass format='jsonl' or 'csv'")


def _check_record(rec, where):
    if not isinstance(rec, dict):
        raise CorpusError(f"{where}: expected an object")
    doc_id = rec.get("id")
    text = rec.get("text")
    if doc_id is None or str(doc_id).strip() == "":
        raise CorpusError(f"{where}: missing or empty 'id'")
    if not isinstance(text, str):
        raise CorpusError(f"{where}: missing 'text' field")
    tags = rec.get("tags", [])
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise CorpusError(f"{where}: 'tags' must be an array of strings")
    return str(doc_id), text, tuple(tags)


def load_corpus(path: str | Path, format: str | None = None) -> list[Document]:
    """Load documents from JSON-lines or ``id,text`` CSV, preserving order.

    Tokens are left empty; see :func:`normalize_corpus`.
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    docs: list[Document] = []
    seen: set[str] = set()

    def add(doc_id, text, tags):
        if doc_id in seen:
            raise CorpusError(f"duplicate id {doc_id}")
        seen.add(doc_id)
        docs.append(Document(id=doc_id, raw_text=text, tags=tags))

    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "jsonl":
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from None
                add(*_check_record(rec, f"{path}: line {lineno}"))
        elif fmt == "csv":
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return docs
            if [h.strip().lower() for h in header[:2]] != ["id", "text"] or len(header) != 2:
                raise CorpusError(f"{path}: CSV header must be 'id,text'")
            for recno, row in enumerate(reader, start=1):
                if not row:
                    continue
                if len(row) != 2:
                    raise CorpusError(f"{path}: record {recno}: expected 2 fields, got {len(row)}")
                add(*_check_record({"id": row[0], "text": row[1]}, f"{path}: record {recno}"))
        else:
            raise CorpusError(f"unknown corpus format {fmt!r}")
    return docs


@dataclass(frozen=True)
class _Pattern:
    name: str
    replacement: str
    regex: re.Pattern


@lru_cache(maxsize=None)
def load_patterns(path: str | None = None) -> tuple[str, tuple[_Pattern, ...]]:
    """Return ``(version, patterns)`` from a date/dose/time pattern file."""
    if path is None:
        raw = resources.files("textnet").joinpath("data/patterns.json").read_text(encoding="utf-8")
    else:
        raw = Path(path).read_text(encoding="utf-8")
    spec = json.loads(raw)
    head, tail = spec.get("boundary", ""), spec.get("end_boundary", "")
    pats = tuple(
        _Pattern(p["name"], p["replacement"], re.compile(head + p["regex"] + tail))
        for p in spec["patterns"]
    )
    return spec["version"], pats


def replace_entities(text: str, patterns: tuple[_Pattern, ...] | None = None) -> str:
    """Replace date, dose and time mentions; overlapping candidates resolve longest first."""
    if patterns is None:
        patterns = load_patterns()[1]
    spans = []
    for order, pat in enumerate(patterns):
        for m in pat.regex.finditer(text):
            spans.append((m.start(), -(m.end() - m.start()), order, m.end(), pat.replacement))
    if not spans:
        return text
    spans.sort()
    out, pos = [], 0
    for start, _, _, end, repl in spans:
        if start < pos:
            continue
        out.append(text[pos:start])
        out.append(repl)
        pos = end
    out.append(text[pos:])
    return "".join(out)


_DIGITS = re.compile(r"\d")
_SPECIAL = re.compile(r"[^a-z\s.]")
_SPACE = re.compile(r"\s+")


def normalize_text(raw: str, dictionary: SpellingDictionary | None = None) -> str:
    """Lowercase, correct spelling, replace dates/doses/times, drop digits and specials.

    >>> normalize_text("On Dec. 13 at 5PM resident was prescribed 2mc/mg of oxycotine")
    'on date at time resident was prescribed dose of oxycotine'
    """
    dictionary = dictionary or SpellingDictionary()
    text = raw.lower()
    text = dictionary.apply(text)
    text = replace_entities(text)
    text = _DIGITS.sub("", text)
    text = _SPECIAL.sub("", text)
    # removing characters can expose new whole-word misspellings ("pat1ent")
    text = dictionary.apply(text)
    return _SPACE.sub(" ", text).strip()


_SPLIT = re.compile(r"[\s.]+")


def tokenize_and_stem(normalized: str, stopwords: Iterable[str] = DEFAULT_STOPWORDS) -> list[str]:
    """Split normalized text, drop stopwords and Porter-stem what is left."""
    return [s for _, s in _stem_pairs(normalized, frozenset(stopwords))]


def _stem_pairs(normalized, stopwords):
    pairs = []
    for tok in _SPLIT.split(normalized):
        if not tok or tok in stopwords or not tok.isalpha() or not tok.isascii():
            continue
        s = stem(tok)
        if s and s not in stopwords:
            pairs.append((tok, s))
    return pairs


def normalize_document(
    doc: Document,
    dictionary: SpellingDictionary | None = None,
    stopwords: Iterable[str] = DEFAULT_STOPWORDS,
) -> Document:
    pairs = _stem_pairs(normalize_text(doc.raw_text, dictionary), frozenset(stopwords))
    surface: dict[str, str] = {}
    for tok, s in pairs:
        best = surface.get(s, s if tok == s else None)
        if best is None or (len(tok), tok) < (len(best), best):
            surface[s] = tok
    surface = {s: tok for s, tok in surface.items() if tok != s}
    return replace(doc, tokens=tuple(s for _, s in pairs), surface=surface)


def normalize_corpus(
    docs: Iterable[Document],
    dictionary: SpellingDictionary | None = None,
    stopwords: Iterable[str] = DEFAULT_STOPWORDS,
) -> list[Document]:
    stopwords = frozenset(stopwords)
    return [normalize_document(d, dictionary, stopwords) for d in docs]


def bundled_path(name: str) -> Path:
    """Filesystem path of a file shipped in ``textnet/data``."""
    return Path(str(resources.files("textnet").joinpath("data/" + name)))

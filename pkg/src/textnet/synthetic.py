"""Synthetic report corpora with planted topics.

Each topic owns a private vocabulary of pronounceable pseudo-words; every
document mixes words from its topic with words from a shared pool, plus
the odd date, dose or clock time so the normalizer has something to do.
Background documents draw only from the shared pool and are tagged
``misc``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

_ONSETS = ["b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "cl", "dr", "gr", "pl", "st", "tr"]
_VOWELS = ["a", "e", "i", "o", "u"]
_CODAS = ["", "n", "r", "l", "m", "x", "k", "nd", "st"]

_FILLERS = [
    "Reported on {date}.",
    "Noted at {time}.",
    "Given {dose} as ordered.",
    "Follow up on {date} at {time}.",
]
_DATES = ["Dec. 13", "12/03/2019", "Jan 5th, 2020", "2019-11-02", "3 March"]
_TIMES = ["5PM", "10:30", "7 a.m.", "0800 hrs", "11:15 pm"]
_DOSES = ["2mg", "5 ml", "2.5mg/ml", "10 units", "500mcg"]


def _vocabulary(rng, size, taken):
    words = []
    while len(words) < size:
        n_syl = rng.integers(2, 4)
        w = "".join(
            _ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
            for _ in range(n_syl)
        ) + _CODAS[rng.integers(len(_CODAS))]
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


def _zipf_weights(size, s=1.0):
    w = 1.0 / np.arange(1, size + 1) ** s
    return w / w.sum()


def generate_corpus(
    n_docs: int = 500,
    n_topics: int = 8,
    seed: int = 0,
    background_fraction: float = 0.0,
    topic_vocab: int = 40,
    shared_vocab: int = 200,
    topic_share: float = 0.6,
    length: tuple[int, int] = (15, 30),
) -> list[dict]:
    """Return JSON-lines style records ``{"id", "text", "tags"}``."""
    rng = np.random.default_rng(seed)
    taken: set[str] = set()
    shared = _vocabulary(rng, shared_vocab, taken)
    topics = [_vocabulary(rng, topic_vocab, taken) for _ in range(n_topics)]
    p_shared = _zipf_weights(shared_vocab)
    p_topic = _zipf_weights(topic_vocab, 0.7)

    n_background = int(round(n_docs * background_fraction))
    labels = [f"t{i % n_topics}" for i in range(n_docs - n_background)] + ["misc"] * n_background
    labels = [labels[i] for i in rng.permutation(n_docs)]
    width = len(str(n_docs - 1))
    records = []
    for i, lab in enumerate(labels):
        length_i = int(rng.integers(length[0], length[1] + 1))
        share = 0.0 if lab == "misc" else topic_share
        words = []
        for _ in range(length_i):
            if rng.random() < share:
                vocab = topics[int(lab[1:])]
                words.append(vocab[rng.choice(topic_vocab, p=p_topic)])
            else:
                words.append(shared[rng.choice(shared_vocab, p=p_shared)])
        text = " ".join(words).capitalize() + "."
        if rng.random() < 0.3:
            filler = _FILLERS[rng.integers(len(_FILLERS))]
            text += " " + filler.format(
                date=_DATES[rng.integers(len(_DATES))],
                time=_TIMES[rng.integers(len(_TIMES))],
                dose=_DOSES[rng.integers(len(_DOSES))],
            )
        records.append({"id": f"r{i:0{width}d}", "text": text, "tags": [lab]})
    return records


def write_corpus(records, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")

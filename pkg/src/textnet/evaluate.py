"""Quality measures for document groupings, plus a planted-community generator."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .simgraph import SimilarityGraph

log = logging.getLogger(__name__)

MISC = "misc"


@dataclass(frozen=True)
class GroupCorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray  # g x g; NaN diagonal for groups of one
    sizes: tuple[int, ...]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group", *self.labels])
            for lab, row in zip(self.labels, self.values):
                w.writerow([lab, *("" if np.isnan(v) else repr(float(v)) for v in row)])


def _matrix(g):
    return g.adjacency if isinstance(g, SimilarityGraph) else np.asarray(g, dtype=np.float64)


def _label_order(labels):
    # numeric suffixes sort naturally (c2 before c10)
    def key(lab):
        head = lab.rstrip("0123456789")
        tail = lab[len(head):]
        return (head, int(tail) if tail else -1, lab)

    return sorted(set(labels), key=key)


def group_correlation(
    g,
    grouping: Mapping[str, str],
    node_ids: Sequence[str] | None = None,
    exclude: Sequence[str] = (),
) -> GroupCorrelationMatrix:
    """Mean pairwise weight between and within groups, excluding self pairs.

    ``g`` is a :class:`SimilarityGraph` or a raw square matrix, in which case
    ``node_ids`` gives its row order. Groups named in ``exclude`` are dropped.
    """
    C = _matrix(g)
    ids = g.node_ids if isinstance(g, SimilarityGraph) else tuple(node_ids)
    missing = [d for d in ids if d not in grouping]
    if missing:
        raise KeyError(f"unlabeled node(s): {', '.join(missing[:5])}")
    labs = [grouping[d] for d in ids]
    order = [lab for lab in _label_order(labs) if lab not in set(exclude)]
    if not order:
        raise ValueError("no groups to compare")
    pos = {lab: i for i, lab in enumerate(order)}
    G = np.zeros((len(ids), len(order)))
    for r, lab in enumerate(labs):
        if lab in pos:
            G[r, pos[lab]] = 1.0
    sizes = G.sum(axis=0)
    Cz = C.copy()
    np.fill_diagonal(Cz, 0.0)
    sums = G.T @ Cz @ G
    pairs = np.outer(sizes, sizes) - np.diag(sizes)
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = sums / pairs
    vals[pairs == 0] = np.nan
    return GroupCorrelationMatrix(labels=tuple(order), values=vals, sizes=tuple(int(s) for s in sizes))


def heterophily_fraction(gcm: GroupCorrelationMatrix, exclude: Sequence[str] = (MISC,)) -> dict[str, float]:
    """Per group: share of other groups whose cross value is at least the group's own.

    Groups without a defined diagonal are skipped with a warning.
    """
    keep = [i for i, lab in enumerate(gcm.labels) if lab not in set(exclude)]
    if len(keep) < 2:
        raise ValueError("need at least two groups")
    V = gcm.values[np.ix_(keep, keep)]
    out = {}
    for col, i in enumerate(keep):
        lab = gcm.labels[i]
        diag = V[col, col]
        if np.isnan(diag):
            log.warning("group %s has fewer than two members; skipped", lab)
            continue
        others = np.delete(V[:, col], col)
        others = others[~np.isnan(others)]
        out[lab] = float(np.count_nonzero(others >= diag) / (len(keep) - 1))
    return out


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(u: Mapping[str, str], v: Mapping[str, str], average: str = "arithmetic") -> float:
    """Normalized mutual information between two labelings of the same ids.

    ``average`` picks the normalizer: arithmetic, geometric, min or max of
    the two entropies.
    """
    if set(u) != set(v):
        diff = sorted(set(u) ^ set(v))
        raise KeyError(f"labelings cover different ids: {', '.join(map(str, diff[:10]))}")
    ids = sorted(u)
    if not ids:
        raise ValueError("empty labelings")
    _, a = np.unique([str(u[i]) for i in ids], return_inverse=True)
    _, b = np.unique([str(v[i]) for i in ids], return_inverse=True)
    table = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(table, (a, b), 1.0)
    hu, hv = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if hu == 0.0 and hv == 0.0:
        return 1.0
    if hu == 0.0 or hv == 0.0:
        return 0.0
    n = table.sum()
    nz = table > 0
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))
    mi = float((table[nz] / n * np.log(table[nz] * n / outer[nz])).sum())
    norm = {
        "arithmetic": (hu + hv) / 2,
        "geometric": np.sqrt(hu * hv),
        "min": min(hu, hv),
        "max": max(hu, hv),
    }[average]
    return float(min(1.0, max(0.0, mi / norm)))


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    return len(a & b) / len(a | b) if a | b else 1.0


def best_match_jaccard(truth: Mapping[str, str], found: Mapping[str, str], skip: str = MISC) -> dict[str, float]:
    """For each true group, the best Jaccard index against any found group."""
    def groups(lab):
        out: dict[str, set] = {}
        for d, g in lab.items():
            if g != skip:
                out.setdefault(g, set()).add(d)
        return out

    t, f = groups(truth), groups(found)
    return {k: max((jaccard(s, x) for x in f.values()), default=0.0) for k, s in sorted(t.items())}


def scrambled_labeling(grouping: Mapping[str, str], seed: int = 0, keep: Sequence[str] = (MISC,)) -> dict[str, str]:
    """Deal members of each group round-robin over the same set of labels.

    Every new group receives an even share of every old group, so whatever
    structure the original grouping captured is spread across all labels.
    Labels listed in ``keep`` are left untouched.
    """
    rng = np.random.default_rng(seed)
    labels = [lab for lab in _label_order(grouping.values()) if lab not in set(keep)]
    dealt = []
    for lab in labels:
        members = sorted(d for d, g in grouping.items() if g == lab)
        dealt.extend(members[i] for i in rng.permutation(len(members)))
    out = {d: g for d, g in grouping.items() if g in set(keep)}
    for i, d in enumerate(dealt):
        out[d] = labels[i % len(labels)]
    return out


@dataclass(frozen=True)
class PlantedSpec:
    blocks: tuple[tuple[int, float], ...]  # (size, within mean)
    cross_mean: float = 0.0
    noise_sd: float = 0.0
    n_background: int = 0
    seed: int = 0

    def __post_init__(self):
        for size, mean in self.blocks:
            if size < 2:
                raise ValueError("block sizes must be at least 2")
            if not 0.0 <= mean < 1.0:
                raise ValueError("block means must lie in [0, 1)")
        if not 0.0 <= self.cross_mean < 1.0:
            raise ValueError("cross mean must lie in [0, 1)")
        if self.noise_sd < 0:
            raise ValueError("noise sd must be non-negative")

    @classmethod
    def from_json(cls, rec: dict) -> "PlantedSpec":
        return cls(
            blocks=tuple((int(s), float(m)) for s, m in rec["blocks"]),
            cross_mean=float(rec.get("cross_mean", 0.0)),
            noise_sd=float(rec.get("noise_sd", 0.0)),
            n_background=int(rec.get("n_background", 0)),
            seed=int(rec.get("seed", 0)),
        )


PLANTED_CLIP = 0.999


def generate_planted(spec: PlantedSpec) -> tuple[SimilarityGraph, dict[str, str]]:
    """Block-structured symmetric weights with Gaussian noise; background nodes are ``misc``.

    The returned graph is unthresholded; see :func:`simgraph.apply_threshold`.
    """
    labels = []
    for b, (size, _) in enumerate(spec.blocks):
        labels.extend([f"b{b}"] * size)
    labels.extend([MISC] * spec.n_background)
    n = len(labels)
    means = np.full((n, n), spec.cross_mean)
    start = 0
    for size, mean in spec.blocks:
        means[start:start + size, start:start + size] = mean
        start += size
    rng = np.random.default_rng(spec.seed)
    noise = np.triu(rng.normal(0.0, spec.noise_sd, (n, n)), 1) if spec.noise_sd > 0 else np.zeros((n, n))
    A = np.triu(means + noise, 1)
    A = A + A.T
    np.clip(A, -PLANTED_CLIP, PLANTED_CLIP, out=A)
    np.fill_diagonal(A, 0.0)
    width = len(str(max(n - 1, 0)))
    ids = tuple(f"n{i:0{width}d}" for i in range(n))
    g = SimilarityGraph(adjacency=A, node_ids=ids, threshold=0.0, meta={"planted_seed": spec.seed})
    return g, dict(zip(ids, labels))


def write_heterophily_csv(fractions: Mapping[str, float], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "fraction"])
        for lab, v in fractions.items():
            w.writerow([lab, repr(v)])


def write_nmi_csv(rows: Sequence[tuple[str, str, float]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run_a", "run_b", "nmi"])
        for a, b, v in rows:
            w.writerow([a, b, repr(v)])


def load_planted_spec(path) -> PlantedSpec:
    return PlantedSpec.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

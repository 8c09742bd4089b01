"""Document similarity network from LSA embeddings.

Edge weights are Pearson correlations between embedding rows. Weights
below the cut-off are set to exactly zero; the rest keep their value.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

# identical rows correlate at exactly 1; stored weights stay strictly inside (-1, 1)
MAX_WEIGHT = 1.0 - 1e-12


class ZeroVarianceError(ValueError):
    def __init__(self, doc_ids):
        self.doc_ids = list(doc_ids)
        super().__init__(f"zero-variance embedding row(s): {', '.join(map(str, self.doc_ids))}")


@dataclass(frozen=True)
class SimilarityGraph:
    adjacency: np.ndarray
    node_ids: tuple[str, ...]
    threshold: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = self.adjacency
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != len(self.node_ids):
            raise ValueError(f"adjacency shape {A.shape} does not match {len(self.node_ids)} node ids")

    @property
    def size(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))

    def index_of(self, ids: Sequence[str]) -> np.ndarray:
        lookup = {d: i for i, d in enumerate(self.node_ids)}
        try:
            return np.array([lookup[d] for d in ids], dtype=np.intp)
        except KeyError as exc:
            raise KeyError(f"node {exc.args[0]!r} not in graph") from None


def pearson_rows(u, v, ids=("u", "v")) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    du, dv = u - u.mean(), v - v.mean()
    nu, nv = np.sqrt(du @ du), np.sqrt(dv @ dv)
    bad = [i for i, nrm in zip(ids, (nu, nv)) if nrm == 0.0]
    if bad:
        raise ZeroVarianceError(bad)
    return float(np.clip((du @ dv) / (nu * nv), -1.0, 1.0))


def correlation_matrix(embeddings: np.ndarray, ids: Sequence[str]) -> np.ndarray:
    """Row-wise Pearson correlations with a zero diagonal, clipped into (-1, 1)."""
    E = np.asarray(embeddings, dtype=np.float64)
    if E.ndim != 2 or E.shape[1] < 2:
        raise ValueError("need at least two embedding dimensions for correlation")
    Z = E - E.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", Z, Z))
    zero = np.nonzero(norms <= 1e-300)[0]
    if zero.size:
        raise ZeroVarianceError([ids[i] for i in zero])
    Z /= norms[:, None]
    C = Z @ Z.T
    C = (C + C.T) / 2
    np.clip(C, -MAX_WEIGHT, MAX_WEIGHT, out=C)
    np.fill_diagonal(C, 0.0)
    return C


def apply_threshold(C: np.ndarray, ids: Sequence[str], tau: float, meta: dict | None = None) -> SimilarityGraph:
    """Zero every entry below ``tau``; keep the rest at full value."""
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"threshold must lie in [0, 1), got {tau}")
    A = np.where(C >= tau, C, 0.0)
    np.fill_diagonal(A, 0.0)
    return SimilarityGraph(adjacency=A, node_ids=tuple(ids), threshold=float(tau), meta=dict(meta or {}))


def build_graph(embeddings: np.ndarray, ids: Sequence[str], tau: float, meta: dict | None = None) -> SimilarityGraph:
    if len(ids) < 2:
        raise ValueError("need at least two documents to build a graph")
    if len(ids) != len(embeddings):
        raise ValueError(f"{len(embeddings)} embedding rows for {len(ids)} ids")
    return apply_threshold(correlation_matrix(embeddings, ids), ids, tau, meta)


def subgraph(g: SimilarityGraph, nodes: Sequence[int]) -> SimilarityGraph:
    """Induced subgraph on node positions ``nodes``, in the given order."""
    idx = np.asarray(nodes, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("empty node subset")
    if idx.min() < 0 or idx.max() >= g.size:
        bad = idx[(idx < 0) | (idx >= g.size)]
        raise IndexError(f"node index {int(bad[0])} out of range for graph of size {g.size}")
    A = g.adjacency[np.ix_(idx, idx)]
    return SimilarityGraph(
        adjacency=A,
        node_ids=tuple(g.node_ids[i] for i in idx),
        threshold=g.threshold,
        meta=dict(g.meta),
    )


def write_edge_list(g: SimilarityGraph, path: str | Path) -> None:
    """Upper-triangle ``i,j,weight`` CSV plus a ``.json`` sidecar with node ids and provenance."""
    path = Path(path)
    iu, ju = np.nonzero(np.triu(g.adjacency, 1))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "weight"])
        for i, j in zip(iu, ju):
            w.writerow([int(i), int(j), repr(float(g.adjacency[i, j]))])
    sidecar = {"node_ids": list(g.node_ids), "threshold": g.threshold, **g.meta}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_edge_list(path: str | Path) -> SimilarityGraph:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    ids = sidecar.pop("node_ids")
    tau = sidecar.pop("threshold")
    n = len(ids)
    A = np.zeros((n, n))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            i, j, wgt = int(row[0]), int(row[1]), float(row[2])
            A[i, j] = A[j, i] = wgt
    return SimilarityGraph(adjacency=A, node_ids=tuple(ids), threshold=tau, meta=sidecar)

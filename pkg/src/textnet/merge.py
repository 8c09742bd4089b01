"""Divide-and-conquer extraction.

The corpus is shuffled into chunks, communities are extracted per chunk, and
communities from different chunks are fused when their mean cross weight on
the full graph exceeds ``ratio`` times each of their internal densities.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .extraction import Community, ExtractionResult, TabuParams, extract_all
from .simgraph import SimilarityGraph, subgraph


class OverlapError(ValueError):
    pass


@dataclass(frozen=True)
class PartitionPlan:
    chunk_size: int
    assignments: dict  # doc id -> partition index, 1-based
    seed: int

    @property
    def partitions(self) -> list[list[str]]:
        """Member ids per partition, in shuffled order."""
        out: dict[int, list[str]] = {}
        for doc_id, p in self.assignments.items():
            out.setdefault(p, []).append(doc_id)
        return [out[p] for p in sorted(out)]


@dataclass(frozen=True)
class MergeDecision:
    pair: tuple[int, int]  # positions in the flattened community list
    d_a: float
    d_b: float
    d_cross: float
    ratio: float

    @property
    def merged(self) -> bool:
        return self.d_cross > self.ratio * self.d_a and self.d_cross > self.ratio * self.d_b


def random_partition(ids: Sequence[str], chunk_size: int, seed: int = 0) -> PartitionPlan:
    """Shuffle and cut into chunks; a last chunk under ``chunk_size/2`` joins its predecessor."""
    if chunk_size < 2:
        raise ValueError("chunk size must be at least 2")
    order = np.random.default_rng(seed).permutation(len(ids))
    bounds = list(range(0, len(ids), chunk_size))
    if len(bounds) > 1 and len(ids) - bounds[-1] < chunk_size / 2:
        bounds.pop()
    assignments = {}
    for p, start in enumerate(bounds, start=1):
        stop = bounds[p] if p < len(bounds) else len(ids)
        for i in order[start:stop]:
            assignments[ids[i]] = p
    return PartitionPlan(chunk_size=chunk_size, assignments=assignments, seed=seed)


def _members(g, s):
    members = s.members if isinstance(s, Community) else s
    return g.index_of(members)


def community_density(g_full: SimilarityGraph, s) -> float:
    """Sum of within weights over ordered pairs, divided by ``|S|^2``."""
    idx = _members(g_full, s)
    return float(g_full.adjacency[np.ix_(idx, idx)].sum() / idx.size**2)


def cross_density(g_full: SimilarityGraph, s1, s2) -> float:
    a, b = _members(g_full, s1), _members(g_full, s2)
    if np.intersect1d(a, b).size:
        raise OverlapError("communities must be disjoint")
    return float(g_full.adjacency[np.ix_(a, b)].sum() / (a.size * b.size))


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller root wins so the result is independent of union order
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def merge_decisions(
    g_full: SimilarityGraph, communities: Sequence[Community], ratio: float = 0.85
) -> list[MergeDecision]:
    """Decisions for every pair of communities that come from different partitions."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"merge ratio must lie in (0, 1], got {ratio}")
    A = g_full.adjacency
    idx = [_members(g_full, c) for c in communities]
    dens = [float(A[np.ix_(i, i)].sum() / i.size**2) for i in idx]
    out = []
    for a, b in combinations(range(len(communities)), 2):
        if communities[a].partition == communities[b].partition:
            continue
        if np.intersect1d(idx[a], idx[b]).size:
            raise OverlapError("communities must be disjoint")
        cross = float(A[np.ix_(idx[a], idx[b])].sum() / (idx[a].size * idx[b].size))
        out.append(MergeDecision((a, b), dens[a], dens[b], cross, ratio))
    return out


def merge_communities(
    g_full: SimilarityGraph,
    results: Sequence[ExtractionResult],
    ratio: float = 0.85,
    decisions: list | None = None,
) -> ExtractionResult:
    """Fuse communities across partitions; fused sets are the transitive closure.

    Pass a list as ``decisions`` to collect every :class:`MergeDecision`.
    """
    communities = [c for r in results for c in r.communities]
    found = merge_decisions(g_full, communities, ratio)
    if decisions is not None:
        decisions.extend(found)
    uf = UnionFind(len(communities))
    for d in found:
        if d.merged:
            uf.union(*d.pair)
    groups: dict[int, list[int]] = {}
    for i in range(len(communities)):
        groups.setdefault(uf.find(i), []).append(i)

    fused = []
    for root in sorted(groups):
        parts = [communities[i] for i in groups[root]]
        members = tuple(m for c in parts for m in c.members)
        first = parts[0]
        fused.append(
            Community(
                members=members,
                objective_value=first.objective_value if len(parts) == 1 else None,
                iteration=first.iteration,
                partition=first.partition,
                internal_density=community_density(g_full, members),
                sources=tuple((c.partition, c.iteration) for c in parts),
            )
        )
    residual = tuple(d for r in results for d in r.residual)
    config = dict(results[0].config) if results else {}
    config.pop("partition", None)
    config["merge_ratio"] = ratio
    config["partitions"] = len(results)
    return ExtractionResult(communities=fused, residual=residual, config=config)


def write_merge_report(decisions: Iterable[MergeDecision], communities: Sequence[Community], path) -> None:
    def label(i):
        c = communities[i]
        return f"p{c.partition}a{c.iteration}"

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["commA", "commB", "dA", "dB", "dCross", "merged"])
        for d in decisions:
            a, b = d.pair
            w.writerow([label(a), label(b), repr(d.d_a), repr(d.d_b), repr(d.d_cross), int(d.merged)])


def _extract_partition(args):
    g_full, ids, p, min_residual, restarts, seed, params = args
    sub = subgraph(g_full, g_full.index_of(ids))
    return extract_all(sub, min_residual, restarts, seed, params, partition=p)


def extract_partitions(
    g_full: SimilarityGraph,
    plan: PartitionPlan,
    min_residual: int = 30,
    restarts: int = 20,
    seed: int = 0,
    params: TabuParams | None = None,
    workers: int = 1,
) -> list[ExtractionResult]:
    """Run extraction on each partition; partition ``p`` uses seed ``seed + 1000*p``."""
    params = params or TabuParams()
    jobs = [
        (g_full, ids, p, min_residual, restarts, seed + 1000 * p, params)
        for p, ids in enumerate(plan.partitions, start=1)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(_extract_partition, jobs))
    return [_extract_partition(j) for j in jobs]


def divide_and_extract(
    g_full: SimilarityGraph,
    chunk_size: int,
    ratio: float = 0.85,
    min_residual: int = 30,
    restarts: int = 20,
    seed: int = 0,
    params: TabuParams | None = None,
    workers: int = 1,
    decisions: list | None = None,
) -> ExtractionResult:
    """Partition, extract per partition, and merge."""
    plan = random_partition(list(g_full.node_ids), chunk_size, seed)
    results = extract_partitions(g_full, plan, min_residual, restarts, seed, params, workers)
    merged = merge_communities(g_full, results, ratio, decisions)
    merged.config["chunk_size"] = chunk_size
    merged.config["seed"] = seed
    return merged

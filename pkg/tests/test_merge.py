import csv
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from textnet.evaluate import PlantedSpec, generate_planted
from textnet.extraction import Community, ExtractionResult, extract_all
from textnet.merge import (
    MergeDecision,
    OverlapError,
    UnionFind,
    community_density,
    cross_density,
    divide_and_extract,
    extract_partitions,
    merge_communities,
    merge_decisions,
    random_partition,
    write_merge_report,
)
from textnet.simgraph import SimilarityGraph, apply_threshold


def graph(A):
    return SimilarityGraph(np.asarray(A, dtype=float), tuple(f"n{i}" for i in range(len(A))))


def test_partition_sizes():
    ids = [str(i) for i in range(2072)]
    sizes = sorted(len(p) for p in random_partition(ids, 200, 0).partitions)
    # 2072 = 10*200 + 72; the 72 fold into the last full chunk
    assert sizes == [200] * 9 + [272]
    sizes = sorted(len(p) for p in random_partition(ids, 400, 0).partitions)
    assert sizes == [400] * 4 + [472]


def test_partition_trailing_chunk_kept_when_large():
    sizes = [len(p) for p in random_partition([str(i) for i in range(250)], 200, 0).partitions]
    assert sizes == [250]
    sizes = [len(p) for p in random_partition([str(i) for i in range(300)], 200, 0).partitions]
    assert sorted(sizes) == [100, 200]


def test_partition_single_chunk():
    ids = [str(i) for i in range(50)]
    plan = random_partition(ids, 50, 3)
    assert len(plan.partitions) == 1 and sorted(plan.partitions[0]) == sorted(ids)
    assert len(random_partition(ids, 80, 3).partitions) == 1


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 300), st.integers(2, 120), st.integers(0, 100))
def test_partition_covers_each_id_once(n, c, seed):
    ids = [f"d{i}" for i in range(n)]
    plan = random_partition(ids, c, seed)
    flat = [d for p in plan.partitions for d in p]
    assert sorted(flat) == sorted(ids)
    sizes = [len(p) for p in plan.partitions]
    if len(sizes) > 1:
        assert all(c / 2 <= s < 3 * c / 2 for s in sizes)
    assert set(plan.assignments.values()) == set(range(1, len(sizes) + 1))


def test_community_density_examples():
    assert community_density(graph(np.zeros((3, 3))), ["n1"]) == 0.0
    A = np.full((3, 3), 0.6)
    np.fill_diagonal(A, 0)
    assert community_density(graph(A), ["n0", "n1", "n2"]) == pytest.approx(0.4)
    B = np.zeros((4, 4))
    B[0, 1] = B[1, 0] = B[2, 3] = B[3, 2] = 1.0
    assert community_density(graph(B), ["n0", "n1", "n2", "n3"]) == pytest.approx(0.25)


def test_cross_density_examples():
    A = np.zeros((5, 5))
    g = graph(A)
    assert cross_density(g, ["n0", "n1"], ["n2", "n3", "n4"]) == 0.0
    vals = iter([0.9, 0.8, 0.7, 0.6, 0.5, 0.4])
    for i in (0, 1):
        for j in (2, 3, 4):
            A[i, j] = A[j, i] = next(vals)
    assert cross_density(graph(A), ["n0", "n1"], ["n2", "n3", "n4"]) == pytest.approx(0.65)
    A[:] = 0.3
    np.fill_diagonal(A, 0)
    assert cross_density(graph(A), ["n0"], ["n4", "n2"]) == pytest.approx(0.3)
    with pytest.raises(OverlapError, match="communities must be disjoint"):
        cross_density(g, ["n0", "n1"], ["n1", "n2"])


def test_unknown_member():
    with pytest.raises(KeyError):
        community_density(graph(np.zeros((2, 2))), ["zz"])


def comm(members, partition, iteration=1):
    return Community(tuple(members), 1.0, iteration, partition)


def test_decision_strictness():
    assert not MergeDecision((0, 1), 0.5, 0.5, 0.5, 1.0).merged
    assert MergeDecision((0, 1), 0.5, 0.5, 0.5, 0.99).merged
    assert not MergeDecision((0, 1), 0.5, 0.9, 0.6, 0.85).merged


def split_block_graph(seed, noise=0.02):
    spec = PlantedSpec(blocks=((60, 0.6), (40, 0.6)), cross_mean=0.0, noise_sd=noise, seed=seed)
    return generate_planted(spec)


def test_split_block_refused():
    g, _ = split_block_graph(0, noise=0.0)
    ids = g.node_ids
    halves = [comm(ids[:30], 1), comm(ids[30:60], 2), comm(ids[60:], 2, 2)]
    r = ExtractionResult(halves[:1], (), {}), ExtractionResult(halves[1:], (), {})
    fused = merge_communities(g, r, 0.85)
    assert sorted(len(c.members) for c in fused.communities) == [40, 60]
    big = next(c for c in fused.communities if len(c.members) == 60)
    assert big.objective_value is None and sorted(big.sources) == [(1, 1), (2, 1)]
    assert big.internal_density == pytest.approx(0.6 * 59 / 60)


def test_same_partition_never_tested():
    g, _ = split_block_graph(0, noise=0.0)
    ids = g.node_ids
    cs = [comm(ids[:30], 1), comm(ids[30:60], 1, 2)]
    assert merge_decisions(g, cs) == []


def test_rho_range():
    g, _ = split_block_graph(0)
    with pytest.raises(ValueError):
        merge_decisions(g, [], 0.0)
    with pytest.raises(ValueError):
        merge_decisions(g, [], 1.01)


def test_identical_structure_at_rho_one_not_merged():
    # two halves of an exact block: d_cross = 0.6 exceeds d_a = 0.6*29/30, so use
    # halves whose within density equals the cross density exactly
    A = np.zeros((4, 4))
    A[0, 1] = A[1, 0] = A[2, 3] = A[3, 2] = 1.0
    A[0, 2] = A[2, 0] = A[0, 3] = A[3, 0] = A[1, 2] = A[2, 1] = A[1, 3] = A[3, 1] = 0.5
    g = graph(A)
    d = merge_decisions(g, [comm(["n0", "n1"], 1), comm(["n2", "n3"], 2)], 1.0)[0]
    assert d.d_a == d.d_cross == 0.5
    assert not d.merged


def test_transitive_closure_order_independent():
    A = np.zeros((6, 6))
    for i, j in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 2), (1, 3), (2, 4), (3, 5)]:
        A[i, j] = A[j, i] = 0.8
    g = graph(A)
    cs = [comm(["n0", "n1"], 1), comm(["n2", "n3"], 2), comm(["n4", "n5"], 3)]
    results = [ExtractionResult([c], (), {}) for c in cs]
    base = merge_communities(g, results, 0.5)
    assert len(base.communities) == 1
    for seed in range(5):
        uf = UnionFind(3)
        pairs = [(0, 1), (1, 2), (0, 2)]
        random.Random(seed).shuffle(pairs)
        for a, b in pairs:
            uf.union(b, a)
        assert {uf.find(i) for i in range(3)} == {0}


def test_symmetric_decision():
    g, _ = split_block_graph(1)
    ids = g.node_ids
    a, b = comm(ids[:30], 1), comm(ids[30:60], 2)
    d1 = merge_decisions(g, [a, b])[0]
    d2 = merge_decisions(g, [b, a])[0]
    assert d1.merged == d2.merged and d1.d_cross == d2.d_cross


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_monotone_in_rho(seed, r1, r2):
    rng = np.random.default_rng(seed)
    A = np.triu(rng.random((12, 12)), 1)
    g = graph(A + A.T)
    ids = g.node_ids
    cs = [comm(ids[0:3], 1), comm(ids[3:6], 2), comm(ids[6:9], 3), comm(ids[9:12], 1, 2)]
    lo, hi = sorted((r1, r2))
    count = lambda r: sum(d.merged for d in merge_decisions(g, cs, r))
    assert count(lo) >= count(hi)


def test_conservation_and_report(tmp_path):
    g, _ = split_block_graph(2)
    g = apply_threshold(g.adjacency, g.node_ids, 0.15)
    plan = random_partition(list(g.node_ids), 50, 0)
    parts = extract_partitions(g, plan, 10, 5, 0)
    decisions = []
    r = merge_communities(g, parts, 0.85, decisions)
    seen = [d for c in r.communities for d in c.members] + list(r.residual)
    assert sorted(seen) == sorted(g.node_ids)
    path = tmp_path / "merge.csv"
    write_merge_report(decisions, [c for p in parts for c in p.communities], path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["commA", "commB", "dA", "dB", "dCross", "merged"]
    assert len(rows) == len(decisions) + 1
    assert sum(int(row[-1]) for row in rows[1:]) == sum(d.merged for d in decisions)


def test_single_partition_is_identity():
    g, _ = split_block_graph(3)
    g = apply_threshold(g.adjacency, g.node_ids, 0.15)
    whole = extract_all(g, 10, 5, 1000, partition=1)
    r = divide_and_extract(g, g.size, 0.85, 10, 5, 0)
    assert [set(c.members) for c in r.communities] == [set(c.members) for c in whole.communities]
    assert set(r.residual) == set(whole.residual)


def test_workers_do_not_change_results():
    g, _ = split_block_graph(4)
    g = apply_threshold(g.adjacency, g.node_ids, 0.15)
    a = divide_and_extract(g, 50, 0.85, 10, 3, 7, workers=1)
    b = divide_and_extract(g, 50, 0.85, 10, 3, 7, workers=2)
    assert a.to_json() == b.to_json()

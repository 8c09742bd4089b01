"""Community extraction by tabu search.

One community at a time is pulled out of a weighted graph by maximizing

    W(S) = |S||S^c| * (O(S)/|S|^2 - B(S)/(|S||S^c|))

where O(S) sums weights over ordered pairs inside S and B(S) sums weights
from S to its complement. The extracted nodes are removed and the search
repeats until at most ``min_residual`` nodes remain.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .simgraph import SimilarityGraph, subgraph


class TrivialSplitError(ValueError):
    pass


@dataclass(frozen=True)
class TabuParams:
    """Tabu search knobs; ``None`` means the size-dependent default."""

    tenure: int | None = None
    stall_limit: int | None = None
    max_moves: int | None = None

    def resolve(self, n: int) -> tuple[int, int, int]:
        tenure = self.tenure if self.tenure is not None else max(5, math.ceil(n / 20))
        stall = self.stall_limit if self.stall_limit is not None else 3 * n
        moves = self.max_moves if self.max_moves is not None else 50 * n
        return tenure, stall, moves


@dataclass(frozen=True)
class Community:
    members: tuple[str, ...]
    objective_value: float | None
    iteration: int
    partition: int = 0
    internal_density: float = 0.0
    sources: tuple[tuple[int, int], ...] = ()  # (partition, iteration) of fused parts

    def __post_init__(self):
        if not self.members:
            raise ValueError("community must have at least one member")
        if self.iteration < 1:
            raise ValueError("iteration index starts at 1")


@dataclass
class ExtractionResult:
    communities: list[Community]
    residual: tuple[str, ...]
    config: dict = field(default_factory=dict)

    def labels(self, misc: str = "misc") -> dict[str, str]:
        """Document id -> group label; residual documents share ``misc``."""
        out = {d: misc for d in self.residual}
        for i, c in enumerate(self.communities, start=1):
            for d in c.members:
                out[d] = f"c{i}"
        return out

    def to_json(self) -> dict:
        return {
            "communities": [
                {
                    "community_index": i,
                    "partition": c.partition,
                    "iteration": c.iteration,
                    "objective": c.objective_value,
                    "density": c.internal_density,
                    "sources": [list(s) for s in c.sources],
                    "member_ids": list(c.members),
                }
                for i, c in enumerate(self.communities, start=1)
            ],
            "residual_ids": list(self.residual),
            "config": self.config,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "ExtractionResult":
        comms = [
            Community(
                members=tuple(c["member_ids"]),
                objective_value=c["objective"],
                iteration=c["iteration"],
                partition=c["partition"],
                internal_density=c["density"],
                sources=tuple(tuple(s) for s in c.get("sources", ())),
            )
            for c in rec["communities"]
        ]
        return cls(communities=comms, residual=tuple(rec["residual_ids"]), config=rec.get("config", {}))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ExtractionResult":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _adjacency(g):
    return g.adjacency if isinstance(g, SimilarityGraph) else np.asarray(g, dtype=np.float64)


def objective_w(g, s) -> float:
    """Extraction objective of node positions ``s`` (a subset or boolean mask)."""
    A = _adjacency(g)
    n = A.shape[0]
    mask = np.zeros(n, dtype=bool)
    s = np.asarray(s)
    if s.dtype == bool:
        mask[:] = s
    else:
        mask[s.astype(np.intp)] = True
    k = int(mask.sum())
    if k == 0 or k == n:
        raise TrivialSplitError("objective undefined on trivial split")
    inside = A[np.ix_(mask, mask)].sum()
    between = A[np.ix_(mask, ~mask)].sum()
    return float((n - k) / k * inside - between)


def density(A: np.ndarray, idx: Sequence[int]) -> float:
    idx = np.asarray(idx, dtype=np.intp)
    return float(A[np.ix_(idx, idx)].sum() / idx.size**2)


class _TabuState:
    """Membership vector with O(1)-per-candidate flip evaluation.

    ``into[v]`` is the weight from v into the current set S; with the total
    row weight ``deg[v]`` this gives the change in O and B for flipping v.
    """

    def __init__(self, A: np.ndarray, x: np.ndarray):
        self.A = A
        self.n = A.shape[0]
        self.deg = A.sum(axis=1)
        self.set(x)

    def set(self, x):
        self.x = np.array(x, dtype=bool)
        self.k = int(self.x.sum())
        self.into = self.A[:, self.x].sum(axis=1)
        self.inside = float(self.into[self.x].sum())
        self.between = float((self.deg[self.x] - self.into[self.x]).sum())

    @property
    def value(self) -> float:
        return (self.n - self.k) / self.k * self.inside - self.between

    def candidates(self) -> np.ndarray:
        """Objective after flipping each node; ``-inf`` where the split would become trivial."""
        sign = np.where(self.x, -1.0, 1.0)
        k_new = self.k + sign
        inside = self.inside + 2.0 * sign * self.into
        between = self.between + sign * (self.deg - 2.0 * self.into)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = (self.n - k_new) / k_new * inside - between
        vals[(k_new == 0) | (k_new == self.n)] = -np.inf
        return vals

    def flip(self, v: int) -> None:
        sign = -1.0 if self.x[v] else 1.0
        self.inside += 2.0 * sign * self.into[v]
        self.between += sign * (self.deg[v] - 2.0 * self.into[v])
        self.k += int(sign)
        self.x[v] = not self.x[v]
        self.into += sign * self.A[:, v]


def _random_start(rng, n):
    while True:
        x = rng.random(n) < 0.5
        k = int(x.sum())
        if 0 < k < n:
            return x


def _tabu_run(A, x0, tenure, stall_limit, max_moves):
    state = _TabuState(A, x0)
    best_x, best_val = state.x.copy(), state.value
    tabu_until = np.zeros(state.n, dtype=np.int64)
    stall = 0
    for move in range(max_moves):
        vals = state.candidates()
        allowed = (tabu_until <= move) | (vals > best_val)  # aspiration
        vals = np.where(allowed, vals, -np.inf)
        v = int(np.argmax(vals))
        if not np.isfinite(vals[v]):
            break
        state.flip(v)
        tabu_until[v] = move + 1 + tenure
        if state.value > best_val + 1e-12 * max(1.0, abs(best_val)):
            best_val, best_x = state.value, state.x.copy()
            stall = 0
        else:
            stall += 1
            if stall >= stall_limit:
                break
    return best_x, best_val


def tabu_extract(
    g,
    restarts: int = 20,
    seed: int = 0,
    params: TabuParams | None = None,
    stream: int = 0,
) -> tuple[np.ndarray, float]:
    """Best subset over ``restarts`` independent tabu runs.

    Restart ``r`` draws its random start from ``default_rng([seed + r, stream])``,
    so callers that search a sequence of graphs can pass distinct streams.
    Returns sorted node positions and their exact objective value.
    """
    A = _adjacency(g)
    n = A.shape[0]
    if n < 2:
        raise ValueError("tabu search needs a graph with at least 2 nodes")
    tenure, stall_limit, max_moves = (params or TabuParams()).resolve(n)
    best_x, best_val = None, -np.inf
    for r in range(restarts):
        rng = np.random.default_rng([seed + r, stream])
        x, _ = _tabu_run(A, _random_start(rng, n), tenure, stall_limit, max_moves)
        val = objective_w(A, x)
        if val > best_val:
            best_x, best_val = x, val
    return np.flatnonzero(best_x), best_val


def extract_all(
    g: SimilarityGraph,
    min_residual: int = 30,
    restarts: int = 20,
    seed: int = 0,
    params: TabuParams | None = None,
    partition: int = 0,
) -> ExtractionResult:
    """Extract communities one by one until at most ``min_residual`` nodes remain.

    Extraction also stops once the remaining nodes share no edges.
    """
    params = params or TabuParams()
    remaining = np.arange(g.size)
    communities = []
    A_full = g.adjacency
    while remaining.size > max(min_residual, 1):
        sub = subgraph(g, remaining)
        if not sub.adjacency.any():
            break  # no edges left, nothing to extract
        picked, value = tabu_extract(sub, restarts, seed, params, stream=len(communities) + 1)
        if picked.size == 0 or picked.size == remaining.size:
            break
        idx = remaining[picked]
        communities.append(
            Community(
                members=tuple(g.node_ids[i] for i in idx),
                objective_value=value,
                iteration=len(communities) + 1,
                partition=partition,
                internal_density=density(A_full, idx),
            )
        )
        remaining = np.delete(remaining, picked)
    config = {
        "threshold": g.threshold,
        "min_residual": min_residual,
        "restarts": restarts,
        "seed": seed,
        "partition": partition,
        "tabu": asdict(params),
    }
    return ExtractionResult(
        communities=communities,
        residual=tuple(g.node_ids[i] for i in remaining),
        config=config,
    )

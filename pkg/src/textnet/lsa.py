"""Latent semantic analysis: rank-k truncated SVD of the tf-idf matrix.

The factorization is a randomized range finder (Gaussian sketch plus
subspace iteration) followed by a small dense SVD. Subspace iteration
continues until every retained triple satisfies
``||X v_i - s_i u_i|| <= tol * s_1``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

OVERSAMPLE = 10
POWER_ITERS = 2
TOL = 1e-10
MAX_ITER = 300


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"truncated SVD did not converge after {iterations} iterations (residual {residual:.3g})")
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class LsaFactors:
    k: int
    singular_values: np.ndarray  # (k,), descending
    term_factors: np.ndarray  # T_k, (m, k)
    doc_factors: np.ndarray  # D_k, (n, k)
    full_rank_hint: int
    iterations: int = 0

    def truncate(self, k: int) -> "LsaFactors":
        if not 1 <= k <= self.k:
            raise ValueError(f"cannot truncate rank {self.k} factors to {k}")
        return LsaFactors(
            k=k,
            singular_values=self.singular_values[:k].copy(),
            term_factors=self.term_factors[:, :k].copy(),
            doc_factors=self.doc_factors[:, :k].copy(),
            full_rank_hint=self.full_rank_hint,
            iterations=self.iterations,
        )

    def reconstruct(self) -> np.ndarray:
        return (self.term_factors * self.singular_values) @ self.doc_factors.T


def _orth(Y):
    Q, _ = scipy.linalg.qr(Y, mode="economic", check_finite=False)
    return Q


def _canonical_signs(U, Vt):
    # largest-magnitude entry of each left vector is made positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, Vt * signs[:, None]


def _factorize(X, k, seed, oversample, power_iters, tol, max_iter):
    if hasattr(X, "X"):  # TermDocMatrix
        X = X.X
    X = sp.csr_matrix(X, dtype=np.float64) if sp.issparse(X) else np.asarray(X, dtype=np.float64)
    m, n = X.shape
    if not 1 <= k <= min(m, n):
        raise ValueError(f"rank k={k} out of range 1..{min(m, n)}")
    Xt = X.T.tocsr() if sp.issparse(X) else X.T
    fro = float(sp.linalg.norm(X)) if sp.issparse(X) else float(np.linalg.norm(X))
    if fro == 0.0:
        raise ValueError("matrix is zero")

    ell = min(k + oversample, min(m, n))
    rng = np.random.default_rng(seed)
    Q = _orth(X @ rng.standard_normal((n, ell)))
    for _ in range(power_iters):
        Q = _orth(X @ _orth(Xt @ Q))

    iterations = power_iters
    while True:
        B = (Xt @ Q).T  # ell x n
        Ub, s, Vt = scipy.linalg.svd(B, full_matrices=False, check_finite=False)
        U = Q @ Ub[:, :k]
        V = Vt[:k].T
        resid = np.linalg.norm(X @ V - U * s[:k], axis=0).max() / s[0]
        # a sketch as wide as the matrix captures its whole range
        if resid <= tol or ell == min(m, n):
            break
        if iterations >= max_iter:
            raise ConvergenceError(iterations, resid)
        Q = _orth(X @ _orth(Xt @ Q))
        iterations += 1

    rank_tol = max(m, n) * np.finfo(np.float64).eps * s[0]
    rank_hint = int(np.count_nonzero(s > rank_tol))
    U, Vt_k = _canonical_signs(U, Vt[:k])
    return U, s[:k], Vt_k.T, rank_hint, iterations


def _factors(U, s, V, rank_hint, iterations):
    return LsaFactors(
        k=len(s),
        singular_values=s.copy(),
        term_factors=np.ascontiguousarray(U),
        doc_factors=np.ascontiguousarray(V),
        full_rank_hint=rank_hint,
        iterations=iterations,
    )


def truncated_svd(
    X,
    k: int,
    seed: int = 0,
    *,
    oversample: int = OVERSAMPLE,
    power_iters: int = POWER_ITERS,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
) -> LsaFactors:
    """Top-``k`` singular triples of a sparse or dense ``m x n`` matrix.

    Raises ``ValueError`` if ``k`` is out of range or exceeds the numerical
    rank, and :class:`ConvergenceError` if subspace iteration hits ``max_iter``.
    """
    U, s, V, rank_hint, iterations = _factorize(X, k, seed, oversample, power_iters, tol, max_iter)
    if k > rank_hint:
        raise ValueError(f"rank k={k} exceeds numerical rank {rank_hint}")
    return _factors(U, s, V, rank_hint, iterations)


def choose_rank(
    singular_value_decay: Sequence[float],
    energy_fraction: float = 0.8,
    cap: int = 300,
    total_energy: float | None = None,
) -> int:
    """Smallest k whose leading squared singular values reach ``energy_fraction``.

    ``total_energy`` is the sum of all squared singular values (the squared
    Frobenius norm); it defaults to the sum over the list, which is only
    right when the list is the full spectrum.

    >>> choose_rank([5, 4, 3, 2, 1], 0.9)
    3
    """
    sq = np.asarray(singular_value_decay, dtype=np.float64) ** 2
    if sq.size == 0:
        raise ValueError("empty singular value list")
    total = float(sq.sum()) if total_energy is None else float(total_energy)
    if total <= 0.0:
        return 1
    cum = np.cumsum(sq) / total
    hits = np.nonzero(cum >= energy_fraction * (1 - 1e-12))[0]
    k = int(hits[0]) + 1 if hits.size else sq.size
    return max(1, min(k, cap))


def doc_embeddings(factors: LsaFactors) -> np.ndarray:
    """Rows of D_k, one per document in matrix column order."""
    return factors.doc_factors


def fit(X, *, rank: int | None = None, energy_fraction: float = 0.8, cap: int = 300, seed: int = 0) -> LsaFactors:
    """Truncated SVD at a fixed rank, or at the energy-fraction rank clamped to ``cap``."""
    if hasattr(X, "X"):
        X = X.X
    if rank is not None:
        return truncated_svd(X, rank, seed)
    m, n = X.shape
    total = float(sp.linalg.norm(X) ** 2) if sp.issparse(X) else float(np.linalg.norm(X) ** 2)
    U, s, V, rank_hint, iterations = _factorize(X, min(cap, m, n), seed, OVERSAMPLE, POWER_ITERS, TOL, MAX_ITER)
    k = min(choose_rank(s, energy_fraction, cap, total_energy=total), rank_hint)
    return _factors(U[:, :k], s[:k], V[:, :k], rank_hint, iterations)


def save(factors: LsaFactors, directory: str | Path, doc_ids: Sequence[str]) -> None:
    """Write factors as plain ``.npy`` arrays plus CSV views (no zip timestamps)."""
    directory = Path(directory)
    np.save(directory / "lsa_singular_values.npy", factors.singular_values)
    np.save(directory / "lsa_term_factors.npy", factors.term_factors)
    np.save(directory / "lsa_doc_factors.npy", factors.doc_factors)
    meta = {"k": factors.k, "full_rank_hint": factors.full_rank_hint, "iterations": factors.iterations}
    (directory / "lsa.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")
    with open(directory / "embeddings.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", *range(factors.k)])
        for doc_id, row in zip(doc_ids, factors.doc_factors):
            w.writerow([doc_id, *(repr(float(v)) for v in row)])
    with open(directory / "singular_values.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "singular_value"])
        for i, v in enumerate(factors.singular_values):
            w.writerow([i, repr(float(v))])


def load(directory: str | Path) -> LsaFactors:
    directory = Path(directory)
    meta = json.loads((directory / "lsa.json").read_text(encoding="utf-8"))
    return LsaFactors(
        k=meta["k"],
        singular_values=np.load(directory / "lsa_singular_values.npy"),
        term_factors=np.load(directory / "lsa_term_factors.npy"),
        doc_factors=np.load(directory / "lsa_doc_factors.npy"),
        full_rank_hint=meta["full_rank_hint"],
        iterations=meta["iterations"],
    )

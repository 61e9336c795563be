"""Comparison defenses: Multi-Krum, Divide-and-Conquer and a CFL-style bipartition.

All three return a :class:`~asmr_fl.asmr.DetectionVerdict`. Ties are broken by
client position: on equal scores the later client is the one excluded.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .asmr import DetectionVerdict
from .geometry import stack_updates

__all__ = [
    "BaselineConfig",
    "PowerIterationError",
    "mkrum_scores",
    "mkrum_select",
    "principal_direction",
    "dnc_scores",
    "dnc_detect",
    "cosine_similarity_matrix",
    "best_bipartition",
    "cfl_split",
]

EXACT_SEARCH_MAX = 16


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge within its iteration budget."""


@dataclass(frozen=True)
class BaselineConfig:
    method: str
    f: int = 3

    def __post_init__(self):
        if self.method not in ("mkrum", "dnc", "cfl"):
            raise ValueError(f"unknown baseline {self.method!r}")
        if self.f < 0:
            raise ValueError("f must be non-negative")


def _ids(updates):
    return tuple(getattr(u, "client_id", i) for i, u in enumerate(updates))


def _exclude_top(scores: np.ndarray, count: int, ids: tuple, method: str, **details) -> DetectionVerdict:
    # ascending by (score, position); the last `count` are excluded
    order = np.lexsort((np.arange(scores.size), scores))
    excluded = frozenset(ids[i] for i in order[scores.size - count:]) if count else frozenset()
    return DetectionVerdict(ids, frozenset(ids) - excluded, excluded, scores,
                            method=method, details=details or None)


def mkrum_scores(X: np.ndarray, f: int) -> np.ndarray:
    """Sum of squared distances to the ``n - f - 2`` nearest peers."""
    n = X.shape[0]
    sq = np.sum(X * X, axis=1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(D2, np.inf)
    m = n - f - 2
    return np.sort(D2, axis=1)[:, :m].sum(axis=1)


def mkrum_select(updates: Sequence, f: int) -> DetectionVerdict:
    """Keep the ``n - f`` clients with the lowest Krum scores."""
    n = len(updates)
    if f < 0 or n < f + 3:
        raise ValueError(f"Multi-Krum needs n >= f + 3 (n={n}, f={f})")
    X = stack_updates(updates)
    return _exclude_top(mkrum_scores(X, f), f, _ids(updates), "mkrum")


def principal_direction(M: np.ndarray, tol: float = 1e-9, max_iter: int = 1000,
                        seed: int = 0) -> np.ndarray | None:
    """Dominant right singular vector of ``M`` by power iteration.

    Iterates on the smaller of ``M M^T`` and ``M^T M``; convergence is declared
    when successive unit iterates differ by less than ``tol``. Returns ``None``
    for an all-zero matrix.
    """
    if not np.any(M):
        return None
    n, d = M.shape
    gram_rows = n <= d
    G = M @ M.T if gram_rows else M.T @ M
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = G @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # start vector orthogonal to the range
            v = rng.standard_normal(G.shape[0])
            v /= np.linalg.norm(v)
            continue
        w /= norm
        if np.linalg.norm(w - v) < tol:
            if gram_rows:
                w = M.T @ w
                w /= np.linalg.norm(w)
            return w
        v = w
    raise PowerIterationError(f"power iteration did not converge within {max_iter} iterations (tol={tol})")


def dnc_scores(X: np.ndarray, tol: float = 1e-9, max_iter: int = 1000, seed: int = 0) -> np.ndarray:
    centered = X - X.mean(axis=0)
    v = principal_direction(centered, tol=tol, max_iter=max_iter, seed=seed)
    if v is None:
        return np.zeros(X.shape[0])
    return (centered @ v) ** 2


def dnc_detect(updates: Sequence, f: int, tol: float = 1e-9, max_iter: int = 1000,
               seed: int = 0) -> DetectionVerdict:
    """Exclude the ``f`` updates with the largest squared projections on the
    principal direction of the mean-centered stack."""
    n = len(updates)
    if f < 0 or n < f + 1:
        raise ValueError(f"DnC needs n >= f + 1 (n={n}, f={f})")
    X = stack_updates(updates)
    return _exclude_top(dnc_scores(X, tol, max_iter, seed), f, _ids(updates), "dnc")


def cosine_similarity_matrix(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ValueError("cosine similarity undefined for zero updates")
    U = X / norms[:, None]
    S = np.clip(U @ U.T, -1.0, 1.0)
    return 0.5 * (S + S.T)


def _exhaustive_bipartitions(S: np.ndarray) -> list[tuple[float, np.ndarray]]:
    n = S.shape[0]
    out = []
    # client 0 is pinned to side False so each split is visited once
    for bits in itertools.product((False, True), repeat=n - 1):
        side = np.array((False,) + bits)
        if not side.any():
            continue
        out.append((float(S[np.ix_(side, ~side)].max()), side))
    return out


def _single_linkage_bipartition(S: np.ndarray) -> np.ndarray:
    # Merging the most similar clusters until two remain maximizes the
    # minimum cross distance, i.e. minimizes the maximum cross similarity.
    n = S.shape[0]
    labels = np.arange(n)
    pairs = sorted(((S[i, j], i, j) for i in range(n) for j in range(i + 1, n)),
                   key=lambda t: (-t[0], t[1], t[2]))
    clusters = n
    for _, i, j in pairs:
        a, b = labels[i], labels[j]
        if a == b:
            continue
        labels[labels == b] = a
        clusters -= 1
        if clusters == 2:
            break
    return labels != labels[0]


def _mean_intra(S: np.ndarray, side: np.ndarray) -> float:
    idx = np.flatnonzero(side)
    if idx.size < 2:
        return 1.0
    block = S[np.ix_(idx, idx)]
    return float((block.sum() - np.trace(block)) / (idx.size * (idx.size - 1)))


def best_bipartition(S: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Boolean mask of the cluster to exclude.

    Minimizes the maximum cross-cluster similarity (exhaustively for small
    populations, single linkage otherwise). Among optimal splits the smallest
    excluded cluster wins, then the one excluding the highest positions.
    """
    n = S.shape[0]
    if n <= EXACT_SEARCH_MAX:
        candidates = _exhaustive_bipartitions(S)
        best = min(c for c, _ in candidates)
        optimal = [side for c, side in candidates if c <= best + tol]
    else:
        optimal = [_single_linkage_bipartition(S)]

    def minority(side):
        a, b = side, ~side
        if a.sum() != b.sum():
            return a if a.sum() < b.sum() else b
        # equal halves: drop the less cohesive one; then the one without client 0
        ia, ib = _mean_intra(S, a), _mean_intra(S, b)
        if ia != ib:
            return a if ia < ib else b
        return a if not a[0] else b

    masks = [minority(side) for side in optimal]
    return min(masks, key=lambda m: (int(m.sum()), tuple(-np.flatnonzero(m)[::-1])))


def cfl_split(updates: Sequence) -> DetectionVerdict:
    """Cosine-similarity bipartition; the smaller cluster is excluded."""
    n = len(updates)
    if n < 3:
        raise ValueError(f"CFL split needs at least 3 updates, got {n}")
    X = stack_updates(updates)
    S = cosine_similarity_matrix(X)
    mask = best_bipartition(S)
    ids = _ids(updates)
    excluded = frozenset(ids[i] for i in np.flatnonzero(mask))
    # suspicion score: similarity deficit w.r.t. the kept cluster
    kept_idx = np.flatnonzero(~mask)
    scores = 1.0 - S[:, kept_idx].mean(axis=1)
    cross = float(S[np.ix_(mask, ~mask)].max())
    return DetectionVerdict(ids, frozenset(ids) - excluded, excluded, scores,
                            boundary_gap=1.0 - cross, method="cfl")

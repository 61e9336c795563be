"""Angular-support detector: reachability density, outlier factor, largest-gap boundary."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .geometry import normalize, pairwise_distances

logger = logging.getLogger(__name__)

#: Lower clamp on the mean distance before inversion (identical updates).
EPS = 1e-12
MIN_CLIENTS = 3
GAP_RTOL = 1e-9

__all__ = [
    "EPS",
    "OutlierScores",
    "DetectionVerdict",
    "InsufficientClientsError",
    "reachability_density",
    "reachability_densities",
    "outlier_factor",
    "outlier_factors",
    "outlier_scores",
    "gap_boundary",
    "asmr_detect",
]


class InsufficientClientsError(ValueError):
    """Too few clients for density estimation."""


@dataclass(frozen=True)
class OutlierScores:
    density: np.ndarray
    factor: np.ndarray
    ordering: np.ndarray  # client positions sorted ascending by factor


@dataclass(frozen=True)
class DetectionVerdict:
    """Partition of one round's clients into kept and excluded.

    ``scores`` holds per-client suspicion scores aligned with ``client_ids``
    (higher means more suspicious). ``details`` carries method-specific extras,
    e.g. the :class:`OutlierScores` for ASMR.
    """

    client_ids: tuple
    kept: frozenset
    excluded: frozenset
    scores: np.ndarray
    boundary_gap: float = 0.0
    method: str = ""
    details: dict | None = None

    def __post_init__(self):
        everyone = set(self.client_ids)
        if len(everyone) != len(self.client_ids):
            raise ValueError("duplicate client ids in verdict")
        if self.kept & self.excluded:
            raise ValueError("kept and excluded overlap")
        if self.kept | self.excluded != everyone:
            raise ValueError("kept and excluded do not cover the round's clients")

    @property
    def kept_mask(self) -> np.ndarray:
        return np.array([c in self.kept for c in self.client_ids])

    @property
    def excluded_mask(self) -> np.ndarray:
        return ~self.kept_mask


def _check_population(D: np.ndarray) -> int:
    n = D.shape[0]
    if n < MIN_CLIENTS:
        raise InsufficientClientsError(
            f"density estimation needs at least {MIN_CLIENTS} clients, got {n}")
    return n


def reachability_densities(D: np.ndarray) -> np.ndarray:
    """Inverse mean cosine distance of every client to all of its peers."""
    D = np.asarray(D, dtype=np.float64)
    n = _check_population(D)
    mean_dist = (D.sum(axis=1) - np.diag(D)) / (n - 1)
    return 1.0 / np.maximum(EPS, mean_dist)


def reachability_density(p: int, D: np.ndarray) -> float:
    D = np.asarray(D, dtype=np.float64)
    n = _check_population(D)
    peers = np.delete(D[p], p)
    return float(1.0 / max(EPS, peers.sum() / (n - 1)))


def outlier_factors(rd: np.ndarray) -> np.ndarray:
    """Mean ratio of the peers' densities to each client's own density."""
    rd = np.asarray(rd, dtype=np.float64)
    if not (np.all(np.isfinite(rd)) and np.all(rd > 0)):
        raise ValueError("reachability densities must be positive and finite")
    n = rd.size
    return (rd.sum() - rd) / rd / (n - 1)


def outlier_factor(p: int, rd: np.ndarray) -> float:
    rd = np.asarray(rd, dtype=np.float64)
    if not (np.all(np.isfinite(rd)) and np.all(rd > 0)):
        raise ValueError("reachability densities must be positive and finite")
    peers = np.delete(rd, p)
    return float(np.sum(peers / rd[p]) / peers.size)


def outlier_scores(D: np.ndarray) -> OutlierScores:
    rd = reachability_densities(D)
    of = outlier_factors(rd)
    # stable sort: equal factors keep ascending client order
    ordering = np.argsort(of, kind="stable")
    return OutlierScores(rd, of, ordering)


def gap_boundary(scores: OutlierScores, client_ids: Sequence[Hashable] | None = None) -> DetectionVerdict:
    """Split at the largest gap between consecutive sorted outlier factors.

    Everything above the gap is excluded. Among equal largest gaps the one
    nearest the top wins, so the fewest clients are excluded. If every gap is
    zero nobody is excluded.
    """
    of = np.asarray(scores.factor)
    n = of.size
    if n < MIN_CLIENTS:
        raise InsufficientClientsError(f"need at least {MIN_CLIENTS} clients, got {n}")
    ids = tuple(range(n)) if client_ids is None else tuple(client_ids)
    order = np.asarray(scores.ordering)
    gaps = np.diff(of[order])
    biggest = float(gaps.max())
    if biggest <= 0.0:
        excluded_pos = []
    else:
        # gaps equal up to rounding count as ties
        ties = np.isclose(gaps, biggest, rtol=GAP_RTOL, atol=0.0)
        cut = int(np.flatnonzero(ties)[-1])
        excluded_pos = order[cut + 1:].tolist()
        biggest = float(gaps[cut])
    excluded = frozenset(ids[i] for i in excluded_pos)
    if len(excluded) > n / 2:
        logger.warning("ASMR excluded %d of %d clients (majority)", len(excluded), n)
    return DetectionVerdict(
        client_ids=ids,
        kept=frozenset(ids) - excluded,
        excluded=excluded,
        scores=of.copy(),
        boundary_gap=max(biggest, 0.0),
        method="asmr",
        details={"outlier_scores": scores},
    )


def asmr_detect(updates: Sequence) -> DetectionVerdict:
    """Run the full detector on one round of updates.

    Detection works on normalized copies; the caller keeps the originals for
    aggregation.
    """
    if len(updates) < MIN_CLIENTS:
        raise InsufficientClientsError(
            f"ASMR needs at least {MIN_CLIENTS} updates, got {len(updates)}")
    unit = [normalize(u) for u in updates]
    D = pairwise_distances(unit)
    ids = [getattr(u, "client_id", i) for i, u in enumerate(updates)]
    return gap_boundary(outlier_scores(D), ids)

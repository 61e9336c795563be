"""Malfunction injection and scheduling.

Malicious clients tamper with their trained update (sign flipping, additive
Gaussian noise). Unreliable clients train on a shard with corrupted labels.
All randomness comes from explicit seeds; see :func:`derive_rng`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .geometry import UpdateVector

__all__ = [
    "MECHANISMS",
    "AttackSpec",
    "derive_rng",
    "apply_sfa",
    "apply_ana",
    "corrupt_labels",
    "schedule_round",
    "assign_mechanisms",
]

MECHANISMS = ("ana", "sfa", "unreliable", "combined")
_COMBINED_CYCLE = ("ana", "sfa", "unreliable")

# stream tags keep independent random draws apart
STREAM_SCHEDULE = 1
STREAM_ANA = 2
STREAM_CORRUPT = 3


def derive_rng(*key: int) -> np.random.Generator:
    """Generator seeded from an integer key such as (master_seed, stream, round, client).

    Adding rounds or clients never shifts the draws of other keys.
    """
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


@dataclass(frozen=True)
class AttackSpec:
    mechanism: str
    client_ids: frozenset = field(default_factory=frozenset)
    probability: float = 1.0
    ana_sigma: float = 0.0
    sfa_constant: float = 1.0
    corruption_fraction: float = 0.0

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown attack mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {self.probability}")
        if self.ana_sigma < 0:
            raise ValueError("ana_sigma must be non-negative")
        if not self.sfa_constant > 0:
            raise ValueError("sfa_constant must be positive")
        if not 0.0 <= self.corruption_fraction <= 1.0:
            raise ValueError("corruption_fraction must lie in [0, 1]")
        object.__setattr__(self, "client_ids", frozenset(self.client_ids))

    def validate_population(self, all_clients: Iterable) -> None:
        missing = self.client_ids - set(all_clients)
        if missing:
            raise ValueError(f"designated clients {sorted(missing)} are not part of the population")

    def mechanism_of(self, client_id) -> str | None:
        """Sub-mechanism a designated client uses for the whole run."""
        if client_id not in self.client_ids:
            return None
        if self.mechanism != "combined":
            return self.mechanism
        return assign_mechanisms(self.client_ids)[client_id]


def assign_mechanisms(client_ids: Iterable) -> dict:
    """Round-robin ana, sfa, unreliable over clients in ascending id order."""
    return {c: _COMBINED_CYCLE[i % 3] for i, c in enumerate(sorted(client_ids))}


def _values(u):
    return np.asarray(getattr(u, "values", u), dtype=np.float64)


def _rewrap(u, values):
    return u.with_values(values) if isinstance(u, UpdateVector) else values


def apply_sfa(u, c: float = 1.0):
    """Sign flip: ``-c * u``."""
    if not c > 0:
        raise ValueError(f"sign-flip constant must be positive, got {c}")
    return _rewrap(u, -c * _values(u))


def apply_ana(u, sigma: float, rng_seed) -> np.ndarray:
    """Add i.i.d. N(0, sigma^2) noise per coordinate.

    ``rng_seed`` is an int, a sequence of ints (see :func:`derive_rng`) or a
    ready Generator.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    values = _values(u)
    if sigma == 0:
        return _rewrap(u, values.copy())
    rng = _as_generator(rng_seed)
    return _rewrap(u, values + sigma * rng.standard_normal(values.shape))


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        return derive_rng(*seed)
    return np.random.default_rng(seed)


def corrupt_labels(X: np.ndarray, y: np.ndarray, rho: float, rng_seed, n_classes: int | None = None):
    """Replace ``floor(rho * len(y))`` labels by a uniformly drawn different class.

    Returns ``(X, y_corrupted)``; features are returned untouched.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"corruption fraction must lie in [0, 1], got {rho}")
    y = np.asarray(y)
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if K < 2:
        raise ValueError("label corruption needs at least 2 classes")
    count = int(np.floor(rho * y.size))
    y_new = y.copy()
    if count == 0:
        return X, y_new
    rng = _as_generator(rng_seed)
    chosen = rng.choice(y.size, size=count, replace=False)
    # offset in 1..K-1 guarantees a different class
    offsets = rng.integers(1, K, size=count)
    y_new[chosen] = (y[chosen] + offsets) % K
    return X, y_new


def schedule_round(spec: AttackSpec, round: int, rng_seed: int) -> frozenset:
    """Designated clients that malfunction in ``round``.

    Each designated client acts independently with ``spec.probability``, drawn
    from a stream keyed on (seed, round, client).
    """
    if spec.probability >= 1.0:
        return spec.client_ids
    if spec.probability <= 0.0:
        return frozenset()
    active = set()
    for cid in sorted(spec.client_ids):
        rng = derive_rng(rng_seed, STREAM_SCHEDULE, round, _int_key(cid))
        if rng.random() < spec.probability:
            active.add(cid)
    return frozenset(active)


def _int_key(cid) -> int:
    if isinstance(cid, (int, np.integer)):
        return int(cid)
    # stable across processes, unlike hash()
    return int.from_bytes(str(cid).encode("utf-8")[:16].ljust(16, b"\0"), "little")

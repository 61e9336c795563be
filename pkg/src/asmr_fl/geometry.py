"""Flat parameter vectors and cosine-distance machinery shared by all defenses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

__all__ = [
    "UpdateVector",
    "DegenerateUpdateError",
    "flatten",
    "unflatten",
    "normalize",
    "cosine_distance",
    "pairwise_distances",
    "stack_updates",
]


class DegenerateUpdateError(ValueError):
    """Raised for zero-norm or non-finite updates."""


@dataclass(frozen=True)
class UpdateVector:
    """One client's flattened model parameters for one round."""

    client_id: Hashable
    values: np.ndarray = field(repr=False)
    round: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size == 0:
            raise DegenerateUpdateError(f"client {self.client_id!r}: empty update")
        if not np.all(np.isfinite(values)):
            raise DegenerateUpdateError(f"client {self.client_id!r}: non-finite entries in update")
        if self.round < 0:
            raise ValueError(f"round must be non-negative, got {self.round}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def with_values(self, values) -> "UpdateVector":
        return UpdateVector(self.client_id, values, self.round)


def flatten(parameters, client_id: Hashable = None, round: int = 0) -> UpdateVector:
    """Concatenate parameter tensors in declared order, row-major within each.

    ``parameters`` is either a sequence of arrays or an ordered mapping of
    name -> array. Returns an :class:`UpdateVector`.
    """
    if hasattr(parameters, "items"):
        named = list(parameters.items())
    else:
        named = [(str(i), p) for i, p in enumerate(parameters)]
    if not named:
        raise ValueError("cannot flatten an empty parameter list")
    chunks = []
    for name, tensor in named:
        arr = np.asarray(tensor, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise DegenerateUpdateError(f"parameter tensor {name!r} has non-finite entries")
        chunks.append(arr.ravel(order="C"))
    return UpdateVector(client_id, np.concatenate(chunks), round)


def unflatten(values, shapes: Sequence[tuple]) -> list[np.ndarray]:
    """Inverse of :func:`flatten` given the model's shape signature."""
    values = np.asarray(getattr(values, "values", values), dtype=np.float64)
    sizes = [int(np.prod(s)) for s in shapes]
    if sum(sizes) != values.size:
        raise ValueError(f"shape signature expects {sum(sizes)} values, got {values.size}")
    out, start = [], 0
    for shape, size in zip(shapes, sizes):
        out.append(values[start:start + size].reshape(shape).copy())
        start += size
    return out


def _as_array(u) -> np.ndarray:
    return np.asarray(getattr(u, "values", u), dtype=np.float64)


def normalize(u):
    """Scale ``u`` to unit Euclidean norm. Zero vectors are rejected."""
    values = _as_array(u)
    norm = np.linalg.norm(values)
    if not norm > 0:
        cid = getattr(u, "client_id", None)
        raise DegenerateUpdateError(f"zero-norm update (client {cid!r}) cannot be normalized")
    unit = values / norm
    if isinstance(u, UpdateVector):
        return u.with_values(unit)
    return unit


def cosine_distance(a, b) -> float:
    """``1 - cos(a, b)``, clamped to [0, 2]."""
    a, b = _as_array(a).ravel(), _as_array(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if not (na > 0 and nb > 0):
        raise DegenerateUpdateError("cosine distance undefined for zero vectors")
    return float(np.clip(1.0 - np.dot(a, b) / (na * nb), 0.0, 2.0))


def stack_updates(updates: Sequence) -> np.ndarray:
    """Stack updates into an ``(n, d)`` array, checking equal lengths."""
    rows = [_as_array(u).ravel() for u in updates]
    if not rows:
        raise ValueError("no updates given")
    d = rows[0].size
    for u, row in zip(updates, rows):
        if row.size != d:
            cid = getattr(u, "client_id", None)
            raise ValueError(f"client {cid!r}: update length {row.size} != {d}")
    return np.vstack(rows)


def pairwise_distances(updates: Sequence) -> np.ndarray:
    """Symmetric ``n x n`` matrix of cosine distances with zero diagonal."""
    if len(updates) < 2:
        raise ValueError(f"need at least 2 updates, got {len(updates)}")
    X = stack_updates(updates)
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(~(norms > 0))
    if bad.size:
        cid = getattr(updates[bad[0]], "client_id", int(bad[0]))
        raise DegenerateUpdateError(f"client {cid!r}: zero-norm update")
    U = X / norms[:, None]
    D = 1.0 - U @ U.T
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return np.clip(D, 0.0, 2.0)

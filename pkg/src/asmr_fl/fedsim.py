"""Deterministic federated-learning simulation on a synthetic classification task.

The learner is a linear softmax classifier. Clients train one local epoch of
mini-batch gradient descent from the current global model and send back their
full flattened parameters; the server runs a defense and averages what it keeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .asmr import DetectionVerdict, asmr_detect
from .attacks import (
    STREAM_ANA,
    STREAM_CORRUPT,
    AttackSpec,
    _int_key,
    apply_ana,
    apply_sfa,
    corrupt_labels,
    derive_rng,
    schedule_round,
)
from .baselines import cfl_split, dnc_detect, mkrum_select
from .geometry import UpdateVector, flatten, stack_updates, unflatten

__all__ = [
    "SyntheticTask",
    "Shard",
    "GlobalModel",
    "RoundRecord",
    "SimulationState",
    "RoundFailedError",
    "DEFENSES",
    "generate_task",
    "partition_clients",
    "softmax_loss_and_grad",
    "local_train",
    "train_solo",
    "fedavg",
    "make_defense",
    "init_state",
    "run_round",
    "run_experiment",
]

STREAM_TASK = 10
STREAM_PARTITION = 11
STREAM_TRAIN = 12

DEFENSES = ("none", "asmr", "mkrum", "dnc", "cfl")
SIM_DNC_MAX_ITER = 100_000


class RoundFailedError(RuntimeError):
    """A round could not produce a new global model."""


@dataclass(frozen=True)
class Shard:
    X: np.ndarray
    y: np.ndarray
    indices: np.ndarray | None = None  # positions in the train split

    def __len__(self):
        return self.y.size


@dataclass(frozen=True)
class SyntheticTask:
    n_classes: int
    dim: int
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    means: np.ndarray
    noise_scale: float

    @property
    def train(self) -> Shard:
        return Shard(self.X_train, self.y_train, np.arange(self.y_train.size))


def generate_task(n_classes: int = 9, dim: int = 64, n_samples: int = 5000,
                  separation: float = 4.0, seed: int = 0, noise_scale: float = 1.0,
                  train_fraction: float = 0.7) -> SyntheticTask:
    """Gaussian blobs with class means at pairwise distance exactly ``separation``.

    Means sit on a randomly rotated scaled simplex of orthogonal axes, which
    needs ``n_classes <= dim``.
    """
    if n_classes < 2 or dim < 2:
        raise ValueError("need at least 2 classes and 2 dimensions")
    if n_samples < 10 * n_classes:
        raise ValueError(f"n_samples must be at least 10 * n_classes = {10 * n_classes}")
    if n_classes > dim:
        raise ValueError(f"cannot place {n_classes} equidistant class means in {dim} dimensions")
    rng = derive_rng(seed, STREAM_TASK)
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    means = (separation / np.sqrt(2.0)) * Q[:, :n_classes].T
    means -= means.mean(axis=0)

    y = np.arange(n_samples) % n_classes
    y = y[rng.permutation(n_samples)]
    X = means[y] + noise_scale * rng.standard_normal((n_samples, dim))
    n_train = int(round(train_fraction * n_samples))
    return SyntheticTask(n_classes, dim, X[:n_train], y[:n_train], X[n_train:], y[n_train:],
                         means, noise_scale)


def partition_clients(task: SyntheticTask, n_clients: int, seed: int) -> list[Shard]:
    """Seeded shuffle of the train split into equal (+-1) disjoint shards."""
    if n_clients < 1:
        raise ValueError("need at least one client")
    n = task.y_train.size
    perm = derive_rng(seed, STREAM_PARTITION).permutation(n)
    parts = np.array_split(perm, n_clients)
    covered = np.sort(np.concatenate(parts))
    assert np.array_equal(covered, np.arange(n)), "shards must cover the train split exactly"
    return [Shard(task.X_train[p], task.y_train[p], p) for p in parts]


@dataclass(frozen=True)
class GlobalModel:
    weights: np.ndarray  # (K, d)
    bias: np.ndarray     # (K,)

    def __post_init__(self):
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("model parameters must be finite")

    @classmethod
    def zeros(cls, n_classes: int, dim: int) -> "GlobalModel":
        return cls(np.zeros((n_classes, dim)), np.zeros(n_classes))

    @property
    def shapes(self) -> list[tuple]:
        return [self.weights.shape, self.bias.shape]

    def flatten(self, client_id=None, round: int = 0) -> UpdateVector:
        return flatten({"weights": self.weights, "bias": self.bias}, client_id, round)

    @classmethod
    def from_vector(cls, values, n_classes: int, dim: int) -> "GlobalModel":
        W, b = unflatten(values, [(n_classes, dim), (n_classes,)])
        return cls(W, b)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(X @ self.weights.T + self.bias, axis=1)

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(X) == y))


def softmax_loss_and_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy and its gradients w.r.t. ``W`` and ``b``."""
    logits = X @ W.T + b
    logits = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    total = exp.sum(axis=1, keepdims=True)
    probs = exp / total
    m = y.size
    loss = float(np.mean(np.log(total[:, 0]) - logits[np.arange(m), y]))
    delta = probs
    delta[np.arange(m), y] -= 1.0
    delta /= m
    return loss, delta.T @ X, delta.sum(axis=0)


def local_train(global_model: GlobalModel, shard: Shard, epochs: int = 1, lr: float = 0.1,
                seed=0, batch_size: int = 32, client_id=None, round: int = 0) -> UpdateVector:
    """Mini-batch gradient descent from the global parameters.

    Returns the full resulting parameters (not a delta).
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    W = global_model.weights.copy()
    b = global_model.bias.copy()
    n = len(shard)
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, gW, gb = softmax_loss_and_grad(W, b, shard.X[idx], shard.y[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at local step {step} (client {client_id!r})")
            W -= lr * gW
            b -= lr * gb
            step += 1
    return GlobalModel(W, b).flatten(client_id, round)


def train_solo(task: SyntheticTask, shard: Shard, epochs: int, lr: float = 0.1,
               batch_size: int = 32, seed: int = 0) -> GlobalModel:
    """Train a model from scratch on one shard only."""
    update = local_train(GlobalModel.zeros(task.n_classes, task.dim), shard, epochs, lr,
                         seed, batch_size)
    return GlobalModel.from_vector(update, task.n_classes, task.dim)


def fedavg(updates: Sequence, n_classes: int | None = None, dim: int | None = None):
    """Element-wise mean of the updates.

    Returns a :class:`GlobalModel` when the model shape is given, else the raw
    mean vector.
    """
    if len(updates) == 0:
        raise RoundFailedError("no updates to aggregate (the defense excluded every client)")
    mean = stack_updates(updates).mean(axis=0)
    if n_classes is None:
        return mean
    return GlobalModel.from_vector(mean, n_classes, dim)


def _keep_all(updates):
    ids = tuple(u.client_id for u in updates)
    return DetectionVerdict(ids, frozenset(ids), frozenset(), np.zeros(len(ids)), method="none")


def make_defense(name: str, f: int = 3) -> Callable[[Sequence[UpdateVector]], DetectionVerdict]:
    """Defense callable by name: none, asmr, mkrum, dnc or cfl."""
    if name == "none":
        return _keep_all
    if name == "asmr":
        return asmr_detect
    if name == "mkrum":
        return lambda updates: mkrum_select(updates, f)
    if name == "dnc":
        # near-degenerate spectra (several noisy updates of similar energy)
        # need more than the library's default 1000 iterations
        return lambda updates: dnc_detect(updates, f, max_iter=SIM_DNC_MAX_ITER)
    if name == "cfl":
        return cfl_split
    raise ValueError(f"unknown defense {name!r}; expected one of {DEFENSES}")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    updates: tuple
    malfunctioning: frozenset
    verdict: DetectionVerdict
    model: GlobalModel
    accuracy: float


@dataclass
class SimulationState:
    task: SyntheticTask
    shards: list
    model: GlobalModel
    corrupted: dict = field(default_factory=dict)  # client -> corrupted Shard
    epochs: int = 1
    lr: float = 0.1
    batch_size: int = 32

    @property
    def client_ids(self) -> tuple:
        return tuple(range(len(self.shards)))


def init_state(task: SyntheticTask, n_clients: int, attack: AttackSpec | None, seed: int,
               epochs: int = 1, lr: float = 0.1, batch_size: int = 32) -> SimulationState:
    """Partition data and prepare the corrupted shards of unreliable clients.

    A client's corrupted shard is drawn once and reused in every round it
    malfunctions.
    """
    shards = partition_clients(task, n_clients, seed)
    corrupted = {}
    if attack is not None:
        attack.validate_population(range(n_clients))
        for cid in sorted(attack.client_ids):
            if attack.mechanism_of(cid) == "unreliable":
                sh = shards[cid]
                _, y_bad = corrupt_labels(sh.X, sh.y, attack.corruption_fraction,
                                          derive_rng(seed, STREAM_CORRUPT, _int_key(cid)),
                                          task.n_classes)
                corrupted[cid] = Shard(sh.X, y_bad, sh.indices)
    return SimulationState(task, shards, GlobalModel.zeros(task.n_classes, task.dim), corrupted,
                           epochs, lr, batch_size)


def run_round(state: SimulationState, defense, attack: AttackSpec | None, round: int,
              seed: int) -> RoundRecord:
    """One round: local training, malfunction injection, detection, FedAvg.

    Updates state.model in place of the old global model and returns the record.
    """
    if isinstance(defense, str):
        defense = make_defense(defense)
    active = schedule_round(attack, round, seed) if attack is not None else frozenset()
    updates = []
    for cid in state.client_ids:
        mech = attack.mechanism_of(cid) if cid in active else None
        shard = state.corrupted[cid] if mech == "unreliable" else state.shards[cid]
        u = local_train(state.model, shard, state.epochs, state.lr,
                        derive_rng(seed, STREAM_TRAIN, round, cid), state.batch_size,
                        client_id=cid, round=round)
        if mech == "sfa":
            u = apply_sfa(u, attack.sfa_constant)
        elif mech == "ana":
            u = apply_ana(u, attack.ana_sigma, derive_rng(seed, STREAM_ANA, round, cid))
        updates.append(u)

    verdict = defense(updates)
    kept = [u for u in updates if u.client_id in verdict.kept]
    if not kept:
        raise RoundFailedError(f"round {round}: defense excluded all {len(updates)} clients")
    assert not any(u.client_id in verdict.excluded for u in kept)
    model = fedavg(kept, state.task.n_classes, state.task.dim)
    state.model = model
    acc = model.accuracy(state.task.X_test, state.task.y_test)
    return RoundRecord(round, tuple(updates), frozenset(active), verdict, model, acc)


def run_experiment(config, seed: int | None = None) -> list[RoundRecord]:
    """All rounds of one seeded run described by an ``ExperimentConfig``.

    Rounds are numbered from 1. Deterministic given ``(config, seed)``.
    """
    seed = config.seeds[0] if seed is None else seed
    task = generate_task(config.n_classes, config.dim, config.n_samples, config.separation,
                         seed, config.noise_scale)
    attack = config.attack_spec(seed)
    state = init_state(task, config.n_clients, attack, seed, config.epochs, config.lr,
                       config.batch_size)
    defense = make_defense(config.defense, config.f)
    records = []
    for r in range(1, config.rounds + 1):
        try:
            records.append(run_round(state, defense, attack, r, seed))
        except Exception as exc:
            raise RoundFailedError(f"seed {seed}, round {r}: {exc}") from exc
    return records

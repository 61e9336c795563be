"""Attack-strength calibration on the attack-free synthetic task.

* additive noise: sigma such that the undefended final accuracy drops by
  20-30% relative to the attack-free run;
* label corruption: smallest fraction whose solo-trained model loses at least
  30% relative accuracy;
* sign flipping: smallest constant with which a single undefended flipping
  client drives the global model to chance-level accuracy.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .attacks import corrupt_labels, derive_rng
from .config import ExperimentConfig
from .fedsim import Shard, generate_task, partition_clients, run_experiment, train_solo

logger = logging.getLogger(__name__)

__all__ = [
    "attack_free_accuracy",
    "calibrate_ana_sigma",
    "calibrate_corruption_fraction",
    "calibrate_sfa_constant",
    "calibrate_all",
]

CALIBRATION_SEEDS = (0, 1, 2)
STREAM_CALIBRATION = 30


def _final_accuracy(config: ExperimentConfig, seeds) -> float:
    return float(np.mean([run_experiment(config, s)[-1].accuracy for s in seeds]))


def attack_free_accuracy(config: ExperimentConfig, seeds=CALIBRATION_SEEDS) -> float:
    return _final_accuracy(config.replace(attack="none", defense="none"), seeds)


def calibrate_ana_sigma(config: ExperimentConfig, seeds=CALIBRATION_SEEDS, band=(0.2, 0.3),
                        bracket=(1e-3, 10.0), max_iter=40) -> dict:
    """Bisect log-sigma until the undefended relative degradation lies in ``band``."""
    clean = attack_free_accuracy(config, seeds)
    target = 0.5 * (band[0] + band[1])
    attacked = config.replace(attack="ana", defense="none")

    def drop(sigma):
        return 1.0 - _final_accuracy(attacked.replace(ana_sigma=sigma), seeds) / clean

    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    if drop(math.exp(hi)) < band[0]:
        raise RuntimeError(f"sigma={bracket[1]} does not degrade accuracy by {band[0]:.0%}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        d = drop(math.exp(mid))
        logger.debug("ana sigma=%.4g drop=%.3f", math.exp(mid), d)
        if band[0] <= d <= band[1]:
            return {"ana_sigma": math.exp(mid), "relative_drop": d, "clean_accuracy": clean}
        if d < target:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(f"no sigma in {bracket} gave a relative drop within {band}")


def calibrate_corruption_fraction(config: ExperimentConfig, seeds=CALIBRATION_SEEDS,
                                  min_drop=0.3, grid=None) -> dict:
    """Smallest corruption fraction whose solo model loses ``min_drop`` relative accuracy.

    The solo model trains for ``config.rounds`` epochs on client 0's shard.
    """
    grid = np.round(np.arange(0.05, 1.0001, 0.05), 2) if grid is None else grid
    cases = []
    for seed in seeds:
        task = generate_task(config.n_classes, config.dim, config.n_samples, config.separation,
                             seed, config.noise_scale)
        shard = partition_clients(task, config.n_clients, seed)[0]
        clean = train_solo(task, shard, config.rounds, config.lr, config.batch_size, seed)
        cases.append((task, shard, clean.accuracy(task.X_test, task.y_test)))
    for rho in grid:
        drops = []
        for seed, (task, shard, clean_acc) in zip(seeds, cases):
            _, y_bad = corrupt_labels(shard.X, shard.y, float(rho),
                                      derive_rng(seed, STREAM_CALIBRATION), task.n_classes)
            model = train_solo(task, Shard(shard.X, y_bad), config.rounds, config.lr,
                               config.batch_size, seed)
            drops.append(1.0 - model.accuracy(task.X_test, task.y_test) / clean_acc)
        logger.debug("corruption %.2f drop=%.3f", rho, np.mean(drops))
        if np.mean(drops) >= min_drop:
            return {"corruption_fraction": float(rho), "relative_drop": float(np.mean(drops))}
    raise RuntimeError(f"no corruption fraction in the grid reaches a {min_drop:.0%} drop")


def calibrate_sfa_constant(config: ExperimentConfig, seeds=CALIBRATION_SEEDS,
                           chance_factor=1.5, max_constant=None) -> dict:
    """Smallest integer constant for which one flipping client, undefended,
    leaves the final model at or below ``chance_factor / n_classes`` accuracy."""
    ceiling = chance_factor / config.n_classes
    single = config.replace(attack="sfa", defense="none", regime="fixed", designated=None,
                            n_malfunctioning=1, probability=1.0)
    max_constant = max_constant or 4 * config.n_clients
    for c in range(1, max_constant + 1):
        acc = _final_accuracy(single.replace(sfa_constant=float(c)), seeds)
        logger.debug("sfa constant=%d accuracy=%.3f", c, acc)
        if acc <= ceiling:
            return {"sfa_constant": float(c), "single_client_accuracy": acc}
    raise RuntimeError(f"no constant up to {max_constant} reaches chance-level accuracy")


def calibrate_all(config: ExperimentConfig, seeds=CALIBRATION_SEEDS) -> dict:
    return {
        "ana": calibrate_ana_sigma(config, seeds),
        "unreliable": calibrate_corruption_fraction(config, seeds),
        "sfa": calibrate_sfa_constant(config, seeds),
    }

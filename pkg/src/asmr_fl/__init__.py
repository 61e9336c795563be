"""Malfunctioning-client detection for federated learning by angular support.

The detector (:func:`asmr_detect`) scores every client's flattened parameters
by how well its peers support it in cosine distance and excludes everything
above the largest gap in the sorted outlier factors. Multi-Krum, DnC and a
CFL-style bipartition are provided for comparison, together with a small
deterministic simulator and experiment harness.
"""

from .asmr import DetectionVerdict, OutlierScores, asmr_detect, gap_boundary, outlier_scores
from .attacks import AttackSpec, apply_ana, apply_sfa, corrupt_labels, schedule_round
from .baselines import cfl_split, dnc_detect, mkrum_select
from .config import ExperimentConfig, load_config
from .fedsim import fedavg, generate_task, local_train, partition_clients, run_experiment, run_round
from .geometry import UpdateVector, cosine_distance, flatten, normalize, pairwise_distances, unflatten
from .harness import aggregate_metrics, compute_round_metrics, run_sweep, write_results

__version__ = "0.1.0"

__all__ = [
    "DetectionVerdict",
    "OutlierScores",
    "asmr_detect",
    "gap_boundary",
    "outlier_scores",
    "AttackSpec",
    "apply_ana",
    "apply_sfa",
    "corrupt_labels",
    "schedule_round",
    "cfl_split",
    "dnc_detect",
    "mkrum_select",
    "ExperimentConfig",
    "load_config",
    "fedavg",
    "generate_task",
    "local_train",
    "partition_clients",
    "run_experiment",
    "run_round",
    "UpdateVector",
    "cosine_distance",
    "flatten",
    "normalize",
    "pairwise_distances",
    "unflatten",
    "aggregate_metrics",
    "compute_round_metrics",
    "run_sweep",
    "write_results",
]

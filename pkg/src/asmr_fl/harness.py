"""Detection metrics, multi-seed sweeps and result files.

``rounds.csv`` holds one row per (seed, round); ``summary.json`` holds the
seed-averaged rates, per-seed final accuracies and the full config echo.
Undefined rates (no malfunctioning or no benign clients in a round) are
written as empty CSV cells and skipped when averaging.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .config import ExperimentConfig
from .fedsim import RoundRecord, run_experiment

__all__ = [
    "RoundMetrics",
    "compute_round_metrics",
    "aggregate_metrics",
    "run_sweep",
    "rounds_csv",
    "write_results",
    "read_rounds_csv",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("seed", "round", "defense", "attack", "regime", "tpr", "fpr", "accuracy",
               "excluded_ids", "truth_ids")

UNDEFINED_RULE = ("tpr is undefined in rounds without malfunctioning clients and fpr in rounds "
                  "without benign clients; undefined rounds are excluded from the means")


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    tpr: float | None
    fpr: float | None
    test_accuracy: float
    excluded: frozenset
    truth: frozenset
    seed: int | None = None


def compute_round_metrics(verdict, ground_truth: Iterable, accuracy: float, round: int = 0,
                          seed: int | None = None) -> RoundMetrics:
    """TPR/FPR of one verdict against the round's actual malfunctioning clients."""
    population = set(verdict.client_ids)
    truth = frozenset(ground_truth)
    if not truth <= population:
        raise ValueError(f"ground truth {sorted(truth - population)} not in the round's population")
    benign = population - truth
    excluded = frozenset(verdict.excluded)
    tpr = len(excluded & truth) / len(truth) if truth else None
    fpr = len(excluded & benign) / len(benign) if benign else None
    return RoundMetrics(round, tpr, fpr, float(accuracy), excluded, truth, seed)


def metrics_from_records(records: Sequence[RoundRecord], seed: int | None = None) -> list[RoundMetrics]:
    return [compute_round_metrics(r.verdict, r.malfunctioning, r.accuracy, r.round, seed)
            for r in records]


def _mean(values):
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def aggregate_metrics(per_seed: Mapping[int, Sequence[RoundMetrics]]) -> dict:
    """Seed-level summary: mean TPR/FPR over defined rounds, mean final accuracy."""
    if not per_seed:
        raise ValueError("need metrics for at least one seed")
    seeds = {}
    all_tpr, all_fpr = [], []
    for seed, rows in per_seed.items():
        rows = sorted(rows, key=lambda m: m.round)
        tprs = [m.tpr for m in rows if m.tpr is not None]
        fprs = [m.fpr for m in rows if m.fpr is not None]
        all_tpr += tprs
        all_fpr += fprs
        seeds[str(seed)] = {
            "tpr": _mean(tprs),
            "fpr": _mean(fprs),
            "final_accuracy": rows[-1].test_accuracy,
        }
    finals = [s["final_accuracy"] for s in seeds.values()]
    return {
        "tpr": _mean(all_tpr),
        "fpr": _mean(all_fpr),
        "final_accuracy": sum(finals) / len(finals),
        "rounds_with_defined_tpr": len(all_tpr),
        "rounds_with_defined_fpr": len(all_fpr),
        "per_seed": seeds,
    }


def run_sweep(config: ExperimentConfig) -> tuple[dict, dict]:
    """Run every seed of ``config``; returns ``(metrics by seed, summary)``."""
    per_seed = {}
    for seed in config.seeds:
        per_seed[seed] = metrics_from_records(run_experiment(config, seed), seed)
    summary = aggregate_metrics(per_seed)
    summary["config"] = config.to_dict()
    summary["attack_parameters"] = {
        "ana_sigma": config.ana_sigma,
        "sfa_constant": config.sfa_constant,
        "corruption_fraction": config.corruption_fraction,
    }
    summary["undefined_rate_rule"] = UNDEFINED_RULE
    return per_seed, summary


def _fmt(x):
    return "" if x is None else repr(float(x))


def _ids(s):
    return ";".join(str(c) for c in sorted(s))


def rounds_csv(per_seed: Mapping[int, Sequence[RoundMetrics]], config: ExperimentConfig) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for seed in sorted(per_seed):
        for m in sorted(per_seed[seed], key=lambda m: m.round):
            writer.writerow([seed, m.round, config.defense, config.attack, config.regime,
                             _fmt(m.tpr), _fmt(m.fpr), _fmt(m.test_accuracy),
                             _ids(m.excluded), _ids(m.truth)])
    return buf.getvalue()


def write_results(out_dir, per_seed, summary, config: ExperimentConfig) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "rounds.csv", out / "summary.json"
    csv_path.write_text(rounds_csv(per_seed, config), encoding="utf-8", newline="")
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, json_path


def _parse_ids(cell: str) -> frozenset:
    return frozenset(int(c) for c in cell.split(";")) if cell else frozenset()


def read_rounds_csv(path) -> dict[int, list[RoundMetrics]]:
    """Inverse of :func:`write_results` for ``rounds.csv``."""
    per_seed: dict[int, list[RoundMetrics]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            seed = int(row["seed"])
            m = RoundMetrics(
                round=int(row["round"]),
                tpr=float(row["tpr"]) if row["tpr"] else None,
                fpr=float(row["fpr"]) if row["fpr"] else None,
                test_accuracy=float(row["accuracy"]),
                excluded=_parse_ids(row["excluded_ids"]),
                truth=_parse_ids(row["truth_ids"]),
                seed=seed,
            )
            per_seed.setdefault(seed, []).append(m)
    return per_seed


def format_summary(summary: dict) -> str:
    def f(x):
        return "  -  " if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.3f}"
    lines = [f"{'seed':>6}  {'TPR':>6}  {'FPR':>6}  {'Acc':>6}"]
    for seed, s in summary["per_seed"].items():
        lines.append(f"{seed:>6}  {f(s['tpr']):>6}  {f(s['fpr']):>6}  {f(s['final_accuracy']):>6}")
    lines.append(f"{'mean':>6}  {f(summary['tpr']):>6}  {f(summary['fpr']):>6}  "
                 f"{f(summary['final_accuracy']):>6}")
    return "\n".join(lines)

import json
import os

import numpy as np
import pytest

from asmr_fl.asmr import DetectionVerdict
from asmr_fl.cli import run_cli
from asmr_fl.config import ConfigError, ExperimentConfig, dump_config, load_config
from asmr_fl.harness import (
    CSV_COLUMNS,
    RoundMetrics,
    aggregate_metrics,
    compute_round_metrics,
    read_rounds_csv,
    run_sweep,
    write_results,
)

IDS = tuple("abcxyzpqrs")  # 10 clients


def verdict(excluded, ids=IDS):
    excluded = frozenset(excluded)
    return DetectionVerdict(ids, frozenset(ids) - excluded, excluded, np.zeros(len(ids)))


def test_metrics_perfect_detection():
    m = compute_round_metrics(verdict("abc"), "abc", 0.9)
    assert (m.tpr, m.fpr) == (1.0, 0.0)


def test_metrics_no_exclusions():
    m = compute_round_metrics(verdict(""), "abc", 0.9)
    assert (m.tpr, m.fpr) == (0.0, 0.0)


def test_metrics_partial():
    m = compute_round_metrics(verdict("ax"), "abc", 0.5)
    # 1 of 3 malfunctioning caught, 1 of 7 benign wrongly excluded
    assert m.tpr == pytest.approx(1 / 3) and m.fpr == pytest.approx(1 / 7)


def test_metrics_undefined_rates():
    m = compute_round_metrics(verdict("a"), "", 0.8)
    assert m.tpr is None and m.fpr == pytest.approx(0.1)
    m = compute_round_metrics(verdict("abc", ids=tuple("abc")), "abc", 0.8)
    assert m.fpr is None and m.tpr == 1.0


def test_metrics_population_mismatch():
    with pytest.raises(ValueError):
        compute_round_metrics(verdict("a"), "aw", 0.5)


def _round(r, tpr, fpr, acc):
    return RoundMetrics(r, tpr, fpr, acc, frozenset(), frozenset())


def test_aggregate_examples():
    s = aggregate_metrics({0: [_round(1, 1.0, 0.0, 0.5), _round(2, 1.0, 0.0, 0.7)]})
    assert s["tpr"] == 1.0 and s["final_accuracy"] == 0.7
    s = aggregate_metrics({0: [_round(1, None, 0.0, 0.92)], 1: [_round(1, None, 0.0, 0.94)]})
    assert s["final_accuracy"] == pytest.approx(0.93)
    assert s["tpr"] is None and s["rounds_with_defined_tpr"] == 0
    assert set(s) >= {"tpr", "fpr", "final_accuracy", "per_seed"}


def test_aggregate_skips_undefined_rounds():
    s = aggregate_metrics({0: [_round(1, None, 0.2, 0.5), _round(2, 0.5, 0.0, 0.6)]})
    assert s["tpr"] == 0.5 and s["fpr"] == pytest.approx(0.1)


def test_aggregate_needs_a_seed():
    with pytest.raises(ValueError):
        aggregate_metrics({})


@pytest.fixture(scope="module")
def dynamic_sweep():
    cfg = ExperimentConfig(defense="mkrum", attack="sfa", regime="dynamic", rounds=4, seeds=(0, 1))
    per_seed, summary = run_sweep(cfg)
    return cfg, per_seed, summary


def test_single_seed_summary_equals_seed(dynamic_sweep):
    cfg, per_seed, _ = dynamic_sweep
    one = aggregate_metrics({0: per_seed[0]})
    assert one["tpr"] == one["per_seed"]["0"]["tpr"]
    assert one["fpr"] == one["per_seed"]["0"]["fpr"]
    assert one["final_accuracy"] == per_seed[0][-1].test_accuracy


def test_metric_ranges(dynamic_sweep):
    _, per_seed, _ = dynamic_sweep
    for rows in per_seed.values():
        for m in rows:
            assert 0.0 <= m.test_accuracy <= 1.0
            for rate in (m.tpr, m.fpr):
                assert rate is None or 0.0 <= rate <= 1.0
            assert (m.tpr is None) == (len(m.truth) == 0)


def test_results_round_trip(tmp_path, dynamic_sweep):
    cfg, per_seed, summary = dynamic_sweep
    csv_path, json_path = write_results(tmp_path, per_seed, summary, cfg)
    text = csv_path.read_text(encoding="utf-8")
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS) and text.endswith("\n")
    back = read_rounds_csv(csv_path)
    assert back == {s: list(rows) for s, rows in per_seed.items()}
    loaded = json.loads(json_path.read_text(encoding="utf-8"))
    assert loaded["final_accuracy"] == summary["final_accuracy"]
    assert loaded["config"]["defense"] == "mkrum"
    assert loaded["attack_parameters"]["sfa_constant"] == cfg.sfa_constant


def test_undefined_rates_written_as_empty_cells(tmp_path):
    cfg = ExperimentConfig(attack="none", defense="asmr", rounds=2, seeds=(0,))
    per_seed, summary = run_sweep(cfg)
    csv_path, _ = write_results(tmp_path, per_seed, summary, cfg)
    row = csv_path.read_text().splitlines()[1].split(",")
    assert row[CSV_COLUMNS.index("tpr")] == ""
    assert row[CSV_COLUMNS.index("truth_ids")] == ""


# --- config files ---------------------------------------------------------------

def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(defense="dnc", attack="combined", regime="dynamic", seeds=(3,),
                           designated=(1, 4, 7, 9), out="res")
    path = tmp_path / "exp.cfg"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_config_seed_count(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("[experiment]\nseeds = 4\nattack = sfa\n")
    assert load_config(path).seeds == (0, 1, 2, 3)


@pytest.mark.parametrize("body, match", [
    ("[experiment]\nlearning_rate = 0.1\n", "unknown key"),
    ("[experiment]\ndefense = fltrust\n", "unknown defense"),
    ("[experiment]\nrounds = many\n", "bad value"),
    ("[other]\nrounds = 3\n", "section"),
    ("rounds = 3\n", "cannot parse"),
])
def test_config_errors(tmp_path, body, match):
    path = tmp_path / "bad.cfg"
    path.write_text(body)
    with pytest.raises(ConfigError, match=match):
        load_config(path)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.cfg")


def test_config_invariants():
    with pytest.raises(ConfigError):
        ExperimentConfig(rounds=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(seeds=())
    with pytest.raises(ConfigError):
        ExperimentConfig(attack="sfa", designated=(10,))


def test_designated_clients_seeded():
    cfg = ExperimentConfig(attack="sfa", regime="dynamic")
    assert len(cfg.designated_clients(0)) == 4
    assert cfg.designated_clients(0) == cfg.designated_clients(0)
    assert cfg.attack_spec(0).probability == 0.75
    assert ExperimentConfig().attack_spec(0) is None


# --- command line ---------------------------------------------------------------

def test_cli_inline_run(tmp_path, capsys):
    out = tmp_path / "res"
    code = run_cli(["run", "--defense", "asmr", "--attack", "sfa", "--regime", "fixed",
                    "--rounds", "2", "--seeds", "2", "--out", str(out)])
    assert code == 0
    assert (out / "rounds.csv").exists() and (out / "summary.json").exists()
    assert len((out / "rounds.csv").read_text().splitlines()) == 1 + 2 * 2
    assert "mean" in capsys.readouterr().out


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("[experiment]\ndefense = mkrum\nattack = ana\nrounds = 2\n")
    out = tmp_path / "results"
    assert run_cli(["run", "--config", str(cfg), "--seeds", "3", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["seeds"] == [0, 1, 2] and summary["config"]["defense"] == "mkrum"


def test_cli_missing_config(tmp_path, capsys):
    missing = tmp_path / "missing.cfg"
    assert run_cli(["run", "--config", str(missing)]) == 3
    assert str(missing) in capsys.readouterr().err


def test_cli_unknown_names(capsys):
    assert run_cli(["run", "--defense", "fltrust"]) == 2
    assert "fltrust" in capsys.readouterr().err
    assert run_cli(["run", "--attack", "backdoor"]) == 2
    assert "backdoor" in capsys.readouterr().err


def test_cli_bad_config_contents(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("[experiment]\nattack = backdoor\n")
    assert run_cli(["run", "--config", str(cfg)]) == 2
    assert "unknown attack" in capsys.readouterr().err


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_cli_unwritable_output(tmp_path, capsys):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    assert run_cli(["run", "--rounds", "1", "--seeds", "1", "--out", str(locked / "x")]) == 4
    assert "not writable" in capsys.readouterr().err


def test_cli_output_path_is_a_file(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run_cli(["run", "--rounds", "1", "--seeds", "1", "--out", str(blocker)]) == 4
    assert "not writable" in capsys.readouterr().err

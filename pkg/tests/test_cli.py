from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from dialign.cli import main
from dialign.env import read_episodes, replay_rewards
from dialign.metrics import alignment_curve, alignment_matrix
from dialign.profiles import SlotMatcher
from dialign.rl import load_checkpoint


def _read_csv(path: Path) -> list[dict]:
    with path.open() as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def scenario_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    out = tmp_path_factory.mktemp("scenarios")
    assert main(["gen-scenarios", "--out", str(out), "--count", "6", "--seed", "3"]) == 0
    return out


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory: pytest.TempPathFactory, scenario_dir: Path) -> Path:
    out = tmp_path_factory.mktemp("run")
    code = main(
        [
            "train",
            "--scenarios",
            str(scenario_dir),
            "--out",
            str(out),
            "--rounds",
            "3",
            "--samples",
            "1",
            "--seed",
            "0",
        ]
    )
    assert code == 0
    return out


# --- exit codes -----------------------------------------------------------------


def test_usage_error_exits_1() -> None:
    assert main(["train"]) == 1  # missing required arguments
    assert main(["no-such-command"]) == 1


def test_validation_error_exits_2(tmp_path: Path) -> None:
    # Empty scenario directory is a validation problem, not a crash.
    out = tmp_path / "out"
    empty = tmp_path / "empty"
    empty.mkdir()
    code = main(
        ["train", "--scenarios", str(empty), "--out", str(out), "--rounds", "1"]
    )
    assert code == 2


def test_bad_matcher_spec_exits_2(scenario_dir: Path, tmp_path: Path) -> None:
    code = main(
        [
            "train",
            "--scenarios",
            str(scenario_dir),
            "--out",
            str(tmp_path / "x"),
            "--matcher",
            "bogus:9",
            "--rounds",
            "1",
        ]
    )
    assert code == 2


def test_missing_scenario_path_exits_2(tmp_path: Path) -> None:
    code = main(
        [
            "train",
            "--scenarios",
            str(tmp_path / "definitely-not-here"),
            "--out",
            str(tmp_path / "y"),
            "--rounds",
            "1",
        ]
    )
    assert code == 2


# --- gen-scenarios ----------------------------------------------------------------


def test_gen_scenarios_writes_loadable_files(scenario_dir: Path) -> None:
    files = sorted(scenario_dir.glob("*.json"))
    assert len(files) == 6
    payload = json.loads(files[0].read_text())
    assert {"id", "profile", "horizon", "style_seed"} <= set(payload)


def test_gen_scenarios_conflict_flag_needs_recovery_room(tmp_path: Path) -> None:
    code = main(
        [
            "gen-scenarios",
            "--out",
            str(tmp_path),
            "--count",
            "2",
            "--seed",
            "0",
            "--horizon",
            "6",
            "--conflict",
        ]
    )
    assert code == 2


# --- train ------------------------------------------------------------------------


def test_train_writes_checkpoint_curve_and_config(trained_dir: Path) -> None:
    checkpoint = load_checkpoint(trained_dir / "checkpoint.json")
    assert checkpoint.step == 3
    rows = _read_csv(trained_dir / "curve.csv")
    assert [int(r["step"]) for r in rows] == [1, 2, 3]
    for row in rows:
        assert float(row["mean_total_reward"]) >= 0.0
    run_config = json.loads((trained_dir / "run_config.json").read_text())
    assert run_config["ppo"]["total_rounds"] == 3
    assert run_config["weights"] == [1.0, 1.0]
    assert run_config["matcher"] == "exact"


def test_train_resume_appends_curve(scenario_dir: Path, tmp_path: Path) -> None:
    out = tmp_path / "resume"
    first = main(
        [
            "train",
            "--scenarios",
            str(scenario_dir),
            "--out",
            str(out),
            "--rounds",
            "2",
            "--samples",
            "1",
            "--seed",
            "1",
        ]
    )
    assert first == 0
    second = main(
        [
            "train",
            "--scenarios",
            str(scenario_dir),
            "--out",
            str(out),
            "--rounds",
            "2",
            "--samples",
            "1",
            "--seed",
            "1",
            "--resume",
            str(out / "checkpoint.json"),
        ]
    )
    assert second == 0
    rows = _read_csv(out / "curve.csv")
    assert [int(r["step"]) for r in rows] == [1, 2, 3, 4]
    assert load_checkpoint(out / "checkpoint.json").step == 4


# --- eval --------------------------------------------------------------------------


def test_eval_oracle_writes_episodes_and_curves(scenario_dir: Path, tmp_path: Path) -> None:
    out = tmp_path / "eval"
    code = main(
        [
            "eval",
            "--scenarios",
            str(scenario_dir),
            "--out",
            str(out),
            "--agent",
            "oracle",
        ]
    )
    assert code == 0
    episodes = list(read_episodes(out / "episodes.jsonl"))
    assert len(episodes) == 6
    turncurve = _read_csv(out / "turncurve.csv")
    assert len(turncurve) == 10
    altable = _read_csv(out / "altable.csv")
    assert len(altable) == 1
    assert "turn_1" in altable[0] and "turn_10" in altable[0]
    summary = _read_csv(out / "summary.csv")
    assert len(summary) == 1


def test_eval_summary_is_recomputable_from_episodes(scenario_dir: Path, tmp_path: Path) -> None:
    out = tmp_path / "eval2"
    assert (
        main(
            [
                "eval",
                "--scenarios",
                str(scenario_dir),
                "--out",
                str(out),
                "--agent",
                "oracle",
            ]
        )
        == 0
    )
    episodes = list(read_episodes(out / "episodes.jsonl"))
    curve = alignment_curve(alignment_matrix(episodes))
    turncurve = _read_csv(out / "turncurve.csv")
    for row, level in zip(turncurve, curve):
        assert float(row["alignment_level"]) == pytest.approx(level, abs=1e-9)
    # Rewards in the log replay to the same numbers offline.
    matcher = SlotMatcher(kind="exact")
    for record in episodes:
        for turn, breakdown in zip(record.turns, replay_rewards(record, matcher)):
            assert breakdown.total == pytest.approx(turn.total_reward, abs=1e-9)


def test_eval_policy_agent_uses_checkpoint(trained_dir: Path, scenario_dir: Path, tmp_path: Path) -> None:
    out = tmp_path / "eval3"
    code = main(
        [
            "eval",
            "--scenarios",
            str(scenario_dir),
            "--out",
            str(out),
            "--agent",
            "policy",
            "--checkpoint",
            str(trained_dir / "checkpoint.json"),
        ]
    )
    assert code == 0
    assert (out / "episodes.jsonl").exists()


def test_eval_policy_without_checkpoint_exits_2(scenario_dir: Path, tmp_path: Path) -> None:
    code = main(
        [
            "eval",
            "--scenarios",
            str(scenario_dir),
            "--out",
            str(tmp_path / "e"),
            "--agent",
            "policy",
        ]
    )
    assert code == 2


def test_eval_conflict_mode_injects_default_swap(scenario_dir: Path, tmp_path: Path) -> None:
    out = tmp_path / "evalc"
    code = main(
        [
            "eval",
            "--scenarios",
            str(scenario_dir),
            "--out",
            str(out),
            "--agent",
            "oracle",
            "--mode",
            "conflict",
        ]
    )
    assert code == 0
    episodes = list(read_episodes(out / "episodes.jsonl"))
    for record in episodes:
        assert record.conflict is not None
        assert record.conflict["turn"] == 6


def test_eval_longterm_mode_writes_checkpoint_table(scenario_dir: Path, tmp_path: Path) -> None:
    out = tmp_path / "evall"
    code = main(
        [
            "eval",
            "--scenarios",
            str(scenario_dir),
            "--out",
            str(out),
            "--agent",
            "oracle",
            "--mode",
            "longterm",
            "--horizon",
            "30",
        ]
    )
    assert code == 0
    rows = _read_csv(out / "longterm.csv")
    turns = [row["turn"] for row in rows]
    assert turns[-1] == "avg"
    numeric = rows[:-1]
    for row in numeric:
        assert float(row["profile_score"]) <= float(row["theoretical_max"]) + 1e-9


# --- judge-bench --------------------------------------------------------------------


def test_judge_bench_writes_stats(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    out = tmp_path / "bench.csv"
    code = main(
        ["judge-bench", "--count", "40", "--seed", "5", "--out", str(out)]
    )
    assert code == 0
    rows = _read_csv(out)
    labels = {row["matcher"] for row in rows}
    assert labels == {"exact", "token:0.5"}
    by_label = {row["matcher"]: row for row in rows}
    # Token matching absorbs the paraphrases, exact matching misses them.
    assert float(by_label["token:0.5"]["exact_acc"]) >= float(
        by_label["exact"]["exact_acc"]
    )
    printed = capsys.readouterr().out
    assert "token:0.5" in printed

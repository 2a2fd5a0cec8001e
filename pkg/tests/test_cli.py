"""End-to-end runs of the command line pipeline."""

import csv
import json

from coplace.cli import main
from coplace.planning import plan_near_optimal
from coplace.puzzles import generate_puzzle, read_jsonl


def test_gen_selfplay_analyze_pipeline(tmp_path, capsys):
    puzzles = tmp_path / "p.jsonl"
    episodes = tmp_path / "e.jsonl"
    report = tmp_path / "m.csv"
    errors = tmp_path / "err.csv"

    assert main(["gen", "--objects", "4", "--count", "4", "--seed", "3",
                 "--out", str(puzzles)]) == 0
    assert len(read_jsonl(str(puzzles))) == 4

    assert main(["selfplay", "--puzzles", str(puzzles), "--config", "both",
                 "--verifier", "reasoning", "--out", str(episodes)]) == 0
    assert "SR 100.0%" in capsys.readouterr().out

    assert main(["analyze", str(episodes), "--report", str(report),
                 "--errors", str(errors)]) == 0
    with open(report) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["config"] == "provide_and_seek"
    assert float(rows[0]["sr"]) == 100.0
    with open(errors) as fh:
        error_rows = list(csv.DictReader(fh))
    assert len(error_rows) == 11


def test_selfplay_with_noise(tmp_path):
    puzzles = tmp_path / "p.jsonl"
    episodes = tmp_path / "e.jsonl"
    main(["gen", "--objects", "4", "--count", "3", "--seed", "5", "--out", str(puzzles)])
    assert main(["selfplay", "--puzzles", str(puzzles), "--config", "none",
                 "--verifier", "none", "--noise", "0.3", "--seed", "1",
                 "--out", str(episodes)]) == 0
    lines = (tmp_path / "e.jsonl").read_text().splitlines()
    assert len(lines) == 3


def test_export_sft_command(tmp_path):
    trajs = plan_near_optimal(generate_puzzle(4, 4), k=3, seed=0)
    traj_path = tmp_path / "t.jsonl"
    with open(traj_path, "w") as fh:
        for t in trajs:
            fh.write(json.dumps(t.to_json()) + "\n")
    out = tmp_path / "sft.jsonl"
    assert main(["export-sft", "--trajectories", str(traj_path), "--out", str(out)]) == 0
    samples = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(samples) == sum(t.step_count for t in trajs)
    assert all(set(s) == {"messages"} for s in samples)

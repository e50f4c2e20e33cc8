import json

import numpy as np
import pytest

from cacop.cli import main
from cacop.config import ConfigError, Config, parse_config, parse_scenario, scenario_text
from cacop.interception import read_grid
from cacop.kinematics import Team
from cacop.scoring import QScorer
from conftest import ROOT, SCENARIOS

SMALL = """
[actions]
n_directions = 16
n_speeds = 4

[sim]
n_ours = 3
n_theirs = 3
max_passes = 3
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return str(path)


def test_default_config_file_matches_defaults():
    assert parse_config((ROOT / "configs" / "default.ini").read_text()) == Config()


def test_config_overrides_and_types():
    cfg = parse_config("[physics]\nroll_decel = 0.4\n[search]\nprune = no\n[actions]\nmodes = chip\n")
    assert cfg.physics.roll_decel == 0.4
    assert cfg.search.prune is False
    assert [m.value for m in cfg.actions.modes] == ["chip"]


@pytest.mark.parametrize("text", ["[physics]\nfriction = 1\n", "[nonsense]\na = 1\n", "[ours]\nv_max = -1\n",
                                  "[search]\nprune = maybe\n", "[physics]\nroll_decel = nan\n", "garbage"])
def test_config_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_scenario_round_trip():
    text = (SCENARIOS / "contested.ini").read_text()
    world = parse_scenario(text)
    assert world.leader_id == 0
    assert sum(r.team is Team.THEIRS for r in world.robots) == 4
    assert parse_scenario(scenario_text(world)) == world


@pytest.mark.parametrize("text", ["[scene]\nleader = 9\n[robot.0]\nposition = 0 0\n",
                                  "[robot.0]\nposition = 0 0\n",
                                  "[scene]\nleader = 0\n[robot.0]\nposition = 0\n",
                                  "[scene]\nleader = 0\n[robot.0]\nposition = 0 0\ncolour = red\n",
                                  "[scene]\nleader = 0\n[robot.0]\nteam = blue\nposition = 0 0\n"])
def test_scenario_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        parse_scenario(text)


def test_missing_scene_names_path(tmp_path, capsys):
    code = main(["plan", str(tmp_path / "nope.ini"), "--out", str(tmp_path)])
    assert code == 2
    assert "nope.ini" in capsys.readouterr().err


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["plan"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 1
    assert main(["plan", str(SCENARIOS / "contested.ini"), "--workers", "0"]) == 1


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[physics]\nwobble = 1\n")
    assert main(["plan", str(SCENARIOS / "contested.ini"), "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "wobble" in capsys.readouterr().err


def test_plan_on_empty_opponents(tmp_path, capsys, small_cfg):
    assert main(["plan", str(SCENARIOS / "empty_opponents.ini"), "--config", small_cfg, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "best:" in out
    lines = (tmp_path / "feasible.jsonl").read_text().splitlines()
    assert lines and json.loads(lines[0])["margin"] == "inf"


def test_heatmap_file(tmp_path, capsys):
    assert main(["heatmap", str(SCENARIOS / "fast_ball.ini"), "--out", str(tmp_path)]) == 0
    grid = read_grid(tmp_path / "heatmap.grid")
    assert grid.values.shape == (45, 60)
    assert np.isinf(grid.values).any()
    assert main(["heatmap", str(SCENARIOS / "fast_ball.ini"), "--ball-speed", "1", "--out", str(tmp_path)]) == 0
    assert np.isfinite(read_grid(tmp_path / "heatmap.grid").values).all()


def test_bench_results_repeatable(tmp_path, small_cfg):
    payloads = []
    for _ in range(2):
        assert main(["bench", str(SCENARIOS / "crowded.ini"), "--config", small_cfg, "--repeats", "1",
                     "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "bench.json").read_text())
        assert [set(t) for t in data["timings"]] == [{"workers", "prune", "median_ms"}] * 2
        payloads.append(data["results"])
    assert payloads[0] == payloads[1]
    full, pruned = payloads[0]
    assert full["digest"] == pruned["digest"]


def test_train_and_eval(tmp_path, small_cfg, capsys):
    out = tmp_path / "run"
    args = ["--config", small_cfg, "--out", str(out), "--seed", "4"]
    assert main(["train", "selfplay", "--episodes", "3"] + args) == 0
    first = (out / "weights.qpw").read_bytes()
    assert main(["train", "selfplay", "--episodes", "3"] + args) == 0
    assert (out / "weights.qpw").read_bytes() == first
    QScorer.load(out / "weights.qpw")
    report = (out / "train_report.txt").read_text().splitlines()
    assert len(report) == 4

    off = tmp_path / "off"
    assert main(["train", "offline", "--log", str(out / "episodes.jsonl"), "--config", small_cfg,
                 "--out", str(off)]) == 0
    assert main(["train", "offline", "--config", small_cfg, "--out", str(off)]) == 1

    assert main(["eval", "--weights", str(out / "weights.qpw"), "--episodes", "2", "--baseline",
                 "--scene", str(SCENARIOS / "contested.ini"), "--cell-size", "0.5"] + args) == 0
    text = (out / "eval_report.txt").read_text()
    assert "possession_retention" in text and "random_possession_retention" in text
    assert read_grid(out / "score.grid").values.shape == (18, 24)

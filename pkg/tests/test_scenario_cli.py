import json

import pytest

from genwar.cli import main
from genwar.hexgrid import distance
from genwar.scenario import ScenarioError, build_default_scenario, load_scenario, parse_scenario
from genwar.sim import BLUE, RED


def test_packaged_default_matches_builder(default_scenario):
    assert default_scenario == build_default_scenario()
    assert (default_scenario.map.rows, default_scenario.map.cols) == (20, 20)
    cp = default_scenario.map.control_point
    assert default_scenario.map.terrain_at(cp) == "road"
    sides = [u.side for u in default_scenario.units]
    assert sides.count(RED) == 6 and sides.count(BLUE) == 5
    assert {distance(u.pos, cp) for u in default_scenario.units} == {8}


def test_round_trip_through_file(tmp_path, default_scenario):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(default_scenario.to_dict()))
    assert load_scenario(path) == default_scenario


@pytest.mark.parametrize("mutate,message", [
    (lambda d: d.pop("units"), "missing fields"),
    (lambda d: d["units"][0].update(pos=[0]), "pos"),
    (lambda d: d["units"][1].update(pos=d["units"][0]["pos"]), "share"),
    (lambda d: d["terrain"][0].__setitem__(0, "lava"), "lava"),
    (lambda d: d.update(max_ticks=0), "max_ticks"),
])
def test_bad_scenarios_are_rejected(default_scenario, mutate, message):
    data = default_scenario.to_dict()
    mutate(data)
    with pytest.raises(ScenarioError, match=message):
        parse_scenario(data)


def test_missing_scenario_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "nope.json")


def test_cli_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--red", "rule", "--blue", "random", "--episodes", "2", "--seed", "4", "--out", str(out)])
    assert code == 0
    assert "2 episodes (0 failed)" in capsys.readouterr().out
    rows = (out / "metrics.csv").read_text().splitlines()
    assert rows[0] == "episode,seed,winner,ticks,kill_score,goal_score,survive_score,trajectory_hash"
    assert [r.split(",")[1] for r in rows[1:]] == ["4", "5"]
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["red"] == "rule"


def test_cli_gwae_without_doc_is_a_config_error(tmp_path, capsys):
    code = main(["run", "--red", "gwae", "--episodes", "1", "--out", str(tmp_path)])
    assert code == 2
    assert "expert document" in capsys.readouterr().err


def test_cli_rejects_bad_weights(tmp_path, capsys):
    code = main(["run", "--alpha-recency", "-1", "--episodes", "1", "--out", str(tmp_path)])
    assert code == 2


def test_cli_scenario_dump(capsys):
    assert main(["scenario"]) == 0
    assert json.loads(capsys.readouterr().out)["rows"] == 20

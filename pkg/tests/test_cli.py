import json
import math

import pytest

from cfroute.cli import ConfigError, _parser, main, read_config_file, resolve_settings
from cfroute.report import load_report, read_csv_aggregates

FAST = ["--horizon", "50", "--warmup", "20"]


def run(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_smoke(capsys):
    code, out, _ = run(capsys, "run", "--policy", "tsp-nc", "--seed", "7", "--reps", "1", *FAST)
    assert code == 0
    rep = json.loads(out)
    assert set(rep) == {"config", "per_replication", "aggregate", "policy"}
    row = rep["per_replication"][0]
    assert row["seed"] == 7 and {"contacts", "mnnt_mean", "infeasible_count"} <= set(row)
    assert rep["aggregate"]["contacts"]["sd"] == 0 and rep["aggregate"]["contacts"]["se"] == 0
    assert "runtime_mean" not in row


def test_json_round_trip_and_se(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = run(capsys, "run", "--policy", "greedy", "--reps", "4", "--out", str(out), *FAST)
    assert code == 0
    rep = load_report(str(out))
    assert json.loads(out.read_text()) == rep
    c = rep["aggregate"]["contacts"]
    assert c["se"] == pytest.approx(c["sd"] / math.sqrt(4))
    assert c["mean"] == pytest.approx(sum(r["contacts"] for r in rep["per_replication"]) / 4)


def test_csv_and_json_agree(tmp_path, capsys):
    args = ["table1", "--reps", "2", *FAST, "--policy", "greedy"]
    run(capsys, *args, "--out", str(tmp_path / "t.json"))
    run(capsys, *args, "--format", "csv", "--out", str(tmp_path / "t.csv"))
    rep = load_report(str(tmp_path / "t.json"))
    csv_agg = read_csv_aggregates((tmp_path / "t.csv").read_text())
    assert len(rep["experiments"]) == 10
    for e in rep["experiments"]:
        got = csv_agg[(e["scenario"], e["policy"])]
        for metric, stats in e["aggregate"].items():
            for stat in ("mean", "sd", "se"):
                assert got[metric][stat] == stats[stat]
    assert {e["scenario"] for e in rep["experiments"]} == {"arrivals", "arrivals+speed+dwell"}


def test_reports_are_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "table2", "--reps", "1", *FAST, "--out", str(tmp_path / name))
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_config_file_and_overrides(tmp_path, monkeypatch):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# sweep\npolicy = greedy\np_node = 0.5\nlambda=20\nseed = 3\n")
    ns = _parser().parse_args(["run", "--config", str(cfg), "--lambda", "30"])
    monkeypatch.delenv("CFR_SEED", raising=False)
    s = resolve_settings(ns)
    assert (s["policy"], s["p_node"], s["lambda"], s["seed"]) == ("greedy", 0.5, 30.0, 3)
    assert resolve_settings(ns, {"CFR_SEED": "11"})["seed"] == 11


@pytest.mark.parametrize("text", ["bogus = 1\n", "reps\n", "policy = walk\n", "lambda = x\n"])
def test_config_errors(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    with pytest.raises(ConfigError):
        read_config_file(str(cfg))


def test_bad_settings_exit_nonzero(tmp_path, capsys):
    code, _, err = run(capsys, "run", "--reps", "0")
    assert code == 2 and "reps" in err
    code, _, err = run(capsys, "run", "--layout", str(tmp_path / "missing.txt"))
    assert code == 2
    code, _, err = run(capsys, "run", "--lambda", "-1", "--reps", "1")
    assert code == 2 and "arrival_rate" in err


def test_cfr_seed_env(capsys, monkeypatch):
    monkeypatch.setenv("CFR_SEED", "5")
    _, out, _ = run(capsys, "run", "--policy", "greedy", "--reps", "1", "--seed", "1", *FAST)
    assert json.loads(out)["per_replication"][0]["seed"] == 5


def test_solver_cap_flushes_partial_report(capsys):
    code, out, err = run(capsys, "run", "--policy", "tsp", "--reps", "2", "--size-cap", "3", *FAST)
    assert code == 3 and "agent" in err


@pytest.fixture
def instance(tmp_path):
    path = tmp_path / "inst.json"
    path.write_text(json.dumps({"node_set": [[1, 5], [4, 4], [8, 4]], "t0": 1.0,
                                "windows": [{"node": [4, 4], "starts": [7.2, 11.0]}]}))
    return str(path)


def test_route_solution(capsys, instance):
    code, out, _ = run(capsys, "route", instance, "--variant", "nc")
    sol = json.loads(out)
    assert code == 0 and sol["status"] == "optimal" and sol["planned_contacts"] == 0
    assert sol["order"][0] == [1, 1] and len(sol["order"]) == 4


def test_route_export_lp_is_deterministic(capsys, instance):
    first = run(capsys, "route", instance, "--export-lp", "--variant", "mc")[1]
    second = run(capsys, "route", instance, "--export-lp", "--variant", "mc")[1]
    assert first == second and first.startswith("\\ MC route model")


def test_route_rejects_aisle_cells(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"node_set": [[2, 1]]}))
    assert run(capsys, "route", str(path))[0] == 2


def test_validate_subcommand(capsys):
    code, out, _ = run(capsys, "validate", "--instances", "15", "--milp-instances", "3")
    assert code == 0 and "0 mismatches" in out

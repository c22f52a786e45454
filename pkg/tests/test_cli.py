import json
from pathlib import Path

import pytest

from dynmatch.harness import suites
from dynmatch.harness.cli import cli_run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
H22 = str(CONFIGS / "horizontal_2x2.json")
VERT = str(CONFIGS / "vertical_simulate.json")


def run(capsys, *argv):
    code = cli_run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_prints_optimum(capsys):
    code, out, _ = run(capsys, "solve", "--config", H22)
    assert code == 0
    assert out.splitlines() == ["expected_value", "10.608741760253906"]


def test_common_flags_before_command(capsys):
    code, out, _ = run(capsys, "--config", H22, "--format", "json", "solve")
    assert code == 0 and json.loads(out)["expected_value"] == 10.608741760253906


def test_analyze_lists_two_tiers(capsys):
    code, out, _ = run(capsys, "analyze", "--config", H22)
    assert code == 0
    tiers = [line for line in out.splitlines() if line.startswith("tier,")]
    assert tiers == ["tier,1,(0 0) (1 1)", "tier,2,(0 1) (1 0)"]
    assert out.splitlines()[0] == "section,index,value"


def test_exact_policy_values(capsys):
    code, out, _ = run(capsys, "simulate", "--config", H22)
    assert code == 0
    rows = dict(line.split(",") for line in out.splitlines()[1:])
    assert float(rows["optimal"]) == float(rows["two_round"]) == 10.608741760253906
    assert float(rows["greedy"]) < float(rows["optimal"])


def test_simulate_csv_and_out_file(capsys, tmp_path):
    target = tmp_path / "sim.csv"
    code, out, _ = run(capsys, "simulate", "--config", VERT, "--replications", "20", "--out", str(target))
    assert code == 0 and out == ""
    lines = target.read_text().splitlines()
    assert lines[0].startswith("kind,policy,replication,total_reward,std_error,demand_abandoned,supply_abandoned,matched_t1")
    code, again, _ = run(capsys, "simulate", "--config", VERT, "--replications", "20", "--workers", "3")
    assert again == target.read_text()


def test_seed_override_changes_paths(capsys):
    _, a, _ = run(capsys, "simulate", "--config", VERT, "--replications", "5")
    _, b, _ = run(capsys, "simulate", "--config", VERT, "--replications", "5", "--seed", "99")
    assert a != b


def test_protect_table(capsys):
    code, out, _ = run(capsys, "protect", "--config", H22)
    assert code == 0
    assert out.splitlines()[0] == "t,ib,p_d_plus,p_s_plus,p_d_minus,p_s_minus"
    code, out, _ = run(capsys, "protect", "--config", H22, "--format", "json")
    assert code == 0 and json.loads(out)


def test_verify_passes(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "osa_dominance", "--trials", "3", "--seed", "7")
    assert code == 0 and out.startswith("PASS osa_dominance: 3/3")


def test_verify_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setitem(suites.SUITES, "broken", lambda rng: (False, "forced", None))
    code, out, _ = run(capsys, "verify", "--suite", "broken", "--trials", "2")
    assert code == 1 and out.startswith("FAIL broken: 0/2")


@pytest.mark.parametrize(
    "argv",
    [
        ["solve"],
        ["solve", "--config", "/nonexistent.json"],
        ["verify", "--suite", "nope"],
        ["bogus"],
        ["solve", "--config", H22, "--format", "xml"],
    ],
)
def test_usage_errors_exit_two(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and err.startswith("dynmatch:")


def test_bad_config_content(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"builder": "horizontal_2x2", "params": {}}, "extra": 1}))
    code, _, err = run(capsys, "solve", "--config", str(bad))
    assert code == 2 and "ConfigError" in err
    bad.write_text("{not json")
    assert run(capsys, "solve", "--config", str(bad))[0] == 2


def test_fractional_carry_cannot_be_solved(capsys):
    code, _, err = run(capsys, "solve", "--config", str(CONFIGS / "line_fractional.json"))
    assert code == 2 and "NonIntegerCarryOver" in err


def test_config_output_used_without_out(capsys, tmp_path):
    cfg = json.loads(Path(H22).read_text())
    cfg["output"] = str(tmp_path / "value.csv")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "solve", "--config", str(path))
    assert code == 0 and out == ""
    assert (tmp_path / "value.csv").read_text().splitlines()[1] == "10.608741760253906"

import json
import random
import sys
from pathlib import Path

import pytest

from gen import psplib_text, random_dag_instance
from robust_rcpsp.cli import dispatch

DATA = Path(__file__).parent / "data"
BRIDGE = f"{sys.executable} -m robust_rcpsp.highs_bridge {{lp}} {{sol}} {{time_s}}"


def run_cli(capsys, *argv):
    code = dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_parse_outputs_instance_json(capsys):
    code, out, _ = run_cli(capsys, "parse", str(DATA / "toy5.sm"))
    assert code == 0
    payload = json.loads(out)
    assert payload["nominal"] == [0, 4, 3, 5, 0]
    assert payload["deviation"] == [0, 0, 0, 0, 0]


def test_parse_with_robustify(capsys):
    code, out, _ = run_cli(capsys, "parse", str(DATA / "toy5.sm"), "--robustify")
    assert code == 0
    assert json.loads(out)["deviation"] == [0, 2, 2, 3, 0]


def test_parse_output_is_byte_stable(capsys):
    _, first, _ = run_cli(capsys, "parse", str(DATA / "toy5.sm"))
    _, second, _ = run_cli(capsys, "parse", str(DATA / "toy5.sm"))
    assert first == second


def test_parse_missing_file_is_domain_error(capsys):
    code, _, err = run_cli(capsys, "parse", "no_such_file.sm")
    assert code == 1
    assert "error" in err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        dispatch(["evaluate"])  # missing required arguments
    assert exc.value.code == 2


def test_forbidden_catalog(capsys):
    code, out, _ = run_cli(capsys, "forbidden", str(DATA / "toy5.sm"))
    assert code == 0
    assert json.loads(out) == {"sets": [[1, 2]]}


def test_evaluate_nominal_critical_path(capsys):
    code, out, _ = run_cli(capsys, "evaluate", str(DATA / "toy5.sm"),
                           "--gamma", "0")
    assert code == 0
    payload = json.loads(out)
    assert payload["value"] == 9  # 4 + 5 on the nominal critical path
    assert payload["delayed"] == []


def test_evaluate_with_selection_and_budget(capsys):
    code, out, _ = run_cli(capsys, "evaluate", str(DATA / "toy5.sm"),
                           "--selection", "[[1, 2]]", "--gamma", "1")
    assert code == 0
    payload = json.loads(out)
    # serialize 1 before 2, delay activity 3: 4 + 3 + (5 + 3)
    assert payload["value"] == 15


def test_warmstart_output(capsys):
    code, out, _ = run_cli(capsys, "warmstart", str(DATA / "toy5.sm"),
                           "--gamma", "1")
    assert code == 0
    payload = json.loads(out)
    assert payload["upper_bound"] >= 9
    assert all(len(pair) == 2 for pair in payload["selection"])


def test_build_writes_lp_and_mst(capsys, tmp_path):
    lp = tmp_path / "model.lp"
    mst = tmp_path / "warm.mst"
    code, out, _ = run_cli(capsys, "build", str(DATA / "toy5.sm"), "--gamma", "1",
                           "--trans", "--tighten", "--int-starts",
                           "-o", str(lp), "--mst", str(mst))
    assert code == 0
    info = json.loads(out)
    assert info["lp"] == str(lp)
    text = lp.read_text()
    assert text.startswith("Minimize")
    assert "Generals" in text
    assert mst.read_text().splitlines()[0].startswith("S_0_0 ")


def test_solve_bnb_pair_conflict(capsys, tmp_path):
    rng = random.Random(1)
    inst_path = tmp_path / "toy.sm"
    inst_path.write_text((DATA / "toy5.sm").read_text())
    code, out, _ = run_cli(capsys, "solve", str(inst_path), "--gamma", "0",
                           "--method", "bnb")
    assert code == 0
    payload = json.loads(out)
    assert payload["status"] == "optimal"
    assert payload["objective"] == 12  # serialize 4+3 then 5 on one unit slack
    assert payload["gap_percent"] == 0.0


def test_solve_bridge(capsys):
    pytest.importorskip("scipy")
    code, out, _ = run_cli(capsys, "solve", str(DATA / "toy5.sm"), "--gamma", "0",
                           "--method", "bridge", "--bridge-cmd", BRIDGE)
    assert code == 0
    payload = json.loads(out)
    assert payload["status"] == "optimal"
    assert payload["objective"] == pytest.approx(12.0, abs=1e-6)


def test_solve_bridge_without_command_fails(capsys, monkeypatch):
    monkeypatch.delenv("ROBUST_RCPSP_BRIDGE", raising=False)
    code, _, err = run_cli(capsys, "solve", str(DATA / "toy5.sm"), "--gamma", "0",
                           "--method", "bridge")
    assert code == 1
    assert "bridge" in err


def test_bench_and_profile_commands(capsys, tmp_path):
    rng = random.Random(9)
    inst_dir = tmp_path / "instances"
    inst_dir.mkdir()
    for idx in range(2):
        inst = random_dag_instance(rng, 3, n_res=1, robustified=False)
        (inst_dir / f"j301_{idx + 1}.sm").write_text(psplib_text(inst))
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "instances_dir": str(inst_dir), "gammas": [0, 1], "variants": ["bnb"],
        "time_limit_s": 30,
    }))
    out_dir = tmp_path / "results"
    code, out, err = run_cli(capsys, "bench", "--config", str(config),
                             "--out", str(out_dir))
    assert code == 0
    assert (out_dir / "results.csv").exists()
    assert (out_dir / "profile.svg").exists()
    assert out.splitlines()[0] == "instance,gamma,variant,status,objective,bound,gap_percent,time_s"

    svg_path = tmp_path / "profile.svg"
    code, out, _ = run_cli(capsys, "profile", "--results",
                           str(out_dir / "results.csv"), "--svg", str(svg_path))
    assert code == 0
    assert out.splitlines()[0].startswith("tau,")
    assert svg_path.exists()


def test_verify_counterexample(capsys):
    code, out, _ = run_cli(capsys, "verify", "counterexample")
    assert code == 0
    assert "integral=3 fractional=7/2" in out


def test_verify_tu(capsys):
    code, out, _ = run_cli(capsys, "verify", "tu")
    assert code == 0
    assert "not_totally_unimodular=true" in out


def test_evaluate_json_instance_input(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "parse", str(DATA / "toy5.sm"), "--robustify")
    inst_json = tmp_path / "inst.json"
    inst_json.write_text(out)
    code, out2, _ = run_cli(capsys, "evaluate", str(inst_json), "--gamma", "0")
    assert code == 0
    assert json.loads(out2)["value"] == 9


def test_evaluate_with_table(capsys):
    code, out, _ = run_cli(capsys, "evaluate", str(DATA / "minimal3.sm"),
                           "--gamma", "1", "--table")
    assert code == 0
    payload = json.loads(out)
    assert payload["value"] == 8  # 5 nominal + ceil(5/2) delayed
    table = payload["table"]
    assert table[0][0] == 0
    assert table[-1][-1] == 8
    assert table[0][1] is None  # source unreachable above level zero


def test_verify_tu_matrix_csv(capsys, tmp_path):
    out_csv = tmp_path / "matrix.csv"
    code, out, _ = run_cli(capsys, "verify", "tu", "--matrix-csv", str(out_csv))
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0].startswith("row,group,a_0_1,")
    assert any(ln.startswith("budget,group4") for ln in lines)

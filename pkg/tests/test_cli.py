import csv
import json
from pathlib import Path

import pytest

from qdcavity import cli
from qdcavity.scenario import shipped_scenario


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def test_derive_reports_coupling(tmp_path):
    code, out = run(tmp_path, "derive", "--scenario", "baseline")
    assert code == 0
    rows = dict(csv.reader((out / "derive.csv").open()))
    assert float(rows["pair0_1.g_tilde_meV"]) == pytest.approx(0.02, rel=0.01)
    man = json.loads((out / "manifest.json").read_text())
    assert man["conventions"] == {"evolution_sign": 1, "stark_convention": "direct"}
    assert man["outputs"]["derive.csv"]
    assert {"qdcavity", "numpy", "scipy", "python"} <= set(man["versions"])
    assert len(man["config_hash"]) == 64 and man["wall_time_s"] >= 0


def test_json_format(tmp_path):
    code, out = run(tmp_path, "derive", "--scenario", "baseline", "--format", "json")
    assert code == 0
    rows = json.loads((out / "derive.json").read_text())
    assert {r["quantity"] for r in rows} >= {"dot0.g_eff_meV"}


def test_printed_cpf_exits_numerical_with_report(tmp_path):
    code, out = run(tmp_path, "verify-cpf", "--scenario", "baseline")
    assert code == cli.EXIT_NUMERICAL
    rep = json.loads((out / "cpf_report.json").read_text())
    assert rep["passed"] is False and rep["evolution_sign"] == 1
    assert rep["convention_report"]["corrected_variant_fidelity"] >= 1 - 1e-10


def test_corrected_cpf_passes(tmp_path):
    scen = tmp_path / "s.ini"
    scen.write_text(shipped_scenario("baseline").read_text().replace("variant = printed ", "variant = corrected "))
    code, out = run(tmp_path, "verify-cpf", "--scenario", str(scen))
    assert code == 0
    assert json.loads((out / "cpf_report.json").read_text())["fidelity"] >= 1 - 1e-10


def test_verify_cnot(tmp_path):
    code, out = run(tmp_path, "verify-cnot", "--scenario", "baseline")
    assert code == 0
    rep = json.loads((out / "cnot_report.json").read_text())
    assert rep["standard_fidelity"] >= 1 - 1e-10


def test_schema_error_exit(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[device]\nomega_cav = -1 meV\n")
    code, _ = run(tmp_path, "derive", "--scenario", str(bad))
    assert code == cli.EXIT_SCHEMA


def test_regime_failure_exit(tmp_path):
    text = shipped_scenario("minimal_derive").read_text().replace("omega_up = 1005.0 meV", "omega_up = 1000.6 meV")
    scen = tmp_path / "r.ini"
    scen.write_text(text)
    code, out = run(tmp_path, "validate", "--scenario", str(scen))
    assert code == cli.EXIT_REGIME
    assert "fail" in (out / "validate.csv").read_text()


def test_run_uses_declared_kind(tmp_path):
    code, out = run(tmp_path, "run", "--scenario", "minimal_derive")
    assert code == 0 and (out / "derive.csv").exists()
    code, _ = run(tmp_path, "run", "--scenario", "baseline")
    assert code == cli.EXIT_SCHEMA  # no [experiment] kind


def test_dump_operator(tmp_path):
    code, out = run(tmp_path, "dump-hamiltonian", "--scenario", "baseline", "--dump-operator", "two_qubit_xy")
    assert code == 0
    d = json.loads((out / "operator_two_qubit_xy.json").read_text())
    assert d["shape"] == [4, 4]
    code, out = run(tmp_path, "derive", "--scenario", "baseline", "--dump-operator", "effective", "--n-max", "1")
    assert code == 0
    assert json.loads((out / "operator_effective.json").read_text())["shape"] == [8, 8]
    code, _ = run(tmp_path, "derive", "--scenario", "baseline", "--dump-operator", "nonsense")
    assert code == cli.EXIT_SCHEMA


def test_deterministic_outputs_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        code = cli.main(["run-gate", "--scenario", "baseline", "--out", str(tmp_path / f"r{k}")])
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in (tmp_path / f"r{k}").iterdir() if p.name != "manifest.json"})
    assert outs[0] == outs[1] and "gate.json" in outs[0]


def test_readout_seed_override(tmp_path):
    scen = tmp_path / "ro.ini"
    scen.write_text(shipped_scenario("readout").read_text().replace("trajectories = 10000", "trajectories = 300")
                    .replace("window = 1000.0 ps", "window = 30.0 ps"))
    a = cli.main(["run-readout", "--scenario", str(scen), "--out", str(tmp_path / "a"), "--seed", "5"])
    b = cli.main(["run-readout", "--scenario", str(scen), "--out", str(tmp_path / "b"), "--seed", "5"])
    c = cli.main(["run-readout", "--scenario", str(scen), "--out", str(tmp_path / "c"), "--seed", "6"])
    assert a == b == c == 0
    det = [(tmp_path / k / "detections.csv").read_bytes() for k in "abc"]
    assert det[0] == det[1] != det[2]
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert "seed = 5" in man["scenario"]


def test_sweep_monotone_column(tmp_path):
    code, out = run(tmp_path, "sweep", "--scenario", "parallel_4dot")
    assert code == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert [float(r["K"]) for r in rows] == [10, 20, 50, 100]
    col = [float(r["max_cross_transfer"]) for r in rows]
    assert all(b <= a for a, b in zip(col, col[1:]))


def test_plan_and_run_parallel(tmp_path):
    code, out = run(tmp_path, "plan-parallel", "--scenario", "parallel_4dot")
    assert code == 0
    plan = json.loads((out / "plan.json").read_text())
    assert plan["crosstalk"]["max_cross_transfer"] <= plan["crosstalk"]["bound_8_gt_over_dab_sq"]
    code, out = run(tmp_path, "run-parallel", "--scenario", "parallel_4dot")
    assert code == 0
    lines = (out / "transfer.csv").read_text().splitlines()
    assert lines[0] == "time_ps,max_cross_transfer" and len(lines) == 2002


def test_k_below_floor_is_input_error(tmp_path):
    scen = tmp_path / "k.ini"
    scen.write_text(shipped_scenario("parallel_4dot").read_text().replace("K = 50", "K = 3", 1))
    code, _ = run(tmp_path, "plan-parallel", "--scenario", str(scen))
    assert code == cli.EXIT_SCHEMA

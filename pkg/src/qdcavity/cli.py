"""Batch front-end: ``qdcavity <subcommand> --scenario FILE``.

Exit codes: 0 success, 2 schema or input error, 3 regime failure,
4 numerical failure or tolerance breach.  Every run writes ``manifest.json``
next to its outputs; the other files are byte-stable for fixed inputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import scipy

from . import __version__, dynamics, gates, hamiltonians, kernels, readout, scheduler
from .device_model import RegimeError, SingularityError, derive_couplings, regime_ok, validate_regime
from .scenario import Scenario, ScenarioError, parse_scenario, shipped_scenario
from .tensor_algebra import LayoutError, operator_to_dict

EXIT_OK, EXIT_SCHEMA, EXIT_REGIME, EXIT_NUMERICAL = 0, 2, 3, 4
VERIFY_TOL = 1e-10
DEFAULT_OUT = "qdcavity_out"


class ToleranceBreach(RuntimeError):
    """A verification ran but missed its tolerance; artifacts are still written."""


# --- serialization --------------------------------------------------------


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return _plain(np.stack([obj.real, obj.imag], axis=-1))
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps_json(obj: Any) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def dumps_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


class Outputs:
    def __init__(self, directory: Path):
        self.dir = directory
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str) -> None:
        (self.dir / name).write_text(text, encoding="utf-8")
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()

    def table(self, stem: str, fmt: str, header: list[str], rows: list) -> None:
        if fmt == "csv":
            self.write(f"{stem}.csv", dumps_csv(header, rows))
        else:
            self.write(f"{stem}.json", dumps_json([dict(zip(header, r)) for r in rows]))


# --- experiments ----------------------------------------------------------


def run_derive(sc: Scenario, args, out: Outputs) -> dict:
    dc = derive_couplings(sc.device, sc.pulses())
    table = dc.as_table()
    out.table("derive", args.format, ["quantity", "value"], sorted(table.items()))
    return {"g_tilde_meV": {f"{i}_{j}": v for (i, j), v in sorted(dc.g_tilde.items())}}


def run_validate(sc: Scenario, args, out: Outputs) -> dict:
    p = sc.section("validate")
    diags = validate_regime(sc.device, sc.pulses(), p.get("ratio", 5.0), p.get("warn_ratio", 2.0))
    rows = [[d.condition, "" if d.dot is None else d.dot, d.lhs, d.rhs, d.ratio, d.status] for d in diags]
    out.table("validate", args.format, ["condition", "dot", "lhs_meV", "rhs_meV", "ratio", "status"], rows)
    if not regime_ok(diags):
        raise RegimeError(diags)
    return {"status": "pass" if all(d.status == "pass" for d in diags) else "warn"}


def _gate_options(p: dict) -> gates.ExecutionOptions:
    keys = ("shape", "ramp", "delta", "rabi_y", "rabi_x", "raman_detuning", "g_tilde")
    return gates.ExecutionOptions(**{k: p[k] for k in keys if k in p})


def run_gate(sc: Scenario, args, out: Outputs) -> dict:
    p = sc.section("run-gate")
    pair = tuple(p.get("pair", (0, 1)))
    if len(pair) != 2:
        raise ScenarioError(["[run-gate] pair needs exactly two dots"])
    gate = p.get("gate", "cpf")
    model = p.get("model", "effective")
    n = len(sc.device.dots)
    if gate == "cpf":
        variant = p.get("variant", "corrected")
        if variant not in ("printed", "corrected"):
            raise ScenarioError(["[run-gate] cpf variant must be printed or corrected"])
        seq = gates.cpf_sequence(pair, n, variant)
    else:
        variant = p.get("variant", "standard")
        if variant not in ("printed", "standard"):
            raise ScenarioError(["[run-gate] cnot variant must be printed or standard"])
        seq = gates.cnot_sequence(pair[0], pair[1], n, variant)
    res = gates.execute_sequence(seq, model, sc.device, _gate_options(p))
    rows = [
        [k, it.step.label or it.step.kind, it.step.kind, it.t0, it.t1,
         0.0 if it.realization is None else float(it.realization.hamiltonian_rate)]
        for k, it in enumerate(res.schedule)
    ]
    out.table("schedule", args.format, ["step", "label", "kind", "t0_ps", "t1_ps", "rate_meV"], rows)
    report = {
        "sequence": seq.name,
        "model": model,
        "fidelity": res.fidelity,
        "total_time_ps": res.total_time,
        "residual_cavity_population": res.residual_cavity_population,
        "final_unitary": res.propagation.final,
        "ideal_unitary": res.ideal,
    }
    out.write("gate.json", dumps_json(report))
    return {"fidelity": res.fidelity, "total_time_ps": res.total_time}


def run_verify_cpf(sc: Scenario, args, out: Outputs) -> dict:
    p = sc.section("verify-cpf")
    pair = tuple(p.get("pair", (0, 1)))
    variant = p.get("variant", "printed")
    n = 2 if pair == (0, 1) else len(sc.device.dots)
    v = gates.verify(gates.cpf_sequence(pair, n, variant))
    report = {
        "variant": variant,
        "fidelity": v["fidelity"],
        "passed": v["fidelity"] >= 1 - VERIFY_TOL,
        "tolerance": VERIFY_TOL,
        "matrix": v["matrix"],
        "evolution_sign": dynamics.EVOLUTION_SIGN,
        "convention_report": gates.cpf_convention_report(),
    }
    out.write("cpf_report.json", dumps_json(report))
    if not report["passed"]:
        raise ToleranceBreach(f"CPF[{variant}] fidelity {v['fidelity']:.6g} < 1 - {VERIFY_TOL:g}")
    return {"fidelity": v["fidelity"]}


def run_verify_cnot(sc: Scenario, args, out: Outputs) -> dict:
    p = sc.section("verify-cnot")
    c, t = p.get("control", 0), p.get("target", 1)
    n = 2 if (c, t) == (0, 1) else len(sc.device.dots)
    cv = p.get("cpf_variant", "corrected")
    std = gates.verify(gates.cnot_sequence(c, t, n, "standard", cv))
    prt = gates.verify(gates.cnot_sequence(c, t, n, "printed", cv))
    report = {
        "cpf_variant": cv,
        "standard_fidelity": std["fidelity"],
        "printed_fidelity": prt["fidelity"],
        "passed": std["fidelity"] >= 1 - VERIFY_TOL,
        "tolerance": VERIFY_TOL,
        "evolution_sign": dynamics.EVOLUTION_SIGN,
        "standard_matrix": std["matrix"],
        "printed_matrix": prt["matrix"],
    }
    out.write("cnot_report.json", dumps_json(report))
    if not report["passed"]:
        raise ToleranceBreach(f"CNOT[standard] fidelity {std['fidelity']:.6g}")
    return {"standard_fidelity": std["fidelity"], "printed_fidelity": prt["fidelity"]}


def _plan(sc: Scenario, section: str, K: Optional[float] = None) -> scheduler.FrequencyPlan:
    p = sc.section(section)
    if "pairs" not in p:
        raise ScenarioError([f"[{section}] pairs is required"])
    reqs = [scheduler.PairRequest(a, b) for a, b in p["pairs"]]
    return scheduler.assign_detunings(
        reqs,
        sc.device,
        K=K if K is not None else p.get("K", scheduler.K_DEFAULT),
        delta_base=p.get("delta_base", 0.5),
        rabi=p.get("rabi", 1.0),
        coupling_rule=p.get("coupling_rule", "symmetric"),
    )


def run_plan_parallel(sc: Scenario, args, out: Outputs) -> dict:
    plan = _plan(sc, "plan-parallel")
    rep = scheduler.estimate_crosstalk(plan, sc.device, sc.section("plan-parallel").get("duration"))
    out.write("plan.json", dumps_json({"plan": plan.to_dict(), "crosstalk": rep.to_dict()}))
    return {"max_cross_transfer": rep.max_cross_transfer, "intended_fidelity": rep.intended_fidelity}


def run_parallel(sc: Scenario, args, out: Outputs) -> dict:
    p = sc.section("run-parallel")
    plan = _plan(sc, "run-parallel")
    rep = scheduler.estimate_crosstalk(plan, sc.device, p.get("duration"), n_samples=p.get("samples", 2001))
    out.table("transfer", args.format, ["time_ps", "max_cross_transfer"], list(zip(rep.times, rep.transfer)))
    out.write("parallel_report.json", dumps_json({"plan": plan.to_dict(), "crosstalk": rep.to_dict()}))
    return {"max_cross_transfer": rep.max_cross_transfer, "intended_fidelity": rep.intended_fidelity}


def _sweep_point(sc: Scenario, K: float, duration: float) -> dict:
    plan = _plan(sc, "sweep", K)
    rep = scheduler.estimate_crosstalk(plan, sc.device, duration)
    return {"K": K, **rep.to_dict()}


def run_sweep(sc: Scenario, args, out: Outputs) -> dict:
    p = sc.section("sweep")
    values = list(p.get("values", (10.0, 20.0, 50.0, 100.0)))
    duration = p.get("duration")
    if duration is None:
        base = _plan(sc, "sweep", min(values))
        g0 = base.couplings()[tuple(sorted(base.pairs[0].dots))]
        duration = (math.pi / 2) * dynamics.HBAR / abs(g0)
    workers = max(1, p.get("workers", 1))
    if workers == 1:
        rows = [_sweep_point(sc, K, duration) for K in values]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(values))) as ex:
            rows = list(ex.map(_sweep_point, [sc] * len(values), values, [duration] * len(values)))
    header = ["K", "max_cross_transfer", "intended_fidelity", "bound_8_gt_over_dab_sq", "duration_ps"]
    out.table("sweep", args.format, header, [[r[h] for h in header] for r in rows])
    col = [r["max_cross_transfer"] for r in rows]
    order = np.argsort(values)
    sorted_col = [col[k] for k in order]
    monotone = all(b <= a for a, b in zip(sorted_col, sorted_col[1:]))
    return {"monotone_non_increasing": monotone, "max_cross_transfer": col}


def run_readout(sc: Scenario, args, out: Outputs) -> dict:
    p = sc.section("run-readout")
    dot = p.get("dot", 0)
    g = p.get("g_eff")
    if g is None:
        dc = derive_couplings(sc.device, sc.pulses())
        g = dc.g_eff.get(dot, readout.ReadoutConfig.g_eff)
    cfg = readout.ReadoutConfig(
        dot=dot,
        g_eff=abs(g),
        gamma_cav=sc.device.cavity.gamma_cav,
        window=p.get("window", 1000.0),
        trajectories=p.get("trajectories", 10000),
        seed=p.get("seed", 0),
        dephasing=p.get("dephasing", 0.0),
    )
    up = readout.sample_detection_times("up", cfg)
    down = readout.sample_detection_times("down", cfg)
    summ = readout.summary(cfg, up)
    summ["mc_click_fraction_down"] = down.click_fraction
    out.write("detections.csv", up.to_csv())
    out.table("click_curve", args.format, ["time_ps", "mc_click_fraction_up"], list(zip(up.grid, up.click_curve)))
    out.write("readout_summary.json", dumps_json(summ))
    return {k: summ[k] for k in ("p_click_up", "discrimination_error", "mc_click_fraction_up")}


def dump_hamiltonian(sc: Scenario, args, out: Outputs) -> dict:
    _dump(sc, args.dump_operator or sc.section("dump").get("level", "effective"), out)
    return {}


def _dump(sc: Scenario, level: str, out: Outputs) -> None:
    if level not in hamiltonians.LEVELS:
        raise ScenarioError([f"--dump-operator must be one of {list(hamiltonians.LEVELS)}, got {level!r}"])
    p = sc.section("dump")
    pair = tuple(p["pair"]) if "pair" in p else ((0, 1) if level.startswith("two_qubit") else None)
    spec = hamiltonians.HamiltonianSpec(level, sc.device, sc.pulses(), p.get("frame", "lab"), pair)
    op = hamiltonians.build(spec, p.get("time", 0.0))
    out.write(f"operator_{level}.json", dumps_json(operator_to_dict(op, level)))


RUNNERS: dict[str, Callable] = {
    "derive": run_derive,
    "validate": run_validate,
    "run-gate": run_gate,
    "verify-cpf": run_verify_cpf,
    "verify-cnot": run_verify_cnot,
    "plan-parallel": run_plan_parallel,
    "run-parallel": run_parallel,
    "run-readout": run_readout,
    "sweep": run_sweep,
    "dump-hamiltonian": dump_hamiltonian,
}


# --- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdcavity", description="Cavity-coupled quantum-dot spin qubit toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", *RUNNERS):
        sp = sub.add_parser(name, help="run the scenario's [experiment] kind" if name == "run" else None)
        sp.add_argument("--scenario", required=True, help="scenario file, or the name of a shipped scenario")
        sp.add_argument("--out", help=f"output directory (default: [output] dir, else {DEFAULT_OUT})")
        sp.add_argument("--seed", type=int, help="override the Monte Carlo seed")
        sp.add_argument("--n-max", type=int, help="override the cavity Fock cutoff")
        sp.add_argument("--dump-operator", metavar="NAME", help="also write the Hamiltonian at this level")
        sp.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    return ap


def _load(arg: str) -> Scenario:
    p = Path(arg)
    if not p.exists() and "/" not in arg and not arg.endswith(".ini"):
        p = shipped_scenario(arg)
    return parse_scenario(p)


def _apply_overrides(sc: Scenario, args) -> Scenario:
    if args.n_max is not None:
        try:
            sc = replace(sc, device=sc.device.with_n_max(args.n_max))
        except ValueError as exc:
            raise ScenarioError([f"--n-max: {exc}"]) from None
    if args.seed is not None:
        params = {k: dict(v) for k, v in sc.params.items()}
        params.setdefault("run-readout", {})["seed"] = args.seed
        sc = replace(sc, params=params)
    return sc


def _manifest(sc: Scenario, command: str, args, out: Outputs, wall: float, status: int, result: dict, error: str) -> dict:
    return {
        "command": command,
        "scenario_source": sc.source,
        "config_hash": sc.config_hash(),
        "scenario": sc.to_ini(),
        "conventions": {
            "evolution_sign": dynamics.EVOLUTION_SIGN,
            "stark_convention": sc.device.stark_convention,
        },
        "overrides": {"seed": args.seed, "n_max": args.n_max, "format": args.format},
        "versions": {
            "qdcavity": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kernel_backend": kernels.BACKEND,
        },
        "outputs": dict(sorted(out.files.items())),
        "result": result,
        "exit_status": status,
        "error": error,
        "wall_time_s": wall,
    }


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = _apply_overrides(_load(args.scenario), args)
    except ScenarioError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    command = args.command
    if command == "run":
        if sc.experiment is None:
            print("error: scenario has no [experiment] kind; name a subcommand instead", file=sys.stderr)
            return EXIT_SCHEMA
        command = sc.experiment
    out_dir = Path(args.out or sc.output_dir or DEFAULT_OUT)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: output directory {out_dir}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out = Outputs(out_dir)
    t0 = time.perf_counter()
    status, result, error = EXIT_OK, {}, ""
    try:
        result = RUNNERS[command](sc, args, out)
        if args.dump_operator and command != "dump-hamiltonian":
            _dump(sc, args.dump_operator, out)
    except ScenarioError as exc:
        status, error = EXIT_SCHEMA, "; ".join(exc.errors)
    except RegimeError as exc:
        status, error = EXIT_REGIME, "; ".join(d.describe() for d in exc.diagnostics if d.status == "fail")
    except SingularityError as exc:
        status, error = EXIT_REGIME, str(exc)
    except (ToleranceBreach, dynamics.NumericalError, LayoutError) as exc:
        status, error = EXIT_NUMERICAL, str(exc)
    except ValueError as exc:  # PlanError, SchedulingError and bad parameter values
        status, error = EXIT_SCHEMA, str(exc)
    wall = time.perf_counter() - t0
    out.write("manifest.json", dumps_json(_manifest(sc, command, args, out, wall, status, result, error)))
    if error:
        print(f"error: {command}: {error}", file=sys.stderr)
    else:
        print(json.dumps(_plain(result), sort_keys=True))
    return status


if __name__ == "__main__":
    sys.exit(main())

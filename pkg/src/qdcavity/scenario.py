"""Scenario files: INI sections with unit-suffixed numbers.

Energies carry ``meV``, times ``ps``, temperatures ``K``.  Counts (n_max,
trajectories, seed, workers), ratios (K, ratio) and labels are bare.  Unknown
sections and keys are errors.  See ``docs/scenario_schema.md``.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .device_model import CavityParams, DeviceConfig, DotParams, LaserPulse, laser_frequency_for_detuning

EXPERIMENTS = (
    "derive",
    "validate",
    "run-gate",
    "verify-cpf",
    "verify-cnot",
    "plan-parallel",
    "run-parallel",
    "run-readout",
    "sweep",
)

_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")


class ScenarioError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# --- field kinds ----------------------------------------------------------


def _quantity(unit: str) -> Callable[[str], float]:
    def parse(text: str) -> float:
        m = _NUM.match(text)
        if not m:
            raise ValueError(f"expected a number with unit {unit!r}, got {text!r}")
        if m.group(2) != unit:
            got = m.group(2) or "no unit"
            raise ValueError(f"unit mismatch: expected {unit!r}, got {got!r}")
        v = float(m.group(1))
        if not math.isfinite(v):
            raise ValueError("value must be finite")
        return v

    parse.unit = unit  # type: ignore[attr-defined]
    return parse


def _count(text: str) -> int:
    t = text.strip()
    if not re.fullmatch(r"[-+]?\d+", t):
        raise ValueError(f"expected an integer without unit, got {text!r}")
    return int(t)


def _ratio(text: str) -> float:
    m = _NUM.match(text)
    if not m or m.group(2):
        raise ValueError(f"expected a plain number, got {text!r}")
    return float(m.group(1))


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {list(options)}, got {t!r}")
        return t

    return parse


def _int_list(text: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of integers")
    return tuple(_count(p) for p in parts)


def _pairs(text: str) -> tuple[tuple[int, int], ...]:
    out = []
    for chunk in [c.strip() for c in text.split(",") if c.strip()]:
        m = re.fullmatch(r"(\d+)\s*-\s*(\d+)", chunk)
        if not m:
            raise ValueError(f"pair {chunk!r} must look like 'control-target'")
        out.append((int(m.group(1)), int(m.group(2))))
    return tuple(out)


def _ratio_list(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(_ratio(p) for p in parts)


MEV, PS, KELVIN = _quantity("meV"), _quantity("ps"), _quantity("K")

DEVICE_KEYS = {
    "omega_cav": MEV,
    "gamma_cav": MEV,
    "n_max": _count,
    "temperature": KELVIN,
    "stark_convention": _choice("direct", "swapped"),
}
DOT_KEYS = {
    "omega_up": MEV,
    "omega_down": MEV,
    "omega_v": MEV,
    "g_cav": MEV,
    "hole_decoherence_time": PS,
}
DRIVE_KEYS = {
    "dot": _count,
    "polarization": _choice("x", "y"),
    "rabi": MEV,
    "omega_L": MEV,
    "delta": MEV,
}
GATE_KEYS = {
    "gate": _choice("cpf", "cnot"),
    "variant": _choice("printed", "corrected", "standard"),
    "model": _choice("effective", "full"),
    "shape": _choice("square", "flattop"),
    "ramp": PS,
    "delta": MEV,
    "rabi_y": MEV,
    "rabi_x": MEV,
    "raman_detuning": MEV,
    "g_tilde": MEV,
    "pair": _int_list,
}
PARALLEL_KEYS = {
    "pairs": _pairs,
    "K": _ratio,
    "delta_base": MEV,
    "rabi": MEV,
    "duration": PS,
    "coupling_rule": _choice("symmetric", "lower"),
}
SECTION_KEYS: dict[str, dict[str, Callable]] = {
    "experiment": {"kind": _choice(*EXPERIMENTS)},
    "output": {"dir": str},
    "validate": {"ratio": _ratio, "warn_ratio": _ratio},
    "run-gate": GATE_KEYS,
    "verify-cpf": {"pair": _int_list, "variant": _choice("printed", "corrected")},
    "verify-cnot": {"control": _count, "target": _count, "cpf_variant": _choice("printed", "corrected")},
    "plan-parallel": PARALLEL_KEYS,
    "run-parallel": {**PARALLEL_KEYS, "samples": _count},
    "run-readout": {
        "dot": _count,
        "g_eff": MEV,
        "window": PS,
        "trajectories": _count,
        "seed": _count,
        "dephasing": MEV,
    },
    "sweep": {**PARALLEL_KEYS, "parameter": _choice("K"), "values": _ratio_list, "workers": _count},
    "dump": {"level": _choice("lambda", "effective", "two_qubit_flipflop", "two_qubit_xy"),
             "frame": _choice("lab", "rotating"), "time": PS, "pair": _int_list},
}


def _format(v: Any, parser: Callable) -> str:
    unit = getattr(parser, "unit", None)
    if unit:
        return f"{v!r} {unit}"
    if parser is _pairs:
        return ", ".join(f"{a}-{b}" for a, b in v)
    if parser in (_int_list, _ratio_list):
        return ", ".join(repr(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# --- scenario -------------------------------------------------------------


@dataclass(frozen=True)
class DriveSpec:
    dot: int
    polarization: str
    rabi: float
    omega_L: Optional[float] = None
    delta: Optional[float] = None

    def pulse(self, device: DeviceConfig) -> LaserPulse:
        d = device.dots[self.dot]
        w = self.omega_L if self.omega_L is not None else laser_frequency_for_detuning(d, device.cavity, self.delta)
        return LaserPulse(self.dot, self.polarization, w, self.rabi)


@dataclass(frozen=True)
class Scenario:
    device: DeviceConfig
    drives: tuple[DriveSpec, ...] = ()
    experiment: Optional[str] = None
    params: dict = field(default_factory=dict)  # section -> {key: value}
    output_dir: Optional[str] = None
    source: Optional[str] = field(default=None, compare=False)

    def section(self, name: str) -> dict:
        return dict(self.params.get(name, {}))

    def pulses(self) -> list[LaserPulse]:
        return [d.pulse(self.device) for d in self.drives]

    def to_ini(self) -> str:
        lines = []
        if self.experiment:
            lines += ["[experiment]", f"kind = {self.experiment}", ""]
        dev = self.device
        lines += [
            "[device]",
            f"omega_cav = {dev.cavity.omega_cav!r} meV",
            f"gamma_cav = {dev.cavity.gamma_cav!r} meV",
            f"n_max = {dev.cavity.n_max}",
            f"temperature = {dev.temperature!r} K",
            f"stark_convention = {dev.stark_convention}",
            "",
        ]
        for i, d in enumerate(dev.dots):
            lines += [
                f"[dot.{i}]",
                f"omega_up = {d.omega_up!r} meV",
                f"omega_down = {d.omega_down!r} meV",
                f"omega_v = {d.omega_v!r} meV",
                f"g_cav = {d.g_cav!r} meV",
            ]
            if d.hole_decoherence_time is not None:
                lines.append(f"hole_decoherence_time = {d.hole_decoherence_time!r} ps")
            lines.append("")
        for k, dr in enumerate(self.drives):
            lines += [f"[drive.{k}]", f"dot = {dr.dot}", f"polarization = {dr.polarization}", f"rabi = {dr.rabi!r} meV"]
            if dr.omega_L is not None:
                lines.append(f"omega_L = {dr.omega_L!r} meV")
            else:
                lines.append(f"delta = {dr.delta!r} meV")
            lines.append("")
        for name in sorted(self.params):
            lines.append(f"[{name}]")
            schema = SECTION_KEYS[name]
            for key in sorted(self.params[name]):
                lines.append(f"{key} = {_format(self.params[name][key], schema[key])}")
            lines.append("")
        if self.output_dir is not None:
            lines += ["[output]", f"dir = {self.output_dir}", ""]
        return "\n".join(lines)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()


def _line_map(text: str) -> dict[tuple[str, Optional[str]], int]:
    out: dict[tuple[str, Optional[str]], int] = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), n)
            continue
        if section is not None and ("=" in line or ":" in line):
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            out.setdefault((section, key), n)
    return out


def parse_scenario_text(text: str, source: str = "<string>") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (omega_L, K)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError([f"{source}: {exc}"]) from None
    lines = _line_map(text)
    errors: list[str] = []
    bad: set[tuple[str, str]] = set()  # keys present but invalid; not also "missing"

    def where(sec: str, key: Optional[str] = None) -> str:
        n = lines.get((sec, key)) or lines.get((sec, None))
        loc = f"{source}:{n}" if n else source
        return f"{loc}: [{sec}]" + (f" {key}" if key else "")

    def read(sec: str, schema: dict) -> dict:
        vals = {}
        for key, raw in cp.items(sec):
            if key not in schema:
                errors.append(f"{where(sec, key)}: unknown key (allowed: {', '.join(sorted(schema))})")
                continue
            try:
                vals[key] = schema[key](raw)
            except ValueError as exc:
                bad.add((sec, key))
                errors.append(f"{where(sec, key)}: {exc}")
        return vals

    dots: dict[int, dict] = {}
    drives: dict[int, dict] = {}
    params: dict[str, dict] = {}
    device_vals: Optional[dict] = None
    experiment = None
    output_dir = None
    for sec in cp.sections():
        m = re.fullmatch(r"(dot|drive)\.(\d+)", sec)
        if sec == "device":
            device_vals = read(sec, DEVICE_KEYS)
        elif m and m.group(1) == "dot":
            dots[int(m.group(2))] = read(sec, DOT_KEYS) | {"_sec": sec}
        elif m:
            drives[int(m.group(2))] = read(sec, DRIVE_KEYS) | {"_sec": sec}
        elif sec == "experiment":
            experiment = read(sec, SECTION_KEYS[sec]).get("kind")
        elif sec == "output":
            output_dir = read(sec, SECTION_KEYS[sec]).get("dir")
        elif sec in SECTION_KEYS:
            params[sec] = read(sec, SECTION_KEYS[sec])
        else:
            errors.append(f"{where(sec)}: unknown section")

    device = None
    if device_vals is None:
        errors.append(f"{source}: missing [device] section")
    elif "omega_cav" not in device_vals and ("device", "omega_cav") not in bad:
        errors.append(f"{where('device')}: missing required key omega_cav")
    if not dots:
        errors.append(f"{source}: at least one [dot.N] section is required")
    elif sorted(dots) != list(range(len(dots))):
        errors.append(f"{source}: dot sections must be numbered 0..{len(dots) - 1}")
    dot_objs = []
    for i in sorted(dots):
        v = dict(dots[i])
        sec = v.pop("_sec")
        missing = [k for k in ("omega_up", "omega_down", "omega_v", "g_cav") if k not in v]
        if missing:
            missing = [k for k in missing if (sec, k) not in bad]
            if missing:
                errors.append(f"{where(sec)}: missing required keys {missing}")
            continue
        try:
            dot_objs.append(DotParams(**v))
        except ValueError as exc:
            errors.append(f"{where(sec)}: {exc}")
    if device_vals is not None and "omega_cav" in device_vals and len(dot_objs) == len(dots) and dots:
        try:
            cav = CavityParams(
                device_vals["omega_cav"], device_vals.get("gamma_cav", 0.0), device_vals.get("n_max", 3)
            )
            device = DeviceConfig(
                cav, tuple(dot_objs), device_vals.get("temperature", 0.0), device_vals.get("stark_convention", "direct")
            )
        except ValueError as exc:
            msg = str(exc)
            key = next((k for k in DEVICE_KEYS if k in msg), None)
            errors.append(f"{where('device', key)}: {msg}")
    drive_objs = []
    for k in sorted(drives):
        v = dict(drives[k])
        sec = v.pop("_sec")
        missing = [x for x in ("dot", "polarization", "rabi") if x not in v]
        if missing:
            missing = [x for x in missing if (sec, x) not in bad]
            if missing:
                errors.append(f"{where(sec)}: missing required keys {missing}")
            continue
        if ("omega_L" in v) == ("delta" in v):
            errors.append(f"{where(sec)}: give exactly one of omega_L or delta")
            continue
        if not v["rabi"] >= 0:
            errors.append(f"{where(sec, 'rabi')}: rabi must be >= 0")
            continue
        if device is not None and not 0 <= v["dot"] < len(device.dots):
            errors.append(f"{where(sec, 'dot')}: dot {v['dot']} does not exist")
            continue
        ds = DriveSpec(**v)
        if device is not None:
            try:
                ds.pulse(device)
            except ValueError as exc:
                errors.append(f"{where(sec)}: {exc}")
                continue
        drive_objs.append(ds)
    if device is not None:
        errors += _check_dot_refs(params, len(device.dots), where)
    if errors:
        raise ScenarioError(errors)
    return Scenario(device, tuple(drive_objs), experiment, params, output_dir, source)


def _check_dot_refs(params: dict, n: int, where) -> list[str]:
    errs = []
    for sec, vals in params.items():
        refs = []
        for key in ("pair", "dot", "control", "target"):
            if key in vals:
                v = vals[key]
                refs += list(v) if isinstance(v, tuple) else [v]
        for a, b in vals.get("pairs", ()):
            refs += [a, b]
        bad = sorted({r for r in refs if not 0 <= r < n})
        if bad:
            errs.append(f"{where(sec)}: references missing dots {bad}")
    return errs


def parse_scenario(path) -> Scenario:
    p = Path(path)
    if not p.is_file():
        raise ScenarioError([f"{p}: scenario file not found"])
    return parse_scenario_text(p.read_text(encoding="utf-8"), str(p))


def shipped_scenario(name: str) -> Path:
    """Path of a scenario bundled with the package (``baseline`` etc.)."""
    p = Path(__file__).with_name("scenarios") / f"{name}.ini"
    if not p.is_file():
        raise ScenarioError([f"no shipped scenario named {name!r}"])
    return p

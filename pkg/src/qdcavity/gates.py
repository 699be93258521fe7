"""Gate algebra and pulse-level execution.

Ideal matrices live on bare spin layouts (no cavity).  Sequences are stored in
time order: ``steps[0]`` acts first, so a printed product A·B·C becomes the
step list [C, B, A].

Conventions
-----------
* ``u_xy(φ) = exp(s·i·φ·(σ_yσ_y + σ_zσ_z)/2)`` with ``s = dynamics.EVOLUTION_SIGN``.
* ``single_qubit_rotation(dot, n, θ)`` is ``exp(+i·θ·n·σ)`` regardless of ``s``;
  its pulse realization uses ``H = s·r·n·σ`` for a time ``|θ|ħ/r``.
* Fidelity is ``|tr(U†V)|²/d²``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from . import dynamics
from .device_model import (
    HBAR,
    DeviceConfig,
    LaserPulse,
    derive_couplings,
    laser_frequency_for_detuning,
    raman_coupling,
    require_regime,
)
from .dynamics import Envelope, PropagationResult, propagate_unitary, solve_pulse_duration
from .hamiltonians import HamiltonianSpec, build_h_eff, build_h_xy
from .tensor_algebra import (
    SIGMA_X,
    SIGMA_Y,
    Operator,
    SpaceLayout,
    basis_index,
    embed,
    local_rotation,
    pauli,
    projector,
    spin_layout,
    unitary_check,
)

SQRT3 = math.sqrt(3.0)
N_I = (1 / SQRT3, 1 / SQRT3, -1 / SQRT3)
N_J = (-1 / SQRT3, 1 / SQRT3, 1 / SQRT3)
CPF_IDEAL = np.diag([1, 1, 1, -1]).astype(complex)
CNOT_IDEAL = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
# textbook Hadamard; in the x-quantized basis it swaps σ_x (diagonal) and σ_y (NOT)
HADAMARD = (SIGMA_X + SIGMA_Y) / math.sqrt(2.0)


class SchedulingError(ValueError):
    """Gate steps that cannot be scheduled on the device."""


# --- steps and sequences --------------------------------------------------


@dataclass(frozen=True)
class PulseRealization:
    lasers: tuple[LaserPulse, ...]
    duration: float
    hamiltonian_rate: float  # r in H = r·n·σ, or peak g̃ for xy steps (meV)
    detuning: float = 0.0    # two-photon detuning of a Raman pair (meV)


@dataclass(frozen=True)
class GateStep:
    kind: str  # "xy" | "rotation" | "unitary"
    dots: tuple[int, ...]
    phi: float = 0.0
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    angle: float = 0.0
    matrix: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    label: str = ""
    realization: Optional[PulseRealization] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "dots", tuple(int(d) for d in self.dots))
        if self.kind == "xy":
            if len(self.dots) != 2 or self.dots[0] == self.dots[1]:
                raise ValueError("xy step needs two distinct dots")
            if not np.isreal(self.phi):
                raise ValueError("phi must be real")
        elif self.kind == "rotation":
            if len(self.dots) != 1:
                raise ValueError("rotation step needs one dot")
            n = np.asarray(self.axis, dtype=float)
            if abs(np.linalg.norm(n) - 1.0) > 1e-12:
                raise ValueError(f"rotation axis {self.axis} is not unit-norm")
            object.__setattr__(self, "axis", tuple(float(x) for x in n))
        elif self.kind == "unitary":
            if self.matrix is None:
                raise ValueError("unitary step needs a matrix")
        else:
            raise ValueError(f"unknown step kind {self.kind!r}")

    def inverse(self) -> "GateStep":
        if self.kind == "xy":
            return replace(self, phi=-self.phi, realization=None, label=self.label + "^-1")
        if self.kind == "rotation":
            return replace(self, angle=-self.angle, realization=None, label=self.label + "^-1")
        return replace(self, matrix=np.asarray(self.matrix).conj().T, label=self.label + "^-1")


def xy_step(pair: Sequence[int], phi: float, label: str = "") -> GateStep:
    return GateStep("xy", tuple(pair), phi=phi, label=label or f"XY({phi:.6g})")


def rotation_step(dot: int, axis: Sequence[float], angle: float, label: str = "") -> GateStep:
    return GateStep("rotation", (dot,), axis=tuple(axis), angle=angle, label=label or f"R{dot}({angle:.6g})")


@dataclass(frozen=True)
class GateSequence:
    n_dots: int
    steps: tuple[GateStep, ...] = ()
    target: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    global_phase: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        for s in self.steps:
            if any(not 0 <= d < self.n_dots for d in s.dots):
                raise ValueError(f"step {s.label} references a dot outside 0..{self.n_dots - 1}")

    @property
    def layout(self) -> SpaceLayout:
        return spin_layout(self.n_dots)

    def inverse(self) -> "GateSequence":
        return GateSequence(
            self.n_dots,
            tuple(s.inverse() for s in reversed(self.steps)),
            None if self.target is None else np.asarray(self.target).conj().T,
            -self.global_phase,
            self.name + "^-1",
        )


# --- ideal matrices -------------------------------------------------------


def fidelity_up_to_global_phase(U, V) -> float:
    u = U.matrix if isinstance(U, Operator) else np.asarray(U, dtype=complex)
    v = V.matrix if isinstance(V, Operator) else np.asarray(V, dtype=complex)
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    d = u.shape[0]
    return float(abs(np.trace(u.conj().T @ v)) ** 2 / d**2)


def xy_generator(layout: SpaceLayout, pair: Sequence[int]) -> np.ndarray:
    i, j = pair
    return 0.5 * (
        pauli(i, "y", layout).matrix @ pauli(j, "y", layout).matrix
        + pauli(i, "z", layout).matrix @ pauli(j, "z", layout).matrix
    )


def u_xy(pair: Sequence[int], phi: float, n_dots: int = 2, sign: Optional[int] = None) -> Operator:
    """exp(s·i·φ·(σ_yσ_y + σ_zσ_z)/2) on the pair."""
    s = dynamics._sign(sign)
    lay = spin_layout(n_dots)
    g = xy_generator(lay, pair)
    # F = (YY+ZZ)/2 has eigenvalues {−1, 0, 0, 1}, so exp(iaF) = 1 + i sin(a) F + (cos(a) − 1) F²
    a = s * phi
    m = np.eye(lay.dim, dtype=complex) + 1j * math.sin(a) * g + (math.cos(a) - 1) * (g @ g)
    return Operator(lay, m)


def rotation_operator(dot: int, axis: Sequence[float], angle: float, n_dots: int = 2) -> Operator:
    lay = spin_layout(n_dots)
    return embed(local_rotation(axis, angle), dot, lay)


def step_matrix(step: GateStep, n_dots: int, sign: Optional[int] = None) -> np.ndarray:
    if step.kind == "xy":
        return u_xy(step.dots, step.phi, n_dots, sign).matrix
    if step.kind == "rotation":
        return rotation_operator(step.dots[0], step.axis, step.angle, n_dots).matrix
    m = np.asarray(step.matrix, dtype=complex)
    if len(step.dots) == n_dots and step.dots == tuple(range(n_dots)):
        return m
    if len(step.dots) == 1:
        return embed(m, step.dots[0], spin_layout(n_dots)).matrix
    raise ValueError("unitary steps must act on one dot or on all dots in order")


def evaluate(seq: GateSequence, sign: Optional[int] = None, order: str = "time") -> Operator:
    """Product of the step matrices (later steps to the left).

    ``order="reversed"`` multiplies the other way round; it exists only for
    the convention search in :func:`cpf_convention_report`.
    """
    lay = seq.layout
    u = np.eye(lay.dim, dtype=complex) * np.exp(1j * seq.global_phase)
    for st in seq.steps:
        m = step_matrix(st, seq.n_dots, sign)
        u = m @ u if order == "time" else u @ m
    return Operator(lay, u)


# --- CPF / CNOT -----------------------------------------------------------


def cpf_sequence(pair: Sequence[int] = (0, 1), n_dots: int = 2, variant: str = "printed") -> GateSequence:
    """Two-XY-pulse CPF construction on ``pair`` = (i, j).

    ``variant="printed"``: e^{iπ/4} e^{iπ n_i·σ_i/3} e^{iπ n_j·σ_j/3} U_XY(π/4)
    e^{iπσ_z^i/2} U_XY(π/4) e^{iπσ_y^i/4} e^{iπσ_y^j/4}, rightmost first.
    ``variant="corrected"``: the two opening σ_y quarter-turns carry e^{−iπσ_y/4};
    everything else is unchanged.  Only this variant evaluates to diag(1,1,1,−1).
    """
    if variant not in ("printed", "corrected"):
        raise ValueError("variant must be 'printed' or 'corrected'")
    i, j = pair
    y_angle = math.pi / 4 if variant == "printed" else -math.pi / 4
    y = (0.0, 1.0, 0.0)
    z = (0.0, 0.0, 1.0)
    steps = [
        rotation_step(j, y, y_angle, "Ry_j"),
        rotation_step(i, y, y_angle, "Ry_i"),
        xy_step(pair, math.pi / 4, "XY(pi/4)"),
        rotation_step(i, z, math.pi / 2, "Rz_i"),
        xy_step(pair, math.pi / 4, "XY(pi/4)"),
        rotation_step(j, N_J, math.pi / 3, "Rn_j"),
        rotation_step(i, N_I, math.pi / 3, "Rn_i"),
    ]
    target = _embed_pair(CPF_IDEAL, pair, n_dots)
    return GateSequence(n_dots, tuple(steps), target, math.pi / 4, f"CPF[{variant}]")


def _embed_pair(m4: np.ndarray, pair: Sequence[int], n_dots: int) -> np.ndarray:
    """Place a 4×4 matrix (first factor = pair[0]) on a pair of an n-dot register."""
    i, j = pair
    if n_dots == 2 and (i, j) == (0, 1):
        return np.array(m4, dtype=complex)
    lay = spin_layout(n_dots)
    out = np.zeros((lay.dim, lay.dim), dtype=complex)
    t = np.asarray(m4).reshape(2, 2, 2, 2)
    dims = (2,) * n_dots
    for col in range(lay.dim):
        bits = list(np.unravel_index(col, dims))
        for a in range(2):
            for b in range(2):
                amp = t[a, b, bits[i], bits[j]]
                if amp != 0:
                    nb = list(bits)
                    nb[i], nb[j] = a, b
                    out[np.ravel_multi_index(nb, dims), col] += amp
    return out


def cnot_sequence(
    control: int = 0, target: int = 1, n_dots: int = 2, variant: str = "standard", cpf_variant: str = "corrected"
) -> GateSequence:
    """CNOT by conjugating the CPF sequence on the target.

    ``variant="printed"``: exp(−iπσ_z^j/4)·CPF·exp(iπσ_z^j/4).
    ``variant="standard"``: Hadamard·CPF·Hadamard on the target.
    """
    cpf = cpf_sequence((control, target), n_dots, cpf_variant)
    z = (0.0, 0.0, 1.0)
    if variant == "printed":
        pre = rotation_step(target, z, math.pi / 4, "Rz_j")
        post = rotation_step(target, z, -math.pi / 4, "Rz_j^-1")
    elif variant == "standard":
        pre = GateStep("unitary", (target,), matrix=HADAMARD, label="H_j")
        post = GateStep("unitary", (target,), matrix=HADAMARD, label="H_j")
    else:
        raise ValueError("variant must be 'standard' or 'printed'")
    return GateSequence(
        n_dots,
        (pre, *cpf.steps, post),
        _embed_pair(CNOT_IDEAL, (control, target), n_dots),
        cpf.global_phase,
        f"CNOT[{variant}]",
    )


def verify(seq: GateSequence, sign: Optional[int] = None) -> dict:
    if seq.target is None:
        raise ValueError("sequence has no target")
    u = evaluate(seq, sign)
    m = u.matrix
    return {
        "name": seq.name,
        "fidelity": fidelity_up_to_global_phase(m, seq.target),
        "unitary": unitary_check(m, 1e-10),
        "off_diagonal_max": float(np.max(np.abs(m - np.diag(np.diag(m))))),
        "matrix": m,
    }


def cpf_convention_report(pair: Sequence[int] = (0, 1)) -> dict:
    """Printed CPF sequence under every evolution sign × rotation sign × ordering."""
    rows = []
    for ev in (+1, -1):
        for rot in (+1, -1):
            for order in ("time", "reversed"):
                seq = cpf_sequence(pair, 2, "printed")
                if rot == -1:
                    seq = replace(seq, steps=tuple(
                        replace(s, angle=-s.angle) if s.kind == "rotation" else s for s in seq.steps
                    ))
                u = evaluate(seq, ev, order).matrix
                rows.append({
                    "evolution_sign": ev,
                    "rotation_sign": rot,
                    "order": "rightmost_first" if order == "time" else "leftmost_first",
                    "fidelity": fidelity_up_to_global_phase(u, CPF_IDEAL),
                    "off_diagonal_max": float(np.max(np.abs(u - np.diag(np.diag(u))))),
                })
    best = max(rows, key=lambda r: r["fidelity"])
    corrected = fidelity_up_to_global_phase(evaluate(cpf_sequence(pair, 2, "corrected")).matrix, CPF_IDEAL)
    return {
        "conventions": rows,
        "best_printed_fidelity": best["fidelity"],
        "best_printed_convention": {k: best[k] for k in ("evolution_sign", "rotation_sign", "order")},
        "corrected_variant_fidelity": corrected,
        "corrected_variant_change": "opening sigma_y quarter-turns use exp(-i*pi*sigma_y/4) on both dots",
        "frozen_evolution_sign": dynamics.EVOLUTION_SIGN,
    }


# --- pulse compilation ----------------------------------------------------


@dataclass(frozen=True)
class ExecutionOptions:
    shape: str = "square"           # envelope of the xy steps
    ramp: float = 10.0              # ps, flat-top ramps
    delta: float = 0.5              # meV, common two-photon detuning of the pair
    rabi_y: float = 1.0             # meV, peak Rabi frequency of the cavity-Raman lasers
    rabi_x: float = 1.0             # meV, x-polarized laser of single-qubit Raman pairs
    raman_detuning: float = 5.0     # meV, one-photon detuning Δω of single-qubit pairs
    g_tilde: Optional[float] = None  # meV, overrides the derived pair coupling (effective model)
    stark_compensate: bool = True   # full model: tune ω_L so the dressed detuning equals ``delta``
    step_factor: float = 1.5        # × the enforced step budget


def single_qubit_rate(opts: ExecutionOptions) -> float:
    """Laser-laser Raman coupling (Ω_x Ω_y / 2)(1/Δω_↑ + 1/Δω_↓) at Δω_↑ = Δω_↓."""
    return raman_coupling(opts.rabi_x, opts.rabi_y, opts.raman_detuning, opts.raman_detuning)


def single_qubit_rotation(
    dot: int,
    n: Sequence[float],
    angle: float,
    device: Optional[DeviceConfig] = None,
    opts: ExecutionOptions = ExecutionOptions(),
    n_dots: int = 2,
    t_start: float = 0.0,
) -> tuple[Operator, Optional[PulseRealization]]:
    """Ideal exp(i·angle·n·σ) and an x/y Raman laser pair realizing it."""
    axis = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
        raise ValueError(f"rotation axis {tuple(n)} is not unit-norm")
    ideal = rotation_operator(dot, axis, angle, n_dots)
    if angle == 0:
        return ideal, None
    if angle < 0:
        axis, angle = -axis, -angle
    omega_eff = single_qubit_rate(opts)
    transverse = math.hypot(axis[1], axis[2])
    if transverse < 1e-12:
        # pure σ_x: detuning only, no population transfer
        r = omega_eff
        detuning = 2 * r * axis[0]
        rabi_x = rabi_y = 0.0
    else:
        r = omega_eff / transverse
        detuning = 2 * r * axis[0]
        rabi_x, rabi_y = opts.rabi_x, opts.rabi_y
    duration = solve_pulse_duration(angle, "square", r)
    lasers: tuple[LaserPulse, ...] = ()
    if device is not None:
        d = device.dots[dot]
        w_y = d.omega_down - d.omega_v - opts.raman_detuning
        w_x = w_y + d.omega_updown - detuning
        phase = math.atan2(axis[2], axis[1]) if transverse >= 1e-12 else 0.0
        env_x = Envelope.square(rabi_x, t_start, duration) if rabi_x > 0 else None
        env_y = Envelope.square(rabi_y, t_start, duration) if rabi_y > 0 else None
        lasers = (
            LaserPulse(dot, "x", w_x, rabi_x, env_x, phase),
            LaserPulse(dot, "y", w_y, rabi_y, env_y, 0.0),
        )
    return ideal, PulseRealization(lasers, duration, r, detuning)


def _pair_drives(device: DeviceConfig, pair: Sequence[int], opts: ExecutionOptions, env: Optional[Envelope]) -> tuple[LaserPulse, ...]:
    """y-polarized drives putting both dots of ``pair`` at detuning ``opts.delta``.

    With ``stark_compensate`` the detuning is the dressed one at peak drive:
    the diagonal gap between |↑_k, 0⟩ and |↓…↓, 1⟩ in the effective Hamiltonian.
    """
    deltas = {k: opts.delta for k in pair}
    if opts.stark_compensate:
        nominal = [
            LaserPulse(k, "y", laser_frequency_for_detuning(device.dots[k], device.cavity, opts.delta), opts.rabi_y)
            for k in pair
        ]
        h = build_h_eff(HamiltonianSpec("effective", device, nominal, "rotating"), check_regime=False).matrix
        n = len(device.dots)
        lay = SpaceLayout(device.cavity.n_max + 1, (2,) * n)
        ec = float(np.real(h[basis_index(lay, 1, _labels(n, {})), basis_index(lay, 1, _labels(n, {}))]))
        for k in pair:
            ia = basis_index(lay, 0, _labels(n, {k: "up"}))
            deltas[k] = 2 * opts.delta - (float(np.real(h[ia, ia])) - ec)
    return tuple(
        LaserPulse(k, "y", laser_frequency_for_detuning(device.dots[k], device.cavity, deltas[k]), opts.rabi_y, env)
        for k in pair
    )


def pair_coupling(device: DeviceConfig, pair: Sequence[int], opts: ExecutionOptions) -> float:
    """Peak g̃ of the pair under the compiled drives (pair-coupling arithmetic)."""
    if opts.g_tilde is not None:
        return opts.g_tilde
    drives = _pair_drives(device, pair, replace(opts, stark_compensate=False), None)
    dc = derive_couplings(device, drives)
    return dc.g_tilde[tuple(sorted(pair))]


@dataclass
class ScheduledStep:
    step: GateStep
    t0: float
    t1: float
    realization: Optional[PulseRealization]


def compile_sequence(
    seq: GateSequence, device: Optional[DeviceConfig] = None, opts: ExecutionOptions = ExecutionOptions()
) -> list[ScheduledStep]:
    """Sequential pulse schedule with square xy pulses at the pair's g̃."""
    out = []
    t = 0.0
    for st in seq.steps:
        if st.kind == "rotation":
            _, real = single_qubit_rotation(st.dots[0], st.axis, st.angle, device, opts, seq.n_dots, t)
            dur = 0.0 if real is None else real.duration
        elif st.kind == "xy":
            g = opts.g_tilde if device is None else pair_coupling(device, st.dots, opts)
            if g is None:
                raise SchedulingError("xy step needs a device or an explicit g_tilde")
            if g <= 0:
                raise SchedulingError("pair coupling must be positive (choose Δ > 0)")
            dur = solve_pulse_duration(abs(st.phi), "square", g)
            lasers = () if device is None else _pair_drives(device, st.dots, opts, Envelope.square(opts.rabi_y, t, dur) if dur > 0 else None)
            real = PulseRealization(lasers, dur, g)
        else:
            dur, real = 0.0, None
        out.append(ScheduledStep(st, t, t + dur, real))
        t += dur
    return out


def sequence_duration(schedule: Sequence[ScheduledStep]) -> float:
    return schedule[-1].t1 if schedule else 0.0


# --- execution ------------------------------------------------------------


@dataclass
class ExecutionResult:
    propagation: PropagationResult
    fidelity: float
    ideal: np.ndarray
    total_time: float
    residual_cavity_population: float = 0.0
    schedule: list = field(default_factory=list)


def _rotation_hamiltonian(layout: SpaceLayout, dot: int, axis: Sequence[float], rate: float, s: int) -> np.ndarray:
    ax = np.asarray(axis, dtype=float)
    return s * rate * sum(c * pauli(dot, a, layout).matrix for c, a in zip(ax, "xyz"))


def _steps_for(h_fn, t0, t1, opts, static=False) -> int:
    if static:
        return 1
    return max(1, int(math.ceil(opts.step_factor * dynamics.min_steps(h_fn, t0, t1))))


def execute_sequence(
    seq: GateSequence,
    model: str = "effective",
    device: Optional[DeviceConfig] = None,
    opts: ExecutionOptions = ExecutionOptions(),
) -> ExecutionResult:
    """Compile and propagate ``seq``; fidelity against the ideal product.

    ``effective``: spins only, xy steps under (g̃/2)(σ_yσ_y + σ_zσ_z).
    ``full``: cavity kept (effective Hamiltonian with the valence level
    eliminated, static rotating frame); fidelity on the vacuum block after a
    per-step virtual phase correction of the single-spin shifts.
    """
    s = dynamics.EVOLUTION_SIGN
    ideal = evaluate(seq).matrix
    if not seq.steps:
        lay = seq.layout
        prop = PropagationResult(np.eye(lay.dim, dtype=complex), np.array([0.0]))
        return ExecutionResult(prop, 1.0, ideal, 0.0)
    if model == "effective":
        return _execute_effective(seq, device, opts, s, ideal)
    if model == "full":
        if device is None:
            raise ValueError("full-model execution needs a device")
        return _execute_full(seq, device, opts, s, ideal)
    raise ValueError("model must be 'effective' or 'full'")


def _execute_effective(seq, device, opts, s, ideal) -> ExecutionResult:
    lay = seq.layout
    sched = compile_sequence(seq, device, opts)
    u = np.eye(lay.dim, dtype=complex)
    times = [0.0]
    for item in sched:
        st = item.step
        if st.kind == "unitary":
            u = step_matrix(st, seq.n_dots) @ u
        elif item.t1 > item.t0:
            if st.kind == "xy":
                rate = item.realization.hamiltonian_rate
                # exp(s·i·H·t/ħ) with H = sign(φ)·g̃·F reproduces u_xy(φ)
                h = np.sign(st.phi) * rate * xy_generator(lay, st.dots)
            else:
                axis = st.axis if st.angle >= 0 else tuple(-c for c in st.axis)
                h = _rotation_hamiltonian(lay, st.dots[0], axis, item.realization.hamiltonian_rate, s)
            u = propagate_unitary(Operator(lay, h), item.t0, item.t1, 1).matrix @ u
        times.append(item.t1)
    u = u * np.exp(1j * seq.global_phase)
    prop = PropagationResult(u, np.array(times), metadata={"model": "effective", "sign": s})
    return ExecutionResult(prop, fidelity_up_to_global_phase(u, ideal), ideal, sequence_duration(sched), 0.0, sched)


def _execute_full(seq: GateSequence, device: DeviceConfig, opts: ExecutionOptions, s: int, ideal) -> ExecutionResult:
    if len(device.dots) != seq.n_dots:
        raise SchedulingError("full-model execution needs one device dot per sequence qubit")
    require_regime(device)
    n_cav = device.cavity.n_max + 1
    lay = SpaceLayout(n_cav, (2,) * seq.n_dots)
    spin_lay = seq.layout
    u = np.eye(lay.dim, dtype=complex)
    times = [0.0]
    t = 0.0
    sched = []
    vac = [basis_index(lay, 0, bits) for bits in _spin_labels(seq.n_dots)]
    for st in seq.steps:
        if st.kind == "unitary":
            m = np.kron(np.eye(n_cav), step_matrix(st, seq.n_dots))
            u = m @ u
            sched.append(ScheduledStep(st, t, t, None))
            continue
        if st.kind == "rotation":
            _, real = single_qubit_rotation(st.dots[0], st.axis, st.angle, device, opts, seq.n_dots, t)
            if real is None:
                sched.append(ScheduledStep(st, t, t, None))
                continue
            axis = st.axis if st.angle >= 0 else tuple(-c for c in st.axis)
            h = _rotation_hamiltonian(lay, st.dots[0], axis, real.hamiltonian_rate, s)
            u = propagate_unitary(Operator(lay, h), t, t + real.duration, 1).matrix @ u
            sched.append(ScheduledStep(st, t, t + real.duration, real))
            t += real.duration
            times.append(t)
            continue
        step_u, dur, real = _full_xy_step(st, device, opts, lay, t, s)
        u = step_u @ u
        sched.append(ScheduledStep(st, t, t + dur, real))
        t += dur
        times.append(t)
    block = u[np.ix_(vac, vac)] * np.exp(1j * seq.global_phase)
    leak = float(max(1.0 - np.sum(np.abs(block[:, k]) ** 2) for k in range(block.shape[1])))
    prop = PropagationResult(block, np.array(times), metadata={"model": "full", "sign": s, "n_max": device.cavity.n_max})
    return ExecutionResult(prop, fidelity_up_to_global_phase(block, ideal), ideal, t, leak, sched)


def _spin_labels(n: int):
    for k in range(2**n):
        yield ["up" if (k >> (n - 1 - b)) & 1 == 0 else "down" for b in range(n)]


def _full_xy_step(st: GateStep, device: DeviceConfig, opts: ExecutionOptions, lay: SpaceLayout, t0: float, s: int):
    """Propagate one xy step in the cavity model and undo its single-spin phases."""
    i, j = st.dots
    if st.phi < 0:
        raise SchedulingError("full-model xy steps need φ >= 0 (the cavity coupling has fixed sign)")
    if st.phi == 0:
        return np.eye(lay.dim, dtype=complex), 0.0, None
    ramp = opts.ramp if opts.shape == "flattop" else 0.0
    shape = opts.shape if opts.shape != "gaussian" else "flattop"

    def spec_for(duration: float) -> HamiltonianSpec:
        env = Envelope(shape, 1.0, t0, duration, ramp)
        drives = _pair_drives(device, st.dots, opts, env)
        return HamiltonianSpec("effective", device, drives, "rotating")

    idx = {
        "a": basis_index(lay, 0, _labels(lay.n_dots, {i: "up"})),
        "b": basis_index(lay, 0, _labels(lay.n_dots, {j: "up"})),
        "c": basis_index(lay, 1, _labels(lay.n_dots, {})),
        "ref": basis_index(lay, 0, _labels(lay.n_dots, {})),
    }

    def shifts(h: np.ndarray) -> tuple[float, float, float]:
        """(g̃, shift of ↑_i, shift of ↑_j) from second-order perturbation theory."""
        ea, eb, ec = (float(np.real(h[idx[k], idx[k]])) for k in ("a", "b", "c"))
        e0 = float(np.real(h[idx["ref"], idx["ref"]]))
        ca, cb = h[idx["c"], idx["a"]], h[idx["c"], idx["b"]]
        g = float(np.real(np.conj(cb) * ca)) * 0.5 * (1 / (ea - ec) + 1 / (eb - ec))
        return g, ea - e0 + abs(ca) ** 2 / (ea - ec), eb - e0 + abs(cb) ** 2 / (eb - ec)

    def area(duration: float) -> float:
        spec = spec_for(duration)
        env = spec.drives[0].envelope
        pts = env.breakpoints()
        return dynamics.pulse_area(lambda tt: shifts(build_h_eff(spec, tt, check_regime=False).matrix)[0], t0, t0 + duration, pts)

    lo = 2 * ramp + 1e-9 if shape == "flattop" else 1e-9
    hi = max(lo * 2, 4 * st.phi * HBAR / max(pair_coupling(device, st.dots, opts), 1e-6))
    while area(hi) < st.phi:
        hi *= 2
    if area(lo) > st.phi:
        raise SchedulingError("ramps alone exceed the requested pulse area; shorten the ramp")
    duration = optimize.brentq(lambda d: area(d) - st.phi, lo, hi, xtol=1e-10)
    spec = spec_for(duration)
    require_regime(device, spec.drives)
    h_fn = lambda tt: build_h_eff(spec, tt, check_regime=False)
    t1 = t0 + duration
    if shape == "square":
        step_u = propagate_unitary(h_fn(0.5 * (t0 + t1)), t0, t1, 1).matrix
    else:
        n = _steps_for(h_fn, t0, t1, opts)
        step_u = propagate_unitary(h_fn, t0, t1, n).matrix
    # virtual phase correction: remove ∫ single-spin shift dt from each ↑ level
    pts = spec.drives[0].envelope.breakpoints()
    theta = []
    for k in (1, 2):
        val = dynamics.pulse_area(lambda tt: shifts(h_fn(tt).matrix)[k], t0, t1, pts)
        theta.append(val)
    corr = np.ones(lay.dim, dtype=complex)
    for dot, th in zip((i, j), theta):
        up = np.real(np.diag(projector(dot, "up", lay).matrix))
        corr *= np.exp(-s * 1j * th * up)
    step_u = np.diag(corr) @ step_u
    g_peak = shifts(h_fn(t0 + 0.5 * duration).matrix)[0]
    return step_u, duration, PulseRealization(spec.drives, duration, g_peak)


def _labels(n: int, ups: dict) -> list[str]:
    return [ups.get(k, "down") for k in range(n)]

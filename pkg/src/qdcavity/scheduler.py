"""Laser-frequency plans for simultaneous pair operations and their crosstalk."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import dynamics
from .device_model import (
    HBAR,
    DeviceConfig,
    LaserPulse,
    RegimeError,
    _mg,
    g_eff,
    g_tilde,
    g_tilde_pair,
    laser_frequency_for_detuning,
    two_photon_detuning,
)
from .gates import fidelity_up_to_global_phase
from .hamiltonians import flipflop_hamiltonian
from .tensor_algebra import LayoutError, projector, spin_layout

K_FLOOR = 10.0
K_DEFAULT = 50.0
LADDER_RATIO = 5.0


class PlanError(ValueError):
    """Pair requests or ladder parameters that cannot be planned."""


@dataclass(frozen=True)
class PairRequest:
    control: int
    target: int

    def __post_init__(self) -> None:
        if self.control == self.target:
            raise PlanError("control and target must differ")

    @property
    def dots(self) -> tuple[int, int]:
        return (self.control, self.target)


@dataclass
class FrequencyPlan:
    pairs: list[PairRequest]
    omega_L: dict[int, float]
    pair_delta: list[float]
    separation: np.ndarray
    K: float
    g_tilde_max: float
    rabi: float
    g_eff: dict[int, float] = field(default_factory=dict)
    delta: dict[int, float] = field(default_factory=dict)
    coupling_rule: str = "symmetric"

    def drives(self) -> list[LaserPulse]:
        return [LaserPulse(k, "y", w, self.rabi) for k, w in sorted(self.omega_L.items())]

    def couplings(self) -> dict[tuple[int, int], float]:
        """g̃ for every pair of driven dots under ``coupling_rule``."""
        out = {}
        for a, b in itertools.combinations(sorted(self.omega_L), 2):
            out[(a, b)] = g_tilde_pair(self.g_eff[a], self.g_eff[b], self.delta[a], self.delta[b], self.coupling_rule)
        return out

    def to_dict(self) -> dict:
        return {
            "pairs": [[p.control, p.target] for p in self.pairs],
            "K": self.K,
            "coupling_rule": self.coupling_rule,
            "g_tilde_max_meV": self.g_tilde_max,
            "rabi_meV": self.rabi,
            "omega_L_meV": {str(k): v for k, v in sorted(self.omega_L.items())},
            "delta_meV": {str(k): v for k, v in sorted(self.delta.items())},
            "pair_delta_meV": list(self.pair_delta),
            "separation_meV": self.separation.tolist(),
        }


def _check_disjoint(pairs: Sequence[PairRequest], n_dots: int) -> None:
    seen: set[int] = set()
    for p in pairs:
        for d in p.dots:
            if not 0 <= d < n_dots:
                raise PlanError(f"pair {p.dots} references missing dot {d}")
            if d in seen:
                raise PlanError(f"dot {d} appears in more than one concurrent pair")
            seen.add(d)


def _pair_g_tilde(device: DeviceConfig, pair: PairRequest, delta: float, rabi: float) -> tuple[float, dict[int, float]]:
    ges = {}
    for k in pair.dots:
        dot = device.dots[k]
        laser = LaserPulse(k, "y", laser_frequency_for_detuning(dot, device.cavity, delta), rabi)
        ges[k] = g_eff(dot, device.cavity, laser)
    a, b = sorted(pair.dots)
    return g_tilde(ges[a], ges[b], delta), ges


def assign_detunings(
    pairs: Sequence[PairRequest],
    device: DeviceConfig,
    K: float = K_DEFAULT,
    delta_base: float = 0.5,
    rabi: float = 1.0,
    g_tilde_max: Optional[float] = None,
    k_floor: float = K_FLOOR,
    coupling_rule: str = "symmetric",
) -> FrequencyPlan:
    """Detuning ladder Δ_pair(m) = Δ_base + m·K·g̃_max and the matching ω_L per dot.

    ``g_tilde_max`` defaults to the largest pair coupling at Δ_base.
    """
    pairs = list(pairs)
    if K < k_floor:
        raise PlanError(f"separation factor K = {K} is below the floor {k_floor}")
    if not delta_base > 0:
        raise PlanError("delta_base must be positive")
    _check_disjoint(pairs, len(device.dots))
    if not pairs:
        return FrequencyPlan([], {}, [], np.zeros((0, 0)), K, 0.0, rabi, coupling_rule=coupling_rule)
    if g_tilde_max is None:
        g_tilde_max = max(abs(_pair_g_tilde(device, p, delta_base, rabi)[0]) for p in pairs)
    ladder = [delta_base + m * K * g_tilde_max for m in range(len(pairs))]
    omega_L, deltas, ges = {}, {}, {}
    for p, d in zip(pairs, ladder):
        _, ge = _pair_g_tilde(device, p, d, rabi)
        for k in p.dots:
            dot = device.dots[k]
            ratio = _mg("delta_pair << omega_updown", k, dot.omega_updown, d, LADDER_RATIO, LADDER_RATIO)
            if ratio.status == "fail":
                raise RegimeError([ratio])
            elim = _mg("delta_pair >> g_eff", k, d, ge[k], LADDER_RATIO, 2.0)
            if elim.status == "fail":
                raise RegimeError([elim])
            if device.cavity.gamma_cav and d <= device.cavity.gamma_cav:
                raise RegimeError([_mg("delta_pair >> gamma_cav", k, d, device.cavity.gamma_cav, 1.0, 1.0)])
            omega_L[k] = laser_frequency_for_detuning(dot, device.cavity, d)
            deltas[k] = two_photon_detuning(dot, device.cavity, LaserPulse(k, "y", omega_L[k], rabi))
            ges[k] = ge[k]
    sep = np.abs(np.subtract.outer(ladder, ladder))
    return FrequencyPlan(pairs, omega_L, ladder, sep, K, g_tilde_max, rabi, ges, deltas, coupling_rule)


# --- crosstalk ------------------------------------------------------------


@dataclass
class CrosstalkReport:
    duration: float
    max_cross_transfer: float
    intended_fidelity: float
    bound: float
    per_probe: dict[int, float]
    times: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    transfer: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))  # max over probes, per time

    def to_dict(self) -> dict:
        return {
            "duration_ps": self.duration,
            "max_cross_transfer": self.max_cross_transfer,
            "intended_fidelity": self.intended_fidelity,
            "bound_8_gt_over_dab_sq": self.bound,
            "per_probe": {str(k): v for k, v in sorted(self.per_probe.items())},
        }


def _frame_propagators(plan: FrequencyPlan, couplings, times, sign: int):
    """U(t) for H(t) = Σ g̃_ab[σ^a_↑↓σ^b_↓↑ e^{iΔ_ab t} + h.c.], exactly.

    H(t) = e^{iDt/ħ} V e^{−iDt/ħ} with D = Σ Δ_k σ^k_↑↑, so
    U(t) = e^{iDt/ħ} exp(s·i·(V − s·D)·t/ħ).
    """
    dots = sorted(plan.omega_L)
    index = {d: n for n, d in enumerate(dots)}
    n = len(dots)
    lay = spin_layout(n)
    local = {(index[a], index[b]): g for (a, b), g in couplings.items()}
    v = flipflop_hamiltonian(n, local).matrix
    dvec = np.zeros(lay.dim)
    for d in dots:
        dvec += plan.delta[d] * np.real(np.diag(projector(index[d], "up", lay).matrix))
    w, q = np.linalg.eigh(v - sign * np.diag(dvec))
    for t in times:
        core = (q * np.exp(sign * 1j * w * t / HBAR)) @ q.conj().T
        yield t, np.exp(1j * dvec * t / HBAR)[:, None] * core


def crosstalk_hamiltonian(plan: FrequencyPlan, t: float, include_cross: bool = True):
    """The lab-time Hamiltonian on the driven dots (for oracle propagation)."""
    dots = sorted(plan.omega_L)
    index = {d: n for n, d in enumerate(dots)}
    intended = {tuple(sorted(p.dots)) for p in plan.pairs}
    couplings = {
        (index[a], index[b]): g
        for (a, b), g in plan.couplings().items()
        if include_cross or (a, b) in intended
    }
    return flipflop_hamiltonian(len(dots), couplings, {index[d]: plan.delta[d] for d in dots}, t)


def estimate_crosstalk(
    plan: FrequencyPlan,
    device: Optional[DeviceConfig] = None,
    duration: Optional[float] = None,
    n_samples: int = 2001,
    max_dim: int = 4096,
) -> CrosstalkReport:
    """Cross-pair transfer and intended-pair fidelity with every pair coupling on.

    Probes are single-excitation states |↑⟩_k|↓…⟩; transfer is the population
    found on dots outside the probe's pair, maximized over sampled times.
    ``duration`` defaults to the full-swap time of the first pair.
    """
    if not plan.pairs:
        return CrosstalkReport(0.0, 0.0, 1.0, 0.0, {})
    dots = sorted(plan.omega_L)
    if 2 ** len(dots) > max_dim:
        raise LayoutError(f"{len(dots)} dots exceed the dimension cap {max_dim}")
    index = {d: n for n, d in enumerate(dots)}
    full = plan.couplings()
    intended = {tuple(sorted(p.dots)) for p in plan.pairs}
    only = {k: v for k, v in full.items() if k in intended}
    if duration is None:
        g0 = full[tuple(sorted(plan.pairs[0].dots))]
        duration = (math.pi / 2) * HBAR / abs(g0)
    times = np.linspace(0.0, duration, n_samples)
    s = dynamics.EVOLUTION_SIGN
    partner = {}
    for p in plan.pairs:
        partner[p.control], partner[p.target] = p.target, p.control
    n = len(dots)
    # level 0 is ↑ and the first dot is the most significant bit
    all_down = (1 << n) - 1
    probes = {d: all_down ^ (1 << (n - 1 - index[d])) for d in dots}
    inside = {d: {all_down ^ (1 << (n - 1 - index[e])) for e in (d, partner[d])} for d in dots}
    per_probe = {d: 0.0 for d in dots}
    series = np.zeros(len(times))
    u_full = u_ref = None
    pairs = zip(_frame_propagators(plan, full, times, s), _frame_propagators(plan, only, times, s))
    for n_t, ((t, u_f), (_, u_r)) in enumerate(pairs):
        for d in dots:
            col = np.abs(u_f[:, probes[d]]) ** 2
            leak = float(1.0 - sum(col[k] for k in inside[d]))
            per_probe[d] = max(per_probe[d], leak)
            series[n_t] = max(series[n_t], leak)
        u_full, u_ref = u_f, u_r
    fid = fidelity_up_to_global_phase(u_full, u_ref)
    pair_deltas = plan.pair_delta
    d_ab = min(
        (abs(a - b) for a, b in itertools.combinations(pair_deltas, 2)), default=float("inf")
    )
    bound = 8 * (plan.g_tilde_max / d_ab) ** 2 if math.isfinite(d_ab) else 0.0
    return CrosstalkReport(duration, max(per_probe.values()), fid, bound, per_probe, times, series)


def crosstalk_sweep(
    pairs: Sequence[PairRequest], device: DeviceConfig, Ks: Sequence[float], duration: Optional[float] = None, **kw
) -> list[dict]:
    """Cross-pair transfer at a fixed duration for each separation factor."""
    rows = []
    if duration is None:
        base = assign_detunings(pairs, device, K=min(Ks), **kw)
        g0 = base.couplings()[tuple(sorted(base.pairs[0].dots))]
        duration = (math.pi / 2) * HBAR / abs(g0)
    for K in Ks:
        plan = assign_detunings(pairs, device, K=K, **kw)
        rep = estimate_crosstalk(plan, device, duration)
        rows.append({"K": K, **rep.to_dict()})
    return rows


def cavity_crosstalk(
    plan: FrequencyPlan,
    device: DeviceConfig,
    duration: Optional[float] = None,
    ramp: float = 10.0,
    step_factor: float = 1.5,
) -> float:
    """Max cross-pair transfer with the cavity kept (spot check of the spin-only estimate).

    Every planned laser runs one flat-top pulse of ``duration`` plus ``ramp``.
    The rotating-frame Hamiltonian is A + f·B + f²·C in the envelope f, so
    it is assembled once and each step only rescales.
    """
    from .hamiltonians import HamiltonianSpec, build_h_eff
    from .tensor_algebra import basis_index

    if not plan.pairs:
        return 0.0
    if duration is None:
        g0 = plan.couplings()[tuple(sorted(plan.pairs[0].dots))]
        duration = (math.pi / 2) * HBAR / abs(g0)
    t1 = duration + ramp
    env = dynamics.Envelope.flattop(1.0, 0.0, t1, ramp)

    def h_at(f: float) -> np.ndarray:
        drv = [LaserPulse(k, "y", w, plan.rabi * f) for k, w in sorted(plan.omega_L.items())]
        return build_h_eff(HamiltonianSpec("effective", device, drv, "rotating"), check_regime=False).matrix

    a, h1, hh = h_at(0.0), h_at(1.0), h_at(0.5)
    c = 2 * (h1 - a) - 4 * (hh - a)
    b = (h1 - a) - c

    def h(t: float) -> np.ndarray:
        f = env.shape(t)
        return a + f * b + f * f * c

    lay = HamiltonianSpec("effective", device, (), "rotating").layout
    n_dots = len(device.dots)
    partner = {}
    for p in plan.pairs:
        partner[p.control], partner[p.target] = p.target, p.control
    probes = sorted(plan.omega_L)
    psi = np.zeros((lay.dim, len(probes)), dtype=complex)
    weights = []
    for j, d in enumerate(probes):
        labels = ["down"] * n_dots
        labels[d] = "up"
        psi[basis_index(lay, 0, labels), j] = 1.0
        outside = [k for k in probes if k not in (d, partner[d])]
        weights.append(np.real(sum(np.diag(projector(k, "up", lay).matrix) for k in outside)))
    w = np.array(weights)
    n = max(1, int(math.ceil(step_factor * dynamics.min_steps(h, 0.0, t1))))
    dt = t1 / n
    worst = 0.0
    for k in range(n):
        psi = dynamics.step_propagator(h((k + 0.5) * dt), dt) @ psi
        worst = max(worst, float(np.max(np.sum(w.T * np.abs(psi) ** 2, axis=0))))
    return worst

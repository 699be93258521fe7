"""Hamiltonians at three modeling levels plus frame changes.

* ``lambda``: three-level dots (↑, ↓, v) with the cavity on the v↔↑ leg and
  the y-polarized laser on the v↔↓ leg, rotating-wave approximation.
* ``effective``: valence level eliminated; spin-flip Raman coupling g_eff
  between |↑, n⟩ and |↓, n+1⟩ plus the two Stark terms.
* ``two_qubit_flipflop`` / ``two_qubit_xy``: cavity eliminated; spins only.

Phases e^{iωt} always mean e^{iωt/ħ} with ω in meV and t in ps.

Static rotating frames
----------------------
``frame="rotating"`` removes every optical carrier so the result is time
independent apart from pulse envelopes.  For the effective model the frame is

    H0 = ω_cav a†a + Σ_i (ω_cav − ω_L^i) σ^i_↑↑        (driven dots)

leaving Δ_i σ^i_↑↑ with Δ_i = ω_↑↓ − ω_cav + ω_L.  For the Λ model the levels
of a driven dot sit at (↑, ↓, v) = (Δ_i, 0, −Δω_↓); an undriven dot at
(0, 0, −Δω_↑).  Undriven dots in the effective model keep no bare term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .device_model import (
    DeviceConfig,
    LaserPulse,
    RegimeError,
    SingularityError,
    _mg,
    cavity_drives,
    g_eff,
    g_tilde_pair,
    raman_detunings,
    require_regime,
    two_photon_detuning,
)
from .device_model import HBAR
from .tensor_algebra import (
    Operator,
    SpaceLayout,
    cavity_annihilator,
    embed,
    hermitian_check,
    number_operator,
    pauli,
    projector,
    spin_layout,
    spin_transition,
)

LEVELS = ("lambda", "effective", "two_qubit_flipflop", "two_qubit_xy")
FRAMES = ("lab", "rotating")

# Weight of the Rabi frequency on the laser leg of the Λ model.  With 1.0 the
# adiabatically eliminated coupling equals (g·Ω/2)(1/Δω_↑ + 1/Δω_↓) exactly.
LAMBDA_LASER_FACTOR = 1.0


@dataclass(frozen=True)
class HamiltonianSpec:
    level: str
    config: DeviceConfig
    drives: tuple[LaserPulse, ...] = ()
    frame: str = "lab"
    pair: Optional[tuple[int, int]] = None
    g_tilde_value: Optional[float] = None
    regime_ratio: float = 5.0
    regime_warn_ratio: float = 2.0
    coupling_rule: str = "symmetric"

    def __post_init__(self) -> None:
        object.__setattr__(self, "drives", tuple(self.drives))
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}; expected one of {LEVELS}")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}; expected one of {FRAMES}")
        n = len(self.config.dots)
        for d in self.drives:
            if not 0 <= d.target_dot < n:
                raise ValueError(f"drive targets missing dot {d.target_dot}")
        if self.level.startswith("two_qubit"):
            if self.pair is None or len(set(self.pair)) != 2:
                raise ValueError("two-qubit levels need a pair of distinct dots")
            if not all(0 <= p < n for p in self.pair):
                raise ValueError(f"pair {self.pair} references a missing dot")

    @property
    def layout(self) -> SpaceLayout:
        if self.level.startswith("two_qubit"):
            return spin_layout(2)
        dot_dim = 3 if self.level == "lambda" else 2
        return SpaceLayout(self.config.cavity.n_max + 1, (dot_dim,) * len(self.config.dots))


def _phase(omega: float, t: float) -> complex:
    return np.exp(1j * omega * t / HBAR)


def _stark_denominators(config: DeviceConfig, dw_up: float, dw_down: float) -> tuple[float, float]:
    """(denominator for the g² term, denominator for the Ω² term)."""
    if config.stark_convention == "direct":
        return dw_up, dw_down
    return dw_down, dw_up


# --- effective (valence eliminated) --------------------------------------


def build_h_eff(spec: HamiltonianSpec, t: float = 0.0, check_regime: bool = True) -> Operator:
    """Valence-eliminated cavity + spin Hamiltonian at time ``t``.

    Lab frame: ω_cav a†a + Σ_i [ω_↑↓ σ_↑↑ − (g²/Δω_↑) σ_↓↓ a†a − (Ω²/Δω_↓) σ_↑↑
    + i g_eff (a† σ_↓↑ e^{−iω_L t} − h.c.)].
    """
    if spec.level != "effective":
        raise ValueError("build_h_eff needs level 'effective'")
    cfg = spec.config
    if check_regime:
        require_regime(cfg, spec.drives)
    lay = spec.layout
    a = cavity_annihilator(lay)
    ad = a.dag()
    n_op = number_operator(lay)
    drives = cavity_drives(spec.drives)
    rot = spec.frame == "rotating"
    h = np.zeros((lay.dim, lay.dim), dtype=complex)
    if not rot:
        h += cfg.cavity.omega_cav * n_op.matrix
    for i, dot in enumerate(cfg.dots):
        up = projector(i, "up", lay).matrix
        down = projector(i, "down", lay).matrix
        dw_up = dot.omega_up - dot.omega_v - cfg.cavity.omega_cav
        laser = drives.get(i)
        if laser is None:
            if dw_up == 0:
                raise SingularityError(f"dot {i}: zero cavity detuning")
            den_g, _ = _stark_denominators(cfg, dw_up, dw_up)
            if not rot:
                h += dot.omega_updown * up
            h -= dot.g_cav**2 / den_g * (down @ n_op.matrix)
            continue
        _, dw_down = raman_detunings(dot, cfg.cavity, laser)
        if dw_up == 0 or dw_down == 0:
            raise SingularityError(f"dot {i}: zero one-photon detuning")
        den_g, den_o = _stark_denominators(cfg, dw_up, dw_down)
        rabi = laser.rabi(t)
        ge = g_eff(dot, cfg.cavity, laser, t)
        if rot:
            h += two_photon_detuning(dot, cfg.cavity, laser) * up
            ph = 1.0
        else:
            h += dot.omega_updown * up
            ph = _phase(-laser.omega_L, t)
        h -= dot.g_cav**2 / den_g * (down @ n_op.matrix)
        h -= rabi**2 / den_o * up
        flip = ad.matrix @ spin_transition(i, "up", "down", lay).matrix  # a† σ_↓↑
        term = 1j * ge * ph * flip
        h += term + term.conj().T
    return Operator(lay, h)


# --- Λ model (pre-elimination) --------------------------------------------


def build_lambda_full(spec: HamiltonianSpec, t: float = 0.0) -> Operator:
    """Three-level dots coupled to the cavity (v↔↑) and the laser (v↔↓)."""
    if spec.level != "lambda":
        raise ValueError("build_lambda_full needs level 'lambda'")
    cfg = spec.config
    lay = spec.layout
    if any(d != 3 for d in lay.dot_dims):
        raise ValueError("Λ model needs 3-level dots")
    a = cavity_annihilator(lay)
    ad = a.dag()
    drives = cavity_drives(spec.drives)
    rot = spec.frame == "rotating"
    h = np.zeros((lay.dim, lay.dim), dtype=complex)
    if not rot:
        h += cfg.cavity.omega_cav * number_operator(lay).matrix
    for i, dot in enumerate(cfg.dots):
        P = {lv: projector(i, lv, lay).matrix for lv in ("up", "down", "v")}
        laser = drives.get(i)
        if rot:
            if laser is None:
                dw_up = dot.omega_up - dot.omega_v - cfg.cavity.omega_cav
                h -= dw_up * P["v"]
            else:
                _, dw_down = raman_detunings(dot, cfg.cavity, laser)
                h += two_photon_detuning(dot, cfg.cavity, laser) * P["up"]
                h -= dw_down * P["v"]
        else:
            h += dot.omega_up * P["up"] + dot.omega_down * P["down"] + dot.omega_v * P["v"]
        cav = dot.g_cav * (ad.matrix @ spin_transition(i, "up", "v", lay).matrix)  # |v⟩⟨↑| a†
        h += cav + cav.conj().T
        if laser is not None:
            ph = 1.0 if rot else _phase(-laser.omega_L, t)
            las = LAMBDA_LASER_FACTOR * laser.rabi(t) * ph * spin_transition(i, "v", "down", lay).matrix
            h += las + las.conj().T
    return Operator(lay, h)


# --- cavity eliminated ----------------------------------------------------


def flipflop_hamiltonian(
    n_dots: int,
    couplings: Mapping[tuple[int, int], float],
    deltas: Optional[Mapping[int, float]] = None,
    t: float = 0.0,
) -> Operator:
    """Σ_{i<j} g̃_ij [σ^i_↑↓ σ^j_↓↑ e^{iΔ_ij t} + σ^j_↑↓ σ^i_↓↑ e^{−iΔ_ij t}] on n_dots spins.

    ``couplings`` keys are pairs (i, j) with i < j; Δ_ij = Δ_i − Δ_j (zero when
    ``deltas`` is omitted).
    """
    lay = spin_layout(n_dots)
    h = np.zeros((lay.dim, lay.dim), dtype=complex)
    for (i, j), g in couplings.items():
        if not (0 <= i < j < n_dots):
            raise ValueError(f"coupling key {(i, j)} must satisfy 0 <= i < j < {n_dots}")
        dij = 0.0 if deltas is None else deltas[i] - deltas[j]
        term = (
            g
            * _phase(dij, t)
            * (spin_transition(i, "down", "up", lay).matrix @ spin_transition(j, "up", "down", lay).matrix)
        )
        h += term + term.conj().T
    return Operator(lay, h)


def two_qubit_parameters(spec: HamiltonianSpec, t: Optional[float] = None) -> tuple[float, float, float]:
    """(g̃(t), Δ_a, Δ_b) for the spec's pair (a, b) under ``spec.coupling_rule``."""
    a, b = spec.pair
    cfg = spec.config
    drives = cavity_drives(spec.drives)
    missing = [k for k in (a, b) if k not in drives]
    if missing:
        raise ValueError(f"dots {missing} have no y-polarized drive")
    deltas, gs = {}, {}
    for k in (a, b):
        deltas[k] = two_photon_detuning(cfg.dots[k], cfg.cavity, drives[k])
        if deltas[k] == 0:
            raise SingularityError(f"dot {k}: zero two-photon detuning")
        peak = g_eff(cfg.dots[k], cfg.cavity, drives[k])
        diag = _mg("|delta| >> g_eff", k, deltas[k], peak, spec.regime_ratio, spec.regime_warn_ratio)
        if diag.status == "fail":
            raise RegimeError([diag])
        gs[k] = g_eff(cfg.dots[k], cfg.cavity, drives[k], t)
    lo, hi = sorted((a, b))
    g = g_tilde_pair(gs[lo], gs[hi], deltas[lo], deltas[hi], spec.coupling_rule)
    return g, deltas[a], deltas[b]


def build_h_int2(spec: HamiltonianSpec, t: float = 0.0) -> Operator:
    """Cavity-eliminated flip-flop Hamiltonian of one pair (4×4, spins only)."""
    if spec.level != "two_qubit_flipflop":
        raise ValueError("build_h_int2 needs level 'two_qubit_flipflop'")
    if spec.g_tilde_value is not None:
        return flipflop_hamiltonian(2, {(0, 1): spec.g_tilde_value})
    g, da, db = two_qubit_parameters(spec, t)
    return flipflop_hamiltonian(2, {(0, 1): g}, {0: da, 1: db}, t)


def build_h_xy(g_tilde_value: float) -> Operator:
    """(g̃/2)(σ_y σ_y + σ_z σ_z) on two spins."""
    lay = spin_layout(2)
    m = 0.5 * g_tilde_value * (
        pauli(0, "y", lay).matrix @ pauli(1, "y", lay).matrix
        + pauli(0, "z", lay).matrix @ pauli(1, "z", lay).matrix
    )
    return Operator(lay, m)


# --- dispatch and frames --------------------------------------------------


def build(spec: HamiltonianSpec, t: float = 0.0) -> Operator:
    if spec.level == "effective":
        return build_h_eff(spec, t)
    if spec.level == "lambda":
        return build_lambda_full(spec, t)
    if spec.level == "two_qubit_flipflop":
        return build_h_int2(spec, t)
    g = spec.g_tilde_value
    if g is None:
        g, _, _ = two_qubit_parameters(spec, t)
    return build_h_xy(g)


def time_dependent(spec: HamiltonianSpec) -> Callable[[float], Operator]:
    """H(t) for this configuration; the regime check runs once, not per sample."""
    if spec.level == "effective":
        require_regime(spec.config, spec.drives)
        return lambda t: build_h_eff(spec, t, check_regime=False)
    return lambda t: build(spec, t)


def rotating_frame(
    H_lab: Union[Operator, Callable[[float], Operator]], H0: Operator
) -> Callable[[float], Operator]:
    """H̃(t) = e^{iH0t/ħ}(H_lab(t) − H0)e^{−iH0t/ħ} for diagonal H0."""
    m0 = H0.matrix
    if not hermitian_check(m0, 1e-12):
        raise ValueError("H0 must be Hermitian")
    e = np.real(np.diag(m0))
    if np.max(np.abs(m0 - np.diag(np.diag(m0))), initial=0.0) > 1e-12:
        raise ValueError("H0 must be diagonal in the product basis")
    gaps = e[:, None] - e[None, :]
    lay = H0.layout

    def h_tilde(t: float) -> Operator:
        hl = H_lab(t) if callable(H_lab) and not isinstance(H_lab, Operator) else H_lab
        return Operator(lay, np.exp(1j * gaps * t / HBAR) * (hl.matrix - m0))

    return h_tilde


def spin_frame(config: DeviceConfig, layout: SpaceLayout) -> Operator:
    """H0 = Σ_i ω^i_↑↓ σ^i_↑↑."""
    m = sum(d.omega_updown * projector(i, "up", layout).matrix for i, d in enumerate(config.dots))
    return Operator(layout, m)


def effective_frame(config: DeviceConfig, drives: Sequence[LaserPulse], layout: SpaceLayout) -> Operator:
    """The static-frame H0 documented in the module docstring (effective level)."""
    by = cavity_drives(drives)
    m = config.cavity.omega_cav * number_operator(layout).matrix
    for i, d in enumerate(config.dots):
        w = config.cavity.omega_cav - by[i].omega_L if i in by else d.omega_updown
        m = m + w * projector(i, "up", layout).matrix
    return Operator(layout, m)

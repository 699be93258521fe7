"""Spin readout by cavity photon emission.

A drive puts the measured dot on exact two-photon resonance with the cavity.
Spin ↑ swaps into |↓, 1⟩ and the photon leaks out; spin ↓ is dark.  The model
is three states {|↑,0⟩, |↓,1⟩, |↓,0⟩} with coupling i·g_eff(a†σ_↓↑ − h.c.)
and collapse √Γ a.  An optional spin dephasing channel (no click) is available
for sensitivity studies.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm

from . import dynamics, kernels
from .device_model import HBAR
from .dynamics import CollapseChannel, NumericalError, propagate_lindblad
from .tensor_algebra import SpaceLayout

UP0, DOWN1, DOWN0 = 0, 1, 2
MAX_JUMPS = 4


@dataclass(frozen=True)
class ReadoutConfig:
    dot: int = 0
    g_eff: float = 0.1
    gamma_cav: float = 0.0658
    window: float = 1000.0
    trajectories: int = 10000
    seed: int = 0
    dephasing: float = 0.0
    steps_factor: float = 4.0

    def __post_init__(self) -> None:
        if not self.window >= 0:
            raise ValueError("window T must be >= 0")
        if int(self.trajectories) < 1:
            raise ValueError("trajectories must be >= 1")
        if not self.g_eff >= 0 or not self.gamma_cav >= 0 or not self.dephasing >= 0:
            raise ValueError("g_eff, gamma_cav and dephasing must be >= 0")


@dataclass
class DetectionRecord:
    spin: str
    times: list[list[float]]
    grid: np.ndarray = field(repr=False)
    click_curve: np.ndarray = field(repr=False)
    backend: str = ""

    @property
    def click_fraction(self) -> float:
        return float(np.mean([1.0 if t else 0.0 for t in self.times]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trajectory", "time_ps"])
        for k, ts in enumerate(self.times):
            for t in ts:
                w.writerow([k, repr(float(t))])
        return buf.getvalue()


# --- model ----------------------------------------------------------------


def _layout() -> SpaceLayout:
    # three states do not factor into cavity ⊗ dot; a 3-level "dot" carries them
    return SpaceLayout(1, (3,))


def model_matrices(cfg: ReadoutConfig) -> tuple[np.ndarray, list[tuple[np.ndarray, float, bool]]]:
    """(H, [(L, rate, is_click), ...]) in the basis |↑,0⟩, |↓,1⟩, |↓,0⟩."""
    h = np.zeros((3, 3), dtype=complex)
    h[DOWN1, UP0] = 1j * cfg.g_eff
    h[UP0, DOWN1] = -1j * cfg.g_eff
    a = np.zeros((3, 3), dtype=complex)
    a[DOWN0, DOWN1] = 1.0
    chans = [(a, cfg.gamma_cav, True)]
    if cfg.dephasing > 0:
        chans.append((np.diag([1.0, -1.0, -1.0]).astype(complex), cfg.dephasing, False))
    return h, chans


def _initial(spin: str) -> np.ndarray:
    if spin not in ("up", "down"):
        raise ValueError("spin must be 'up' or 'down'")
    psi = np.zeros(3, dtype=complex)
    psi[UP0 if spin == "up" else DOWN0] = 1.0
    return psi


def _n_steps(cfg: ReadoutConfig, h, chans) -> int:
    extra = sum(r * float(np.linalg.norm(L.conj().T @ L, 2)) for L, r, _ in chans)
    base = dynamics.min_steps(h, 0.0, cfg.window, extra_rate=extra)
    return max(1, int(math.ceil(cfg.steps_factor * base)))


def readout_curve(spin: str, cfg: ReadoutConfig):
    """Master-equation PropagationResult with the running click probability.

    ``observables["integral:flux"]`` is ∫ Γ⟨a†a⟩ dt/ħ, the probability of at
    least one click by each sampled time; ``observables["excited"]`` is the
    population still in |↑,0⟩ or |↓,1⟩.
    """
    h, chans = model_matrices(cfg)
    rho0 = np.outer(_initial(spin), _initial(spin).conj())
    if cfg.window == 0:
        return None
    n = _n_steps(cfg, h, chans)
    nop = np.diag([0.0, 1.0, 0.0]).astype(complex)
    excited = np.diag([1.0, 1.0, 0.0]).astype(complex)
    channels = [CollapseChannel(L, r) for L, r, _ in chans]
    return propagate_lindblad(
        h,
        channels,
        rho0,
        0.0,
        cfg.window,
        n,
        observables={"excited": excited, "cavity": nop},
        integrate_observables={"flux": cfg.gamma_cav * nop},
        sample_every=max(1, n // 1000),
    )


def readout_probability(spin: str, cfg: ReadoutConfig) -> float:
    """P(at least one click by T) from the integrated emission flux."""
    res = readout_curve(spin, cfg)
    if res is None:
        return 0.0
    return float(res.integrals["flux"])


def excitation_balance(spin: str, cfg: ReadoutConfig) -> float:
    """|emitted + still excited − initial excitation| at T."""
    res = readout_curve(spin, cfg)
    if res is None:
        return 0.0
    initial = 1.0 if spin == "up" else 0.0
    return abs(res.integrals["flux"] + res.observables["excited"][-1] - initial)


def discrimination_error(cfg: ReadoutConfig) -> float:
    """½·P(no click | ↑) + ½·P(click | ↓) under the "click ⇒ ↑" rule."""
    return 0.5 * (1.0 - readout_probability("up", cfg)) + 0.5 * readout_probability("down", cfg)


# --- quantum jumps --------------------------------------------------------


def trajectory_uniforms(seed: int, n_traj: int, per_traj: int) -> np.ndarray:
    """One independent stream per trajectory, spawned from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n_traj)
    out = np.empty((n_traj, per_traj))
    for k, ss in enumerate(children):
        out[k] = np.random.Generator(np.random.PCG64(ss)).random(per_traj)
    return out


def sample_detection_times(
    spin: str, cfg: ReadoutConfig, backend: Optional[str] = None, max_jumps: Optional[int] = None
) -> DetectionRecord:
    """Waiting-time quantum-jump unraveling; clicks are photon-channel jumps."""
    h, chans = model_matrices(cfg)
    psi0 = _initial(spin)
    n_traj = int(cfg.trajectories)
    if max_jumps is None:
        max_jumps = MAX_JUMPS if cfg.dephasing == 0 else max(64, int(4 * cfg.dephasing * cfg.window / HBAR) + 16)
    uniforms = trajectory_uniforms(cfg.seed, n_traj, 2 * max_jumps + 1)
    if cfg.window == 0:
        grid = np.array([0.0])
        return DetectionRecord(spin, [[] for _ in range(n_traj)], grid, np.zeros(1), backend or kernels.BACKEND)
    n = _n_steps(cfg, h, chans)
    dt = cfg.window / n
    s = dynamics.EVOLUTION_SIGN
    decay = sum(r * (L.conj().T @ L) for L, r, _ in chans)
    step = expm((s * 1j * h - 0.5 * decay) * dt / HBAR)
    jumps = np.array([math.sqrt(r) * L for L, r, _ in chans])
    record = np.array([1 if click else 0 for _, _, click in chans], dtype=np.int8)
    impls = kernels.backends()
    name = backend or kernels.BACKEND
    if name not in impls:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(impls)}")
    counts, times, status = impls[name](
        np.ascontiguousarray(step.real),
        np.ascontiguousarray(step.imag),
        np.ascontiguousarray(jumps.real),
        np.ascontiguousarray(jumps.imag),
        record,
        np.ascontiguousarray(psi0.real),
        np.ascontiguousarray(psi0.imag),
        uniforms,
        n,
        dt,
        max_jumps,
    )
    if np.any(status):
        raise NumericalError(f"{int(np.sum(status))} trajectories exhausted their random stream; raise max_jumps")
    per = [[float(t) for t in row[: min(int(c), max_jumps)]] for row, c in zip(times, counts)]
    firsts = np.sort([ts[0] for ts in per if ts])
    grid = np.linspace(0.0, cfg.window, 201)
    curve = np.searchsorted(firsts, grid, side="right") / n_traj
    return DetectionRecord(spin, per, grid, curve, name)


def summary(cfg: ReadoutConfig, record_up: Optional[DetectionRecord] = None) -> dict:
    out = {
        "window_ps": cfg.window,
        "g_eff_meV": cfg.g_eff,
        "gamma_cav_meV": cfg.gamma_cav,
        "p_click_up": readout_probability("up", cfg),
        "p_click_down": readout_probability("down", cfg),
        "discrimination_error": discrimination_error(cfg),
    }
    if record_up is not None:
        out["mc_trajectories"] = cfg.trajectories
        out["mc_seed"] = cfg.seed
        out["mc_click_fraction_up"] = record_up.click_fraction
        out["mc_backend"] = record_up.backend
    return out

"""Device parameters and the derived Raman/cavity couplings.

Units: energies and rates in meV, times in ps, temperature in K.  ħ enters
only where energies meet times (see :data:`HBAR`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

if TYPE_CHECKING:
    from .dynamics import Envelope

HBAR = 0.6582119569  # meV·ps
K_B = 0.08617333  # meV/K

DEFAULT_RATIO = 5.0
DEFAULT_WARN_RATIO = 2.0


@dataclass(frozen=True)
class PhysConstants:
    hbar: float = HBAR
    k_B: float = K_B


class SingularityError(ZeroDivisionError):
    """A coupling was requested at zero detuning."""


class RegimeError(ValueError):
    """The adiabatic-elimination regime is violated (fail-level diagnostic)."""

    def __init__(self, diagnostics: Sequence["Diagnostic"]):
        self.diagnostics = list(diagnostics)
        failed = ", ".join(d.describe() for d in self.diagnostics if d.status == "fail")
        super().__init__(f"regime check failed: {failed}")


def gamma_from_lifetime(lifetime_ps: float) -> float:
    """Decay rate in meV for a 1/e lifetime in ps."""
    if lifetime_ps <= 0:
        raise ValueError("lifetime must be positive")
    return HBAR / lifetime_ps


@dataclass(frozen=True)
class CavityParams:
    omega_cav: float
    gamma_cav: float = 0.0
    n_max: int = 3

    def __post_init__(self) -> None:
        if not self.omega_cav > 0:
            raise ValueError(f"omega_cav must be > 0, got {self.omega_cav}")
        if not self.gamma_cav >= 0:
            raise ValueError(f"gamma_cav must be >= 0, got {self.gamma_cav}")
        if int(self.n_max) < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")


@dataclass(frozen=True)
class DotParams:
    omega_up: float
    omega_down: float
    omega_v: float
    g_cav: float
    hole_decoherence_time: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.omega_up > self.omega_down:
            raise ValueError("omega_up must exceed omega_down")
        if not self.g_cav >= 0:
            raise ValueError(f"g_cav must be >= 0, got {self.g_cav}")
        if self.hole_decoherence_time is not None and self.hole_decoherence_time <= 0:
            raise ValueError("hole_decoherence_time must be positive")

    @property
    def omega_updown(self) -> float:
        return self.omega_up - self.omega_down


@dataclass(frozen=True)
class LaserPulse:
    """A classical drive on one dot.

    ``peak_rabi`` is the Rabi frequency at the envelope maximum; the envelope
    supplies the normalized time profile (a constant drive when absent).
    ``phase`` is the carrier phase in radians, used by single-qubit pulse plans.
    """

    target_dot: int
    polarization: str
    omega_L: float
    peak_rabi: float
    envelope: Optional["Envelope"] = None
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.polarization not in ("x", "y"):
            raise ValueError(f"polarization must be 'x' or 'y', got {self.polarization!r}")
        if not self.peak_rabi >= 0:
            raise ValueError("peak_rabi must be >= 0")
        if not self.omega_L > 0:
            raise ValueError("omega_L must be > 0")

    def rabi(self, t: Optional[float] = None) -> float:
        if t is None or self.envelope is None:
            return self.peak_rabi
        return self.peak_rabi * self.envelope.shape(t)


@dataclass(frozen=True)
class DeviceConfig:
    cavity: CavityParams
    dots: tuple[DotParams, ...]
    temperature: float = 0.0
    stark_convention: str = "direct"

    def __post_init__(self) -> None:
        object.__setattr__(self, "dots", tuple(self.dots))
        if not self.dots:
            raise ValueError("a device needs at least one dot")
        if not self.temperature >= 0:
            raise ValueError("temperature must be >= 0")
        if self.stark_convention not in ("direct", "swapped"):
            raise ValueError("stark_convention must be 'direct' or 'swapped'")

    def with_n_max(self, n_max: int) -> "DeviceConfig":
        return replace(self, cavity=replace(self.cavity, n_max=n_max))


# --- derived quantities ---------------------------------------------------


def raman_detunings(dot: DotParams, cavity: CavityParams, laser: LaserPulse) -> tuple[float, float]:
    """(Δω_↑, Δω_↓) = (ω_↑ − ω_v − ω_cav, ω_↓ − ω_v − ω_L)."""
    dw_up = dot.omega_up - dot.omega_v - cavity.omega_cav
    dw_down = dot.omega_down - dot.omega_v - laser.omega_L
    return dw_up, dw_down


def raman_coupling(g: float, rabi: float, dw_up: float, dw_down: float) -> float:
    """(g·Ω/2)(1/Δω_↑ + 1/Δω_↓); shared by the cavity-laser and laser-laser cases."""
    if dw_up == 0 or dw_down == 0:
        raise SingularityError("Raman coupling is singular at zero one-photon detuning")
    return 0.5 * g * rabi * (1.0 / dw_up + 1.0 / dw_down)


def g_eff(dot: DotParams, cavity: CavityParams, laser: LaserPulse, t: Optional[float] = None) -> float:
    """Cavity-laser two-photon coupling of one dot, at the envelope value for ``t``."""
    dw_up, dw_down = raman_detunings(dot, cavity, laser)
    return raman_coupling(dot.g_cav, laser.rabi(t), dw_up, dw_down)


def two_photon_detuning(dot: DotParams, cavity: CavityParams, laser: LaserPulse) -> float:
    """Δ_i = ω_↑↓ − ω_cav + ω_L."""
    return dot.omega_updown - cavity.omega_cav + laser.omega_L


def laser_frequency_for_detuning(dot: DotParams, cavity: CavityParams, delta: float) -> float:
    """Invert Δ_i for the laser frequency."""
    return cavity.omega_cav - dot.omega_updown + delta


def g_tilde(g_eff_i: float, g_eff_j: float, delta_i: float) -> float:
    """Cavity-mediated spin-spin coupling g_eff^i g_eff^j / Δ_i."""
    if delta_i == 0:
        raise SingularityError("g_tilde is singular at zero two-photon detuning")
    return g_eff_i * g_eff_j / delta_i


COUPLING_RULES = ("symmetric", "lower")


def g_tilde_pair(g_i: float, g_j: float, delta_i: float, delta_j: float, rule: str = "symmetric") -> float:
    """Spin-spin coupling of dots i < j with possibly unequal two-photon detunings.

    ``lower``: g_i g_j / Δ_i.  ``symmetric``: g_i g_j (1/Δ_i + 1/Δ_j) / 2, the
    second-order value.  The two agree when Δ_i = Δ_j.
    """
    if rule == "lower":
        return g_tilde(g_i, g_j, delta_i)
    if rule != "symmetric":
        raise ValueError(f"coupling rule must be one of {COUPLING_RULES}")
    if delta_i == 0 or delta_j == 0:
        raise SingularityError("g_tilde is singular at zero two-photon detuning")
    return 0.5 * g_i * g_j * (1.0 / delta_i + 1.0 / delta_j)


def effective_decoherence_estimate(intrinsic_time: float, virtual_population: float) -> float:
    """Lifetime stretched by the virtual occupation of the lossy level."""
    if not intrinsic_time > 0:
        raise ValueError("intrinsic_time must be positive")
    if not 0 < virtual_population <= 1:
        raise ValueError("virtual_population must lie in (0, 1]")
    return intrinsic_time / virtual_population


@dataclass(frozen=True)
class DerivedCouplings:
    delta_omega_up: dict[int, float]
    delta_omega_down: dict[int, float]
    delta: dict[int, float]
    g_eff: dict[int, float]
    g_tilde: dict[tuple[int, int], float]

    def as_table(self) -> dict[str, float]:
        rows: dict[str, float] = {}
        for i in sorted(self.delta):
            rows[f"dot{i}.delta_omega_up_meV"] = self.delta_omega_up[i]
            rows[f"dot{i}.delta_omega_down_meV"] = self.delta_omega_down[i]
            rows[f"dot{i}.delta_meV"] = self.delta[i]
            rows[f"dot{i}.g_eff_meV"] = self.g_eff[i]
        for (i, j), v in sorted(self.g_tilde.items()):
            rows[f"pair{i}_{j}.g_tilde_meV"] = v
            rows[f"pair{i}_{j}.delta_ij_meV"] = self.delta[i] - self.delta[j]
        return rows


def cavity_drives(drives: Iterable[LaserPulse]) -> dict[int, LaserPulse]:
    """The y-polarized (cavity-Raman) drive of each dot; one per dot at most."""
    out: dict[int, LaserPulse] = {}
    for d in drives:
        if d.polarization != "y":
            continue
        if d.target_dot in out:
            raise ValueError(f"dot {d.target_dot} has more than one y-polarized drive")
        out[d.target_dot] = d
    return out


def derive_couplings(
    config: DeviceConfig, drives: Sequence[LaserPulse], rule: str = "symmetric"
) -> DerivedCouplings:
    by_dot = cavity_drives(drives)
    for i in by_dot:
        if not 0 <= i < len(config.dots):
            raise ValueError(f"drive targets missing dot {i}")
    dwu, dwd, delta, ge = {}, {}, {}, {}
    for i, laser in sorted(by_dot.items()):
        dot = config.dots[i]
        dwu[i], dwd[i] = raman_detunings(dot, config.cavity, laser)
        delta[i] = two_photon_detuning(dot, config.cavity, laser)
        ge[i] = g_eff(dot, config.cavity, laser)
    gt = {}
    for i, j in itertools.combinations(sorted(by_dot), 2):
        if delta[i] != 0 and delta[j] != 0:
            gt[(i, j)] = g_tilde_pair(ge[i], ge[j], delta[i], delta[j], rule)
    return DerivedCouplings(dwu, dwd, delta, ge, gt)


# --- validity regime ------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    condition: str
    dot: Optional[int]
    lhs: float
    rhs: float
    status: str
    ratio: float = field(default=float("nan"))

    def describe(self) -> str:
        where = "" if self.dot is None else f"[dot {self.dot}]"
        return f"{self.condition}{where}: {self.lhs:.6g} vs {self.rhs:.6g} -> {self.status}"


def much_greater(lhs: float, rhs: float, ratio: float = DEFAULT_RATIO, warn_ratio: float = DEFAULT_WARN_RATIO) -> str:
    """Grade ``lhs ≫ rhs`` (both compared in magnitude)."""
    lhs, rhs = abs(lhs), abs(rhs)
    if lhs >= ratio * rhs:
        return "pass"
    if lhs >= warn_ratio * rhs:
        return "warn"
    return "fail"


def _mg(cond, dot, lhs, rhs, ratio, warn_ratio) -> Diagnostic:
    r = abs(lhs) / abs(rhs) if rhs else float("inf")
    return Diagnostic(cond, dot, lhs, rhs, much_greater(lhs, rhs, ratio, warn_ratio), r)


def validate_regime(
    config: DeviceConfig,
    drives: Sequence[LaserPulse] = (),
    ratio: float = DEFAULT_RATIO,
    warn_ratio: float = DEFAULT_WARN_RATIO,
) -> list[Diagnostic]:
    """Diagnostics for the conditions under which the effective model holds."""
    out: list[Diagnostic] = []
    kT = K_B * config.temperature
    by_dot = cavity_drives(drives)
    geffs = {}
    for i, dot in enumerate(config.dots):
        dw_up = dot.omega_up - dot.omega_v - config.cavity.omega_cav
        out.append(_mg("delta_omega_up >> g_cav", i, dw_up, dot.g_cav, ratio, warn_ratio))
        out.append(_mg("omega_updown >> k_B T", i, dot.omega_updown, kT, ratio, warn_ratio))
        if i in by_dot:
            _, dw_down = raman_detunings(dot, config.cavity, by_dot[i])
            out.append(_mg("delta_omega_down >> g_cav", i, dw_down, dot.g_cav, ratio, warn_ratio))
            try:
                geffs[i] = abs(g_eff(dot, config.cavity, by_dot[i]))
            except SingularityError:
                out.append(Diagnostic("g_eff finite", i, 0.0, 0.0, "fail"))
    for i, ge in geffs.items():
        for j, dot in enumerate(config.dots):
            out.append(_mg(f"omega_updown[{j}] >> g_eff", i, dot.omega_updown, ge, ratio, warn_ratio))
        gamma = config.cavity.gamma_cav
        status = "pass" if ge > gamma else "fail"
        r = ge / gamma if gamma else float("inf")
        out.append(Diagnostic("g_eff > gamma_cav", i, ge, gamma, status, r))
    return out


def regime_ok(diagnostics: Iterable[Diagnostic]) -> bool:
    return all(d.status != "fail" for d in diagnostics)


def require_regime(config: DeviceConfig, drives: Sequence[LaserPulse] = (), **kw) -> list[Diagnostic]:
    diags = validate_regime(config, drives, **kw)
    if not regime_ok(diags):
        raise RegimeError(diags)
    return diags

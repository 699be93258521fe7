"""Time evolution: midpoint-exponential propagators, RK4 Lindblad integration,
and pulse-area bookkeeping.

Sign convention
---------------
Unitary evolution is ``U = exp(s·i·H·dt/ħ)`` with ``s = EVOLUTION_SIGN``.  The
default ``s = +1`` is the convention under which ``U_XY(φ) = exp(+i∫H dt)``
makes the two-XY-pulse CPF construction come out diagonal (see
:mod:`qdcavity.gates`).  ``s = -1`` is the textbook Schrödinger sign.  The same
sign multiplies the commutator term of the master equation,

    dρ/dt = s·(i/ħ)[H, ρ] + Σ_k (γ_k/ħ)(L_k ρ L_k† − ½{L_k†L_k, ρ}),

so the closed-system limit of :func:`propagate_lindblad` coincides with
:func:`propagate_unitary`.  For the time-independent rotating-frame models
used in this package the two signs give identical populations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import integrate, optimize, special
from scipy.linalg import expm

from .device_model import HBAR
from .tensor_algebra import Operator, QuantumState, SpaceLayout, hermitian_check, spin_layout

EVOLUTION_SIGN = +1
STEPS_PER_PERIOD = 40
NORM_TOL = 1e-9
POSITIVITY_WARN = -1e-8
POSITIVITY_FAIL = -1e-4

_GAUSS_TRUNC = 4.0
_GAUSS_NORM = special.erf(_GAUSS_TRUNC / math.sqrt(2.0))

HamiltonianSource = Union[Operator, np.ndarray, Callable[[float], Union[Operator, np.ndarray]]]


class NumericalError(RuntimeError):
    """A numerical tolerance was breached."""


class StepBudgetError(NumericalError):
    """Fewer steps than the enforced minimum per dynamical period."""


def get_evolution_sign() -> int:
    return EVOLUTION_SIGN


def set_evolution_sign(sign: int) -> None:
    global EVOLUTION_SIGN
    if sign not in (+1, -1):
        raise ValueError("evolution sign must be +1 or -1")
    EVOLUTION_SIGN = sign


def _sign(sign: Optional[int]) -> int:
    s = EVOLUTION_SIGN if sign is None else sign
    if s not in (+1, -1):
        raise ValueError("evolution sign must be +1 or -1")
    return s


# --- envelopes ------------------------------------------------------------


@dataclass(frozen=True)
class Envelope:
    """Pulse profile with peak value ``peak`` on [t_start, t_start + duration].

    ``square``: constant.  ``gaussian``: centred, σ = duration/8 (cut at ±4σ and
    rescaled so the area equals that of the untruncated Gaussian).
    ``flattop``: cos² ramps of length ``ramp`` at both ends around a flat top.
    """

    shape_kind: str
    peak: float
    t_start: float
    duration: float
    ramp: float = 0.0

    def __post_init__(self) -> None:
        if self.shape_kind not in ("square", "gaussian", "flattop"):
            raise ValueError(f"unknown envelope shape {self.shape_kind!r}")
        if not self.duration > 0:
            raise ValueError("envelope duration must be > 0")
        if not self.peak >= 0:
            raise ValueError("envelope peak must be >= 0")
        if self.shape_kind == "flattop":
            if self.ramp < 0:
                raise ValueError("ramp must be >= 0")
            object.__setattr__(self, "ramp", min(self.ramp, self.duration / 2))

    @classmethod
    def square(cls, peak: float, t_start: float, duration: float) -> "Envelope":
        return cls("square", peak, t_start, duration)

    @classmethod
    def gaussian(cls, peak: float, center: float, sigma: float) -> "Envelope":
        return cls("gaussian", peak, center - _GAUSS_TRUNC * sigma, 2 * _GAUSS_TRUNC * sigma)

    @classmethod
    def flattop(cls, peak: float, t_start: float, duration: float, ramp: float) -> "Envelope":
        return cls("flattop", peak, t_start, duration, ramp)

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def sigma(self) -> float:
        return self.duration / (2 * _GAUSS_TRUNC)

    @property
    def center(self) -> float:
        return self.t_start + self.duration / 2

    def breakpoints(self) -> list[float]:
        pts = [self.t_start, self.t_end]
        if self.shape_kind == "flattop":
            pts += [self.t_start + self.ramp, self.t_end - self.ramp]
        elif self.shape_kind == "gaussian":
            pts.append(self.center)
        return sorted(set(pts))

    def shape(self, t: float) -> float:
        """Normalized profile (peak 1 for square and flat-top)."""
        if t < self.t_start or t > self.t_end:
            return 0.0
        if self.shape_kind == "square":
            return 1.0
        if self.shape_kind == "gaussian":
            x = (t - self.center) / self.sigma
            return math.exp(-0.5 * x * x) / _GAUSS_NORM
        r = self.ramp
        if r > 0 and t < self.t_start + r:
            return math.sin(0.5 * math.pi * (t - self.t_start) / r) ** 2
        if r > 0 and t > self.t_end - r:
            return math.sin(0.5 * math.pi * (self.t_end - t) / r) ** 2
        return 1.0

    def value(self, t: float) -> float:
        return self.peak * self.shape(t)

    def area(self) -> float:
        """∫ value dt in meV·ps (closed form)."""
        if self.shape_kind == "square":
            return self.peak * self.duration
        if self.shape_kind == "gaussian":
            return self.peak * self.sigma * math.sqrt(2 * math.pi)
        return self.peak * (self.duration - self.ramp)


@dataclass(frozen=True)
class CollapseChannel:
    operator: Operator
    rate: float

    def __post_init__(self) -> None:
        if not self.rate >= 0:
            raise ValueError("collapse rate must be >= 0")


@dataclass
class PropagationResult:
    final: np.ndarray
    times: np.ndarray
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    integrals: dict[str, float] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


# --- helpers --------------------------------------------------------------


def _as_matrix(h) -> np.ndarray:
    return h.matrix if isinstance(h, Operator) else np.asarray(h, dtype=complex)


def _sampler(H: HamiltonianSource) -> tuple[Callable[[float], np.ndarray], bool]:
    if callable(H) and not isinstance(H, (Operator, np.ndarray)):
        return (lambda t: _as_matrix(H(t))), True
    m = _as_matrix(H)
    return (lambda t: m), False


def _check_hermitian(m: np.ndarray, t: float) -> None:
    if not hermitian_check(m, 1e-10 * max(1.0, float(np.max(np.abs(m), initial=0.0)))):
        raise ValueError(f"Hamiltonian sample at t={t} is not Hermitian")


def spectral_range(m: np.ndarray) -> float:
    w = np.linalg.eigvalsh(m)
    return float(w[-1] - w[0])


def min_steps(H: HamiltonianSource, t0: float, t1: float, extra_rate: float = 0.0) -> int:
    """Smallest step count meeting the per-period budget on [t0, t1].

    The spectral range is sampled at the ends and a few interior points;
    ``extra_rate`` (meV) adds dissipative rates to the range.
    """
    sample, _ = _sampler(H)
    span = abs(t1 - t0)
    if span == 0:
        return 1
    rng = max(spectral_range(sample(t)) for t in np.linspace(t0, t1, 5)) + extra_rate
    if rng == 0:
        return 1
    period = 2 * math.pi * HBAR / rng
    return max(1, math.ceil(STEPS_PER_PERIOD * span / period))


def _require_budget(H, t0, t1, n_steps, extra_rate=0.0) -> None:
    need = min_steps(H, t0, t1, extra_rate)
    if n_steps < need:
        raise StepBudgetError(
            f"{n_steps} steps is below the budget of {need} "
            f"({STEPS_PER_PERIOD} per shortest period)"
        )


def _infer_layout(d: int) -> SpaceLayout:
    """Bare-spin layout for a matrix handed in without one."""
    k = d.bit_length() - 1
    if d >= 2 and 1 << k == d:
        return spin_layout(k)
    if d == 3:
        return SpaceLayout(1, (3,))
    raise ValueError(f"cannot infer layout for dimension {d}; pass layout=")


def step_propagator(h: np.ndarray, dt: float, sign: Optional[int] = None) -> np.ndarray:
    return expm(_sign(sign) * 1j * h * dt / HBAR)


# --- unitary --------------------------------------------------------------


def propagate_unitary(
    H: HamiltonianSource,
    t0: float,
    t1: float,
    n_steps: int,
    sign: Optional[int] = None,
    layout: Optional[SpaceLayout] = None,
    enforce_budget: bool = True,
) -> Operator:
    """Time-ordered propagator from t0 to t1 (exponential midpoint rule).

    A time-independent ``H`` is exponentiated once (exact).  For a callable
    ``H(t)`` each of the ``n_steps`` slices uses the midpoint sample; later
    slices multiply from the left.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    s = _sign(sign)
    sample, timedep = _sampler(H)
    if layout is None:
        layout = H.layout if isinstance(H, Operator) else None
    h0 = sample(t0 if not timedep else 0.5 * (t0 + t1))
    if layout is None:
        probe = H(t0) if timedep else H
        layout = probe.layout if isinstance(probe, Operator) else None
    dt = (t1 - t0) / n_steps
    if not timedep:
        _check_hermitian(h0, t0)
        u = step_propagator(h0, t1 - t0, s)
    else:
        if enforce_budget:
            _require_budget(H, t0, t1, n_steps)
        u = np.eye(h0.shape[0], dtype=complex)
        for k in range(n_steps):
            tm = t0 + (k + 0.5) * dt
            hm = sample(tm)
            _check_hermitian(hm, tm)
            u = step_propagator(hm, dt, s) @ u
    drift = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if drift > 1e-10:
        raise NumericalError(f"propagator unitarity drift {drift:.2e} exceeds 1e-10")
    if layout is None:
        layout = _infer_layout(u.shape[0])
    return Operator(layout, u)


def propagate_state(
    H: HamiltonianSource,
    psi0: Union[QuantumState, np.ndarray],
    t0: float,
    t1: float,
    n_steps: int,
    observables: Optional[Mapping[str, Union[Operator, np.ndarray]]] = None,
    sample_every: int = 1,
    sign: Optional[int] = None,
    enforce_budget: bool = True,
) -> PropagationResult:
    """Evolve a pure state step by step, sampling expectation values."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    s = _sign(sign)
    psi = np.array(psi0.data if isinstance(psi0, QuantumState) else psi0, dtype=complex)
    sample, timedep = _sampler(H)
    if timedep and enforce_budget:
        _require_budget(H, t0, t1, n_steps)
    obs = {k: _as_matrix(v) for k, v in (observables or {}).items()}
    dt = (t1 - t0) / n_steps
    fixed = None if timedep else step_propagator(sample(t0), dt, s)
    if fixed is not None:
        _check_hermitian(sample(t0), t0)
    times = [t0]
    series = {k: [float(np.real(psi.conj() @ m @ psi))] for k, m in obs.items()}
    for k in range(n_steps):
        if fixed is None:
            tm = t0 + (k + 0.5) * dt
            hm = sample(tm)
            _check_hermitian(hm, tm)
            psi = step_propagator(hm, dt, s) @ psi
        else:
            psi = fixed @ psi
        if (k + 1) % sample_every == 0 or k == n_steps - 1:
            times.append(t0 + (k + 1) * dt)
            for name, m in obs.items():
                series[name].append(float(np.real(psi.conj() @ m @ psi)))
    drift = abs(float(np.linalg.norm(psi)) - 1.0)
    if drift > NORM_TOL:
        raise NumericalError(f"norm drift {drift:.2e} exceeds {NORM_TOL}")
    return PropagationResult(
        final=psi,
        times=np.array(times),
        observables={k: np.array(v) for k, v in series.items()},
        metadata={"n_steps": n_steps, "dt": dt, "norm_drift": drift, "sign": s},
    )


# --- Lindblad -------------------------------------------------------------


def lindblad_rhs(
    h: np.ndarray,
    rho: np.ndarray,
    ops: Sequence[np.ndarray],
    rates: Sequence[float],
    sign: int,
    ldl: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    hr = h @ rho
    out = sign * (1j / HBAR) * (hr - hr.conj().T)
    if ldl is None:
        ldl = [L.conj().T @ L for L in ops]
    for L, LdL, g in zip(ops, ldl, rates):
        if g == 0:
            continue
        lr = L @ rho
        anti = LdL @ rho
        out += (g / HBAR) * (lr @ L.conj().T - 0.5 * (anti + anti.conj().T))
    return out


def propagate_lindblad(
    H: HamiltonianSource,
    channels: Sequence[CollapseChannel],
    rho0: Union[QuantumState, np.ndarray],
    t0: float,
    t1: float,
    n_steps: int,
    observables: Optional[Mapping[str, Union[Operator, np.ndarray]]] = None,
    integrate_observables: Optional[Mapping[str, Union[Operator, np.ndarray]]] = None,
    sample_every: int = 1,
    sign: Optional[int] = None,
    enforce_budget: bool = True,
) -> PropagationResult:
    """Fixed-step RK4 integration of the master equation.

    ``integrate_observables`` are accumulated as ∫ tr(O ρ) dt / ħ with the same
    RK4 stages (used for photon-flux counting: O = γ·a†a gives the expected
    number of emitted photons).  Running values are sampled under the
    observable key ``"integral:<name>"``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    s = _sign(sign)
    if isinstance(rho0, QuantumState):
        rho = rho0.density()
    else:
        rho = np.array(rho0, dtype=complex)
        if rho.ndim == 1:
            rho = np.outer(rho, rho.conj())
    if abs(np.trace(rho) - 1) > 1e-10 or not hermitian_check(rho, 1e-10):
        raise ValueError("rho0 is not a valid density matrix")
    sample, timedep = _sampler(H)
    ops = [_as_matrix(c.operator) for c in channels]
    rates = [c.rate for c in channels]
    ldl = [L.conj().T @ L for L in ops]
    if enforce_budget:
        diss = sum(g * float(np.linalg.norm(m, 2)) for g, m in zip(rates, ldl))
        _require_budget(H, t0, t1, n_steps, extra_rate=diss)
    obs = {k: _as_matrix(v) for k, v in (observables or {}).items()}
    iobs = {k: _as_matrix(v) for k, v in (integrate_observables or {}).items()}
    acc = {k: 0.0 for k in iobs}
    dt = (t1 - t0) / n_steps

    def f(t, r):
        return lindblad_rhs(sample(t), r, ops, rates, s, ldl)

    def q(r):
        return {k: float(np.real(np.trace(m @ r))) / HBAR for k, m in iobs.items()}

    def expect(r):
        return {k: float(np.real(np.trace(m @ r))) for k, m in obs.items()}

    times = [t0]
    series = {k: [v] for k, v in expect(rho).items()}
    series.update({f"integral:{k}": [0.0] for k in iobs})
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    for k in range(n_steps):
        t = t0 + k * dt
        k1 = f(t, rho)
        r2 = rho + 0.5 * dt * k1
        k2 = f(t + 0.5 * dt, r2)
        r3 = rho + 0.5 * dt * k2
        k3 = f(t + 0.5 * dt, r3)
        r4 = rho + dt * k3
        k4 = f(t + dt, r4)
        if iobs:
            q1, q2, q3, q4 = q(rho), q(r2), q(r3), q(r4)
            for name in acc:
                acc[name] += dt / 6.0 * (q1[name] + 2 * q2[name] + 2 * q3[name] + q4[name])
        rho = rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (k + 1) % sample_every == 0 or k == n_steps - 1:
            rho = 0.5 * (rho + rho.conj().T)
            times.append(t0 + (k + 1) * dt)
            for name, v in expect(rho).items():
                series[name].append(v)
            for name, v in acc.items():
                series[f"integral:{name}"].append(v)
            min_eig = min(min_eig, float(np.linalg.eigvalsh(rho)[0]))
    drift = abs(float(np.real(np.trace(rho))) - 1.0)
    if drift > NORM_TOL:
        raise NumericalError(f"trace drift {drift:.2e} exceeds {NORM_TOL}")
    if min_eig < POSITIVITY_FAIL:
        raise NumericalError(
            f"density matrix lost positivity (min eigenvalue {min_eig:.2e}); increase n_steps"
        )
    if min_eig < POSITIVITY_WARN:
        warnings.warn(f"density matrix min eigenvalue {min_eig:.2e} below {POSITIVITY_WARN}")
    return PropagationResult(
        final=rho,
        times=np.array(times),
        observables={k: np.array(v) for k, v in series.items()},
        integrals=acc,
        metadata={"n_steps": n_steps, "dt": dt, "trace_drift": drift, "min_eigenvalue": min_eig, "sign": s},
    )


# --- pulse area -----------------------------------------------------------


def pulse_area(
    profile: Union[Envelope, Callable[[float], float]],
    t0: Optional[float] = None,
    t1: Optional[float] = None,
    breakpoints: Sequence[float] = (),
) -> float:
    """φ = ∫ profile(t) dt / ħ over [t0, t1], profile in meV."""
    if isinstance(profile, Envelope):
        fn = profile.value
        pts = list(profile.breakpoints())
        t0 = profile.t_start if t0 is None else t0
        t1 = profile.t_end if t1 is None else t1
    else:
        fn = profile
        pts = list(breakpoints)
        if t0 is None or t1 is None:
            raise ValueError("t0 and t1 are required for a callable profile")
    if t1 == t0:
        return 0.0
    lo, hi = min(t0, t1), max(t0, t1)
    inner = sorted(p for p in pts if lo < p < hi)
    edges = [lo, *inner, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(fn, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
    sgn = 1.0 if t1 > t0 else -1.0
    return sgn * total / HBAR


def solve_pulse_duration(
    target_phi: float,
    shape: str,
    g_peak: float,
    ramp: float = 0.0,
    power: int = 1,
) -> float:
    """Duration (ps) giving pulse area ``target_phi`` for a profile of peak ``g_peak``.

    ``power`` raises the normalized shape before integrating; use 2 when the
    coupling is quadratic in a laser envelope (g̃ ∝ Ω²).
    """
    if not g_peak > 0:
        raise ValueError("g_peak must be positive")
    if target_phi < 0:
        raise ValueError("target_phi must be >= 0")
    if target_phi == 0:
        return 0.0

    def area(duration: float) -> float:
        env = Envelope(shape, 1.0, 0.0, duration, ramp)
        if power == 1:
            return pulse_area(Envelope(shape, g_peak, 0.0, duration, ramp))
        return pulse_area(lambda t: g_peak * env.shape(t) ** power, 0.0, duration, env.breakpoints())

    lo = 0.0
    hi = max(target_phi * HBAR / g_peak, 1e-6)
    while area(hi) < target_phi:
        hi *= 2.0
    root = optimize.brentq(lambda d: area(d) - target_phi, lo if lo > 0 else 1e-12, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root)

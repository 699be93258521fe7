import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdcavity import dynamics
from qdcavity.device_model import HBAR
from qdcavity.dynamics import (
    CollapseChannel,
    Envelope,
    NumericalError,
    StepBudgetError,
    min_steps,
    propagate_lindblad,
    propagate_state,
    propagate_unitary,
    pulse_area,
    solve_pulse_duration,
)
from qdcavity.tensor_algebra import SIGMA_X, Operator, SpaceLayout, cavity_annihilator, number_operator, spin_layout


def driven_qubit(t):
    """Two-level H(t) with a chirp; no closed form, smooth in t."""
    return Operator(spin_layout(1), np.array([[0.3, 0.2 * math.cos(0.5 * t)], [0.2 * math.cos(0.5 * t), -0.3]], complex))


def test_zero_hamiltonian_gives_identity():
    u = propagate_unitary(np.zeros((4, 4)), 0.0, 10.0, 1)
    assert np.array_equal(u.matrix, np.eye(4))


def test_swap_with_phase():
    g = 0.02
    t = (math.pi / 2) * HBAR / g
    u = propagate_unitary(g * SIGMA_X, 0.0, t, 1).matrix
    assert np.allclose(u, 1j * SIGMA_X, atol=1e-13)


def test_sign_flag_flips_the_phase():
    u = propagate_unitary(0.1 * SIGMA_X, 0.0, 3.0, 1, sign=-1).matrix
    v = propagate_unitary(0.1 * SIGMA_X, 0.0, 3.0, 1, sign=+1).matrix
    assert np.allclose(u, v.conj())


def test_midpoint_order_two():
    ref = propagate_unitary(driven_qubit, 0.0, 20.0, 6400, enforce_budget=False).matrix
    errs = [
        np.linalg.norm(propagate_unitary(driven_qubit, 0.0, 20.0, n, enforce_budget=False).matrix - ref)
        for n in (40, 80, 160)
    ]
    assert 3.5 <= errs[0] / errs[1] <= 4.5
    assert 3.5 <= errs[1] / errs[2] <= 4.5


def test_step_budget_enforced():
    with pytest.raises(StepBudgetError):
        propagate_unitary(driven_qubit, 0.0, 200.0, 2)
    assert min_steps(driven_qubit, 0.0, 200.0) > 2


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        propagate_unitary(np.array([[0, 1], [0, 0]], complex), 0.0, 1.0, 1)


def test_closed_lindblad_matches_unitary():
    psi0 = np.array([1.0, 0.0], complex)
    n = 400
    u = propagate_unitary(driven_qubit, 0.0, 20.0, 4000).matrix
    res = propagate_lindblad(driven_qubit, [], psi0, 0.0, 20.0, n)
    psi = u @ psi0
    assert np.allclose(res.final, np.outer(psi, psi.conj()), atol=1e-8)


def test_cavity_decay_oracle():
    lay = SpaceLayout(2, (2,))
    a = cavity_annihilator(lay)
    gamma = 0.0658
    rho0 = np.zeros(lay.dim, complex)
    rho0[2] = 1.0  # |1⟩ ⊗ |↑⟩
    T = 60.0
    res = propagate_lindblad(
        np.zeros((lay.dim, lay.dim)), [CollapseChannel(a, gamma)], rho0, 0.0, T, 600,
        observables={"n": number_operator(lay)},
    )
    exact = np.exp(-gamma * res.times / HBAR)
    assert np.max(np.abs(res.observables["n"] - exact)) < 1e-6
    assert abs(np.trace(res.final) - 1) < 1e-9


@given(st.floats(0.0, 0.2), st.integers(0, 2**31 - 1))
def test_lindblad_trace_preserved(rate, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = 0.1 * (m + m.conj().T)
    L = rng.normal(size=(3, 3)) + 0j
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    v /= np.linalg.norm(v)
    n = dynamics.min_steps(h, 0.0, 10.0, extra_rate=rate * np.linalg.norm(L.conj().T @ L, 2))
    rho0 = 0.7 * np.outer(v, v.conj()) + 0.1 * np.eye(3)  # full rank keeps RK4 clear of the positivity edge
    res = propagate_lindblad(h, [CollapseChannel(L, rate)], rho0, 0.0, 10.0, n)
    assert abs(np.trace(res.final) - 1) < 1e-9


def test_pulse_area_square():
    env = Envelope.square(0.02, 0.0, 25.84)
    assert pulse_area(env) == pytest.approx(math.pi / 4, abs=1e-3)
    assert pulse_area(env) == pytest.approx(0.02 * 25.84 / HBAR, rel=1e-12)
    assert pulse_area(Envelope.square(0.0, 0.0, 10.0)) == 0.0


def test_gaussian_matches_square_area():
    sq = Envelope.square(0.02, 0.0, 25.84)
    sigma = 6.0
    peak = sq.area() / (sigma * math.sqrt(2 * math.pi))  # truncation is renormalized away
    g = Envelope.gaussian(peak, 40.0, sigma)
    assert g.area() == pytest.approx(sq.area(), rel=1e-12)
    assert pulse_area(g) == pytest.approx(pulse_area(sq), abs=1e-8)


def test_duration_closed_form():
    d = solve_pulse_duration(math.pi / 4, "square", 0.02)
    assert d == pytest.approx(math.pi / 4 * HBAR / 0.02, rel=1e-12)
    assert d == pytest.approx(25.84792310377502, rel=1e-12)  # frozen
    assert solve_pulse_duration(0.0, "square", 0.02) == 0.0


@given(st.floats(0.01, 3.0), st.floats(0.001, 1.0))
def test_duration_inverse_in_coupling(phi, g):
    assert solve_pulse_duration(phi, "square", 2 * g) == pytest.approx(solve_pulse_duration(phi, "square", g) / 2, rel=1e-9)


def test_flattop_duration_reaches_area():
    d = solve_pulse_duration(math.pi / 4, "flattop", 0.02, ramp=10.0)
    assert pulse_area(Envelope.flattop(0.02, 0.0, d, 10.0)) == pytest.approx(math.pi / 4, rel=1e-9)


def test_state_propagation_observables():
    res = propagate_state(0.05 * SIGMA_X, np.array([1.0, 0.0]), 0.0, 30.0, 300,
                          observables={"x": SIGMA_X}, sample_every=10)
    assert len(res.times) == len(res.observables["x"]) == 31
    assert np.allclose(res.observables["x"], 1.0)  # σ_x eigenstate only picks up a phase


def test_evolution_sign_switch_restores():
    old = dynamics.get_evolution_sign()
    try:
        dynamics.set_evolution_sign(-1)
        assert dynamics.EVOLUTION_SIGN == -1
        with pytest.raises(ValueError):
            dynamics.set_evolution_sign(0)
    finally:
        dynamics.set_evolution_sign(old)
    assert dynamics.EVOLUTION_SIGN == 1


def test_drift_guard():
    with pytest.raises(NumericalError):
        propagate_unitary(lambda t: np.array([[0, 1e9], [1e9, 0]], complex), 0.0, 1.0, 1, enforce_budget=False)

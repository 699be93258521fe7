import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdcavity.device_model import HBAR, CavityParams, DeviceConfig, DotParams, LaserPulse, RegimeError
from qdcavity.hamiltonians import (
    HamiltonianSpec,
    build,
    build_h_eff,
    build_h_int2,
    build_h_xy,
    build_lambda_full,
    effective_frame,
    flipflop_hamiltonian,
    rotating_frame,
    spin_frame,
    time_dependent,
)
from qdcavity.tensor_algebra import (
    Operator,
    basis_index,
    number_operator,
    pauli,
    projector,
    spin_layout,
)

from conftest import BASE_DOT, y_drive

times = st.floats(-500, 500, allow_nan=False)
G_TILDE_BASE = 0.020100376253918
G_EFF_BASE = 0.10025062656641603


def one_dot(g=0.5):
    return DeviceConfig(CavityParams(1000.0, 0.0, 2), (DotParams(1005.25, 990.25, 0.0, g),))


def test_undriven_uncoupled_is_bare_diagonal():
    dev = one_dot(g=0.0)
    spec = HamiltonianSpec("effective", dev, (y_drive(dev, 0, rabi=0.0),))
    h = build_h_eff(spec, 3.0, check_regime=False).matrix
    lay = spec.layout
    bare = 1000.0 * number_operator(lay).matrix + BASE_DOT.omega_updown * projector(0, "up", lay).matrix
    assert np.allclose(h, bare, atol=1e-12)


def test_single_dot_coupling_element():
    dev = one_dot()
    spec = HamiltonianSpec("effective", dev, (y_drive(dev, 0),))
    lay = spec.layout
    h = build_h_eff(spec, 0.0).matrix
    elem = h[basis_index(lay, 1, ["down"]), basis_index(lay, 0, ["up"])]
    assert abs(elem) == pytest.approx(G_EFF_BASE, rel=1e-12)
    # the n → n+1 ladder carries √(n+1)
    elem2 = h[basis_index(lay, 2, ["down"]), basis_index(lay, 1, ["up"])]
    assert abs(elem2) == pytest.approx(math.sqrt(2) * G_EFF_BASE, rel=1e-12)


@given(times)
def test_builders_hermitian(t):
    dev = DeviceConfig(CavityParams(1000.0, 0.0, 2), (BASE_DOT, BASE_DOT))
    drives = (y_drive(dev, 0), y_drive(dev, 1, delta=0.7))
    for level in ("effective", "lambda"):
        for frame in ("lab", "rotating"):
            m = build(HamiltonianSpec(level, dev, drives, frame), t).matrix
            assert np.max(np.abs(m - m.conj().T)) < 1e-12
    m = build(HamiltonianSpec("two_qubit_flipflop", dev, drives, pair=(0, 1)), t).matrix
    assert np.max(np.abs(m - m.conj().T)) < 1e-12


def test_lambda_uncoupled_is_bare():
    dev = one_dot(g=0.0)
    spec = HamiltonianSpec("lambda", dev, (y_drive(dev, 0, rabi=0.0),))
    h = build_lambda_full(spec, 1.0).matrix
    lay = spec.layout
    d = BASE_DOT
    for n in range(3):
        for lv, e in (("up", d.omega_up), ("down", d.omega_down), ("v", d.omega_v)):
            k = basis_index(lay, n, [lv])
            assert h[k, k].real == pytest.approx(1000.0 * n + e, abs=1e-12)
    assert np.all(h - np.diag(np.diag(h)) == 0)


def test_lambda_needs_three_levels():
    with pytest.raises(ValueError):
        build_lambda_full(HamiltonianSpec("effective", one_dot()), 0.0)


def test_flipflop_block_structure(device2):
    spec = HamiltonianSpec("two_qubit_flipflop", device2, (y_drive(device2, 0), y_drive(device2, 1)), pair=(0, 1))
    h = build_h_int2(spec).matrix
    lay = spin_layout(2)
    ud, du = basis_index(lay, 0, ["up", "down"]), basis_index(lay, 0, ["down", "up"])
    assert h[ud, du] == pytest.approx(G_TILDE_BASE, rel=1e-12)
    assert h[du, ud] == pytest.approx(G_TILDE_BASE, rel=1e-12)
    mask = np.ones_like(h, bool)
    mask[ud, du] = mask[du, ud] = False
    assert np.all(h[mask] == 0)


@given(times, st.floats(0.1, 2.0))
def test_flipflop_conserves_excitations(t, d1):
    h = flipflop_hamiltonian(2, {(0, 1): 0.02}, {0: 0.5, 1: d1}, t)
    lay = spin_layout(2)
    uu, dd = basis_index(lay, 0, ["up", "up"]), basis_index(lay, 0, ["down", "down"])
    assert h.matrix[uu, dd] == 0
    n_up = projector(0, "up", lay).matrix + projector(1, "up", lay).matrix
    assert np.max(np.abs(h.matrix @ n_up - n_up @ h.matrix)) < 1e-12


@given(st.floats(-1, 1, allow_nan=False))
def test_xy_equals_flipflop_at_zero_detuning(g):
    a = build_h_xy(g).matrix
    b = flipflop_hamiltonian(2, {(0, 1): g}).matrix
    assert np.max(np.abs(a - b)) < 1e-12


def test_xy_symmetry_and_spectrum():
    g = 0.02
    h = build_h_xy(g).matrix
    lay = spin_layout(2)
    sx = pauli(0, "x", lay).matrix + pauli(1, "x", lay).matrix
    assert np.max(np.abs(h @ sx - sx @ h)) < 1e-15
    assert np.allclose(np.sort(np.linalg.eigvalsh(h)), [-g, 0, 0, g], atol=1e-15)


def test_effective_polariton_number_conserved():
    dev = one_dot()
    spec = HamiltonianSpec("effective", dev, (y_drive(dev, 0),), "rotating")
    lay = spec.layout
    h = build_h_eff(spec).matrix
    coupling = h - np.diag(np.diag(h))
    n = number_operator(lay).matrix + projector(0, "up", lay).matrix
    assert np.max(np.abs(coupling @ n - n @ coupling)) < 1e-12


def test_frame_absorbs_itself():
    lay = spin_layout(2)
    h0 = Operator(lay, np.diag([1.0, 2.0, 3.0, 4.0]).astype(complex))
    assert np.allclose(rotating_frame(h0, h0)(7.0).matrix, 0)


@given(times)
def test_frame_preserves_spectrum(t):
    dev = one_dot()
    spec = HamiltonianSpec("effective", dev, (y_drive(dev, 0),))
    h0 = spin_frame(dev, spec.layout)
    ht = rotating_frame(lambda s: build_h_eff(spec, s, check_regime=False), h0)(t).matrix
    ref = build_h_eff(spec, t, check_regime=False).matrix - h0.matrix
    assert np.allclose(np.linalg.eigvalsh(ht), np.linalg.eigvalsh(ref), atol=1e-9)


@pytest.mark.parametrize("t", [0.0, 0.37, 2.5])
def test_spin_frame_phase_structure(t):
    dev = one_dot()
    laser = y_drive(dev, 0)
    spec = HamiltonianSpec("effective", dev, (laser,))
    lay = spec.layout
    ht = rotating_frame(lambda s: build_h_eff(spec, s, check_regime=False), spin_frame(dev, lay))(t).matrix
    elem = ht[basis_index(lay, 1, ["down"]), basis_index(lay, 0, ["up"])]
    w = BASE_DOT.omega_updown + laser.omega_L
    assert elem == pytest.approx(1j * G_EFF_BASE * np.exp(-1j * w * t / HBAR), abs=1e-12)


def test_effective_frame_is_static():
    dev = one_dot()
    spec = HamiltonianSpec("effective", dev, (y_drive(dev, 0),))
    h0 = effective_frame(dev, spec.drives, spec.layout)
    frame = rotating_frame(lambda s: build_h_eff(spec, s, check_regime=False), h0)
    static = build_h_eff(HamiltonianSpec("effective", dev, spec.drives, "rotating"), check_regime=False).matrix
    for t in (0.0, 1.3, 40.0):
        assert np.allclose(frame(t).matrix, static, atol=1e-9)


def test_non_diagonal_frame_rejected():
    lay = spin_layout(1)
    with pytest.raises(ValueError):
        rotating_frame(Operator(lay, np.zeros((2, 2))), Operator(lay, np.array([[0, 1], [1, 0]], complex)))


def test_regime_failure_propagates():
    dev = DeviceConfig(CavityParams(1000.0, 0.0, 1), (DotParams(1000.6, 990.0, 0.0, 0.5),))
    spec = HamiltonianSpec("effective", dev, (y_drive(dev, 0),))
    with pytest.raises(RegimeError):
        build_h_eff(spec)
    with pytest.raises(RegimeError):
        time_dependent(spec)


def test_spec_invariants(device2):
    with pytest.raises(ValueError):
        HamiltonianSpec("two_qubit_xy", device2, pair=(0, 0))
    with pytest.raises(ValueError):
        HamiltonianSpec("effective", device2, (LaserPulse(5, "y", 985.0, 1.0),))
    with pytest.raises(ValueError):
        HamiltonianSpec("bogus", device2)

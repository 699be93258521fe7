import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdcavity.tensor_algebra import (
    CAVITY,
    LayoutError,
    Operator,
    QuantumState,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SpaceLayout,
    basis_state,
    cavity_annihilator,
    cavity_population,
    commutator,
    embed,
    hermitian_check,
    identity,
    local_rotation,
    operator_from_dict,
    operator_to_dict,
    partial_trace,
    reduced_density_matrix,
    pauli,
    pauli_vector_rotation,
    projector,
    spin_layout,
    spin_transition,
    state_from_dict,
    state_to_dict,
    unitary_check,
)

angles = st.floats(-10, 10, allow_nan=False)
axes = (
    st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3)
    .filter(lambda v: sum(x * x for x in v) > 1e-3)
    .map(lambda v: tuple(np.asarray(v) / np.linalg.norm(v)))
)


def test_embed_identity_is_identity():
    lay = SpaceLayout(3, (2, 2))
    assert np.array_equal(embed(np.eye(2), 0, lay).matrix, np.eye(lay.dim))


def test_disjoint_embeds_commute():
    lay = SpaceLayout(2, (2, 2))
    a, b = embed(SIGMA_Z, 0, lay), embed(SIGMA_Z, 1, lay)
    assert np.allclose(commutator(a, b).matrix, 0)


def test_a_adag_spectrum_two_level_cavity():
    lay = SpaceLayout(2, (2,))
    a = cavity_annihilator(lay)
    ev = np.sort(np.linalg.eigvalsh((a @ a.dag()).matrix))
    assert np.allclose(ev, [0, 0, 1, 1])


def test_annihilator_truncated_matrix():
    lay = SpaceLayout(2, (2,))
    a = cavity_annihilator(lay).matrix
    assert np.array_equal(a, np.kron([[0, 1], [0, 0]], np.eye(2)))


@pytest.mark.parametrize("lay", [SpaceLayout(2, (2,)), SpaceLayout(4, (2, 3)), SpaceLayout(3, (2,))])
def test_annihilator_kills_vacuum(lay):
    a = cavity_annihilator(lay).matrix
    vac = basis_state(lay, 0, ["down"] * lay.n_dots).data
    assert np.allclose(a @ vac, 0)


def test_canonical_commutator_below_truncation_edge():
    lay = SpaceLayout(4, (2,))
    a = cavity_annihilator(lay).matrix
    c = a @ a.conj().T - a.conj().T @ a - np.eye(lay.dim)
    assert np.max(np.abs(c[:6, :6])) < 1e-15  # photon numbers 0..2 times two spin levels
    assert np.max(np.abs(c[6:, 6:])) > 0  # the truncation edge breaks it


def test_transition_algebra():
    lay = SpaceLayout(2, (2, 3))
    up, down = projector(1, "up", lay).matrix, projector(1, "down", lay).matrix
    s_ud = spin_transition(1, "down", "up", lay)  # |↑⟩⟨↓|
    s_du = spin_transition(1, "up", "down", lay)
    v = projector(1, "v", lay).matrix
    assert np.array_equal(up + down + v, np.eye(lay.dim))
    assert np.allclose((s_ud @ s_du).matrix, up)
    assert np.array_equal(s_ud.dag().matrix, s_du.matrix)


def test_x_quantized_paulis():
    assert np.array_equal(SIGMA_X, np.diag([1, -1]))
    assert np.allclose(SIGMA_Y @ SIGMA_Z, 1j * SIGMA_X)
    assert np.allclose(SIGMA_Z @ SIGMA_X, 1j * SIGMA_Y)


@given(axes)
def test_zero_angle_rotation_is_identity(n):
    lay = spin_layout(2)
    assert np.allclose(pauli_vector_rotation(0, n, 0.0, lay).matrix, np.eye(4))


def test_quarter_turn_about_y_is_hadamard_like():
    u = local_rotation((0, 1, 0), math.pi / 4)
    ideal = (np.eye(2) + 1j * SIGMA_Y) / math.sqrt(2)
    assert abs(np.trace(ideal.conj().T @ u)) / 2 == pytest.approx(1.0, abs=1e-14)
    # the σ_z eigenbasis goes to the σ_x eigenbasis (90° on the Bloch sphere)
    w, q = np.linalg.eigh(SIGMA_Z)
    mapped = u @ q
    assert np.allclose(np.abs(mapped.conj().T @ SIGMA_X @ mapped), np.eye(2), atol=1e-12)


@given(axes, angles)
def test_rotations_unitary(n, angle):
    assert unitary_check(local_rotation(n, angle), 1e-12)


def test_cpf_rotation_unitary():
    n = np.array([1, 1, -1]) / math.sqrt(3)
    assert unitary_check(local_rotation(n, math.pi / 3), 1e-12)


def test_partial_trace_everything_is_one():
    lay = SpaceLayout(2, (2,))
    rng = np.random.default_rng(0)
    psi = rng.normal(size=lay.dim) + 1j * rng.normal(size=lay.dim)
    red = reduced_density_matrix(QuantumState(lay, psi / np.linalg.norm(psi)), [])
    assert red.shape == (1, 1) and red[0, 0] == pytest.approx(1.0)


def test_product_state_traces_to_factors():
    lay = SpaceLayout(2, (2, 2))
    c = np.array([0.6, 0.8])
    d0 = np.array([1, 1j]) / math.sqrt(2)
    d1 = np.array([0, 1.0])
    psi = np.kron(np.kron(c, d0), d1)
    red = partial_trace(QuantumState(lay, psi), [0])
    assert np.allclose(red.density(), np.outer(d0, d0.conj()))
    assert np.allclose(reduced_density_matrix(QuantumState(lay, psi), [CAVITY]), np.outer(c, c))


def test_bell_state_is_maximally_mixed():
    lay = spin_layout(2)
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert np.allclose(partial_trace(QuantumState(lay, bell), [1]).density(), np.eye(2) / 2)


def test_cavity_population_counts_photons():
    lay = SpaceLayout(3, (2,))
    assert cavity_population(basis_state(lay, 2, ["up"])) == pytest.approx(2.0)


def test_layout_mismatch_rejected():
    with pytest.raises(LayoutError):
        identity(SpaceLayout(2, (2,))) @ identity(spin_layout(1))


def test_pauli_hermitian_on_three_level_dot():
    lay = SpaceLayout(1, (3,))
    for ax in "xyz":
        assert hermitian_check(pauli(0, ax, lay), 1e-15)


@given(st.integers(1, 3), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_operator_and_state_json_round_trip(cav, n_dots, seed):
    lay = SpaceLayout(cav, (2,) * n_dots)
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(lay.dim, lay.dim)) + 1j * rng.normal(size=(lay.dim, lay.dim))
    op = Operator(lay, m)
    back = operator_from_dict(operator_to_dict(op))
    assert back.layout == lay and np.array_equal(back.matrix, op.matrix)
    v = rng.normal(size=lay.dim) + 0j
    s = QuantumState(lay, v / np.linalg.norm(v))
    assert np.array_equal(state_from_dict(state_to_dict(s)).data, s.data)

"""Operators and states on the truncated space cavity ⊗ dot_1 ⊗ ... ⊗ dot_N.

Site order in every tensor product is fixed: the cavity first, then the dots
in index order.  Within a dot the level order is

    index 0 = |↑⟩,  index 1 = |↓⟩,  index 2 = |v⟩ (3-level dots only)

The qubit states |↑⟩, |↓⟩ are the m_x = ±1/2 eigenstates (field along x), so
σ_x is diagonal in this basis and σ_y, σ_z are the transverse Paulis:

    σ_x = diag(1, -1),  σ_y = [[0, 1], [1, 0]],  σ_z = [[0, -i], [i, 0]]

which keeps σ_x σ_y = i σ_z and gives σ_↑↓ = |↑⟩⟨↓| = (σ_y + i σ_z)/2.

A cavity dimension of 1 means "no cavity"; the pure spin spaces used by the
two-qubit models are layouts with ``cavity_dim=1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.linalg import expm

DEFAULT_MAX_DIM = 4096
DEFAULT_ATOL = 1e-10

Site = Union[str, int]
CAVITY = "cavity"

LEVEL_INDEX = {"up": 0, "↑": 0, "down": 1, "↓": 1, "v": 2}

SIGMA_X = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_Y = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


class LayoutError(ValueError):
    """Invalid layout, site, or operator dimension."""


@dataclass(frozen=True)
class SpaceLayout:
    cavity_dim: int
    dot_dims: tuple[int, ...]
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self) -> None:
        object.__setattr__(self, "dot_dims", tuple(int(d) for d in self.dot_dims))
        if int(self.cavity_dim) < 1:
            raise LayoutError(f"cavity_dim must be >= 1, got {self.cavity_dim}")
        if not self.dot_dims:
            raise LayoutError("dot_dims must be non-empty")
        bad = [d for d in self.dot_dims if d not in (2, 3)]
        if bad:
            raise LayoutError(f"dot dimensions must be 2 or 3, got {bad}")
        if self.dim > self.max_dim:
            raise LayoutError(
                f"total dimension {self.dim} exceeds cap {self.max_dim}"
            )

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.cavity_dim, *self.dot_dims)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_dots(self) -> int:
        return len(self.dot_dims)

    @property
    def n_max(self) -> int:
        return self.cavity_dim - 1

    def site_index(self, site: Site) -> int:
        """Position of ``site`` in :attr:`dims` (0 is the cavity)."""
        if site == CAVITY:
            return 0
        if isinstance(site, (int, np.integer)) and not isinstance(site, bool):
            if 0 <= site < self.n_dots:
                return int(site) + 1
        raise LayoutError(f"site {site!r} out of range for {self.n_dots} dots")

    def site_dim(self, site: Site) -> int:
        return self.dims[self.site_index(site)]

    def with_cavity_dim(self, cavity_dim: int) -> "SpaceLayout":
        return SpaceLayout(cavity_dim, self.dot_dims, self.max_dim)

    def to_dict(self) -> dict:
        return {"cavity_dim": self.cavity_dim, "dot_dims": list(self.dot_dims)}

    @classmethod
    def from_dict(cls, d: dict) -> "SpaceLayout":
        return cls(int(d["cavity_dim"]), tuple(d["dot_dims"]))


def spin_layout(n_dots: int = 2) -> SpaceLayout:
    """Qubit-only layout (no cavity factor)."""
    return SpaceLayout(1, (2,) * n_dots)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Operator:
    layout: SpaceLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = _frozen(self.matrix)
        if m.shape != (self.layout.dim, self.layout.dim):
            raise LayoutError(
                f"matrix shape {m.shape} does not match layout dimension {self.layout.dim}"
            )
        object.__setattr__(self, "matrix", m)

    def _coerce(self, other: "Operator") -> np.ndarray:
        if not isinstance(other, Operator):
            return NotImplemented
        if other.layout.dims != self.layout.dims:
            raise LayoutError("operators live on different layouts")
        return other.matrix

    def __matmul__(self, other: "Operator") -> "Operator":
        return Operator(self.layout, self.matrix @ self._coerce(other))

    def __add__(self, other: "Operator") -> "Operator":
        return Operator(self.layout, self.matrix + self._coerce(other))

    def __sub__(self, other: "Operator") -> "Operator":
        return Operator(self.layout, self.matrix - self._coerce(other))

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.layout, self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.layout, -self.matrix)

    def dag(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    @property
    def dim(self) -> int:
        return self.layout.dim


def identity(layout: SpaceLayout) -> Operator:
    return Operator(layout, np.eye(layout.dim, dtype=complex))


def zero(layout: SpaceLayout) -> Operator:
    return Operator(layout, np.zeros((layout.dim, layout.dim), dtype=complex))


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def _matrix(op) -> np.ndarray:
    return op.matrix if isinstance(op, Operator) else np.asarray(op)


def hermitian_check(op, atol: float = DEFAULT_ATOL) -> bool:
    m = _matrix(op)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) < atol)


def unitary_check(op, atol: float = DEFAULT_ATOL) -> bool:
    m = _matrix(op)
    eye = np.eye(m.shape[0])
    return bool(np.max(np.abs(m.conj().T @ m - eye), initial=0.0) < atol)


def embed(local_op, site: Site, layout: SpaceLayout) -> Operator:
    """Place ``local_op`` at ``site`` with identities everywhere else."""
    local = np.asarray(local_op, dtype=complex)
    k = layout.site_index(site)
    d = layout.dims[k]
    if local.shape != (d, d):
        raise LayoutError(f"local operator shape {local.shape} != site dimension {d}")
    factors = [np.eye(n, dtype=complex) for n in layout.dims]
    factors[k] = local
    return Operator(layout, reduce(np.kron, factors))


def cavity_annihilator(layout: SpaceLayout) -> Operator:
    if layout.cavity_dim < 2:
        raise LayoutError("cavity annihilator needs cavity_dim >= 2")
    a = np.diag(np.sqrt(np.arange(1, layout.cavity_dim)), k=1)
    return embed(a, CAVITY, layout)


def number_operator(layout: SpaceLayout) -> Operator:
    return embed(np.diag(np.arange(layout.cavity_dim, dtype=float)), CAVITY, layout)


def _level(label: str, dot_dim: int) -> int:
    try:
        idx = LEVEL_INDEX[label]
    except KeyError:
        raise LayoutError(f"unknown level label {label!r}") from None
    if idx >= dot_dim:
        raise LayoutError(f"level {label!r} not present on a {dot_dim}-level dot")
    return idx


def spin_transition(dot: int, frm: str, to: str, layout: SpaceLayout) -> Operator:
    """|to⟩⟨from| on ``dot``; e.g. ``spin_transition(i, "down", "up")`` is σ_↑↓."""
    d = layout.site_dim(dot)
    m = np.zeros((d, d), dtype=complex)
    m[_level(to, d), _level(frm, d)] = 1.0
    return embed(m, dot, layout)


def projector(dot: int, level: str, layout: SpaceLayout) -> Operator:
    return spin_transition(dot, level, level, layout)


def _pad(m2: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros((d, d), dtype=complex)
    out[:2, :2] = m2
    return out


def pauli(dot: int, axis: str, layout: SpaceLayout) -> Operator:
    """Pauli matrix on the {↑, ↓} block of ``dot`` (zero on |v⟩)."""
    if axis not in PAULI:
        raise LayoutError(f"axis must be x, y or z, got {axis!r}")
    return embed(_pad(PAULI[axis], layout.site_dim(dot)), dot, layout)


def _unit_axis(n: Sequence[float]) -> np.ndarray:
    v = np.asarray(n, dtype=float)
    if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) >= 1e-12:
        raise ValueError(f"rotation axis must be a unit 3-vector, got {n!r}")
    return v


def local_rotation(n: Sequence[float], angle: float) -> np.ndarray:
    """2x2 matrix exp(i·angle·n·σ) in the module's Pauli convention."""
    v = _unit_axis(n)
    gen = v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z
    # exact closed form; n·σ squares to the identity
    return np.cos(angle) * np.eye(2) + 1j * np.sin(angle) * gen


def pauli_vector_rotation(
    dot: int, n: Sequence[float], angle: float, layout: SpaceLayout
) -> Operator:
    """exp(i·angle·n·σ) on ``dot``; identity on a |v⟩ level if present."""
    d = layout.site_dim(dot)
    local = np.eye(d, dtype=complex)
    local[:2, :2] = local_rotation(n, angle)
    return embed(local, dot, layout)


def expm_hermitian(h: np.ndarray, coeff: complex) -> np.ndarray:
    """exp(coeff·h) for Hermitian ``h`` via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(coeff * w)) @ v.conj().T


def operator_expm(op: Operator, coeff: complex = 1.0) -> Operator:
    return Operator(op.layout, expm(coeff * op.matrix))


@dataclass(frozen=True, eq=False)
class QuantumState:
    layout: SpaceLayout
    data: np.ndarray = field(repr=False)
    atol: float = DEFAULT_ATOL

    def __post_init__(self) -> None:
        a = _frozen(self.data)
        d = self.layout.dim
        if a.shape == (d,):
            if abs(np.linalg.norm(a) - 1.0) >= self.atol:
                raise ValueError("pure state is not normalized")
        elif a.shape == (d, d):
            if abs(np.trace(a) - 1.0) >= self.atol:
                raise ValueError("density matrix does not have unit trace")
            if not hermitian_check(a, self.atol):
                raise ValueError("density matrix is not Hermitian")
        else:
            raise LayoutError(f"state shape {a.shape} incompatible with dimension {d}")
        object.__setattr__(self, "data", a)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def expect(self, op: Operator) -> float:
        if self.is_pure:
            return float(np.real(self.data.conj() @ op.matrix @ self.data))
        return float(np.real(np.trace(op.matrix @ self.data)))


def basis_state(layout: SpaceLayout, n_photons: int, spins: Sequence[str]) -> QuantumState:
    """Product basis ket |n⟩ ⊗ |s_1⟩ ⊗ ... with spin labels like "up"/"down"."""
    if len(spins) != layout.n_dots:
        raise LayoutError("need one level label per dot")
    if not 0 <= n_photons < layout.cavity_dim:
        raise LayoutError(f"photon number {n_photons} outside truncation")
    kets = [np.eye(layout.cavity_dim)[n_photons]]
    for d, s in zip(layout.dot_dims, spins):
        kets.append(np.eye(d)[_level(s, d)])
    return QuantumState(layout, reduce(np.kron, kets).astype(complex))


def basis_index(layout: SpaceLayout, n_photons: int, spins: Sequence[str]) -> int:
    idx = (n_photons,) + tuple(_level(s, d) for d, s in zip(layout.dot_dims, spins))
    return int(np.ravel_multi_index(idx, layout.dims))


def reduced_density_matrix(state: QuantumState, keep: Iterable[Site]) -> np.ndarray:
    """Reduced density matrix on the ``keep`` sites as a plain array.

    Any subset works, including the empty one (a 1×1 array holding the trace)
    and the cavity alone.
    """
    layout = state.layout
    keep_idx = sorted({layout.site_index(s) for s in keep})
    dims = layout.dims
    rho = state.density().reshape(dims + dims)
    # trace out from the highest axis down so axis numbers stay valid
    for k in reversed(range(len(dims))):
        if k not in keep_idx:
            m = rho.ndim // 2
            rho = np.trace(rho, axis1=k, axis2=k + m)
    d = int(np.prod([dims[k] for k in keep_idx])) if keep_idx else 1
    return rho.reshape(d, d)


def partial_trace(state: QuantumState, keep: Iterable[Site]) -> QuantumState:
    """Reduced state on the ``keep`` sites (order follows the layout).

    The result must keep at least one dot; use :func:`reduced_density_matrix`
    for cavity-only or fully traced figures.
    """
    layout = state.layout
    keep_idx = sorted({layout.site_index(s) for s in keep})
    dots = tuple(layout.dims[k] for k in keep_idx if k != 0)
    if not dots:
        raise LayoutError("keep must include at least one dot")
    cav = layout.dims[0] if 0 in keep_idx else 1
    out_layout = SpaceLayout(cav, dots, layout.max_dim)
    return QuantumState(out_layout, reduced_density_matrix(state, keep), atol=max(state.atol, 1e-12))


def cavity_population(state: QuantumState) -> float:
    """⟨a†a⟩ of the state (0 for layouts without a cavity)."""
    if state.layout.cavity_dim == 1:
        return 0.0
    return state.expect(number_operator(state.layout))


# --- JSON form: layout + row-major [re, im] pairs -------------------------


def _pairs(a: np.ndarray) -> list[list[float]]:
    flat = np.asarray(a, dtype=complex).ravel(order="C")
    return [[float(z.real), float(z.imag)] for z in flat]


def _unpairs(pairs, shape) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(shape)


def operator_to_dict(op: Operator, name: str | None = None) -> dict:
    out = {
        "kind": "operator",
        "layout": op.layout.to_dict(),
        "shape": [op.dim, op.dim],
        "entries": _pairs(op.matrix),
    }
    if name is not None:
        out["name"] = name
    return out


def operator_from_dict(d: dict) -> Operator:
    layout = SpaceLayout.from_dict(d["layout"])
    return Operator(layout, _unpairs(d["entries"], tuple(d["shape"])))


def state_to_dict(state: QuantumState) -> dict:
    return {
        "kind": "pure" if state.is_pure else "density",
        "layout": state.layout.to_dict(),
        "shape": list(state.data.shape),
        "entries": _pairs(state.data),
    }


def state_from_dict(d: dict) -> QuantumState:
    layout = SpaceLayout.from_dict(d["layout"])
    return QuantumState(layout, _unpairs(d["entries"], tuple(d["shape"])))


def dumps_operator(op: Operator, name: str | None = None) -> str:
    return json.dumps(operator_to_dict(op, name), indent=None, sort_keys=True)

"""Collective spin operators, states and rotations for N spin-1/2 particles.

Two bases are supported.  ``Basis.SYMMETRIC`` is the (N+1)-dimensional
permutation-invariant sector, i.e. a single spin J = N/2 with basis index
``k = 0..N`` counting excitations and J_z eigenvalue ``m = k - N/2``.
``Basis.FULL`` is the 2^N product space; bit value 1 of a basis index marks
a spin-up (+1/2) particle and the first tensor factor is the most
significant bit.  Both constructions share the ladder phase convention, so
the symmetric sector of the full space maps onto the symmetric basis with
the real isometry returned by :func:`symmetric_isometry`.
"""

from __future__ import annotations

import enum
import functools
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import BasisMismatch, DimensionError, EigensolverError

MAX_FULL_PARTICLES = 14

# Density-matrix positivity is only checked up to this dimension (O(d^3) cost).
_PSD_CHECK_MAX_DIM = 512


class Basis(enum.Enum):
    SYMMETRIC = "symmetric"
    FULL = "full"


class Axis(str, enum.Enum):
    X = "x"
    Y = "y"
    Z = "z"


class Label(enum.Enum):
    JX = "Jx"
    JY = "Jy"
    JZ = "Jz"
    COMPOSITE = "Composite"


class Tag(enum.Enum):
    SYMMETRIC = "symmetric"
    PHASE_AVERAGED = "phase_averaged"


class Representation(enum.Enum):
    PURE = "pure"
    DENSITY = "density"


@dataclass(frozen=True)
class SpinSystem:
    n_particles: int
    basis: Basis = Basis.SYMMETRIC

    def __post_init__(self):
        n = self.n_particles
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError(f"n_particles must be a positive integer, got {n!r}")
        object.__setattr__(self, "n_particles", int(n))
        object.__setattr__(self, "basis", Basis(self.basis))
        if self.basis is Basis.FULL and n > MAX_FULL_PARTICLES:
            raise DimensionError(
                f"full product space limited to N <= {MAX_FULL_PARTICLES} (got N={n})"
            )

    @property
    def dim(self) -> int:
        if self.basis is Basis.SYMMETRIC:
            return self.n_particles + 1
        return 2**self.n_particles

    @property
    def spin(self) -> float:
        return self.n_particles / 2

    def jz_diagonal(self) -> np.ndarray:
        """J_z eigenvalue of every basis vector (J_z is diagonal in both bases)."""
        return _jz_diagonal(self.n_particles, self.basis)

    def parity_diagonal(self) -> np.ndarray:
        """Diagonal of sigma_z^{(x)N}, i.e. (-1)^(number of spin-down particles)."""
        n_down = np.rint(self.spin - self.jz_diagonal()).astype(np.int64)
        return np.where(n_down % 2 == 0, 1.0, -1.0)


@functools.lru_cache(maxsize=None)
def _jz_diagonal(n: int, basis: Basis) -> np.ndarray:
    if basis is Basis.SYMMETRIC:
        m = np.arange(n + 1) - n / 2
    else:
        idx = np.arange(2**n, dtype=np.int64)
        ups = np.zeros_like(idx)
        for s in range(n):
            ups += (idx >> s) & 1
        m = ups - n / 2
    m = m.astype(float)
    m.flags.writeable = False
    return m


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class CollectiveOperator:
    """Hermitian operator on a spin system."""

    system: SpinSystem
    matrix: np.ndarray
    label: Label = Label.COMPOSITE

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.system.dim
        if m.shape != (d, d):
            raise BasisMismatch(f"operator shape {m.shape} does not match dimension {d}")
        if not np.allclose(m, m.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise ValueError("CollectiveOperator matrix must be Hermitian")
        if m.flags.writeable:
            m = _readonly(m)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other):
        other_m = other.matrix if isinstance(other, CollectiveOperator) else other
        if isinstance(other, CollectiveOperator) and other.system != self.system:
            raise BasisMismatch("operators belong to different systems")
        return self.matrix @ other_m


def composite(system: SpinSystem, matrix: np.ndarray) -> CollectiveOperator:
    """Wrap a product that is Hermitian in exact arithmetic, removing rounding drift."""
    m = np.asarray(matrix, dtype=complex)
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if not np.allclose(m, m.conj().T, rtol=0, atol=1e-8 * scale):
        raise ValueError("composite operator is not Hermitian")
    return CollectiveOperator(system, (m + m.conj().T) / 2, Label.COMPOSITE)


def product(*ops: CollectiveOperator) -> CollectiveOperator:
    """Ordered product of operators; the product itself must be Hermitian (e.g. Jz Jx^2 Jz)."""
    system = _common_system(ops)
    out = ops[0].matrix
    for op in ops[1:]:
        out = out @ op.matrix
    return composite(system, out)


def anticommutator(a: CollectiveOperator, b: CollectiveOperator) -> CollectiveOperator:
    system = _common_system((a, b))
    ab = a.matrix @ b.matrix
    return composite(system, ab + ab.conj().T)


def _common_system(ops: Sequence[CollectiveOperator]) -> SpinSystem:
    systems = {op.system for op in ops}
    if len(systems) != 1:
        raise BasisMismatch("operators belong to different systems")
    return ops[0].system


_AXIS_LABEL = {Axis.X: Label.JX, Axis.Y: Label.JY, Axis.Z: Label.JZ}


def build_collective(system: SpinSystem, axis: Axis | str) -> CollectiveOperator:
    """Collective angular momentum J_axis = sum_n sigma_axis^(n) / 2."""
    axis = Axis(axis)
    return _build_collective(system, axis)


@functools.lru_cache(maxsize=256)
def _build_collective(system: SpinSystem, axis: Axis) -> CollectiveOperator:
    if system.basis is Basis.SYMMETRIC:
        mat = _symmetric_component(system.n_particles, axis)
    else:
        mat = _full_component(system.n_particles, axis)
    return CollectiveOperator(system, _readonly(mat), _AXIS_LABEL[axis])


def _symmetric_component(n: int, axis: Axis) -> np.ndarray:
    j = n / 2
    m = np.arange(n + 1) - j
    if axis is Axis.Z:
        return np.diag(m).astype(complex)
    # <m+1|J_+|m> = sqrt(J(J+1) - m(m+1))
    up = np.sqrt(np.maximum(j * (j + 1) - m[:-1] * (m[:-1] + 1), 0.0))
    jplus = np.diag(up, -1).astype(complex)
    if axis is Axis.X:
        return (jplus + jplus.conj().T) / 2
    return (jplus - jplus.conj().T) / 2j


def _full_component(n: int, axis: Axis) -> np.ndarray:
    dim = 2**n
    if axis is Axis.Z:
        return np.diag(_jz_diagonal(n, Basis.FULL)).astype(complex)
    mat = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim, dtype=np.int64)
    for s in range(n):
        flipped = idx ^ (1 << s)
        if axis is Axis.X:
            mat[flipped, idx] += 0.5
        else:
            # j_y = (j_+ - j_-)/(2i): raising a spin gives -i/2, lowering +i/2
            raising = ((idx >> s) & 1) == 0
            mat[flipped, idx] += np.where(raising, -0.5j, 0.5j)
    return mat


@functools.lru_cache(maxsize=64)
def symmetric_isometry(n: int) -> np.ndarray:
    """2^N x (N+1) matrix whose column k is the normalized Dicke state with k excitations."""
    SpinSystem(n, Basis.FULL)
    ups = np.rint(_jz_diagonal(n, Basis.FULL) + n / 2).astype(np.int64)
    v = np.zeros((2**n, n + 1))
    v[np.arange(2**n), ups] = 1.0
    v /= np.sqrt(v.sum(axis=0))
    v.flags.writeable = False
    return v


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure vector or density matrix on a spin system, with classification tags."""

    system: SpinSystem
    data: np.ndarray
    tags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        data = np.array(self.data, dtype=complex, copy=True)
        d = self.system.dim
        tags = frozenset(Tag(t) for t in self.tags)
        if data.shape == (d,):
            norm = np.linalg.norm(data)
            if abs(norm - 1.0) > 1e-12:
                raise ValueError(f"state vector not normalized (norm={norm!r})")
        elif data.shape == (d, d):
            tr = np.trace(data)
            if abs(tr - 1.0) > 1e-12:
                raise ValueError(f"density matrix trace is {tr!r}, expected 1")
            if not np.allclose(data, data.conj().T, rtol=0, atol=1e-12):
                raise ValueError("density matrix not Hermitian")
            data = (data + data.conj().T) / 2
            if d <= _PSD_CHECK_MAX_DIM and np.linalg.eigvalsh(data)[0] < -1e-10:
                raise ValueError("density matrix has negative eigenvalues")
        else:
            raise BasisMismatch(f"state shape {data.shape} does not match dimension {d}")
        if Tag.PHASE_AVERAGED in tags and not _commutes_with_jz(self.system, data):
            raise ValueError("state tagged phase-averaged does not commute with J_z")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "tags", tags)

    @property
    def representation(self) -> Representation:
        return Representation.PURE if self.data.ndim == 1 else Representation.DENSITY

    @property
    def is_pure_vector(self) -> bool:
        return self.data.ndim == 1

    def density_matrix(self) -> np.ndarray:
        if self.data.ndim == 1:
            return np.outer(self.data, self.data.conj())
        return self.data

    def with_tags(self, *extra: Tag) -> "QuantumState":
        return QuantumState(self.system, self.data, self.tags | frozenset(extra))


def _commutes_with_jz(system: SpinSystem, data: np.ndarray) -> bool:
    m = system.jz_diagonal()
    if data.ndim == 1:
        support = np.abs(data) > 1e-10
        return np.ptp(m[support]) < 1e-9 if support.any() else True
    mismatch = np.abs(m[:, None] - m[None, :]) > 1e-9
    return bool(np.all(np.abs(data[mismatch]) <= 1e-10))


def embed_in_full(state: QuantumState) -> QuantumState:
    """Map a symmetric-basis state into the full product space."""
    if state.system.basis is not Basis.SYMMETRIC:
        raise BasisMismatch("state is already in the full product space")
    n = state.system.n_particles
    v = symmetric_isometry(n)
    full = SpinSystem(n, Basis.FULL)
    if state.is_pure_vector:
        data = v @ state.data
    else:
        data = v @ state.data @ v.T
    return QuantumState(full, data, state.tags | {Tag.SYMMETRIC})


def _operator_matrix(state: QuantumState, op) -> tuple[np.ndarray, bool]:
    if isinstance(op, CollectiveOperator):
        if op.system != state.system:
            raise BasisMismatch(
                f"operator on {op.system} applied to state on {state.system}"
            )
        return op.matrix, True
    if isinstance(op, np.ndarray):
        return op, False
    if isinstance(op, Sequence) and len(op) > 0:
        mats = [_operator_matrix(state, o)[0] for o in op]
        out = mats[0]
        for m in mats[1:]:
            out = out @ m
        return out, False
    raise TypeError(f"unsupported operator type {type(op).__name__}")


def expectation(state: QuantumState, op) -> float | complex:
    """Tr(rho O) or <psi|O|psi>.

    ``op`` may be a :class:`CollectiveOperator`, a raw matrix, or a sequence of
    either (interpreted as their ordered product).  The result is a float
    whenever the operator is Hermitian, otherwise complex.
    """
    mat, known_hermitian = _operator_matrix(state, op)
    d = state.system.dim
    if mat.shape != (d, d):
        raise BasisMismatch(f"operator shape {mat.shape} does not match dimension {d}")
    if state.is_pure_vector:
        psi = state.data
        val = complex(np.vdot(psi, mat @ psi))
    else:
        val = complex(np.einsum("ij,ji->", state.data, mat))
    hermitian = known_hermitian or np.allclose(
        mat, mat.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(mat).max())
    )
    if not hermitian:
        return val
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"Hermitian expectation has imaginary part {val.imag!r}")
    return val.real


def eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix with ascending eigenvalues.

    Backed by LAPACK; the residual and orthonormality are verified and an
    :class:`EigensolverError` is raised if either is out of contract.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if not np.allclose(a, a.conj().T, rtol=0, atol=1e-10 * scale):
        raise ValueError("eigh requires a Hermitian matrix")
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(str(exc)) from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        raise EigensolverError("eigensolver returned non-finite values")
    residual = np.linalg.norm(a @ v - v * w, axis=0).max(initial=0.0)
    if residual > 1e-9 * scale:
        raise EigensolverError(f"eigenvector residual {residual:.3e} exceeds tolerance")
    ortho = np.abs(v.conj().T @ v - np.eye(a.shape[0])).max(initial=0.0)
    if ortho > 1e-10:
        raise EigensolverError(f"eigenvectors not orthonormal ({ortho:.3e})")
    return w, v


@functools.lru_cache(maxsize=256)
def _generator_eigh(system: SpinSystem, axis: Axis) -> tuple[np.ndarray, np.ndarray]:
    if axis is Axis.Z:
        w = system.jz_diagonal()
        v = np.eye(system.dim, dtype=complex)
    else:
        w, v = eigh(build_collective(system, axis).matrix)
    return _readonly(w), _readonly(v)


def rotation_unitary(system: SpinSystem, axis: Axis | str, angle: float) -> np.ndarray:
    """exp(-i J_axis angle)."""
    w, v = _generator_eigh(system, Axis(axis))
    return (v * np.exp(-1j * w * angle)) @ v.conj().T


def rotate(state: QuantumState, axis: Axis | str, angle: float) -> QuantumState:
    """Apply exp(-i J_axis angle) to the state (Schroedinger picture)."""
    axis = Axis(axis)
    angle = float(angle)
    if not np.isfinite(angle):
        raise ValueError("rotation angle must be finite")
    w, v = _generator_eigh(state.system, axis)
    phase = np.exp(-1j * w * angle)
    if state.is_pure_vector:
        data = v @ (phase * (v.conj().T @ state.data))
    else:
        u = (v * phase) @ v.conj().T
        data = u @ state.data @ u.conj().T
    tags = state.tags if axis is Axis.Z else state.tags - {Tag.PHASE_AVERAGED}
    if state.is_pure_vector:
        data = data / np.linalg.norm(data)
    else:
        data = data / np.trace(data).real
    return QuantumState(state.system, data, tags)

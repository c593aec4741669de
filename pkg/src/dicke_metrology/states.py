"""Initial states: Dicke states, thermal Dicke mixtures, squeezed ground states,
and the phase-averaging and sigma_z-symmetrizing maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spinops import (
    Axis,
    Basis,
    QuantumState,
    SpinSystem,
    Tag,
    build_collective,
    eigh,
    rotate,
    symmetric_isometry,
)

# thermal_dicke short-circuits to the pure Dicke state below this temperature.
ZERO_TEMPERATURE = 1e-12


@dataclass(frozen=True)
class ThermalDickeParams:
    n_particles: int
    temperature: float

    def __post_init__(self):
        if self.n_particles < 2 or self.n_particles % 2:
            raise ValueError(f"thermal Dicke states need even N >= 2, got {self.n_particles}")
        if not (self.temperature >= 0):
            raise ValueError(f"temperature must be nonnegative, got {self.temperature}")


@dataclass(frozen=True)
class SqueezingParams:
    n_particles: int
    lam: float

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be positive")
        if not (self.lam > 0) or not math.isfinite(self.lam):
            raise ValueError(f"lambda must be finite and > 0, got {self.lam}")


def dicke(n_particles: int, n_excitations: int | None = None,
          basis: Basis = Basis.SYMMETRIC) -> QuantumState:
    """Symmetric Dicke state with ``n_excitations`` spins up (default N/2)."""
    if n_excitations is None:
        if n_particles % 2:
            raise ValueError("the default Dicke state |D_N> needs even N")
        n_excitations = n_particles // 2
    if not 0 <= n_excitations <= n_particles:
        raise ValueError(f"excitations must lie in [0, {n_particles}], got {n_excitations}")
    system = SpinSystem(n_particles, basis)
    if system.basis is Basis.SYMMETRIC:
        psi = np.zeros(system.dim, dtype=complex)
        psi[n_excitations] = 1.0
    else:
        psi = symmetric_isometry(n_particles)[:, n_excitations].astype(complex)
    return QuantumState(system, psi, {Tag.SYMMETRIC})


def thermal_dicke(params: ThermalDickeParams) -> QuantumState:
    """Gaussian mixture of Dicke states, weights exp(-(m - N/2)^2 / T)."""
    n = params.n_particles
    system = SpinSystem(n)
    k = np.arange(n + 1)
    if params.temperature < ZERO_TEMPERATURE:
        weights = (k == n // 2).astype(float)
    else:
        weights = np.exp(-((k - n / 2) ** 2) / params.temperature)
        weights /= weights.sum()
    return QuantumState(system, np.diag(weights), {Tag.SYMMETRIC, Tag.PHASE_AVERAGED})


def squeezing_hamiltonian(n_particles: int, lam: float) -> np.ndarray:
    """J_z^2 - lambda J_x on the symmetric subspace."""
    system = SpinSystem(n_particles)
    jz = build_collective(system, Axis.Z).matrix
    jx = build_collective(system, Axis.X).matrix
    return jz @ jz - lam * jx


def squeezed_ground_state(params: SqueezingParams) -> QuantumState:
    """Ground state of J_z^2 - lambda J_x.

    The phase is fixed so that the largest-magnitude amplitude is real and
    positive, which keeps lambda scans continuous.
    """
    h = squeezing_hamiltonian(params.n_particles, params.lam)
    _, vecs = eigh(h)
    psi = vecs[:, 0]
    pivot = psi[np.argmax(np.abs(psi))]
    psi = psi * (abs(pivot) / pivot)
    psi = psi / np.linalg.norm(psi)
    return QuantumState(SpinSystem(params.n_particles), psi, {Tag.SYMMETRIC})


def ground_energy(n_particles: int, lam: float) -> float:
    return float(eigh(squeezing_hamiltonian(n_particles, lam))[0][0])


def polarized_x(n_particles: int, basis: Basis = Basis.SYMMETRIC) -> QuantumState:
    """All spins along +x: the top eigenvector of J_x."""
    system = SpinSystem(n_particles, basis)
    if system.basis is Basis.SYMMETRIC:
        k = np.arange(n_particles + 1)
        amp = np.sqrt(np.array([math.comb(n_particles, int(i)) for i in k], dtype=float))
        psi = amp / 2 ** (n_particles / 2)
    else:
        psi = np.full(system.dim, 2 ** (-n_particles / 2))
    return QuantumState(system, psi.astype(complex), {Tag.SYMMETRIC})


def maximally_mixed(system: SpinSystem) -> QuantumState:
    tags = {Tag.PHASE_AVERAGED}
    if system.basis is Basis.SYMMETRIC:
        tags.add(Tag.SYMMETRIC)
    return QuantumState(system, np.eye(system.dim) / system.dim, tags)


def random_pure(system: SpinSystem, rng: np.random.Generator) -> QuantumState:
    """Haar-random pure state on the system's basis."""
    psi = rng.normal(size=system.dim) + 1j * rng.normal(size=system.dim)
    psi /= np.linalg.norm(psi)
    tags = {Tag.SYMMETRIC} if system.basis is Basis.SYMMETRIC else set()
    return QuantumState(system, psi, tags)


def random_mixed(system: SpinSystem, rng: np.random.Generator, rank: int | None = None) -> QuantumState:
    """Random density matrix G G^dagger / Tr, with G of shape (dim, rank)."""
    rank = system.dim if rank is None else rank
    g = rng.normal(size=(system.dim, rank)) + 1j * rng.normal(size=(system.dim, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    tags = {Tag.SYMMETRIC} if system.basis is Basis.SYMMETRIC else set()
    return QuantumState(system, rho, tags)


def phase_average(state: QuantumState) -> QuantumState:
    """Average over all rotations about z.

    The average over phi of exp(-i J_z phi) rho exp(i J_z phi) kills every
    coherence between different J_z eigenvalues, so it is computed exactly by
    masking the density matrix to its J_z blocks.
    """
    m = state.system.jz_diagonal()
    same_block = np.abs(m[:, None] - m[None, :]) < 1e-9
    rho = np.where(same_block, state.density_matrix(), 0.0)
    rho = rho / np.trace(rho).real
    return QuantumState(state.system, rho, state.tags | {Tag.PHASE_AVERAGED})


def phase_average_quadrature(state: QuantumState, n_nodes: int | None = None) -> QuantumState:
    """Trapezoidal rule for the phase average (test oracle for :func:`phase_average`).

    Exact once the node count exceeds the largest J_z eigenvalue difference N.
    """
    n_nodes = 4 * (state.system.n_particles + 1) if n_nodes is None else n_nodes
    rho = np.zeros((state.system.dim,) * 2, dtype=complex)
    for phi in 2 * np.pi * np.arange(n_nodes) / n_nodes:
        rho += rotate(state, Axis.Z, phi).density_matrix()
    return QuantumState(state.system, rho / n_nodes, state.tags)


def symmetrize_z(state: QuantumState) -> QuantumState:
    """Equal mixture of rho and sigma_z^{(x)N} rho sigma_z^{(x)N}."""
    p = state.system.parity_diagonal()
    rho = state.density_matrix()
    flipped = p[:, None] * rho * p[None, :]
    return QuantumState(state.system, (rho + flipped) / 2, state.tags)

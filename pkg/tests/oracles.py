"""Brute-force reference computations used by the tests.

Nothing here goes through the package's own operator builders or rotation
code: operators come from Pauli Kronecker products or the textbook spin-j
matrix elements, and rotations from scipy's matrix exponential.
"""

from functools import lru_cache, reduce

import numpy as np
from scipy.linalg import expm

# Pauli matrices in the single-qubit basis ordered (down, up), so that a set
# bit in the computational index means spin up.
PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
}


@lru_cache(maxsize=None)
def full_collective(n, axis):
    """J_axis on (C^2)^{(x)N} as sum_i sigma_axis^{(i)}/2, first factor most significant.

    Basis index 0 is all spins down.
    """
    eye = np.eye(2)
    total = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        factors = [eye] * n
        factors[i] = PAULI[axis] / 2
        total += reduce(np.kron, factors)
    return total


@lru_cache(maxsize=None)
def spin_j(n, axis):
    """Spin-N/2 matrices in the |j, m> basis ordered m = -j .. j."""
    j = n / 2
    m = np.arange(-j, j + 1)
    jz = np.diag(m).astype(complex)
    # <m+1|J_+|m> = sqrt(j(j+1) - m(m+1))
    jp = np.diag(np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1)), k=-1).astype(complex)
    if axis == "z":
        return jz
    if axis == "x":
        return (jp + jp.conj().T) / 2
    return (jp - jp.conj().T) / 2j


def as_rho(data):
    data = np.asarray(data)
    if data.ndim == 1:
        return np.outer(data, data.conj())
    return data


def rotate_y(rho, jy, theta):
    u = expm(-1j * theta * jy)
    return u @ rho @ u.conj().T


def jz_moments_rotated(rho, jy, jz, theta):
    """(<J_z^2>, <J_z^4>) after rotating rho by exp(-i J_y theta)."""
    r = rotate_y(rho, jy, theta)
    jz2 = jz @ jz
    return np.trace(r @ jz2).real, np.trace(r @ jz2 @ jz2).real


def error_propagation(rho, jy, jz, theta, step=1e-5):
    """(Delta J_z^2)^2 / |d<J_z^2>/dtheta|^2 with a central difference."""
    m2, m4 = jz_moments_rotated(rho, jy, jz, theta)
    plus = jz_moments_rotated(rho, jy, jz, theta + step)[0]
    minus = jz_moments_rotated(rho, jy, jz, theta - step)[0]
    deriv = (plus - minus) / (2 * step)
    return (m4 - m2**2) / deriv**2


def dicke_vector_full(n, k):
    """Equal superposition of all bit strings with k ones (ones are spins up)."""
    psi = np.zeros(2**n)
    for idx in range(2**n):
        if bin(idx).count("1") == k:
            psi[idx] = 1.0
    return psi / np.linalg.norm(psi)


def symmetric_sector_ground_energy(h_full, n):
    """Lowest eigenvalue of h_full restricted to permutation-symmetric vectors."""
    basis = np.column_stack([dicke_vector_full(n, k) for k in range(n + 1)])
    return np.linalg.eigvalsh(basis.T @ h_full @ basis)[0]


def qfi_brute(rho, gen, eps=1e-4):
    """Fisher information from the Bures fidelity between rho(+eps) and rho(-eps).

    F_Q = 8 (1 - sqrt F(rho_{-e}, rho_{+e})) / (2e)^2 to leading order, with
    the root fidelity computed as the trace norm of sqrt(rho1) sqrt(rho2).
    """
    def sqrtm_psd(a):
        w, v = np.linalg.eigh((a + a.conj().T) / 2)
        return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T

    u_plus, u_minus = expm(-1j * eps * gen), expm(1j * eps * gen)
    r1 = u_plus @ rho @ u_plus.conj().T
    r2 = u_minus @ rho @ u_minus.conj().T
    root_fid = np.linalg.svd(sqrtm_psd(r1) @ sqrtm_psd(r2), compute_uv=False).sum()
    return 8 * (1 - root_fid) / (2 * eps) ** 2

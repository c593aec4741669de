"""Sensitivity of rotation-angle estimation from a J_z^2 measurement.

The state is rotated by exp(-i J_y theta) and theta is estimated from
<J_z^2>.  Under the even-symmetry assumption (<J_z^2(theta)> and
<J_z^4(theta)> even in theta) the error-propagation variance depends on six
moments of the initial state only; :class:`MomentSet` holds them.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    AngleSingularity,
    BasisMismatch,
    DegenerateMoments,
    DepthCaveatWarning,
    EvenSymmetryViolation,
    UnphysicalMoments,
)
from .spinops import (
    Axis,
    CollectiveOperator,
    QuantumState,
    SpinSystem,
    Tag,
    anticommutator,
    build_collective,
    eigh,
    expectation,
    product,
    rotate,
)

QFI_EIGEN_CUTOFF = 1e-12
# k/N at or below this counts as k << N for the depth threshold.
SMALL_K_FRACTION = 0.01


@dataclass(frozen=True)
class OddTerms:
    """Moments that multiply odd functions of theta; all vanish under even symmetry."""

    anticomm_zx: float  # <{J_z, J_x}>
    a_term: float  # <{J_z^2, J_x J_z + J_z J_x}>
    b_term: float  # <{J_x^2, J_x J_z + J_z J_x}>

    def is_zero(self, scale2: float, scale4: float, rtol: float = 1e-9) -> bool:
        return (
            abs(self.anticomm_zx) <= rtol * scale2
            and abs(self.a_term) <= rtol * scale4
            and abs(self.b_term) <= rtol * scale4
        )


@dataclass(frozen=True)
class MomentSet:
    n_particles: int
    jx2: float
    jy2: float
    jz2: float
    jx4: float
    jz4: float
    jz_jx2_jz: float
    odd_terms: OddTerms | None = None

    def __post_init__(self):
        for name in ("jx2", "jy2", "jz2", "jx4", "jz4", "jz_jx2_jz"):
            val = float(getattr(self, name))
            object.__setattr__(self, name, val)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
            if val < -1e-9 * max(1.0, self._scale4):
                raise UnphysicalMoments(f"{name} = {val!r} is negative")
        if self.var_jz2 < -1e-9 * max(1.0, self.jz2**2):
            raise UnphysicalMoments("<J_z^4> < <J_z^2>^2")
        if self.var_jx2 < -1e-9 * max(1.0, self.jx2**2):
            raise UnphysicalMoments("<J_x^4> < <J_x^2>^2")

    @property
    def _scale4(self) -> float:
        return (self.n_particles * (self.n_particles + 2) / 4) ** 2

    @property
    def var_jz2(self) -> float:
        """(Delta J_z^2)^2 = <J_z^4> - <J_z^2>^2."""
        return self.jz4 - self.jz2**2

    @property
    def var_jx2(self) -> float:
        return self.jx4 - self.jx2**2

    @property
    def has_odd_terms(self) -> bool:
        if self.odd_terms is None:
            return False
        scale2 = max(1.0, self.jx2 + self.jy2 + self.jz2)
        return not self.odd_terms.is_zero(scale2, scale2**2)

    def even_part(self) -> "MomentSet":
        return MomentSet(self.n_particles, self.jx2, self.jy2, self.jz2,
                         self.jx4, self.jz4, self.jz_jx2_jz)


@dataclass(frozen=True)
class SensitivityResult:
    n_particles: int
    theta_opt: float
    var_opt: float
    inv_var_opt: float
    gain: float
    depth_certified: int
    depth_caveat: bool = False

    def as_dict(self) -> dict:
        return {
            "theta_opt": self.theta_opt,
            "var_opt": self.var_opt,
            "inv_var_opt": self.inv_var_opt,
            "gain": self.gain,
            "depth_certified": self.depth_certified,
            "depth_caveat": self.depth_caveat,
        }


class MomentDynamics(NamedTuple):
    jz2_theta: float
    jz4_theta: float
    derivative_jz2: float


def ideal_dicke_moments(n_particles: int) -> MomentSet:
    """Closed-form moments of |D_N> (J_z eigenstate with eigenvalue 0).

    <J_x^4> = N(N+2)/8 (3N(N+2)/16 - 1/2); the prefactor carries N, without
    which <J_x^4> would fall below <J_x^2>^2.
    """
    n = n_particles
    if n < 2 or n % 2:
        raise ValueError(f"|D_N> needs even N >= 2, got {n}")
    jx2 = n * (n + 2) / 8
    jx4 = n * (n + 2) / 8 * (3 * n * (n + 2) / 16 - 0.5)
    return MomentSet(n, jx2, jx2, 0.0, jx4, 0.0, 0.0, OddTerms(0.0, 0.0, 0.0))


@functools.lru_cache(maxsize=16)
def _moment_operators(system: SpinSystem) -> dict[str, CollectiveOperator]:
    jx = build_collective(system, Axis.X)
    jy = build_collective(system, Axis.Y)
    jz = build_collective(system, Axis.Z)
    jx2 = product(jx, jx)
    jz2 = product(jz, jz)
    zx = anticommutator(jz, jx)
    return {
        "jx2": jx2,
        "jy2": product(jy, jy),
        "jz2": jz2,
        "jx4": product(jx2, jx2),
        "jz4": product(jz2, jz2),
        "jz_jx2_jz": product(jz, jx2, jz),
        "anticomm_zx": zx,
        "a_term": anticommutator(jz2, zx),
        "b_term": anticommutator(jx2, zx),
    }


def moments_of(state: QuantumState) -> MomentSet:
    ops = _moment_operators(state.system)
    vals = {name: expectation(state, op) for name, op in ops.items()}
    odd = OddTerms(vals.pop("anticomm_zx"), vals.pop("a_term"), vals.pop("b_term"))
    return MomentSet(state.system.n_particles, odd_terms=odd, **vals)


def _degeneracy_tol(n_particles: int) -> float:
    return 1e-12 * n_particles**2


def _check_nondegenerate(m: MomentSet) -> None:
    if abs(m.jx2 - m.jz2) < _degeneracy_tol(m.n_particles):
        raise DegenerateMoments(
            f"<J_x^2> = {m.jx2!r} equals <J_z^2> = {m.jz2!r}; d<J_z^2>/dtheta vanishes"
        )


def _clipped_variances(m: MomentSet) -> tuple[float, float]:
    # __post_init__ already rejected clearly negative variances
    return max(m.var_jz2, 0.0), max(m.var_jx2, 0.0)


def numerator_constant(jx2, jy2, jz2, jz_jx2_jz):
    """4<J_x^2> - 3<J_y^2> - 2<J_z^2>(1 + <J_x^2>) + 6<J_z J_x^2 J_z>."""
    return 4 * jx2 - 3 * jy2 - 2 * jz2 * (1 + jx2) + 6 * jz_jx2_jz


def coefficient_identity_rhs(jx2, jy2, jz2, jz_jx2_jz):
    """Value of <{J_z,J_x}^2> + <{J_z^2,J_x^2}> rewritten through commutators."""
    return 4 * jx2 - 3 * jy2 - 2 * jz2 + 6 * jz_jx2_jz


def canonical_angle(theta: float) -> float:
    """Fold theta into [0, pi/2] using period pi and evenness."""
    t = math.fmod(abs(float(theta)), math.pi)
    if t > math.pi / 2:
        t = math.pi - t
    return t


def variance_at(moments: MomentSet, theta: float) -> float:
    """(Delta theta)^2 at rotation angle theta, under the even-symmetry assumption."""
    if moments.has_odd_terms:
        raise EvenSymmetryViolation(
            "odd-in-theta moments are nonzero; symmetrize the state first"
        )
    _check_nondegenerate(moments)
    t = canonical_angle(theta)
    if t == 0.0 or t == math.pi / 2:
        raise AngleSingularity(f"sin(theta)cos(theta) = 0 at theta = {theta!r}")
    vz, vx = _clipped_variances(moments)
    c_term = numerator_constant(moments.jx2, moments.jy2, moments.jz2, moments.jz_jx2_jz)
    den = 4 * (moments.jx2 - moments.jz2) ** 2

    tan2 = math.tan(t) ** 2
    # (Delta J_x^2)^2 f(theta) written without dividing by (Delta J_x^2)^2
    closed = (vz / tan2 + vx * tan2 + c_term) / den

    c2, s2 = math.cos(t) ** 2, math.sin(t) ** 2
    c_frac = (
        coefficient_identity_rhs(moments.jx2, moments.jy2, moments.jz2, moments.jz_jx2_jz)
        - 2 * moments.jx2 * moments.jz2
    )
    fraction = (vz * c2 * c2 + vx * s2 * s2 + c_frac * c2 * s2) / (den * c2 * s2)

    scale = (abs(vz / tan2) + abs(vx * tan2) + abs(c_term)) / den
    if abs(closed - fraction) > 1e-10 * max(scale, abs(closed)):
        raise ArithmeticError(
            f"closed form {closed!r} and fraction form {fraction!r} disagree"
        )
    return closed


def optimal_angle(moments: MomentSet) -> float:
    """theta_opt = arctan(((Delta J_z^2)^2 / (Delta J_x^2)^2)^(1/4))."""
    vz, vx = _clipped_variances(moments)
    if vz == 0.0:
        return 0.0
    if vx <= 1e-12 * max(1.0, moments.jx2**2):
        raise DegenerateMoments("(Delta J_x^2)^2 vanishes; optimal angle undefined")
    return math.atan((vz / vx) ** 0.25)


def depth_caveat(depth: int, n_particles: int) -> bool:
    """True when the threshold gain > k (k = depth - 1) is only approximate."""
    k = depth - 1
    if k <= 1:
        return False
    return n_particles % k != 0 and k > SMALL_K_FRACTION * n_particles


def depth_from_gain(gain: float, n_particles: int, warn: bool = True) -> int:
    """Entanglement depth k+1 certified by gain > k (0 when gain <= 1).

    Gains within 1e-9 relative of an integer are treated as that integer, so
    an ideal-state gain of exactly 51 certifies depth 51, not 52.
    """
    gain = float(gain)
    if math.isnan(gain) or gain < 0:
        raise ValueError(f"gain must be nonnegative, got {gain!r}")
    if math.isinf(gain):
        return n_particles
    nearest = round(gain)
    if abs(gain - nearest) <= 1e-9 * gain:
        gain = float(nearest)
    if gain <= 1:
        return 0
    # k = depth - 1 is the largest integer strictly below gain
    depth = int(gain) if gain.is_integer() else math.ceil(gain)
    depth = min(depth, n_particles)
    if warn and depth_caveat(depth, n_particles):
        warnings.warn(
            f"k = {depth - 1} neither divides N = {n_particles} nor is << N; "
            "the depth threshold is approximate",
            DepthCaveatWarning,
            stacklevel=2,
        )
    return depth


def sensitivity_from_variance(var_opt: float, theta_opt: float, n_particles: int) -> SensitivityResult:
    inv = 1.0 / var_opt
    gain = inv / n_particles
    depth = depth_from_gain(gain, n_particles, warn=False)
    return SensitivityResult(
        n_particles=n_particles,
        theta_opt=theta_opt,
        var_opt=var_opt,
        inv_var_opt=inv,
        gain=gain,
        depth_certified=depth,
        depth_caveat=depth_caveat(depth, n_particles),
    )


def optimal_variance(moments: MomentSet) -> SensitivityResult:
    """Minimal (Delta theta)^2 over theta, in closed form.

    Only even moments enter, and they are unchanged by sigma_z
    symmetrization, so for a state with nonzero odd terms the result is the
    sensitivity of its symmetrized version.
    """
    _check_nondegenerate(moments)
    theta = optimal_angle(moments)
    vz, vx = _clipped_variances(moments)
    c_term = numerator_constant(moments.jx2, moments.jy2, moments.jz2, moments.jz_jx2_jz)
    den = 4 * (moments.jx2 - moments.jz2) ** 2
    var = (2 * math.sqrt(vz * vx) + c_term) / den
    if not var > 0:
        raise UnphysicalMoments(f"optimal variance {var!r} is not positive")

    even = moments.even_part()
    if 0.0 < theta < math.pi / 2:
        check = variance_at(even, theta)
    else:
        check = c_term / den  # theta -> 0+ limit with (Delta J_z^2)^2 = 0
    if abs(check - var) > 1e-10 * abs(var):
        raise ArithmeticError(f"optimal variance {var!r} != variance at theta_opt {check!r}")
    return sensitivity_from_variance(var, theta, moments.n_particles)


def moment_dynamics(moments: MomentSet, theta: float) -> MomentDynamics:
    """<J_z^2(theta)>, <J_z^4(theta)> and d<J_z^2>/dtheta including odd terms.

    Without odd terms this is the even-symmetric form.
    """
    c, s = math.cos(theta), math.sin(theta)
    odd = moments.odd_terms or OddTerms(0.0, 0.0, 0.0)
    k = odd.anticomm_zx
    coeff = coefficient_identity_rhs(moments.jx2, moments.jy2, moments.jz2, moments.jz_jx2_jz)
    jz2 = moments.jz2 * c * c + moments.jx2 * s * s - k * s * c
    # a_term carries three J_z factors, hence cos^3 sin; b_term three J_x factors
    jz4 = (
        moments.jz4 * c**4
        + moments.jx4 * s**4
        + coeff * c * c * s * s
        - odd.a_term * c**3 * s
        - odd.b_term * c * s**3
    )
    deriv = 2 * (moments.jx2 - moments.jz2) * c * s - k * (c * c - s * s)
    return MomentDynamics(jz2, jz4, deriv)


def _jz_moments_after_rotation(state: QuantumState, theta: float) -> tuple[float, float]:
    ops = _moment_operators(state.system)
    rotated = rotate(state, Axis.Y, theta)
    return expectation(rotated, ops["jz2"]), expectation(rotated, ops["jz4"])


def check_even_symmetry(state: QuantumState, theta_samples, tol: float = 1e-9) -> bool:
    """True iff <J_z^m(theta)> = <J_z^m(-theta)> for m = 2, 4 at every sample."""
    samples = list(theta_samples)
    if not samples:
        raise ValueError("theta_samples must be nonempty")
    ok = True
    for theta in samples:
        plus = _jz_moments_after_rotation(state, theta)
        minus = _jz_moments_after_rotation(state, -theta)
        for a, b in zip(plus, minus):
            if abs(a - b) > tol * max(1.0, abs(a), abs(b)):
                ok = False
    if not ok and Tag.PHASE_AVERAGED in state.tags:
        raise RuntimeError("phase-averaged state violates even symmetry")
    return ok


def qfi(state: QuantumState, generator: CollectiveOperator) -> float:
    """Quantum Fisher information of the state for rotations generated by ``generator``."""
    if generator.system != state.system:
        raise BasisMismatch("state and generator belong to different systems")
    g = generator.matrix
    if state.is_pure_vector:
        psi = state.data
        gpsi = g @ psi
        return float(4 * (np.vdot(gpsi, gpsi).real - np.vdot(psi, gpsi).real ** 2))
    lam, vecs = eigh(state.data)
    g_eig = vecs.conj().T @ g @ vecs
    lsum = lam[:, None] + lam[None, :]
    ldiff2 = (lam[:, None] - lam[None, :]) ** 2
    keep = lsum > QFI_EIGEN_CUTOFF
    return float(2 * np.sum(ldiff2[keep] / lsum[keep] * np.abs(g_eig[keep]) ** 2))

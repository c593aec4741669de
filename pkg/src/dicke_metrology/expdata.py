"""Sensitivity bounds from measured collective-spin moments.

For phase-averaged states <J_x^m> = <J_y^m>, and <J_z J_x^2 J_z> is bounded
from above by N(N+2)/8 <J_z^2> - <J_z^4>/2 (with equality for symmetric
states).  Substituting both into the optimal-variance formula gives an upper
bound on (Delta theta)^2 that needs only four measured moments.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import (
    AngleSingularity,
    DegenerateMoments,
    MomentsFileError,
    TooFewValidResamples,
    UnphysicalMoments,
)
from .metrology import (
    MomentSet,
    SensitivityResult,
    depth_from_gain,
    sensitivity_from_variance,
    variance_at,
)

GAUSSIAN_BETA = 3.0
UNDEFINED_DEPTH = -1


@dataclass(frozen=True)
class MeasuredMoments:
    n_particles: int
    jz2: float
    jz2_err: float
    jz4: float
    jz4_err: float
    jx2: float
    jx2_err: float
    jx4: float
    jx4_err: float

    def __post_init__(self):
        if isinstance(self.n_particles, bool) or int(self.n_particles) != self.n_particles \
                or self.n_particles < 1:
            raise ValueError(f"N must be a positive integer, got {self.n_particles!r}")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        for f in fields(self)[1:]:
            val = float(getattr(self, f.name))
            if not math.isfinite(val) or val < 0:
                raise ValueError(f"{f.name} must be finite and nonnegative, got {val!r}")
            object.__setattr__(self, f.name, val)
        combined = math.hypot(self.jz4_err, 2 * self.jz2 * self.jz2_err)
        if self.jz4 < self.jz2**2 - 3 * combined:
            warnings.warn(
                "<J_z^4> is more than 3 sigma below <J_z^2>^2", RuntimeWarning, stacklevel=2
            )

    def central(self) -> tuple[float, float, float, float]:
        return self.jz2, self.jz4, self.jx2, self.jx4

    def errors(self) -> tuple[float, float, float, float]:
        return self.jz2_err, self.jz4_err, self.jx2_err, self.jx4_err


# Measured values for N = 7900 atoms in a noisy twin-Fock (Dicke) state.
MEASURED_N7900 = MeasuredMoments(
    n_particles=7900,
    jz2=112.0, jz2_err=31.0,
    jz4=40e3, jz4_err=22e3,
    jx2=6e6, jx2_err=0.6e6,
    jx4=6.2e13, jx4_err=0.8e13,
)

FILE_KEYS = ("N", "jz2", "jz2_err", "jz4", "jz4_err", "jx2", "jx2_err", "jx4", "jx4_err")


def parse_measured_moments(text: str, source: str | None = None) -> MeasuredMoments:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MomentsFileError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in FILE_KEYS:
            raise MomentsFileError(f"unknown key {key!r}", lineno, source)
        if key in values:
            raise MomentsFileError(f"duplicate key {key!r}", lineno, source)
        try:
            values[key] = int(value) if key == "N" else float(value)
        except ValueError:
            raise MomentsFileError(f"cannot parse value {value!r} for {key}", lineno, source) from None
    missing = [k for k in FILE_KEYS if k not in values]
    if missing:
        raise MomentsFileError(f"missing keys: {', '.join(missing)}", None, source)
    try:
        return MeasuredMoments(values.pop("N"), **values)
    except ValueError as exc:
        raise MomentsFileError(str(exc), None, source) from exc


def read_measured_moments(path: str | Path) -> MeasuredMoments:
    path = Path(path)
    return parse_measured_moments(path.read_text(encoding="utf-8"), str(path))


def format_measured_moments(m: MeasuredMoments) -> str:
    lines = ["# measured collective-spin moments", f"N = {m.n_particles}"]
    for key in FILE_KEYS[1:]:
        lines.append(f"{key} = {getattr(m, key)!r}")
    return "\n".join(lines) + "\n"


def write_measured_moments(m: MeasuredMoments, path: str | Path) -> None:
    Path(path).write_text(format_measured_moments(m), encoding="utf-8")


def z_bound(jz2: float, jz4: float, n_particles: int) -> float:
    """Z = N(N+2)/8 <J_z^2> - <J_z^4>/2, a bound on <J_z J_x^2 J_z>.

    Valid for states invariant under rotations about z, where <J_z J_x^2 J_z>
    equals <J_z J_y^2 J_z>; exact when such a state is also symmetric.
    """
    z = n_particles * (n_particles + 2) / 8 * jz2 - 0.5 * jz4
    if z < 0:
        warnings.warn(f"negative Z bound {z!r}: moments are inconsistent", RuntimeWarning,
                      stacklevel=2)
    return z


def approx_jx4(jx2: float, n_particles: int) -> float:
    """<J_x^4> <= (N^2/4) <J_x^2>, since the largest eigenvalue of J_x^2 is N^2/4."""
    return n_particles**2 / 4 * jx2


def approx_jz4(jz2: float, beta: float = GAUSSIAN_BETA) -> float:
    """Gaussian-assumed estimate beta <J_z^2>^2; not a rigorous bound."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    return beta * jz2**2


def _bound_arrays(jz2, jz4, jx2, jx4, n_particles: int):
    """Vectorized bound: returns (variance, theta_opt, reason) with NaN where undefined.

    ``reason`` is 0 for valid points, 1 for a degenerate denominator, 2 for
    unphysical moments (negative variance of J_z^2 or J_x^2, or nonpositive
    numerator).
    """
    jz2, jz4, jx2, jx4 = np.broadcast_arrays(*(np.asarray(a, dtype=float)
                                               for a in (jz2, jz4, jx2, jx4)))
    vz = jz4 - jz2**2
    vx = jx4 - jx2**2
    z = n_particles * (n_particles + 2) / 8 * jz2 - 0.5 * jz4
    with np.errstate(invalid="ignore", divide="ignore"):
        num = 2 * np.sqrt(np.clip(vz * vx, 0, None)) + jx2 - 2 * jz2 * (1 + jx2) + 6 * z
        den = 4 * (jx2 - jz2) ** 2
        var = num / den
        theta = np.where(vz == 0, 0.0, np.arctan((vz / vx) ** 0.25))
    reason = np.zeros(var.shape, dtype=np.int8)
    unphysical = (vz < 0) | (vx < 0) | ~(num > 0) | ((vx == 0) & (vz > 0))
    reason[unphysical] = 2
    reason[np.abs(jx2 - jz2) < 1e-12 * n_particles**2] = 1
    var = np.where(reason == 0, var, np.nan)
    theta = np.where(reason == 0, theta, np.nan)
    return var, theta, reason


def bound_from_values(jz2: float, jz4: float, jx2: float, jx4: float,
                      n_particles: int) -> SensitivityResult:
    var, theta, reason = _bound_arrays(jz2, jz4, jx2, jx4, n_particles)
    if reason == 1:
        raise DegenerateMoments(f"<J_x^2> = {jx2!r} equals <J_z^2> = {jz2!r}")
    if reason == 2:
        raise UnphysicalMoments("moments give a negative variance or nonpositive bound")
    return sensitivity_from_variance(float(var), float(theta), n_particles)


def experimental_bound(m: MeasuredMoments) -> SensitivityResult:
    """Upper bound on (Delta theta)^2_opt (lower bound on the gain) from measured moments."""
    return bound_from_values(m.jz2, m.jz4, m.jx2, m.jx4, m.n_particles)


def variance_curve(m: MeasuredMoments, theta) -> np.ndarray:
    """(Delta theta)^2 versus theta with the same substitutions as :func:`experimental_bound`.

    Angles where sin(theta)cos(theta) vanishes map to NaN.
    """
    n = m.n_particles
    moments = MomentSet(n, m.jx2, m.jx2, m.jz2, m.jx4, m.jz4, z_bound(m.jz2, m.jz4, n))
    out = []
    for t in np.atleast_1d(theta):
        try:
            out.append(variance_at(moments, float(t)))
        except AngleSingularity:
            out.append(np.nan)
    return np.asarray(out)


class Distribution(enum.Enum):
    INDEPENDENT_GAUSSIAN = "independent-gaussian"


def _independent_gaussian(m: MeasuredMoments, n: int, rng: np.random.Generator) -> np.ndarray:
    draws = rng.normal(m.central(), m.errors(), size=(n, 4))
    return np.clip(draws, 0.0, None)


_SAMPLERS = {Distribution.INDEPENDENT_GAUSSIAN: _independent_gaussian}


@dataclass(frozen=True)
class BootstrapConfig:
    n_resamples: int = 10_000
    seed: int = 0
    distribution: Distribution = Distribution.INDEPENDENT_GAUSSIAN

    def __post_init__(self):
        if self.n_resamples < 100:
            raise ValueError("n_resamples must be at least 100")
        object.__setattr__(self, "distribution", Distribution(self.distribution))


@dataclass(frozen=True)
class BootstrapResult:
    mean_gain: float
    std_gain: float
    n_valid: int
    n_discarded: int
    median_gain: float
    q16_gain: float
    q84_gain: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def bootstrap_gain(m: MeasuredMoments, cfg: BootstrapConfig = BootstrapConfig()) -> BootstrapResult:
    """Propagate measurement uncertainties into the gain by resampling the moments.

    Resamples that make the bound undefined (negative variance, degenerate
    denominator, nonpositive numerator) are discarded and counted.
    """
    rng = np.random.default_rng(cfg.seed)
    draws = _SAMPLERS[cfg.distribution](m, cfg.n_resamples, rng)
    var, _, reason = _bound_arrays(*draws.T, m.n_particles)
    valid = reason == 0
    n_valid = int(valid.sum())
    n_discarded = cfg.n_resamples - n_valid
    if n_discarded * 2 > cfg.n_resamples:
        raise TooFewValidResamples(
            f"{n_discarded} of {cfg.n_resamples} resamples discarded"
        )
    gains = 1.0 / (var[valid] * m.n_particles)
    q16, q50, q84 = np.percentile(gains, [15.865, 50.0, 84.135])
    # shifting by one sample keeps a degenerate distribution at std exactly 0
    shifted = gains - gains[0]
    return BootstrapResult(
        mean_gain=float(gains[0] + shifted.mean()),
        std_gain=float(shifted.std(ddof=1)),
        n_valid=n_valid,
        n_discarded=n_discarded,
        median_gain=float(q50),
        q16_gain=float(q16),
        q84_gain=float(q84),
    )


@dataclass(frozen=True)
class RegionMapSpec:
    n_particles: int
    jx2_grid: np.ndarray  # <J_x^2> / J_max^2, in (0, 1]
    jz2_grid: np.ndarray  # <J_z^2>
    beta: float = GAUSSIAN_BETA

    def __post_init__(self):
        jx = np.asarray(self.jx2_grid, dtype=float)
        jz = np.asarray(self.jz2_grid, dtype=float)
        for name, g in (("jx2_grid", jx), ("jz2_grid", jz)):
            if g.ndim != 1 or g.size == 0:
                raise ValueError(f"{name} must be a nonempty 1-D grid")
            if np.any(np.diff(g) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        if jx[0] <= 0 or jx[-1] > 1:
            raise ValueError("jx2_grid values must lie in (0, 1]")
        if jz[0] < 0:
            raise ValueError("jz2_grid values must be nonnegative")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        object.__setattr__(self, "jx2_grid", jx)
        object.__setattr__(self, "jz2_grid", jz)

    @property
    def jmax2(self) -> float:
        """<J_x^2> of the ideal Dicke state, N(N+2)/8."""
        return self.n_particles * (self.n_particles + 2) / 8


def gain_lower_bound(jx2, jz2, n_particles: int, beta: float = GAUSSIAN_BETA) -> np.ndarray:
    """Gain from second moments only: <J_x^4> bounded, <J_z^4> Gaussian-assumed (NaN if undefined)."""
    jx2 = np.asarray(jx2, dtype=float)
    jz2 = np.asarray(jz2, dtype=float)
    var, _, _ = _bound_arrays(jz2, beta * jz2**2, jx2, approx_jx4(jx2, n_particles), n_particles)
    return 1.0 / (var * n_particles)


def _depth_labels(gain: np.ndarray, n_particles: int) -> np.ndarray:
    labels = np.full(gain.shape, UNDEFINED_DEPTH, dtype=np.int64)
    for idx in zip(*np.nonzero(np.isfinite(gain))):
        labels[idx] = depth_from_gain(float(gain[idx]), n_particles, warn=False)
    return labels


@dataclass(frozen=True)
class RegionMap:
    spec: RegionMapSpec
    gain: np.ndarray  # shape (len(jz2_grid), len(jx2_grid)), NaN where undefined
    depth: np.ndarray  # same shape, UNDEFINED_DEPTH where undefined

    def rows(self):
        for i, jz2 in enumerate(self.spec.jz2_grid):
            for j, frac in enumerate(self.spec.jx2_grid):
                yield float(frac), float(jz2), float(self.gain[i, j]), int(self.depth[i, j])

    def cross_section(self, jx2_over_jmax2: float):
        """Gain and depth along <J_z^2> at a fixed <J_x^2> / J_max^2."""
        jx2 = jx2_over_jmax2 * self.spec.jmax2
        gain = gain_lower_bound(jx2, self.spec.jz2_grid, self.spec.n_particles, self.spec.beta)
        return self.spec.jz2_grid, gain, _depth_labels(gain, self.spec.n_particles)


def region_map(spec: RegionMapSpec) -> RegionMap:
    jx2 = spec.jx2_grid[None, :] * spec.jmax2
    jz2 = spec.jz2_grid[:, None]
    gain = gain_lower_bound(jx2, jz2, spec.n_particles, spec.beta)
    return RegionMap(spec, gain, _depth_labels(gain, spec.n_particles))

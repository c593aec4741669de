"""Metrological usefulness of noisy Dicke states from collective-spin moments."""

__version__ = "0.1.0"

from .errors import (
    AngleSingularity,
    BasisMismatch,
    DegenerateMoments,
    DepthCaveatWarning,
    DickeMetrologyError,
    DimensionError,
    EigensolverError,
    EvenSymmetryViolation,
    MomentsFileError,
    TooFewValidResamples,
    UnphysicalMoments,
)
from .spinops import (
    Axis,
    Basis,
    CollectiveOperator,
    QuantumState,
    SpinSystem,
    Tag,
    build_collective,
    eigh,
    expectation,
    rotate,
)
from .states import (
    SqueezingParams,
    ThermalDickeParams,
    dicke,
    phase_average,
    squeezed_ground_state,
    symmetrize_z,
    thermal_dicke,
)
from .metrology import (
    MomentSet,
    OddTerms,
    SensitivityResult,
    check_even_symmetry,
    depth_from_gain,
    moment_dynamics,
    moments_of,
    optimal_angle,
    optimal_variance,
    qfi,
    variance_at,
)
from .expdata import (
    BootstrapConfig,
    MeasuredMoments,
    RegionMapSpec,
    approx_jx4,
    approx_jz4,
    bootstrap_gain,
    experimental_bound,
    read_measured_moments,
    region_map,
    z_bound,
)

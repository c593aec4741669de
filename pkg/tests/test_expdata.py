import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from dicke_metrology import (
    Basis,
    DegenerateMoments,
    MomentsFileError,
    SpinSystem,
    TooFewValidResamples,
)
from dicke_metrology.expdata import (
    MEASURED_N7900,
    UNDEFINED_DEPTH,
    BootstrapConfig,
    MeasuredMoments,
    RegionMapSpec,
    approx_jx4,
    approx_jz4,
    bootstrap_gain,
    bound_from_values,
    experimental_bound,
    format_measured_moments,
    gain_lower_bound,
    parse_measured_moments,
    read_measured_moments,
    region_map,
    variance_curve,
    write_measured_moments,
    z_bound,
)
from dicke_metrology.metrology import ideal_dicke_moments, moments_of, optimal_variance
from dicke_metrology.states import (
    ThermalDickeParams,
    phase_average,
    random_mixed,
    random_pure,
    thermal_dicke,
)

N = 7900
JMAX2 = N * (N + 2) / 8


def _zero_error(m):
    return replace(m, jz2_err=0.0, jz4_err=0.0, jx2_err=0.0, jx4_err=0.0)


# --- file format ------------------------------------------------------------------

def test_round_trip(tmp_path):
    path = tmp_path / "m.txt"
    write_measured_moments(MEASURED_N7900, path)
    assert read_measured_moments(path) == MEASURED_N7900


@settings(max_examples=50)
@given(values=st.lists(st.floats(0, 1e15, allow_nan=False), min_size=8, max_size=8),
       n=st.integers(1, 10**6))
def test_round_trip_exact(values, n):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        m = MeasuredMoments(n, *values)
        assert parse_measured_moments(format_measured_moments(m)) == m


def test_parse_comments_and_scientific_notation():
    text = """
    # a comment
    N = 7900
    jz2 = 112   # trailing comment
    jz2_err = 31
    jz4 = 4.0e4
    jz4_err = 2.2E4
    jx2 = 6e6
    jx2_err = 0.6e6
    jx4 = 6.2e13
    jx4_err = 0.8e13
    """
    assert parse_measured_moments(text) == MEASURED_N7900


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("N = 4\njz2 = abc\n", 2, "cannot parse"),
        ("N = 4\nfoo = 1\n", 2, "unknown key"),
        ("N = 4\nN = 5\n", 2, "duplicate"),
        ("N = 4\njz2 1\n", 2, "key = value"),
    ],
)
def test_parse_errors_report_line(text, line, fragment):
    with pytest.raises(MomentsFileError) as info:
        parse_measured_moments(text, "moments.txt")
    assert info.value.lineno == line
    assert f"moments.txt:{line}:" in str(info.value)
    assert fragment in str(info.value)


def test_parse_missing_and_negative():
    with pytest.raises(MomentsFileError, match="missing keys"):
        parse_measured_moments("N = 4\n")
    text = format_measured_moments(MEASURED_N7900).replace("jz2 = 112.0", "jz2 = -1")
    with pytest.raises(MomentsFileError, match="nonnegative"):
        parse_measured_moments(text)


def test_measured_moments_soft_warning():
    with pytest.warns(RuntimeWarning):
        MeasuredMoments(100, 100.0, 1.0, 10.0, 1.0, 1e3, 1.0, 1e6, 1.0)


# --- Z bound and approximations --------------------------------------------------

def test_z_bound_examples():
    assert z_bound(0, 0, 50) == 0
    assert z_bound(112, 40000, N) == pytest.approx(N * (N + 2) / 8 * 112 - 20000)
    assert z_bound(112, 40000, N) == pytest.approx(8.741e8, rel=1e-3)


@pytest.mark.parametrize("n", range(2, 11))
def test_z_bound_exact_on_symmetric_states(n):
    rng = np.random.default_rng(100 + n)
    for i in range(100):
        system = SpinSystem(n)
        state = random_pure(system, rng) if i % 2 else random_mixed(system, rng, rank=3)
        m = moments_of(phase_average(state))
        assert z_bound(m.jz2, m.jz4, n) == pytest.approx(m.jz_jx2_jz, abs=1e-9 * max(1, n**4))


def test_z_bound_needs_phase_averaging():
    # without J_x <-> J_y symmetry Z can fall below <J_z J_x^2 J_z>
    m = moments_of(random_pure(SpinSystem(4), np.random.default_rng(1)))
    assert z_bound(m.jz2, m.jz4, 4) < m.jz_jx2_jz - 0.5


def test_z_bound_is_upper_bound_in_full_space(rng):
    n = 4
    jx, jz = oracles.full_collective(n, "x"), oracles.full_collective(n, "z")
    target = jz @ jx @ jx @ jz
    jz2 = jz @ jz
    for _ in range(50):
        state = phase_average(random_mixed(SpinSystem(n, Basis.FULL), rng, rank=2))
        rho = state.density_matrix()
        exact = np.trace(rho @ target).real
        bound = z_bound(np.trace(rho @ jz2).real, np.trace(rho @ jz2 @ jz2).real, n)
        assert exact <= bound + 1e-9


def test_approx_jx4_examples():
    assert approx_jx4(6e6, N) == pytest.approx(N**2 / 4 * 6e6)
    assert approx_jx4(6e6, N) >= MEASURED_N7900.jx4
    assert approx_jx4(0, 10) == 0


@pytest.mark.parametrize("n", [2, 5, 10])
def test_approx_jx4_bounds_exact_states(n, rng):
    for basis in (Basis.SYMMETRIC, Basis.FULL):
        for _ in range(20):
            m = moments_of(random_mixed(SpinSystem(n, basis), rng, rank=2))
            assert m.jx4 <= approx_jx4(m.jx2, n) + 1e-9


def test_approx_jz4_examples():
    assert approx_jz4(112, 3) == pytest.approx(37632)
    assert approx_jz4(0, 7.0) == 0
    with pytest.raises(ValueError):
        approx_jz4(1.0, 0.0)


def test_gaussian_fourth_moment_ratio():
    samples = np.random.default_rng(5).normal(0.0, 5.0, size=1_000_000)
    ratio = np.mean(samples**4) / np.mean(samples**2) ** 2
    assert ratio == pytest.approx(3.0, rel=0.02)
    assert approx_jz4(np.mean(samples**2)) == pytest.approx(np.mean(samples**4), rel=0.02)


# --- bound -------------------------------------------------------------------------

def test_experimental_bound_central_values():
    res = experimental_bound(MEASURED_N7900)
    assert res.gain == pytest.approx(3.3, abs=0.05)
    assert res.theta_opt == pytest.approx(0.0057, abs=2e-4)
    assert res.depth_certified == 4


def test_experimental_bound_ideal_dicke_corner():
    d = ideal_dicke_moments(N)
    m = MeasuredMoments(N, 0.0, 0.0, 0.0, 0.0, d.jx2, 0.0, d.jx4, 0.0)
    assert experimental_bound(m).gain == pytest.approx((N + 2) / 2, rel=1e-10)


def test_experimental_bound_degenerate():
    m = MeasuredMoments(10, 5.0, 0.0, 30.0, 0.0, 5.0, 0.0, 30.0, 0.0)
    with pytest.raises(DegenerateMoments):
        experimental_bound(m)


@pytest.mark.parametrize("n", [4, 6, 9])
def test_experimental_bound_equals_optimal_variance(n, rng):
    states = [phase_average(random_mixed(SpinSystem(n), rng, rank=2)) for _ in range(5)]
    if n % 2 == 0:
        states.append(thermal_dicke(ThermalDickeParams(n, 1.3)))
    for state in states:
        m = moments_of(state)
        exp = bound_from_values(m.jz2, m.jz4, m.jx2, m.jx4, n)
        ref = optimal_variance(m)
        assert exp.var_opt == pytest.approx(ref.var_opt, rel=1e-10)


@settings(max_examples=100)
@given(
    jz2=st.floats(0, 400), jz4_excess=st.floats(0, 1e5),
    frac=st.floats(0.3, 1.0), jx4_frac=st.floats(1e-3, 1),
)
def test_approx_jx4_never_increases_gain(jz2, jz4_excess, frac, jx4_frac):
    jx2 = frac * JMAX2
    jz4 = jz2**2 + jz4_excess
    # jx4 = jx2^2 exactly would put theta_opt at pi/2, where the bound is undefined
    lo, hi = jx2**2, approx_jx4(jx2, N)
    jx4 = lo + jx4_frac * (hi - lo)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        exact = bound_from_values(jz2, jz4, jx2, jx4, N).gain
        approx = bound_from_values(jz2, jz4, jx2, hi, N).gain
    assert approx <= exact + 1e-12


def test_variance_curve_peak_and_singular_points():
    thetas = np.logspace(-4, math.log10(0.05), 2000)
    var = variance_curve(MEASURED_N7900, thetas)
    gain = 1 / (var * N)
    assert thetas[np.argmax(gain)] == pytest.approx(0.0057, abs=2e-4)
    assert gain.max() == pytest.approx(3.3, abs=0.05)
    assert np.isnan(variance_curve(MEASURED_N7900, [0.0, math.pi / 2])).all()


# --- bootstrap -----------------------------------------------------------------------

def test_bootstrap_band_and_determinism():
    a = bootstrap_gain(MEASURED_N7900, BootstrapConfig(10_000, seed=0))
    b = bootstrap_gain(MEASURED_N7900, BootstrapConfig(10_000, seed=0))
    assert a == b
    assert 3.2 <= a.mean_gain <= 4.3
    assert 1.0 <= a.std_gain <= 2.0
    assert a.n_valid + a.n_discarded == 10_000
    c = bootstrap_gain(MEASURED_N7900, BootstrapConfig(10_000, seed=1))
    assert c.mean_gain != a.mean_gain


def test_bootstrap_zero_uncertainty():
    res = bootstrap_gain(_zero_error(MEASURED_N7900), BootstrapConfig(200))
    assert res.std_gain == 0
    assert res.mean_gain == pytest.approx(experimental_bound(MEASURED_N7900).gain, rel=1e-14)
    assert res.n_discarded == 0


def test_bootstrap_mean_converges():
    small = bootstrap_gain(MEASURED_N7900, BootstrapConfig(10_000, seed=3))
    large = bootstrap_gain(MEASURED_N7900, BootstrapConfig(100_000, seed=4))
    assert abs(small.mean_gain - large.mean_gain) < 0.05


def test_bootstrap_too_few_valid():
    # jz4 centred on jz2^2: about half of the resamples have negative variance
    m = MeasuredMoments(100, 10.0, 3.0, 100.0, 50.0, 1000.0, 1.0, 2e6, 1.0)
    with pytest.raises(TooFewValidResamples):
        bootstrap_gain(m, BootstrapConfig(1000))


def test_bootstrap_config_validation():
    with pytest.raises(ValueError):
        BootstrapConfig(n_resamples=99)


# --- region map --------------------------------------------------------------------

def _spec(**kw):
    args = dict(n_particles=N, jx2_grid=np.linspace(0.005, 1, 200),
                jz2_grid=np.linspace(0, 400, 81))
    args.update(kw)
    return RegionMapSpec(**args)


def test_region_map_experimental_point_entangled():
    g = gain_lower_bound(6e6, 112, N)
    assert g > 1
    assert 6e6 / JMAX2 == pytest.approx(0.769, abs=1e-3)


def test_region_map_corner():
    rmap = region_map(_spec())
    assert rmap.gain[0, -1] == pytest.approx((N + 2) / 2, rel=1e-10)
    assert rmap.depth[0, -1] == depth_of((N + 2) / 2)


def depth_of(gain):
    from dicke_metrology.metrology import depth_from_gain

    return depth_from_gain(gain, N, warn=False)


def test_region_map_degenerate_cells_are_undefined():
    n = 100
    jmax2 = n * (n + 2) / 8
    spec = RegionMapSpec(n, np.array([0.5, 1.0]), np.array([0.0, 0.5 * jmax2]))
    rmap = region_map(spec)
    assert np.isnan(rmap.gain[1, 0])
    assert rmap.depth[1, 0] == UNDEFINED_DEPTH
    assert np.isfinite(rmap.gain[0, 0])


def test_region_map_shape_and_monotonicity():
    rmap = region_map(_spec())
    assert rmap.gain.shape == (81, 200)
    finite = np.where(np.isfinite(rmap.gain), rmap.gain, -np.inf)
    # more z noise never helps; a larger <J_x^2> never hurts
    assert np.all(np.diff(finite[:, -1]) <= 1e-9)
    assert np.all(np.diff(finite[0, :]) >= -1e-9)
    rows = list(rmap.rows())
    assert len(rows) == 81 * 200


def test_region_map_cross_section_matches_grid():
    rmap = region_map(_spec())
    frac = rmap.spec.jx2_grid[150]
    jz2, gain, depth = rmap.cross_section(frac)
    assert np.allclose(gain, rmap.gain[:, 150], equal_nan=True)
    assert np.array_equal(depth, rmap.depth[:, 150])


def test_region_map_spec_validation():
    with pytest.raises(ValueError):
        _spec(jx2_grid=np.array([0.0, 0.5]))
    with pytest.raises(ValueError):
        _spec(jx2_grid=np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        _spec(jz2_grid=np.array([]))
    with pytest.raises(ValueError):
        _spec(beta=0.0)
    assert _spec().jmax2 == JMAX2

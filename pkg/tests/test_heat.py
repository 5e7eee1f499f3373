import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from strip_control.domain import BoundaryCondition, StripDomain, full_lattice
from strip_control.heat import (Cube, HeatError, HeatState, KernelParams, cube_for, cube_series_tail,
                                dissipation_check, evolve, gaussian_sandwich_check, interval_kernel,
                                kernel_cube_series, kernel_strip)
from strip_control.spectral import spectral_projection

DIR = StripDomain(2, 0.5, "dirichlet", 4.0, 6, 16, 1 / 16)
NEU = StripDomain(2, 0.5, "neumann", 4.0, 6, 16, 1 / 16)


def single_mode(dom, n, m, amp=1.0):
    lat = full_lattice(dom)
    c = np.zeros(len(lat))
    idx = lat.index_of()[((n,), m)]
    c[idx] = amp
    return HeatState(lat, c), lat.energies[idx]


def test_evolve_zero_time_is_identity():
    g = HeatState.random(DIR, np.random.default_rng(0))
    np.testing.assert_array_equal(evolve(g, 0.0).coefficients, g.coefficients)


def test_unit_energy_mode_halves_at_ln2():
    g, mu = single_mode(DIR, 1, 0)
    assert mu == pytest.approx(1.0)
    out = evolve(g, math.log(2))
    assert out.norm() == pytest.approx(0.5, rel=1e-14)
    assert out.time_stamp == pytest.approx(math.log(2))


@given(st.floats(0, 3), st.floats(0, 3), st.integers(0, 10 ** 6))
def test_semigroup_law_and_contraction(t1, t2, seed):
    g = HeatState.random(DIR, np.random.default_rng(seed))
    a = evolve(evolve(g, t1), t2)
    b = evolve(g, t1 + t2)
    np.testing.assert_allclose(a.coefficients, b.coefficients, rtol=1e-12, atol=1e-300)
    assert a.norm() <= g.norm()


def test_neumann_constant_mode_is_preserved():
    g, mu = single_mode(NEU, 0, 0, 3.0)
    assert mu == 0.0
    assert evolve(g, 5.0).norm() == 3.0


def test_negative_time_rejected():
    with pytest.raises(HeatError):
        evolve(HeatState.zeros(DIR), -1.0)


def test_shape_mismatch_rejected():
    with pytest.raises(HeatError):
        HeatState(full_lattice(DIR), np.zeros(3))


@given(st.floats(0, 2), st.floats(0.5, 40), st.integers(0, 10 ** 6))
def test_evolution_commutes_with_projection(t, E, seed):
    g = HeatState.random(DIR, np.random.default_rng(seed))
    lhs = spectral_projection(evolve(g, t).as_field(), E)
    rhs = evolve(HeatState(g.lattice, g.coefficients), t)
    rhs = spectral_projection(rhs.as_field(), E)
    np.testing.assert_array_equal(lhs.coefficients, rhs.coefficients)


def test_dissipation_tight_on_single_mode():
    g, mu = single_mode(DIR, 2, 3)
    delta = 1e-4
    t = 0.7
    lhs, rhs, ok = dissipation_check(g, mu - delta, t)
    assert ok and lhs / rhs == pytest.approx(1.0, abs=1e-3)


def test_dissipation_vanishes_below_cutoff():
    g, mu = single_mode(DIR, 1, 1)
    lhs, _, ok = dissipation_check(g, mu + 1, 0.3)
    assert lhs == 0.0 and ok


@given(st.integers(0, 10 ** 6), st.floats(0.01, 3.0), st.floats(0.0, 80.0))
def test_dissipation_holds_for_random_states(seed, t, E):
    g = HeatState.random(DIR, np.random.default_rng(seed))
    assert dissipation_check(g, E, t)[2]


def test_dissipation_needs_positive_time():
    with pytest.raises(HeatError):
        dissipation_check(HeatState.zeros(DIR), 1.0, 0.0)


def eigen_series_interval(t, x, y, w, bc, terms=400):
    k = np.arange(0 if bc is BoundaryCondition.NEUMANN else 1, terms)
    f = np.sin if bc is BoundaryCondition.DIRICHLET else np.cos
    norm = np.where(k == 0, 1 / w, 2 / w)
    return float(np.sum(norm * f(k * math.pi * x / w) * f(k * math.pi * y / w) * np.exp(-t * (k * math.pi / w) ** 2)))


@pytest.mark.parametrize("bc", list(BoundaryCondition))
@pytest.mark.parametrize("t", [0.01, 0.2, 1.5])
def test_interval_kernel_matches_eigen_series(bc, t):
    w = math.pi
    for x, y in [(0.3, 0.5), (1.0, 2.9), (3.0, 3.1)]:
        assert interval_kernel(t, x, y, w, bc) == pytest.approx(eigen_series_interval(t, x, y, w, bc), rel=1e-9, abs=1e-12)


def test_strip_kernel_symmetric_and_nonnegative():
    rng = np.random.default_rng(1)
    x = rng.uniform([0, -2], [DIR.width, 2], (200, 2))
    y = rng.uniform([0, -2], [DIR.width, 2], (200, 2))
    for dom in (DIR, NEU):
        k1 = kernel_strip(0.3, x, y, dom)
        np.testing.assert_allclose(k1, kernel_strip(0.3, y, x, dom), rtol=1e-13)
        assert np.all(k1 >= -1e-15)


def test_dirichlet_kernel_vanishes_on_boundary():
    x = np.array([[0.0, 0.2], [DIR.width, -1.0]])
    y = np.array([[1.0, 0.0], [2.0, 0.0]])
    assert np.all(np.abs(kernel_strip(0.5, x, y, DIR)) < 1e-14)


def test_dirichlet_below_free_gaussian_and_neumann_above_dirichlet():
    rng = np.random.default_rng(2)
    x = rng.uniform([0, -2], [DIR.width, 2], (300, 2))
    y = rng.uniform([0, -2], [DIR.width, 2], (300, 2))
    t = 0.4
    free = np.exp(-np.sum((x - y) ** 2, axis=1) / (4 * t)) / (4 * math.pi * t)
    kd, kn = kernel_strip(t, x, y, DIR), kernel_strip(t, x, y, NEU)
    assert np.all(kd <= free * (1 + 1e-12)) and np.all(kn >= kd)


def test_neumann_kernel_conserves_mass():
    xs = (np.arange(256) + 0.5) * NEU.width / 256
    ys = np.linspace(-6, 6, 2401)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X, Y], -1)
    K = kernel_strip(0.5, pts, np.array([1.0, 0.0]), NEU)
    mass = np.sum(K) * (NEU.width / 256) * (ys[1] - ys[0])
    assert mass == pytest.approx(1.0, rel=1e-6)


def test_kernel_reproduces_semigroup_on_a_mode():
    # g0(x, y) = sin(2 x / (2L)) cos(xi y) decays like exp(-t (lambda + xi^2))
    L, n, xi, t = DIR.L, 2, 1.3, 0.15
    nx = 256
    xs = (np.arange(nx) + 0.5) * DIR.width / nx
    ys = np.linspace(-8, 8, 3201)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    g0 = np.sin(n * X / (2 * L)) * np.cos(xi * Y)
    p = np.array([0.9, 0.4])
    K = kernel_strip(t, np.stack([X, Y], -1), p, DIR)
    val = np.sum(K * g0) * (DIR.width / nx) * (ys[1] - ys[0])
    ref = math.exp(-t * ((n / (2 * L)) ** 2 + xi ** 2)) * math.sin(n * p[0] / (2 * L)) * math.cos(xi * p[1])
    assert val == pytest.approx(ref, rel=1e-4)


def test_kernel_rejects_bad_input():
    with pytest.raises(HeatError):
        kernel_strip(0.0, [1.0, 0.0], [1.0, 0.0], DIR)
    with pytest.raises(HeatError):
        kernel_strip(1.0, [1.0], [1.0], DIR)


def test_cube_kernel_symmetric_and_inside_only():
    W = cube_for((math.pi / 2, 0.0), 0.5)
    rng = np.random.default_rng(3)
    x = W.lo + rng.random((50, 2)) * W.side
    y = W.lo + rng.random((50, 2)) * W.side
    np.testing.assert_allclose(kernel_cube_series(0.2, x, y, W), kernel_cube_series(0.2, y, x, W), rtol=1e-12)
    with pytest.raises(HeatError):
        kernel_cube_series(0.2, W.lo - 0.1, x[0], W)


def test_cube_kernel_large_time_single_term():
    W = Cube((0.0, 0.0), math.pi)      # L = 1: eigenvalues |k|^2
    x, y = np.array([0.3, -0.2]), np.array([-0.5, 0.4])
    t = 3.0
    one = kernel_cube_series(t, x, y, W, KernelParams(series_count=1))
    full = kernel_cube_series(t, x, y, W)
    # next eigenvalue is 5 versus 2 for the ground state
    assert abs(full - one) / one < 4 * math.exp(-t * 3)


def test_cube_series_tail_bounds_truncation():
    W = Cube((0.0, 0.0), math.pi)
    t = 0.05
    p = KernelParams(series_count=8)
    x = np.array([0.1, 0.1])
    diff = abs(kernel_cube_series(t, x, x, W, KernelParams(series_count=200)) - kernel_cube_series(t, x, x, W, p))
    per_axis = kernel_cube_series(t, x[:1], x[:1], Cube((0.0,), math.pi), KernelParams(series_count=200))
    bound = cube_series_tail(t, W, p)
    # product of two axes: |ab - a'b'| <= tail * (|a| + |b'|)
    assert diff <= bound * 2 * per_axis * (1 + 1e-9)


def test_strip_dominates_cube_kernel():
    L = 0.5
    dom = DIR
    c = np.array([math.pi * L, 0.3])
    W = cube_for(c, L)
    rng = np.random.default_rng(4)
    for t in rng.uniform(0.02, 2.0, 20):
        x = W.lo + rng.random((30, 2)) * W.side
        assert np.all(kernel_strip(t, x, c, dom) >= kernel_cube_series(t, x, c, W) - 1e-12)


def test_sandwich_reports_calibrated_constants():
    rng = np.random.default_rng(5)
    t = rng.uniform(0.05, 2.0, 60)
    x = rng.uniform([0.1, -1], [DIR.width - 0.1, 1], (60, 2))
    y = rng.uniform([0.1, -1], [DIR.width - 0.1, 1], (60, 2))
    r = gaussian_sandwich_check(t, x, y, DIR)
    assert np.all(r.lower == 0)
    again = gaussian_sandwich_check(t, x, y, DIR, KernelParams(c=r.min_upper_constant))
    assert again.holds
    rn = gaussian_sandwich_check(t, x, y, NEU)
    fitted = KernelParams(c=rn.min_upper_constant, C2=rn.max_lower_constant)
    assert gaussian_sandwich_check(t, x, y, NEU, fitted).holds
    # on the diagonal the free Gaussian caps the constant at 1/(4 pi)
    diag = gaussian_sandwich_check(t, x, x, DIR)
    assert diag.min_upper_constant <= 1 / (4 * math.pi) * (1 + 1e-12)
    assert gaussian_sandwich_check(t, x, x, DIR, KernelParams(c=diag.min_upper_constant)).holds


@pytest.mark.parametrize("kw", [dict(image_count=0), dict(series_count=0), dict(c=0.0), dict(C2=-1.0)])
def test_kernel_params_validation(kw):
    with pytest.raises(HeatError):
        KernelParams(**kw)


def test_image_error_small_by_default():
    assert KernelParams().image_error(1.0, math.pi) < 1e-80

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from strip_control.domain import (BoundaryCondition, DomainError, StripDomain, TruncationWarning,
                                  axis_eigenfunctions, build_domain, full_lattice, lattice_below_energy,
                                  longitudinal_functions, transverse_eigenpair)


def test_build_domain_accepts_reference_configuration():
    dom = build_domain(dict(d=2, L=0.5, bc="dirichlet", X=8, N_max=32, M_max=256, h=1 / 64))
    assert dom.ny == 1024
    # pi / (1/64) is not an integer: the step is snapped so the cells tile the axis
    assert dom.nx == 202
    assert dom.hx * dom.nx == pytest.approx(math.pi, rel=1e-14)


def test_build_domain_rejects_negative_truncation():
    with pytest.raises(DomainError, match="nonpositive truncation"):
        build_domain(dict(d=2, L=0.5, X=-1))


@pytest.mark.parametrize("bad", [dict(L=0.0), dict(h=-1.0), dict(d=1), dict(X=0.0)])
def test_build_domain_rejects_invalid_values(bad):
    cfg = dict(d=2, L=0.5, X=8, N_max=4, M_max=8, h=1 / 16)
    cfg.update(bad)
    with pytest.raises(DomainError):
        build_domain(cfg)


def test_neumann_three_dimensional_domain_allows_zero_indices():
    dom = build_domain(dict(d=3, L=1, bc="neumann", X=8, N_max=4, M_max=8, h=1 / 8))
    lat = full_lattice(dom)
    assert lat.n.min() == 0 and lat.n.shape[1] == 2


def test_nyquist_guard():
    with pytest.raises(DomainError, match="Nyquist"):
        StripDomain(2, 0.5, "dirichlet", 1.0, 2, 16, 1 / 16)


def test_eigenpair_examples():
    dom = StripDomain(2, 0.5, "dirichlet", 8, 4, 8, 1 / 16)
    lam, phi = transverse_eigenpair(1, dom)
    assert lam == pytest.approx(1.0)
    assert phi(0.0) == pytest.approx(0.0, abs=1e-15)

    dn = StripDomain(2, 1.0, "neumann", 8, 4, 8, 1 / 16)
    lam0, phi0 = transverse_eigenpair(0, dn)
    assert lam0 == 0.0
    x = dn.transverse_nodes()
    assert np.ptp(phi0(x)) == 0.0
    assert np.sum(phi0(x) ** 2) * dn.hx == pytest.approx(1.0, rel=1e-14)


def test_inadmissible_index_rejected():
    dom = StripDomain(2, 0.5, "dirichlet", 8, 4, 8, 1 / 16)
    with pytest.raises(DomainError, match="inadmissible"):
        transverse_eigenpair(0, dom)


@given(st.integers(1, 20), st.integers(1, 20))
def test_eigenvalue_increasing_in_each_index(n1, n2):
    dom = StripDomain(3, 0.7, "dirichlet", 4, 21, 4, 1 / 8)
    lo, _ = transverse_eigenpair((n1, n2), dom)
    hi, _ = transverse_eigenpair((n1 + 1, n2), dom)
    assert 0 <= lo < hi


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_quadrature_orthonormality(bc):
    dom = StripDomain(2, 0.5, bc, 4, 12, 4, 1 / 32)
    bcv = BoundaryCondition.parse(bc)
    ns = np.arange(bcv.lowest_index, 13)
    Phi = axis_eigenfunctions(ns, dom.transverse_nodes(), dom.L, bcv)
    G = Phi.T @ Phi * dom.hx
    assert np.abs(G - np.eye(len(ns))).max() <= 10 * dom.h ** 2


def test_longitudinal_basis_orthonormal():
    dom = StripDomain(2, 0.5, "dirichlet", 3.0, 2, 10, 1 / 16)
    m = np.arange(-10, 11)
    Psi = longitudinal_functions(m, dom.longitudinal_nodes(), dom.X)
    assert np.abs(Psi.T @ Psi * dom.hy - np.eye(len(m))).max() < 1e-12


def test_lattice_examples():
    dom = StripDomain(2, 0.5, "dirichlet", 8, 4, 8, 1 / 16)
    assert len(lattice_below_energy(dom, 0.5)) == 0
    dn = StripDomain(2, 1.0, "neumann", 8, 4, 8, 1 / 16)
    lat = lattice_below_energy(dn, 0.0)
    assert lat.entries() == [((0,), 0)]
    dpi = StripDomain(2, 0.5, "dirichlet", math.pi, 4, 8, math.pi / 64)
    assert lattice_below_energy(dpi, 1.0).entries() == [((1,), 0)]


def test_negative_energy_rejected():
    dom = StripDomain(2, 0.5, "dirichlet", 8, 4, 8, 1 / 16)
    with pytest.raises(DomainError):
        lattice_below_energy(dom, -1.0)


def test_truncation_warning():
    dom = StripDomain(2, 0.5, "dirichlet", 8, 2, 4, 1 / 16)
    with pytest.warns(TruncationWarning):
        lattice_below_energy(dom, 100.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        lattice_below_energy(dom, 2.0)


@given(st.floats(0, 60), st.floats(0, 60))
def test_lattice_nesting(e1, e2):
    dom = StripDomain(2, 0.5, "neumann", 8, 8, 32, 1 / 16)
    lo, hi = sorted((e1, e2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        a, b = lattice_below_energy(dom, lo), lattice_below_energy(dom, hi)
    assert a.issubset(b)
    assert np.all(b.energies <= hi * (1 + 1e-12))


def test_lattice_order_is_lexicographic():
    dom = StripDomain(3, 0.5, "dirichlet", 4, 3, 2, 1 / 8)
    lat = full_lattice(dom)
    keys = [(int(np.sum(n ** 2)), tuple(n), int(m)) for n, m in zip(lat.n, lat.m)]
    assert keys == sorted(keys)

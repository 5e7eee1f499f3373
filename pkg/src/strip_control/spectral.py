"""Band-limited fields on the strip, spectral projections and spectral-inequality constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
import scipy.optimize

from .domain import (BoundaryCondition, FrequencyLattice, StripDomain, axis_eigenfunctions,
                     full_lattice, lattice_below_energy, longitudinal_functions)
from .geometry import SetDescription, cell_weights
from .linalg import IllConditionedError, largest_generalized_eigenvalue

EIGEN = "eigen"
EXPONENTIAL = "exponential"
MAX_GRAM_SIZE = 6000


class SpectralError(ValueError):
    pass


class ThinSetError(SpectralError):
    pass


# -- basis tables ---------------------------------------------------------------

def _axis_tables(domain: StripDomain, basis: str) -> tuple[list, np.ndarray, int, int]:
    """Per-axis value tables at the grid nodes and the index offsets of their columns."""
    x = domain.transverse_nodes()
    y = domain.longitudinal_nodes()
    M = domain.M_max
    if basis == EIGEN:
        cols = np.arange(0, domain.N_max + 1)
        T = axis_eigenfunctions(cols, x, domain.L, domain.bc)
        if domain.bc is BoundaryCondition.DIRICHLET:
            T[:, 0] = 0.0
        Psi = longitudinal_functions(np.arange(-M, M + 1), y, domain.X)
        return [T] * (domain.d - 1), Psi, 0, M
    if basis == EXPONENTIAL:
        ks = np.arange(-domain.N_max, domain.N_max + 1)
        T = np.exp(1j * np.outer(x, ks) / domain.L) / math.sqrt(domain.width)
        ms = np.arange(-M, M + 1)
        Psi = np.exp(1j * np.outer(y, ms) * math.pi / domain.X) / math.sqrt(2 * domain.X)
        return [T] * (domain.d - 1), Psi, domain.N_max, M
    raise SpectralError(f"unknown basis {basis!r}")


def _frequencies(n: np.ndarray, m: np.ndarray, L: float, X: float, basis: str) -> np.ndarray:
    """Absolute per-axis frequencies of each entry, shape (K, d)."""
    scale = 2.0 * L if basis == EIGEN else L
    return np.column_stack([np.abs(n) / scale, math.pi * np.abs(m) / X]) if len(m) else np.zeros((0, n.shape[1] + 1))


@dataclass
class BandLimitedField:
    """Finite coefficient table over lattice entries.

    ``n`` holds transverse indices (eigen basis: eigen-indices; exponential
    basis: signed Fourier indices ``k`` with frequency ``k/L``), ``m`` the
    longitudinal index.  ``band`` is the full side length of the centred
    spectral box.
    """

    n: np.ndarray
    m: np.ndarray
    coefficients: np.ndarray
    L: float
    X: float
    band: tuple
    basis: str = EIGEN

    def __post_init__(self):
        n = np.asarray(self.n, dtype=int)
        self.n = n.reshape(-1, 1) if n.ndim == 1 else n
        self.m = np.asarray(self.m, dtype=int)
        self.coefficients = np.asarray(self.coefficients)
        self.band = tuple(float(b) for b in self.band)
        freqs = self.frequencies()
        if len(freqs) and np.any(freqs > np.asarray(self.band) / 2 * (1 + 1e-12) + 1e-14):
            raise SpectralError("stored frequency outside the declared band")

    @property
    def d(self) -> int:
        return self.n.shape[1] + 1

    def frequencies(self) -> np.ndarray:
        return _frequencies(self.n, self.m, self.L, self.X, self.basis)

    def norm(self) -> float:
        """Plancherel norm (the basis is orthonormal)."""
        return float(np.linalg.norm(self.coefficients))

    @classmethod
    def from_lattice(cls, lattice: FrequencyLattice, coefficients, band=None) -> "BandLimitedField":
        if band is None:
            freqs = _frequencies(lattice.n, lattice.m, lattice.L, lattice.X, EIGEN)
            band = tuple(2 * freqs.max(axis=0)) if len(freqs) else (0.0,) * (lattice.n.shape[1] + 1)
        return cls(lattice.n, lattice.m, coefficients, lattice.L, lattice.X, band, EIGEN)

    def lattice(self) -> FrequencyLattice:
        if self.basis != EIGEN:
            raise SpectralError("only eigen-basis fields live on a FrequencyLattice")
        return FrequencyLattice(self.n, self.m, self.L, self.X, None)


@dataclass(frozen=True)
class SpectralConstants:
    gamma: float
    a: tuple
    d: int
    K: float = math.e
    b: Optional[tuple] = None
    E: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.gamma <= 1):
            raise SpectralError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.K < math.e:
            raise SpectralError(f"K must be >= e, got {self.K}")
        if len(self.a) != self.d or any(v <= 0 for v in self.a):
            raise SpectralError("side vector a must have d positive entries")
        if self.b is not None and (len(self.b) != self.d or any(v <= 0 for v in self.b)):
            raise SpectralError("band vector b must have d positive entries")


# -- synthesis / analysis -------------------------------------------------------

def _check_representable(n: np.ndarray, m: np.ndarray, domain: StripDomain, basis: str):
    lo = domain.bc.lowest_index if basis == EIGEN else -domain.N_max
    if len(m) and (np.any(n < lo) or np.any(n > domain.N_max) or np.any(np.abs(m) > domain.M_max)):
        raise SpectralError("band exceeds the Nyquist range of the grid")


def _contract_axes(tensor: np.ndarray, tables: Sequence[np.ndarray], axis: int) -> np.ndarray:
    out = tensor
    for tab in tables:
        out = np.tensordot(out, tab, axes=([0], [axis]))
    return out


def synthesize(f: BandLimitedField, domain: StripDomain) -> np.ndarray:
    """Evaluate the finite sum on the quadrature grid (shape ``domain.grid_shape``)."""
    _check_representable(f.n, f.m, domain, f.basis)
    Ts, Psi, off_n, off_m = _axis_tables(domain, f.basis)
    shape = tuple(T.shape[1] for T in Ts) + (Psi.shape[1],)
    dense = np.zeros(shape, dtype=complex if f.basis == EXPONENTIAL else float)
    idx = tuple((f.n[:, j] + off_n) for j in range(f.d - 1)) + (f.m + off_m,)
    np.add.at(dense, idx, f.coefficients)
    return _contract_axes(dense, Ts + [Psi], axis=1)


def analyze(samples: np.ndarray, domain: StripDomain, band=None, basis: str = EIGEN,
            lattice: Optional[FrequencyLattice] = None) -> BandLimitedField:
    """Discrete inner products of grid samples against the basis.

    Entries are those of ``lattice`` (eigen basis) or, by default, every
    representable entry inside ``band``.
    """
    samples = np.asarray(samples)
    if samples.shape != domain.grid_shape:
        raise SpectralError(f"samples must have grid shape {domain.grid_shape}")
    Ts, Psi, off_n, off_m = _axis_tables(domain, basis)
    steps = [domain.hx] * (domain.d - 1) + [domain.hy]
    weighted = [np.conj(T) * s for T, s in zip(Ts + [Psi], steps)]
    dense = _contract_axes(samples, weighted, axis=0)

    if lattice is not None:
        n, m = lattice.n, lattice.m
    else:
        lo = domain.bc.lowest_index if basis == EIGEN else -domain.N_max
        axes = [np.arange(lo, domain.N_max + 1)] * (domain.d - 1) + [np.arange(-domain.M_max, domain.M_max + 1)]
        mesh = np.meshgrid(*axes, indexing="ij")
        n = np.stack([g.ravel() for g in mesh[:-1]], axis=1)
        m = mesh[-1].ravel()
    freqs = _frequencies(n, m, domain.L, domain.X, basis)
    if band is None:
        band = tuple(2 * freqs.max(axis=0)) if len(freqs) else (0.0,) * domain.d
    band = tuple(float(b) for b in band)
    keep = np.all(freqs <= np.asarray(band) / 2 * (1 + 1e-12) + 1e-14, axis=1)
    n, m = n[keep], m[keep]
    idx = tuple((n[:, j] + off_n) for j in range(domain.d - 1)) + (m + off_m,)
    coeffs = dense[idx]
    if basis == EIGEN:
        coeffs = np.real(coeffs)
    return BandLimitedField(n, m, coeffs, domain.L, domain.X, band, basis)


def norm_on(f: Union[BandLimitedField, np.ndarray], region: Optional[SetDescription],
            domain: StripDomain, weights: Optional[np.ndarray] = None) -> float:
    """Quadrature L2 norm over ``region`` using exact cell-intersection weights."""
    values = synthesize(f, domain) if isinstance(f, BandLimitedField) else np.asarray(f)
    if weights is None:
        weights = np.ones(domain.grid_shape) if region is None else cell_weights(region, domain)
    return float(math.sqrt(np.sum(weights * np.abs(values) ** 2) * domain.cell_volume))


def bernstein_ratio(f: BandLimitedField, alpha: Sequence[int]) -> float:
    """``||d^alpha f|| / ||f||`` computed in coefficient space."""
    alpha = np.asarray(alpha, dtype=int)
    if alpha.shape != (f.d,) or np.any(alpha < 0):
        raise SpectralError("alpha must be a multi-index of length d")
    total = float(np.sum(np.abs(f.coefficients) ** 2))
    if total == 0.0:
        raise SpectralError("zero field")
    weights = np.prod(f.frequencies() ** (2 * alpha[None, :]), axis=1)
    return float(math.sqrt(np.sum(weights * np.abs(f.coefficients) ** 2) / total))


def spectral_projection(g: BandLimitedField, E: float, domain: Optional[StripDomain] = None) -> BandLimitedField:
    """Restriction to entries with energy ``lambda_n + xi_m^2 <= E``."""
    if E < 0:
        raise SpectralError("energy cutoff must be nonnegative")
    if g.basis != EIGEN:
        raise SpectralError("spectral projections act on eigen-basis fields")
    lat = g.lattice()
    keep = lat.energies <= E * (1 + 1e-12) + 1e-14
    band = (2 * math.sqrt(E),) * g.d
    return BandLimitedField(g.n[keep], g.m[keep], g.coefficients[keep], g.L, g.X, band, EIGEN)


# -- Gram matrices ----------------------------------------------------------------

class ModalBasis:
    """Real eigen-basis restricted to a lattice, with quadrature Gram matrices."""

    def __init__(self, domain: StripDomain, lattice: Optional[FrequencyLattice] = None):
        self.domain = domain
        self.lattice = lattice if lattice is not None else full_lattice(domain)
        if len(self.lattice) > MAX_GRAM_SIZE:
            raise SpectralError(f"basis of {len(self.lattice)} modes too large for dense Gram matrices")

    @cached_property
    def _factors(self):
        dom, lat = self.domain, self.lattice
        tn, a_idx = np.unique(lat.n, axis=0, return_inverse=True)
        ms, b_idx = np.unique(lat.m, return_inverse=True)
        x = dom.transverse_nodes()
        per_axis = [axis_eigenfunctions(tn[:, j], x, dom.L, dom.bc) for j in range(dom.d - 1)]
        phi = per_axis[0]
        for tab in per_axis[1:]:
            # flattened transverse grid in C order over axes
            phi = (phi[:, None, :] * tab[None, :, :]).reshape(-1, len(tn))
        psi = longitudinal_functions(ms, dom.longitudinal_nodes(), dom.X)
        return phi, psi, a_idx.ravel(), b_idx.ravel()

    def gram(self, weights: Optional[np.ndarray] = None) -> np.ndarray:
        """``G[p, q] = sum_cells w * b_p * b_q * |cell|``."""
        dom = self.domain
        phi, psi, a_idx, b_idx = self._factors
        if weights is None:
            weights = np.ones(dom.grid_shape)
        W = np.asarray(weights, dtype=float).reshape(-1, dom.ny)
        na, nb = phi.shape[1], psi.shape[1]
        hT = dom.hx ** (dom.d - 1)
        M = np.einsum("ij,ia,ib->jab", W, phi, phi, optimize=True) * hT
        P = (psi[:, :, None] * psi[:, None, :]).reshape(dom.ny, nb * nb) * dom.hy
        G4 = (M.reshape(dom.ny, na * na).T @ P).reshape(na, na, nb, nb)
        G = G4[a_idx[:, None], a_idx[None, :], b_idx[:, None], b_idx[None, :]]
        return 0.5 * (G + G.T)

    def gram_on(self, S: Optional[SetDescription]) -> np.ndarray:
        return self.gram(None if S is None else cell_weights(S, self.domain))


# -- spectral inequality constants ------------------------------------------------

def empirical_spectral_constant(domain: StripDomain, S: SetDescription, E: float,
                                trials: int = 1, seed: int = 0, tol: float = 1e-8) -> float:
    """``sup ||f|| / ||f||_{S}`` over the range of the spectral projection below ``E``."""
    lattice = lattice_below_energy(domain, E)
    if len(lattice) == 0:
        raise SpectralError(f"no lattice entries below E={E}")
    basis = ModalBasis(domain, lattice)
    G_full = basis.gram()
    G_S = basis.gram_on(S)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(max(1, trials)):
        try:
            theta, _ = largest_generalized_eigenvalue(G_full, G_S, rng=rng, tol=tol)
        except IllConditionedError:
            raise ThinSetError("set too thin at this resolution") from None
        best = max(best, theta)
    return math.sqrt(max(best, 1.0))


def theoretical_spectral_constant(c: SpectralConstants) -> float:
    """Log of ``((2K)^d/gamma)^(8 K sqrt(E) (|a|_1 + d))``."""
    if c.E is None or c.E < 0:
        raise SpectralError("energy E >= 0 required")
    exponent = 8 * c.K * math.sqrt(c.E) * (sum(c.a) + c.d)
    return exponent * math.log((2 * c.K) ** c.d / c.gamma)


def logvinenko_sereda_bound(c: SpectralConstants) -> float:
    """Log of ``(K^d/gamma)^(K a.b + (6d-1)/2)``."""
    if c.b is None:
        raise SpectralError("band vector b required")
    exponent = c.K * float(np.dot(c.a, c.b)) + (6 * c.d - 1) / 2
    return exponent * (c.d * math.log(c.K) - math.log(c.gamma))


def calibrate_K(log_empirical: Sequence[float], energies: Sequence[float], gamma: float,
                a: Sequence[float], d: int) -> float:
    """Smallest ``K >= e`` for which the theoretical constant dominates every empirical one."""
    pairs = list(zip(energies, log_empirical))

    def slack(K):
        return min(theoretical_spectral_constant(SpectralConstants(gamma, tuple(a), d, K, E=E)) - v
                   for E, v in pairs)

    if slack(math.e) >= 0:
        return math.e
    hi = 2 * math.e
    while slack(hi) < 0:
        hi *= 2
        if hi > 1e12:
            return math.inf
    return float(scipy.optimize.brentq(slack, math.e, hi, xtol=1e-12))

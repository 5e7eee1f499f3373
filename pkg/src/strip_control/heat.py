"""Heat semigroup in spectral form, dissipation and heat kernels on the strip."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg

from .domain import BoundaryCondition, FrequencyLattice, StripDomain, full_lattice
from .spectral import BandLimitedField


class HeatError(ValueError):
    pass


@dataclass(frozen=True)
class HeatState:
    """Coefficients over a frequency lattice at a given time."""

    lattice: FrequencyLattice
    coefficients: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (len(self.lattice),):
            raise HeatError("coefficient vector does not match the lattice")
        if not np.all(np.isfinite(c)):
            raise HeatError("non-finite coefficients")
        object.__setattr__(self, "coefficients", c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def as_field(self) -> BandLimitedField:
        return BandLimitedField.from_lattice(self.lattice, self.coefficients)

    @classmethod
    def zeros(cls, domain: StripDomain) -> "HeatState":
        lat = full_lattice(domain)
        return cls(lat, np.zeros(len(lat)))

    @classmethod
    def random(cls, domain: StripDomain, rng: np.random.Generator, decay: float = 0.0) -> "HeatState":
        """Gaussian coefficients, optionally damped by ``exp(-decay * energy)``."""
        lat = full_lattice(domain)
        c = rng.standard_normal(len(lat)) * np.exp(-decay * lat.energies)
        return cls(lat, c)


def evolve(g: HeatState, t: float) -> HeatState:
    if t < 0:
        raise HeatError(f"negative time t={t}")
    return HeatState(g.lattice, g.coefficients * np.exp(-t * g.lattice.energies), g.time_stamp + t)


def dissipation_check(g: HeatState, E: float, t: float) -> tuple[float, float, bool]:
    """High-frequency decay: ``||(1 - pi_E) e^{t Delta} g|| <= e^{-tE} ||g||``."""
    if t <= 0:
        raise HeatError("dissipation check needs t > 0")
    mu = g.lattice.energies
    high = mu > E
    # BLAS nrm2 rescales, so tails far below sqrt(tiny) keep their digits
    lhs = float(scipy.linalg.norm(g.coefficients[high] * np.exp(-t * mu[high]))) if high.any() else 0.0
    rhs = math.exp(-t * E) * g.norm()
    return lhs, rhs, bool(lhs <= rhs * (1 + 1e-12))


# -- heat kernels -----------------------------------------------------------------

@dataclass(frozen=True)
class KernelParams:
    image_count: int = 8
    series_count: int = 64
    c: float = 1.0        # Dirichlet upper-bound prefactor
    c1: float = 1.0
    c2: float = 1.0       # Neumann lower-bound exponent factor
    C1: float = 1.0
    C2: float = 1.0       # Neumann lower-bound prefactor
    c_d: float = 1.0      # dimensional normalisation c(d) of the lower bound

    def __post_init__(self):
        if self.image_count < 1 or self.series_count < 1:
            raise HeatError("image_count and series_count must be >= 1")
        if min(self.c, self.c1, self.c2, self.C1, self.C2, self.c_d) <= 0:
            raise HeatError("Gaussian bound constants must be positive")

    def image_error(self, t: float, width: float) -> float:
        """Size of the first neglected image term relative to the direct one."""
        return math.exp(-(width * (self.image_count + 1)) ** 2 / (4 * t))


def _gauss(z, t):
    return np.exp(-z ** 2 / (4 * t)) / math.sqrt(4 * math.pi * t)


def interval_kernel(t: float, x, y, width: float, bc: BoundaryCondition, image_count: int = 8):
    """Heat kernel of ``(0, width)`` by the method of images."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sign = -1.0 if bc is BoundaryCondition.DIRICHLET else 1.0
    out = np.zeros(np.broadcast(x, y).shape)
    for k in range(-image_count, image_count + 1):
        shift = 2 * k * width
        out = out + _gauss(x - y + shift, t) + sign * _gauss(x + y + shift, t)
    return out


def _points(p, d):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != d:
        raise HeatError(f"points must have trailing dimension {d}")
    return p


def kernel_strip(t: float, x, y, domain: StripDomain, params: KernelParams = KernelParams()):
    """Product of transverse interval kernels and the free longitudinal Gaussian."""
    if t <= 0:
        raise HeatError("kernel needs t > 0")
    d = domain.d
    x, y = _points(x, d), _points(y, d)
    out = _gauss(x[..., -1] - y[..., -1], t)
    for j in range(d - 1):
        out = out * interval_kernel(t, x[..., j], y[..., j], domain.width, domain.bc, params.image_count)
    return out


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube ``center +- side/2``."""

    center: tuple
    side: float

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float) - self.side / 2

    def contains(self, p, slack: float = 1e-12) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.all(np.abs(p - np.asarray(self.center)) <= self.side / 2 * (1 + slack), axis=-1)


def cube_for(center, L: float) -> Cube:
    return Cube(tuple(float(v) for v in center), math.pi * L)


def kernel_cube_series(t: float, x, y, W: Cube, params: KernelParams = KernelParams()):
    """Dirichlet heat kernel of the cube ``W`` as a truncated eigen-series.

    The cube has side ``pi*L`` so the eigenvalues are ``|k|^2 / L^2``.
    """
    if t <= 0:
        raise HeatError("kernel needs t > 0")
    d = len(W.center)
    x, y = _points(x, d), _points(y, d)
    if not (np.all(W.contains(x)) and np.all(W.contains(y))):
        raise HeatError("points outside the cube")
    L = W.side / math.pi
    k = np.arange(1, params.series_count + 1)
    weights = np.exp(-t * k ** 2 / L ** 2)
    lo = W.lo
    out = np.ones(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))
    for j in range(d):
        sx = np.sin(np.multiply.outer(x[..., j] - lo[j], k) / L)
        sy = np.sin(np.multiply.outer(y[..., j] - lo[j], k) / L)
        out = out * (2.0 / W.side) * np.sum(weights * sx * sy, axis=-1)
    return out


def cube_series_tail(t: float, W: Cube, params: KernelParams = KernelParams()) -> float:
    """Bound on the per-axis series remainder beyond ``series_count`` terms."""
    L = W.side / math.pi
    n = params.series_count
    # sum_{k>n} e^{-t k^2/L^2} <= e^{-t(n+1)^2/L^2} / (1 - e^{-t(2n+3)/L^2})
    first = math.exp(-t * (n + 1) ** 2 / L ** 2)
    ratio = math.exp(-t * (2 * n + 3) / L ** 2)
    return (2.0 / W.side) * first / (1 - ratio)


@dataclass
class SandwichResult:
    lower: np.ndarray
    value: np.ndarray
    upper: np.ndarray
    holds: bool
    min_upper_constant: float     # smallest c making the upper bound hold on the sample
    max_lower_constant: float     # largest C2/c(d) making the lower bound hold (Neumann)


def gaussian_sandwich_check(t, x, y, domain: StripDomain, params: KernelParams = KernelParams()) -> SandwichResult:
    """Compare kernel_strip with the Gaussian bounds on a sample of ``(t, x, y)``.

    Upper bound: ``c t^{-d/2} exp(-|x-y|^2 / (6t))``.  Lower bound (Neumann
    only): ``C2 / (c(d) t^{d/2}) exp(-c2 |x-y|^2 / t)``; Dirichlet kernels
    vanish on the boundary so the lower bound is reported as 0.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise HeatError("kernel needs t > 0")
    d = domain.d
    x, y = _points(x, d), _points(y, d)
    dist2 = np.sum((x - y) ** 2, axis=-1)
    t = np.broadcast_to(t, dist2.shape)
    value = np.array([kernel_strip(float(ti), xi, yi, domain, params)
                      for ti, xi, yi in zip(t.ravel(), x.reshape(-1, d), y.reshape(-1, d))]).reshape(dist2.shape)
    shape_up = t ** (-d / 2) * np.exp(-dist2 / (6 * t))
    upper = params.c * shape_up
    if domain.bc is BoundaryCondition.NEUMANN:
        shape_lo = t ** (-d / 2) * np.exp(-params.c2 * dist2 / t)
        lower = params.C2 / params.c_d * shape_lo
        max_lower = float(np.min(value / shape_lo))
    else:
        lower = np.zeros_like(value)
        max_lower = 0.0
    holds = bool(np.all(lower <= value * (1 + 1e-12)) and np.all(value <= upper * (1 + 1e-12)))
    return SandwichResult(lower, value, upper, holds, float(np.max(value / shape_up)), max_lower)

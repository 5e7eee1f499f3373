"""Discretized strip domain, transverse eigenbasis and frequency lattices.

The strip is ``(0, 2*pi*L)^(d-1) x R``.  The unbounded axis is modelled as the
periodic interval ``[-X, X)`` with frequencies ``xi_m = pi*m/X``; transverse
axes carry the Dirichlet (sine) or Neumann (cosine) eigenfunctions of the
interval ``(0, 2*pi*L)``.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np


class DomainError(ValueError):
    """Invalid domain parameters or inadmissible eigen-index."""


class TruncationWarning(UserWarning):
    """The mode cutoffs truncate a lattice that should be larger."""


class BoundaryCondition(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"

    @classmethod
    def parse(cls, value) -> "BoundaryCondition":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for bc in cls:
            if key in (bc.value, bc.value[0]):
                return bc
        raise DomainError(f"unknown boundary condition {value!r}")

    @property
    def lowest_index(self) -> int:
        return 1 if self is BoundaryCondition.DIRICHLET else 0


def _grid_count(length: float, h: float) -> int:
    # h is a target step; snap to the nearest count that tiles the axis exactly
    count = length / h
    nearest = round(count)
    if nearest >= 1 and abs(count - nearest) <= 1e-9 * max(1.0, count):
        return int(nearest)
    return int(math.ceil(count))


@dataclass(frozen=True)
class StripDomain:
    d: int
    L: float
    bc: BoundaryCondition
    X: float
    N_max: int
    M_max: int
    h: float
    # derived grid data, filled in __post_init__
    nx: int = field(init=False, repr=False)
    ny: int = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.d}")
        if not self.L > 0:
            raise DomainError(f"nonpositive scale L={self.L}")
        if not self.X > 0:
            raise DomainError(f"nonpositive truncation X={self.X}")
        if not self.h > 0:
            raise DomainError(f"nonpositive quadrature step h={self.h}")
        if self.N_max < 1 or self.M_max < 1:
            raise DomainError("mode cutoffs N_max, M_max must be >= 1")
        object.__setattr__(self, "bc", BoundaryCondition.parse(self.bc))
        nx = _grid_count(self.width, self.h)
        ny = _grid_count(2.0 * self.X, self.h)
        # discrete orthogonality of the sampled basis needs these margins
        if self.N_max >= nx:
            raise DomainError(
                f"N_max={self.N_max} not resolved by {nx} transverse grid cells")
        if 2 * self.M_max >= ny:
            raise DomainError(
                f"M_max={self.M_max} exceeds Nyquist range of {ny} longitudinal cells")
        object.__setattr__(self, "nx", nx)
        object.__setattr__(self, "ny", ny)

    # -- geometry of the model box -------------------------------------------
    @property
    def width(self) -> float:
        """Transverse side length ``2*pi*L``."""
        return 2.0 * math.pi * self.L

    @property
    def hx(self) -> float:
        return self.width / self.nx

    @property
    def hy(self) -> float:
        return 2.0 * self.X / self.ny

    @property
    def cell_volume(self) -> float:
        return self.hx ** (self.d - 1) * self.hy

    @property
    def model_lo(self) -> np.ndarray:
        return np.array([0.0] * (self.d - 1) + [-self.X])

    @property
    def model_hi(self) -> np.ndarray:
        return np.array([self.width] * (self.d - 1) + [self.X])

    def transverse_nodes(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    def longitudinal_nodes(self) -> np.ndarray:
        return -self.X + (np.arange(self.ny) + 0.5) * self.hy

    def axis_nodes(self, axis: int) -> np.ndarray:
        return self.longitudinal_nodes() if axis == self.d - 1 else self.transverse_nodes()

    def axis_step(self, axis: int) -> float:
        return self.hy if axis == self.d - 1 else self.hx

    @property
    def grid_shape(self) -> tuple:
        return (self.nx,) * (self.d - 1) + (self.ny,)

    @property
    def lambda_min(self) -> float:
        return (self.d - 1) * self.bc.lowest_index ** 2 / (2.0 * self.L) ** 2

    @property
    def max_frequency(self) -> float:
        return math.pi * self.M_max / self.X

    def with_(self, **changes) -> "StripDomain":
        params = dict(d=self.d, L=self.L, bc=self.bc, X=self.X,
                      N_max=self.N_max, M_max=self.M_max, h=self.h)
        params.update(changes)
        return StripDomain(**params)

    def as_dict(self) -> dict:
        return dict(d=self.d, L=self.L, bc=self.bc.value, X=self.X,
                    N_max=self.N_max, M_max=self.M_max, h=self.h)


def build_domain(config: Mapping) -> StripDomain:
    """Validate a parameter mapping and return the domain.

    Recognised keys: ``d, L, bc, X, N_max, M_max, h``.  ``bc`` defaults to
    Dirichlet, ``h`` to 1/32.
    """
    try:
        return StripDomain(
            d=int(config["d"]),
            L=float(config["L"]),
            bc=BoundaryCondition.parse(config.get("bc", "dirichlet")),
            X=float(config["X"]),
            N_max=int(config.get("N_max", 8)),
            M_max=int(config.get("M_max", 32)),
            h=float(config.get("h", 1.0 / 32)),
        )
    except KeyError as exc:
        raise DomainError(f"missing domain parameter {exc.args[0]!r}") from None


# -- transverse eigenfunctions ------------------------------------------------

def transverse_eigenvalue(n, L: float) -> float:
    n = np.atleast_1d(np.asarray(n))
    return float(np.sum(n.astype(float) ** 2) / (2.0 * L) ** 2)


def axis_normalization(n: np.ndarray, L: float) -> np.ndarray:
    """Per-axis normalising factor; zero (Neumann) modes get (2*pi*L)^(-1/2)."""
    n = np.asarray(n)
    return np.where(n == 0, 1.0 / math.sqrt(2 * math.pi * L), 1.0 / math.sqrt(math.pi * L))


def axis_eigenfunctions(n_values, x, L: float, bc: BoundaryCondition) -> np.ndarray:
    """Normalized 1-D eigenfunctions: rows are points ``x``, columns indices ``n``."""
    n_values = np.asarray(n_values)
    theta = np.asarray(x, dtype=float)[:, None] * n_values[None, :] / (2.0 * L)
    trig = np.sin(theta) if bc is BoundaryCondition.DIRICHLET else np.cos(theta)
    return trig * axis_normalization(n_values, L)[None, :]


def _check_admissible(n, domain: StripDomain) -> np.ndarray:
    n = np.atleast_1d(np.asarray(n, dtype=int))
    if n.shape != (domain.d - 1,):
        raise DomainError(f"transverse index must have {domain.d - 1} entries, got {n.tolist()}")
    if np.any(n < domain.bc.lowest_index):
        raise DomainError(
            f"inadmissible index {n.tolist()} for {domain.bc.value} conditions")
    return n


def transverse_eigenpair(n, domain: StripDomain) -> tuple[float, Callable[[np.ndarray], np.ndarray]]:
    """Eigenvalue and eigenfunction evaluator for the transverse multi-index ``n``.

    The evaluator takes points of shape ``(..., d-1)`` (or scalars when d=2).
    """
    n = _check_admissible(n, domain)
    lam = transverse_eigenvalue(n, domain.L)
    trig = np.sin if domain.bc is BoundaryCondition.DIRICHLET else np.cos
    scale = float(np.prod(axis_normalization(n, domain.L)))

    def phi(x):
        x = np.asarray(x, dtype=float)
        if domain.d == 2 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return scale * np.prod(trig(x * n / (2.0 * domain.L)), axis=-1)

    return lam, phi


# -- frequency lattices ---------------------------------------------------------

@dataclass(frozen=True)
class FrequencyLattice:
    """Ordered set of (transverse multi-index, longitudinal index) pairs.

    Longitudinal index ``m > 0`` labels ``cos(xi_m y)``, ``m < 0`` labels
    ``sin(xi_|m| y)``; both carry frequency ``xi_|m| = pi*|m|/X``.
    """

    n: np.ndarray          # (K, d-1) int
    m: np.ndarray          # (K,) int
    L: float
    X: float
    E: Optional[float] = None   # None means the full cutoff lattice

    def __len__(self):
        return len(self.m)

    @property
    def transverse_eigenvalues(self) -> np.ndarray:
        return np.sum(self.n.astype(float) ** 2, axis=1) / (2.0 * self.L) ** 2

    @property
    def xi(self) -> np.ndarray:
        return math.pi * np.abs(self.m) / self.X

    @property
    def energies(self) -> np.ndarray:
        return self.transverse_eigenvalues + self.xi ** 2

    def entries(self) -> list[tuple[tuple[int, ...], int]]:
        return [(tuple(int(v) for v in nn), int(mm)) for nn, mm in zip(self.n, self.m)]

    def index_of(self) -> dict:
        return {key: i for i, key in enumerate(self.entries())}

    def issubset(self, other: "FrequencyLattice") -> bool:
        return set(self.entries()) <= set(other.entries())

    def positions_in(self, other: "FrequencyLattice") -> np.ndarray:
        """Index of each of our entries inside ``other`` (KeyError if absent)."""
        lookup = other.index_of()
        return np.array([lookup[key] for key in self.entries()], dtype=int)

    def subset(self, mask) -> "FrequencyLattice":
        mask = np.asarray(mask)
        return FrequencyLattice(self.n[mask], self.m[mask], self.L, self.X, self.E)


def _ordered(n: np.ndarray, m: np.ndarray) -> np.ndarray:
    # lexicographic in (|n|^2, n, m)
    keys = [m] + [n[:, j] for j in reversed(range(n.shape[1]))] + [np.sum(n ** 2, axis=1)]
    return np.lexsort(keys)


def _transverse_indices(domain: StripDomain) -> np.ndarray:
    rng = range(domain.bc.lowest_index, domain.N_max + 1)
    return np.array(list(itertools.product(rng, repeat=domain.d - 1)), dtype=int).reshape(-1, domain.d - 1)


def full_lattice(domain: StripDomain) -> FrequencyLattice:
    tn = _transverse_indices(domain)
    ms = np.arange(-domain.M_max, domain.M_max + 1)
    n = np.repeat(tn, len(ms), axis=0)
    m = np.tile(ms, len(tn))
    order = _ordered(n, m)
    return FrequencyLattice(n[order], m[order], domain.L, domain.X, None)


def lattice_below_energy(domain: StripDomain, E: float) -> FrequencyLattice:
    """All lattice entries with ``lambda_n + xi_m^2 <= E`` inside the cutoffs."""
    if E < 0:
        raise DomainError(f"energy cutoff must be nonnegative, got {E}")
    slack = 1e-12 * max(1.0, E)
    tn = _transverse_indices(domain)
    lam = np.sum(tn.astype(float) ** 2, axis=1) / (2.0 * domain.L) ** 2
    tn, lam = tn[lam <= E + slack], lam[lam <= E + slack]
    n_rows, m_rows = [], []
    for nn, ll in zip(tn, lam):
        rest = E - ll
        m_top = int(math.floor(math.sqrt(max(rest, 0.0)) * domain.X / math.pi)) + 1
        ms = np.arange(-m_top, m_top + 1)
        ms = ms[(math.pi * ms / domain.X) ** 2 <= rest + slack]
        ms = ms[np.abs(ms) <= domain.M_max]
        n_rows.append(np.repeat(nn[None, :], len(ms), axis=0))
        m_rows.append(ms)
    if n_rows:
        n = np.concatenate(n_rows).astype(int)
        m = np.concatenate(m_rows).astype(int)
    else:
        n = np.zeros((0, domain.d - 1), dtype=int)
        m = np.zeros(0, dtype=int)

    n_next = domain.N_max + 1
    if ((domain.d - 2) * domain.bc.lowest_index ** 2 + n_next ** 2) / (2 * domain.L) ** 2 <= E:
        warnings.warn(f"transverse cutoff N_max={domain.N_max} truncates the lattice at E={E}",
                      TruncationWarning, stacklevel=2)
    if E - domain.lambda_min >= (math.pi * (domain.M_max + 1) / domain.X) ** 2:
        warnings.warn(f"longitudinal cutoff M_max={domain.M_max} truncates the lattice at E={E}",
                      TruncationWarning, stacklevel=2)
    order = _ordered(n, m)
    return FrequencyLattice(n[order], m[order], domain.L, domain.X, float(E))


def longitudinal_functions(m_values, y, X: float) -> np.ndarray:
    """Orthonormal real trigonometric basis on the periodic interval ``[-X, X)``."""
    m_values = np.asarray(m_values)
    y = np.asarray(y, dtype=float)[:, None]
    xi = math.pi * np.abs(m_values)[None, :] / X
    out = np.where(m_values[None, :] >= 0, np.cos(xi * y), np.sin(xi * y)) / math.sqrt(X)
    return np.where(m_values[None, :] == 0, 1.0 / math.sqrt(2.0 * X), out)

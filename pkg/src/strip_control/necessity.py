"""Necessity side: sparse parallelepiped sequences and the Gaussian-mass divergence test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import erf, erfc

from .domain import StripDomain
from .geometry import (GeometryError, Parallelepiped, SetDescription, ThicknessCertificate,
                       decompose, estimate_thickness, tensor_measures)
from .heat import KernelParams, cube_for, kernel_cube_series

INF_SENTINEL = math.inf

DIVERGENT = "divergence-consistent (non-thick)"
BOUNDED = "bounded-consistent (thick)"
INCONCLUSIVE = "inconclusive at this n_max"


class NecessityError(ValueError):
    pass


@dataclass(frozen=True)
class QnRecord:
    n: int
    Q: Parallelepiped
    ratio: float
    sparse: bool      # ratio < 1/n^2


def qn_sequence(S: SetDescription, domain: StripDomain, n_max: int, step: float = 0.25,
                anchor: float = 0.0) -> list[QnRecord]:
    """Least-covered parallelepiped of sides ``(2piL, ..., 2piL, n)`` for n = 1..n_max.

    Centers sit on the transverse midpoint ``(piL, ..., piL)`` and on a grid of
    spacing ``step`` along the strip; among equally sparse candidates the one
    closest to ``anchor`` wins (then the smaller coordinate).
    """
    if n_max < 1:
        raise NecessityError("n_max must be >= 1")
    if n_max > 2 * domain.X:
        raise NecessityError(f"n={n_max} exceeds the longitudinal search range 2X={2 * domain.X}")
    d = domain.d
    mid = math.pi * domain.L
    out = []
    for n in range(1, n_max + 1):
        a = np.array([domain.width] * (d - 1) + [float(n)])
        lo, hi = -domain.X + n / 2, domain.X - n / 2
        k = int(math.floor((hi - lo) / step + 1e-9))
        ys = lo + step * np.arange(k + 1)
        if hi - ys[-1] > 1e-9:
            ys = np.append(ys, hi)
        centers = [np.array([mid])] * (d - 1) + [ys]
        ratios = tensor_measures(S, a, centers).reshape(-1) / float(np.prod(a))
        best = ratios.min()
        cand = np.flatnonzero(ratios <= best + 1e-12)
        order = np.lexsort((ys[cand], np.abs(ys[cand] - anchor)))
        y = ys[cand[order[0]]]
        Q = Parallelepiped((mid,) * (d - 1) + (y,), tuple(a))
        r = float(ratios[cand[order[0]]])
        out.append(QnRecord(n, Q, r, bool(r < 1.0 / n ** 2)))
    return out


@dataclass(frozen=True)
class MillerEvaluation:
    y: tuple
    T: float
    kappa: float
    integral: float
    tail_bound: float
    d_b: float
    value: float

    @property
    def first_term(self) -> float:
        return -2 * self.T * math.log(self.integral) if self.integral > 0 else INF_SENTINEL


def _gauss_mass(lo, hi, c, T):
    """``int_lo^hi exp(-(x-c)^2 / (2T)) dx`` for arrays of intervals."""
    s = math.sqrt(2 * T)
    u = (np.asarray(lo, dtype=float) - c) / s
    v = (np.asarray(hi, dtype=float) - c) / s
    # erfc differences keep far-away intervals from cancelling to zero
    diff = np.where(u >= 0, erfc(u) - erfc(v),
                    np.where(v <= 0, erfc(-v) - erfc(-u), erf(v) - erf(u)))
    return math.sqrt(math.pi * T / 2) * diff


def gaussian_mass(S: SetDescription, y, T: float, domain: StripDomain,
                  reach: float = 12.0) -> tuple[float, float]:
    """``int_{S cap window} exp(-|x-y|^2 / (2T)) dx`` and a bound on the neglected part.

    The window is the strip cross-section times ``[y_d - R, y_d + R]`` clipped
    to ``[-X, X]``, with ``R = reach * sqrt(2T)``.  Integration is exact on
    each cell where S is constant.
    """
    y = np.asarray(y, dtype=float)
    d = domain.d
    R = reach * math.sqrt(2 * T)
    lo = np.array([0.0] * (d - 1) + [max(-domain.X, y[-1] - R)])
    hi = np.array([domain.width] * (d - 1) + [min(domain.X, y[-1] + R)])
    edges, mask = decompose(S, lo, hi)
    out = mask.astype(float)
    for ax, e in enumerate(edges):
        out = np.tensordot(out, _gauss_mass(e[:-1], e[1:], y[ax], T), axes=([0], [0]))
    integral = float(out)
    # neglected longitudinal tails, with the full transverse mass as a cap
    cross = 1.0
    for ax in range(d - 1):
        cross *= float(_gauss_mass(0.0, domain.width, y[ax], T))
    s = math.sqrt(2 * T)
    tail = math.sqrt(math.pi * T / 2) * (erfc((y[-1] - lo[-1]) / s) + erfc((hi[-1] - y[-1]) / s))
    return integral, cross * tail


def boundary_distance(y, T: float, domain: StripDomain) -> float:
    y = np.asarray(y, dtype=float)
    dist = float(np.min(np.minimum(y[:-1], domain.width - y[:-1])))
    return min(dist, T * math.pi ** 2 * domain.d / 4)


def miller_functional(S: SetDescription, y, T: float, kappa: float, domain: StripDomain) -> MillerEvaluation:
    if kappa <= 1:
        raise NecessityError("kappa must exceed 1")
    if T <= 0:
        raise NecessityError("T must be positive")
    y = np.asarray(y, dtype=float)
    if y.shape != (domain.d,) or np.any(y[:-1] < 0) or np.any(y[:-1] > domain.width):
        raise NecessityError("y must be a point of the strip")
    integral, tail = gaussian_mass(S, y, T, domain)
    db = boundary_distance(y, T, domain)
    if integral <= 0:
        value = INF_SENTINEL
    else:
        penalty = kappa * math.pi ** 2 * domain.d ** 2 / 4 * (T / db) ** 2 if db > 0 else math.inf
        value = -2 * T * math.log(integral) - penalty
    return MillerEvaluation(tuple(float(v) for v in y), T, kappa, integral, tail, db, value)


def thick_functional_bound(gamma: float, a: Sequence[float], T: float) -> float:
    """Upper bound ``-2T log(exp(-D^2/2T) gamma prod a)`` valid for thick sets."""
    a = np.asarray(a, dtype=float)
    D2 = float(np.sum(a ** 2))
    return D2 - 2 * T * math.log(gamma * float(np.prod(a)))


@dataclass
class ProbeVerdict:
    verdict: str
    records: list
    evaluations: list
    bound: Optional[float]
    certificate: Optional[ThicknessCertificate]

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.evaluations])


def _eventually_increasing(values: np.ndarray, tail: int) -> bool:
    tail_vals = values[-tail:]
    return bool(len(tail_vals) >= 2 and np.all(np.diff(tail_vals) > 0))


def thickness_equivalence_probe(S: SetDescription, T: float, kappa: float, n_max: int,
                                domain: StripDomain, certificate: Optional[ThicknessCertificate] = None,
                                threshold: float = 10.0, step: float = 0.25) -> ProbeVerdict:
    """Evaluate the functional along the sparse-parallelepiped centers and classify.

    Without a certificate one is searched at sides ``(2piL, ..., 2piL, 2)``.
    """
    records = qn_sequence(S, domain, n_max, step=step)
    evals = [miller_functional(S, np.asarray(r.Q.center), T, kappa, domain) for r in records]
    values = np.array([e.value for e in evals])
    if certificate is None:
        a = (domain.width,) * (domain.d - 1) + (min(2.0, domain.X),)
        try:
            certificate = estimate_thickness(S, a, domain, step)
        except GeometryError:
            certificate = None
    bound = None
    if certificate is not None and certificate.certifying and certificate.gamma_est > 0:
        bound = thick_functional_bound(certificate.gamma_est, certificate.a, T)
        if np.all(values <= bound + 1e-12 * max(1.0, abs(bound))):
            return ProbeVerdict(BOUNDED, records, evals, bound, certificate)
    first = values[0]
    rise = values[np.isfinite(values)].max(initial=-math.inf) - first if np.isfinite(first) else math.inf
    grew = (not np.isfinite(first)) or np.any(~np.isfinite(values)) or rise > threshold * max(abs(first), 1.0)
    if grew and (np.any(~np.isfinite(values[-1:])) or _eventually_increasing(values, max(2, len(values) // 4))):
        return ProbeVerdict(DIVERGENT, records, evals, bound, certificate)
    return ProbeVerdict(INCONCLUSIVE, records, evals, bound, certificate)


@dataclass(frozen=True)
class WitnessResult:
    value: float
    quadrature: Optional[float]
    holds: Optional[bool]
    log_value: float = -math.inf    # stays finite when value underflows


def dirichlet_lower_witness(x_n, T: float, domain: StripDomain, params: KernelParams = KernelParams(),
                            check: bool = True, points: Optional[int] = None) -> WitnessResult:
    """``(2/(piL))^d exp(-2(1+T)d/L^2)``, optionally compared with the quadrature of
    ``int_W K_W(1+T, x, x_n)^2 dx`` over the cube of side ``piL`` at ``x_n``."""
    L, d = domain.L, domain.d
    x_n = np.asarray(x_n, dtype=float)
    half = math.pi * L / 2
    if np.any(x_n[:-1] < half * (1 - 1e-12)) or np.any(x_n[:-1] > domain.width - half * (1 - 1e-12)):
        raise NecessityError("cube of side pi*L does not fit in the strip")
    log_value = d * math.log(2 / (math.pi * L)) - 2 * (1 + T) * d / L ** 2
    value = math.exp(log_value)
    if not check:
        return WitnessResult(value, None, None, log_value)
    W = cube_for(x_n, L)
    n = points or (128 if d == 2 else 40)
    h = W.side / n
    axes = [W.lo[j] + (np.arange(n) + 0.5) * h for j in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    K = kernel_cube_series(1 + T, mesh, x_n, W, params)
    quad = float(np.sum(K ** 2) * h ** d)
    return WitnessResult(value, quad, bool(quad >= value * (1 - 1e-9)), log_value)

"""Controllability Gramians, HUM and staged controls, and the explicit cost constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
import scipy.integrate

from .domain import FrequencyLattice, StripDomain, full_lattice
from .geometry import SetDescription, cell_weights
from .heat import HeatState
from .linalg import IllConditionedError, conjugate_gradient, largest_generalized_eigenvalue
from .spectral import BandLimitedField, ModalBasis, synthesize

NOT_OBSERVABLE = "Gramian ill-conditioned (set effectively non-observable at this truncation)"


class ControlError(ArithmeticError):
    pass


def decay_integral(sigma, tau: float):
    """``int_0^tau exp(-s sigma) ds`` evaluated stably (``tau`` at ``sigma = 0``)."""
    sigma = np.asarray(sigma, dtype=float)
    x = tau * sigma
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, sigma)
    return np.where(small, tau * (1 - x / 2), -np.expm1(-x) / safe)


class ControlModel:
    """Gram data of a control region on the truncated model.

    ``G`` is the quadrature Gram matrix of the eigenbasis over the region and
    ``mu`` the mode energies; every time-dependent operator is assembled from
    these two.
    """

    def __init__(self, domain: StripDomain, omega: Optional[SetDescription],
                 lattice: Optional[FrequencyLattice] = None):
        self.domain = domain
        self.omega = omega
        self.lattice = lattice if lattice is not None else full_lattice(domain)
        self.basis = ModalBasis(domain, self.lattice)
        self.weights = np.ones(domain.grid_shape) if omega is None else cell_weights(omega, domain)
        self.G = self.basis.gram(self.weights)
        self.mu = self.lattice.energies

    def __len__(self):
        return len(self.mu)

    def segment_matrix(self, a1: float, a2: float, lo: float, hi: float) -> np.ndarray:
        """``int_lo^hi e^{-(a1-t)mu_p} G_pq e^{-(a2-t)mu_q} dt`` for anchors ``a1, a2 >= hi``."""
        if hi <= lo:
            return np.zeros_like(self.G)
        mu = self.mu
        left = np.exp(-(a1 - hi) * mu)
        right = np.exp(-(a2 - hi) * mu)
        F = decay_integral(mu[:, None] + mu[None, :], hi - lo)
        return self.G * F * left[:, None] * right[None, :]

    def gramian(self, T: float, n_t: Optional[int] = None) -> np.ndarray:
        """``int_0^T e^{s Delta} chi e^{s Delta} ds`` in coefficient space.

        Exact in time by default; ``n_t`` switches to the trapezoidal rule.
        """
        if T <= 0:
            raise ControlError("control horizon must be positive")
        if n_t is None:
            return self.segment_matrix(T, T, 0.0, T)
        if n_t < 2:
            raise ControlError("trapezoidal rule needs n_t >= 2")
        s = np.linspace(0.0, T, n_t)
        w = np.full(n_t, T / (n_t - 1))
        w[[0, -1]] *= 0.5
        sigma = self.mu[:, None] + self.mu[None, :]
        acc = np.zeros_like(self.G)
        for si, wi in zip(s, w):
            acc += wi * np.exp(-si * sigma)
        return self.G * acc


def gramian_apply(phi, T: float, omega: Optional[SetDescription], domain: StripDomain,
                  n_t: Optional[int] = None, model: Optional[ControlModel] = None) -> np.ndarray:
    model = model if model is not None else ControlModel(domain, omega)
    return model.gramian(T, n_t) @ np.asarray(phi, dtype=float)


# -- controls ----------------------------------------------------------------------

@dataclass
class Segment:
    """Control ``chi_omega e^{(end - t) Delta} phi`` on ``[start, end]``."""

    start: float
    end: float
    phi: np.ndarray


@dataclass
class ControlFunction:
    model: ControlModel
    T: float
    segments: list
    norm: float = 0.0
    n_t: int = 129

    def __post_init__(self):
        self.norm = math.sqrt(max(self.inner(self), 0.0))

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t)

    def coefficients_at(self, t: float) -> np.ndarray:
        c = np.zeros(len(self.model))
        for seg in self.segments:
            if seg.start <= t <= seg.end:
                c = c + np.exp(-(seg.end - t) * self.model.mu) * seg.phi
                break
        return c

    def samples_at(self, t: float) -> np.ndarray:
        """Grid values at time ``t``, zero on cells not meeting the control region."""
        f = BandLimitedField.from_lattice(self.model.lattice, self.coefficients_at(t))
        return synthesize(f, self.model.domain) * (self.model.weights > 0)

    def samples(self) -> np.ndarray:
        return np.stack([self.samples_at(t) for t in self.times])

    def inner(self, other: "ControlFunction") -> float:
        """Exact ``L^2((0,T) x omega)`` inner product of two controls."""
        total = 0.0
        for s1 in self.segments:
            for s2 in other.segments:
                lo, hi = max(s1.start, s2.start), min(s1.end, s2.end)
                if hi > lo:
                    total += s1.phi @ self.model.segment_matrix(s1.end, s2.end, lo, hi) @ s2.phi
        return float(total)

    def final_effect(self) -> np.ndarray:
        """Contribution of the control to the state at time ``T``."""
        out = np.zeros(len(self.model))
        for seg in self.segments:
            out += np.exp(-(self.T - seg.end) * self.model.mu) * (
                self.model.segment_matrix(seg.end, seg.end, seg.start, seg.end) @ seg.phi)
        return out

    def recompute_norm(self) -> float:
        """Norm by adaptive quadrature in time (independent of the closed form)."""
        G, mu = self.model.G, self.model.mu
        total = 0.0
        for seg in self.segments:
            def integrand(t, seg=seg):
                c = np.exp(-(seg.end - t) * mu) * seg.phi
                return c @ G @ c
            val, _ = scipy.integrate.quad(integrand, seg.start, seg.end, epsabs=0.0, epsrel=1e-13, limit=200)
            total += val
        return math.sqrt(max(total, 0.0))


@dataclass(frozen=True)
class ObservabilityHypotheses:
    c1: float
    eta1: float = 0.5
    eta2: float = 1.0
    m: float = 1.0
    c2: float = 1.0
    t0: float = math.inf

    def __post_init__(self):
        if not self.eta1 < self.eta2:
            raise ControlError("need eta1 < eta2")
        if self.c1 < 3 * math.e * (1 - 1e-12):
            raise ControlError(f"c1={self.c1} below 3e")


@dataclass
class CostReport:
    T: float
    c1: Optional[float] = None
    tau0: Optional[float] = None
    log_sqrt_C1: Optional[float] = None
    C2: Optional[float] = None
    log_CT: Optional[float] = None
    observability_constant: Optional[float] = None
    control_cost: Optional[float] = None
    final_residual: Optional[float] = None

    COLUMNS = ("T", "c1", "tau0", "log_sqrt_C1", "C2", "log_CT",
               "observability_constant", "control_cost", "final_residual")

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in self.COLUMNS}

    def merged(self, other: "CostReport") -> "CostReport":
        vals = {k: getattr(self, k) if getattr(self, k) is not None else getattr(other, k)
                for k in self.COLUMNS}
        return CostReport(**vals)

    @property
    def margin(self) -> Optional[float]:
        """``log C_T - log(cost)``: how far the achieved cost sits below the bound."""
        if self.log_CT is None or not self.control_cost:
            return None
        return self.log_CT - math.log(self.control_cost)


def _log_factor(gamma, a, d, K):
    if not (0 < gamma <= 1):
        raise ControlError(f"gamma must lie in (0, 1], got {gamma}")
    if K < math.e:
        raise ControlError(f"K must be >= e, got {K}")
    if len(a) != d or min(a) <= 0:
        raise ControlError("side vector a must have d positive entries")
    return K * (sum(a) + d), d * math.log(2 * K) - math.log(gamma)


def cost_constants(gamma: float, a: Sequence[float], d: int, K: float = math.e, T: float = 1.0) -> CostReport:
    if T <= 0:
        raise ControlError("T must be positive")
    ka, lg = _log_factor(gamma, a, d, K)
    c1 = 4 * ka * lg
    tau0 = 2 ** 2.5 * 3 * c1
    log_sqrt_C1 = 12 * math.sqrt(2) * ka * lg
    C2 = 144 * (4 * ka) ** 2 * lg ** 2
    return CostReport(T=T, c1=c1, tau0=tau0, log_sqrt_C1=log_sqrt_C1, C2=C2,
                      log_CT=log_sqrt_C1 + C2 / (2 * T))


def h_conditions_check(c1: float, tau: float) -> tuple[float, float, bool]:
    """``h1 <= 1/4``, ``h2 >= 1`` and ``tau <= tau0``; ``h2`` may overflow to inf."""
    if tau <= 0:
        raise ControlError("tau must be positive")
    h1 = math.exp(-24 * c1 ** 2 / tau) / tau
    log_h2 = 144 * c1 ** 2 / tau - math.log(tau)
    h2 = math.exp(log_h2) if log_h2 < 700 else math.inf
    tau0 = 2 ** 2.5 * 3 * c1
    ok = h1 <= 0.25 and log_h2 >= 0 and tau <= tau0 * (1 + 1e-12)
    return h1, h2, bool(ok)


# -- HUM ---------------------------------------------------------------------------

def _solve(matrix: np.ndarray, rhs: np.ndarray, tol: float) -> np.ndarray:
    res = conjugate_gradient(lambda v: matrix @ v, rhs, tol=tol, maxiter=10 * max(len(rhs), 1))
    if not res.converged:
        raise ControlError(NOT_OBSERVABLE)
    return res.x


def _as_model(domain, omega, model):
    if model is None:
        model = ControlModel(domain, omega)
    return model


def hum_control(u0: HeatState, T: float, omega: Optional[SetDescription], domain: StripDomain,
                tol: float = 1e-8, n_t: Optional[int] = None,
                model: Optional[ControlModel] = None) -> tuple[ControlFunction, HeatState, CostReport]:
    """Minimal-norm null control on ``[0, T]`` from the Gramian equation."""
    model = _as_model(domain, omega, model)
    if T <= 0:
        raise ControlError("T must be positive")
    if np.all(model.weights == 0):
        raise ControlError(NOT_OBSERVABLE)
    free = np.exp(-T * model.mu) * u0.coefficients
    Lam = model.gramian(T, n_t)
    phi = _solve(Lam, -free, tol)
    ctrl = ControlFunction(model, T, [Segment(0.0, T, phi)])
    final = HeatState(model.lattice, free + Lam @ phi, u0.time_stamp + T)
    report = CostReport(T=T, control_cost=ctrl.norm, final_residual=final.norm())
    return ctrl, final, report


def empirical_observability_constant(T: float, omega: Optional[SetDescription], domain: StripDomain,
                                     seed: int = 0, model: Optional[ControlModel] = None,
                                     tol: float = 1e-10) -> float:
    """Smallest ``C`` with ``||e^{T Delta} g||^2 <= C int_0^T ||e^{t Delta} g||_omega^2 dt``."""
    model = _as_model(domain, omega, model)
    if np.all(model.weights == 0):
        raise ControlError(NOT_OBSERVABLE)
    # factor out the slowest decay so long horizons do not underflow
    mu0 = float(model.mu.min())
    D2 = np.diag(np.exp(-2 * T * (model.mu - mu0)))
    try:
        theta, _ = largest_generalized_eigenvalue(D2, model.gramian(T), rng=np.random.default_rng(seed), tol=tol)
    except IllConditionedError:
        raise ControlError(NOT_OBSERVABLE) from None
    return theta * math.exp(-2 * T * mu0)


# -- staged construction -------------------------------------------------------

@dataclass(frozen=True)
class LRSchedule:
    E0: Optional[float] = None     # None: lambda_min + 1
    k_max: int = 4

    def energies(self, domain: StripDomain) -> list:
        E0 = domain.lambda_min + 1 if self.E0 is None else self.E0
        return [E0 * 4 ** k for k in range(self.k_max + 1)]

    def lengths(self, T: float) -> list:
        return [T * 2.0 ** -(k + 1) for k in range(self.k_max + 1)]


@dataclass
class StageRecord:
    k: int
    E: float
    start: float
    length: float
    modes: int
    cost: float
    norm_after_control: float
    norm_end: float


def lr_synthesize(u0: HeatState, T: float, omega: Optional[SetDescription], schedule: LRSchedule,
                  domain: StripDomain, tol: float = 1e-10,
                  model: Optional[ControlModel] = None) -> tuple[ControlFunction, list, CostReport]:
    """Alternate low-mode HUM control and free decay on dyadic intervals."""
    model = _as_model(domain, omega, model)
    if T <= 0:
        raise ControlError("T must be positive")
    mu = model.mu
    state = u0.coefficients.copy()
    t = 0.0
    segments, trace = [], []
    for k, (E, Tk) in enumerate(zip(schedule.energies(domain), schedule.lengths(T))):
        tau = Tk / 2
        P = np.flatnonzero(mu <= E * (1 + 1e-12))
        free = np.exp(-tau * mu) * state
        phi = np.zeros(len(mu))
        Lam = None
        if len(P) and np.any(state[P] != 0):
            Lam = model.gramian(tau)
            phi[P] = _solve(Lam[np.ix_(P, P)], -free[P], tol)
            state = free + Lam[:, P] @ phi[P]
        else:
            state = free
        cost = math.sqrt(max(phi[P] @ Lam[np.ix_(P, P)] @ phi[P], 0.0)) if Lam is not None else 0.0
        after = float(np.linalg.norm(state))
        segments.append(Segment(t, t + tau, phi))
        state = np.exp(-tau * mu) * state
        t += Tk
        end = float(np.linalg.norm(state))
        prev = trace[-1].norm_end if trace else u0.norm()
        if prev > 0 and end >= prev:
            raise ControlError(f"stage {k} did not reduce the state norm; truncation too small")
        trace.append(StageRecord(k, E, t - Tk, Tk, len(P), cost, after, end))
    state = np.exp(-(T - t) * mu) * state
    ctrl = ControlFunction(model, T, segments)
    report = CostReport(T=T, control_cost=ctrl.norm, final_residual=float(np.linalg.norm(state)))
    return ctrl, trace, report


def stage_norms(u0: HeatState, trace: Sequence[StageRecord]) -> np.ndarray:
    return np.array([u0.norm()] + [r.norm_end for r in trace])


def summability_ratio(trace: Sequence[StageRecord]) -> Optional[float]:
    """Largest ratio of consecutive stage costs after the first stage (None if undefined)."""
    costs = [r.cost for r in trace]
    ratios = [b / a for a, b in zip(costs[1:], costs[2:]) if a > 0]
    return max(ratios) if ratios else None

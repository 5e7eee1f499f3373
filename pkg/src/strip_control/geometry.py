"""Symbolic axis-aligned control sets and exact measure computations.

Every set knows where its indicator can jump along each axis
(``breakpoints``) and how to test membership of points.  Inside any bounded
window the breakpoints split space into a rectilinear grid on whose cells the
indicator is constant, so measures of intersections with parallelepipeds
reduce to products of 1-D interval overlaps contracted against a boolean mask.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .domain import StripDomain

MAX_DEPTH = 32
_REL = 1e-12


class GeometryError(ValueError):
    pass


def _as_points(points, dim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != dim:
        raise GeometryError(f"points must have {dim} coordinates")
    return pts


class SetDescription(ABC):
    """A measurable subset of R^d built from boxes and set operations."""

    dim: int

    @property
    @abstractmethod
    def depth(self) -> int:
        ...

    @abstractmethod
    def contains(self, points) -> np.ndarray:
        """Membership of points with shape ``(N, d)``."""

    @abstractmethod
    def _breakpoints(self, axis: int, lo: float, hi: float) -> np.ndarray:
        ...

    @abstractmethod
    def period(self, axis: int) -> Optional[float]:
        """Translation period along ``axis``; 0.0 means invariant, None aperiodic."""

    def breakpoints(self, axis: int, lo: float, hi: float) -> np.ndarray:
        pts = np.asarray(self._breakpoints(axis, lo, hi), dtype=float)
        pts = pts[(pts >= lo) & (pts <= hi)]
        return np.unique(pts)

    def _check_depth(self):
        if self.depth > MAX_DEPTH:
            raise GeometryError(f"nesting depth exceeded ({self.depth} > {MAX_DEPTH})")

    def __or__(self, other):
        return Union([self, other])

    def __and__(self, other):
        return Intersection([self, other])

    def __invert__(self):
        return Complement(self)


def _combined_period(periods) -> Optional[float]:
    finite = [p for p in periods if p is None or p > 0]
    if any(p is None for p in finite):
        return None
    if not finite:
        return 0.0
    base = finite[0]
    for p in finite[1:]:
        ratio = max(p, base) / min(p, base)
        if abs(ratio - round(ratio)) > 1e-9:
            return None
        base = max(p, base)
    return base


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi):
            raise GeometryError("box bounds of different dimension")
        if any(h < l for l, h in zip(lo, hi)):
            raise GeometryError(f"box with negative side: {lo} > {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))


class BoxUnion(SetDescription):
    """Finite union of closed axis-aligned boxes (bounds may be infinite)."""

    def __init__(self, boxes: Sequence, dim: Optional[int] = None):
        boxes = [b if isinstance(b, Box) else Box(*b) for b in boxes]
        if dim is None:
            if not boxes:
                raise GeometryError("empty BoxUnion needs an explicit dimension")
            dim = boxes[0].dim
        if any(b.dim != dim for b in boxes):
            raise GeometryError("boxes of mixed dimension")
        self.boxes = tuple(boxes)
        self.dim = dim
        self._lo = np.array([b.lo for b in boxes]).reshape(-1, dim)
        self._hi = np.array([b.hi for b in boxes]).reshape(-1, dim)

    @property
    def depth(self) -> int:
        return 1

    def contains(self, points):
        pts = _as_points(points, self.dim)
        if not self.boxes:
            return np.zeros(len(pts), dtype=bool)
        inside = (pts[:, None, :] >= self._lo[None]) & (pts[:, None, :] <= self._hi[None])
        return np.any(np.all(inside, axis=2), axis=1)

    def _breakpoints(self, axis, lo, hi):
        vals = np.concatenate([self._lo[:, axis], self._hi[:, axis]])
        return vals[np.isfinite(vals)]

    def period(self, axis):
        if all(math.isinf(b.lo[axis]) and math.isinf(b.hi[axis]) for b in self.boxes):
            return 0.0
        return None

    def __repr__(self):
        return f"BoxUnion({len(self.boxes)} boxes, dim={self.dim})"


def product_section(section_boxes: Sequence, dim: int) -> BoxUnion:
    """Section (boxes in the d-1 transverse coordinates) times the whole longitudinal axis."""
    boxes = []
    for b in section_boxes:
        b = b if isinstance(b, Box) else Box(*b)
        if b.dim != dim - 1:
            raise GeometryError("section boxes must have d-1 coordinates")
        boxes.append(Box(b.lo + (-math.inf,), b.hi + (math.inf,)))
    return BoxUnion(boxes, dim=dim)


class Periodic(SetDescription):
    """Periodic repetition of ``child``; ``child`` must lie in one period cell."""

    def __init__(self, child: SetDescription, periods: Sequence, origin: Optional[Sequence] = None):
        self.child = child
        self.dim = child.dim
        self.periods = tuple(None if (p is None or p == 0) else float(p) for p in periods)
        if len(self.periods) != self.dim:
            raise GeometryError("one period entry per axis required")
        if any(p is not None and p < 0 for p in self.periods):
            raise GeometryError("periods must be positive")
        self.origin = tuple(float(o) for o in (origin or (0.0,) * self.dim))
        for ax, p in enumerate(self.periods):
            if p is None:
                continue
            o = self.origin[ax]
            bps = child.breakpoints(ax, o - p, o + 2 * p)
            tol = 1e-9 * max(1.0, p)
            if len(bps) and (bps.min() < o - tol or bps.max() > o + p + tol):
                raise GeometryError(f"periodic cell does not fit its period on axis {ax}")
        self._check_depth()

    @property
    def depth(self):
        return self.child.depth + 1

    def contains(self, points):
        pts = _as_points(points, self.dim).copy()
        for ax, p in enumerate(self.periods):
            if p is not None:
                o = self.origin[ax]
                pts[:, ax] = o + np.mod(pts[:, ax] - o, p)
        return self.child.contains(pts)

    def _breakpoints(self, axis, lo, hi):
        p = self.periods[axis]
        if p is None:
            return self.child.breakpoints(axis, lo, hi)
        o = self.origin[axis]
        cell = np.concatenate([self.child.breakpoints(axis, o, o + p), [o]])
        k0 = math.floor((lo - o) / p) - 1
        k1 = math.ceil((hi - o) / p) + 1
        shifts = np.arange(k0, k1 + 1) * p
        return (cell[None, :] + shifts[:, None]).ravel()

    def period(self, axis):
        p = self.periods[axis]
        if p is not None:
            child_p = self.child.period(axis)
            return 0.0 if child_p == 0.0 else p
        return self.child.period(axis)


class _Composite(SetDescription):
    def __init__(self, children: Sequence[SetDescription]):
        children = list(children)
        if not children:
            raise GeometryError("set operation needs at least one operand")
        self.dim = children[0].dim
        if any(c.dim != self.dim for c in children):
            raise GeometryError("operands of mixed dimension")
        self.children = tuple(children)
        self._check_depth()

    @property
    def depth(self):
        return 1 + max(c.depth for c in self.children)

    def _breakpoints(self, axis, lo, hi):
        parts = [c.breakpoints(axis, lo, hi) for c in self.children]
        return np.concatenate(parts) if parts else np.zeros(0)

    def period(self, axis):
        return _combined_period([c.period(axis) for c in self.children])


class Union(_Composite):
    def contains(self, points):
        pts = _as_points(points, self.dim)
        out = np.zeros(len(pts), dtype=bool)
        for c in self.children:
            out |= c.contains(pts)
        return out


class Intersection(_Composite):
    def contains(self, points):
        pts = _as_points(points, self.dim)
        out = np.ones(len(pts), dtype=bool)
        for c in self.children:
            out &= c.contains(pts)
        return out


class Complement(SetDescription):
    """Complement in R^d."""

    def __init__(self, child: SetDescription):
        self.child = child
        self.dim = child.dim
        self._check_depth()

    @property
    def depth(self):
        return self.child.depth + 1

    def contains(self, points):
        return ~self.child.contains(points)

    def _breakpoints(self, axis, lo, hi):
        return self.child.breakpoints(axis, lo, hi)

    def period(self, axis):
        return self.child.period(axis)


class Mirror(SetDescription):
    """Reflection of ``child`` through the hyperplane ``x_axis = center``."""

    def __init__(self, child: SetDescription, axis: int, center: float = 0.0):
        self.child = child
        self.dim = child.dim
        self.axis = int(axis)
        self.center = float(center)
        self._check_depth()

    @property
    def depth(self):
        return self.child.depth + 1

    def contains(self, points):
        pts = _as_points(points, self.dim).copy()
        pts[:, self.axis] = 2 * self.center - pts[:, self.axis]
        return self.child.contains(pts)

    def _breakpoints(self, axis, lo, hi):
        if axis != self.axis:
            return self.child.breakpoints(axis, lo, hi)
        c2 = 2 * self.center
        return c2 - self.child.breakpoints(axis, c2 - hi, c2 - lo)

    def period(self, axis):
        return self.child.period(axis)


# -- convenience constructors ---------------------------------------------------

def empty_set(dim: int) -> BoxUnion:
    return BoxUnion([], dim=dim)


def full_space(dim: int) -> BoxUnion:
    return BoxUnion([Box((-math.inf,) * dim, (math.inf,) * dim)])


def strip_set(d: int, L: float) -> BoxUnion:
    """The open strip (0, 2*pi*L)^(d-1) x R (closure; boundaries are null sets)."""
    w = 2 * math.pi * L
    return BoxUnion([Box((0.0,) * (d - 1) + (-math.inf,), (w,) * (d - 1) + (math.inf,))])


def stripes(domain: StripDomain, width: float = 1.0, period: float = 2.0, offset: float = 0.0) -> Periodic:
    """Longitudinal stripes ``{x_d in U_k [offset + k*period, offset + k*period + width]}``."""
    d = domain.d
    cell = BoxUnion([Box((0.0,) * (d - 1) + (offset,), (domain.width,) * (d - 1) + (offset + width,))])
    return Periodic(cell, (None,) * (d - 1) + (period,), origin=(0.0,) * (d - 1) + (offset,))


# -- exact measures -------------------------------------------------------------

def decompose(S: SetDescription, lo, hi):
    """Split the window ``[lo, hi]`` into cells on which S is constant.

    Returns per-axis edge arrays and a boolean mask (True where the cell lies in S).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    edges = []
    for ax in range(S.dim):
        bps = S.breakpoints(ax, lo[ax], hi[ax])
        e = np.unique(np.concatenate([[lo[ax], hi[ax]], bps]))
        edges.append(e)
    mids = [0.5 * (e[:-1] + e[1:]) for e in edges]
    if any(len(m) == 0 for m in mids):
        shape = tuple(max(len(m), 0) for m in mids)
        return edges, np.zeros(shape, dtype=bool)
    mesh = np.meshgrid(*mids, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    mask = S.contains(pts).reshape(mesh[0].shape)
    return edges, mask


def _overlaps(edges: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """``|[e_i, e_{i+1}] cap [lo_q, hi_q]|`` with shape (intervals, queries)."""
    a = np.maximum(edges[:-1, None], lo[None, :])
    b = np.minimum(edges[1:, None], hi[None, :])
    return np.clip(b - a, 0.0, None)


def _contract(mask: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    out = mask.astype(float)
    for f in factors:
        # contract the leading (interval) axis; the query axis moves to the back
        out = np.tensordot(out, f, axes=([0], [0]))
    return out


def tensor_measures(S: SetDescription, a, centers: Sequence[np.ndarray]) -> np.ndarray:
    """``|S cap P|`` for every parallelepiped with sides ``a`` centred on the tensor grid."""
    a = np.asarray(a, dtype=float)
    centers = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centers]
    lo = np.array([c.min() - s / 2 for c, s in zip(centers, a)])
    hi = np.array([c.max() + s / 2 for c, s in zip(centers, a)])
    edges, mask = decompose(S, lo, hi)
    factors = [_overlaps(e, c - s / 2, c + s / 2) for e, c, s in zip(edges, centers, a)]
    return _contract(mask, factors)


def box_measures(S: SetDescription, lo, hi) -> np.ndarray:
    """``|S cap P_k|`` for a batch of boxes given by rows of ``lo``/``hi``."""
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    edges, mask = decompose(S, lo.min(axis=0), hi.max(axis=0))
    out = np.zeros(len(lo))
    fm = mask.astype(float)
    factors = [_overlaps(e, lo[:, ax], hi[:, ax]) for ax, e in enumerate(edges)]
    # row-wise contraction: sum_cells mask * prod_ax overlap_ax[cell_ax, k]
    for k in range(len(lo)):
        v = fm
        for f in factors:
            v = np.tensordot(v, f[:, k], axes=([0], [0]))
        out[k] = v
    return out


@dataclass(frozen=True)
class Parallelepiped:
    center: tuple
    a: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if any(s <= 0 for s in self.a):
            raise GeometryError("parallelepiped sides must be positive")

    @property
    def lo(self) -> np.ndarray:
        return np.subtract(self.center, np.divide(self.a, 2))

    @property
    def hi(self) -> np.ndarray:
        return np.add(self.center, np.divide(self.a, 2))

    @property
    def volume(self) -> float:
        return float(np.prod(self.a))

    def is_interior(self, domain: StripDomain, tol: float = 1e-12) -> bool:
        lo, hi = self.lo[:-1], self.hi[:-1]
        return bool(np.all(lo >= -tol) and np.all(hi <= domain.width + tol))


def intersection_measure(S: SetDescription, P: Parallelepiped) -> float:
    """Exact Lebesgue measure of ``S cap P``."""
    if not np.all(np.isfinite(P.a)):
        raise GeometryError("parallelepiped must be bounded")
    edges, mask = decompose(S, P.lo, P.hi)
    factors = [np.diff(e)[:, None] for e in edges]
    return float(_contract(mask, factors).ravel()[0])


def cell_weights(S: SetDescription, domain: StripDomain) -> np.ndarray:
    """Fraction ``|cell cap S| / |cell|`` for every quadrature cell of the domain grid."""
    nodes = [domain.axis_nodes(ax) for ax in range(domain.d)]
    steps = [domain.axis_step(ax) for ax in range(domain.d)]
    vol = tensor_measures(S, steps, nodes)
    return np.clip(vol / domain.cell_volume, 0.0, 1.0)


# -- thickness -------------------------------------------------------------------

@dataclass(frozen=True)
class ThicknessCertificate:
    gamma_est: float
    a: tuple
    worst_P: Parallelepiped
    step: float
    exhaustive: bool

    @property
    def certifying(self) -> bool:
        # a non-exhaustive search only gives an upper bound on gamma
        return self.exhaustive

    def recompute(self, S: SetDescription) -> float:
        return intersection_measure(S, self.worst_P) / self.worst_P.volume


def _axis_grid(lo: float, hi: float, step: float) -> np.ndarray:
    if hi <= lo + 1e-14 * max(1.0, abs(lo)):
        return np.array([lo])
    k = int(math.floor((hi - lo) / step + 1e-9))
    grid = lo + step * np.arange(k + 1)
    if hi - grid[-1] > 1e-9 * step:
        grid = np.append(grid, hi)
    return grid


def _on_grid(points: np.ndarray, grid: np.ndarray, step: float) -> bool:
    if len(points) == 0:
        return True
    idx = np.searchsorted(grid, points)
    lo = np.abs(points - grid[np.clip(idx - 1, 0, len(grid) - 1)])
    hi = np.abs(points - grid[np.clip(idx, 0, len(grid) - 1)])
    return bool(np.all(np.minimum(lo, hi) <= 1e-9 * max(step, 1e-12)))


def _pick_min(values: np.ndarray, scale: float) -> tuple:
    flat = values.ravel()
    vmin = flat.min()
    first = int(np.flatnonzero(flat <= vmin + _REL * scale)[0])
    return np.unravel_index(first, values.shape)


def search_ranges(S: SetDescription, a, domain: StripDomain, region: str = "strip",
                  ranges: Optional[Sequence] = None) -> list:
    """Per-axis center ranges for the translation search."""
    a = np.asarray(a, dtype=float)
    d = domain.d
    out = []
    for ax in range(d):
        if ranges is not None and ranges[ax] is not None:
            lo, hi = ranges[ax]
        elif ax == d - 1:
            lo, hi = -domain.X + a[ax] / 2, domain.X - a[ax] / 2
        elif region == "strip":
            lo, hi = a[ax] / 2, domain.width - a[ax] / 2
        else:
            lo, hi = -a[ax] / 2, domain.width + a[ax] / 2
        if hi < lo:
            raise GeometryError(f"side a_{ax + 1}={a[ax]} does not fit the search window")
        p = S.period(ax)
        if p == 0.0:
            hi = lo
        elif p is not None and hi - lo > p:
            hi = lo + p
        out.append((float(lo), float(hi)))
    return out


def estimate_thickness(S: SetDescription, a, domain: StripDomain, step: float,
                       region: str = "strip", ranges: Optional[Sequence] = None) -> ThicknessCertificate:
    """Minimise ``|S cap P| / |P|`` over translates of the box with sides ``a``.

    ``region="strip"`` restricts to parallelepipeds inside the strip;
    ``region="full"`` searches boxes in R^d touching the closed strip.
    """
    a = np.asarray(a, dtype=float)
    if len(a) != domain.d or np.any(a <= 0):
        raise GeometryError("side vector must have d positive entries")
    if step <= 0:
        raise GeometryError("search step must be positive")
    if region == "strip" and np.any(a[:-1] > domain.width * (1 + 1e-12)):
        raise GeometryError(f"transverse side exceeds 2*pi*L={domain.width}")
    rngs = search_ranges(S, a, domain, region, ranges)
    grids = [_axis_grid(lo, hi, step) for lo, hi in rngs]
    vol = float(np.prod(a))
    ratios = tensor_measures(S, a, grids) / vol
    idx = _pick_min(ratios, 1.0)
    center = tuple(g[i] for g, i in zip(grids, idx))
    worst = Parallelepiped(center, tuple(a))

    exhaustive = S.period(domain.d - 1) is not None or ranges is not None
    if exhaustive:
        for ax, ((lo, hi), g) in enumerate(zip(rngs, grids)):
            if lo == hi:
                continue
            p = S.period(ax)
            if ranges is None and p and hi - lo < p * (1 - 1e-12) and ax == domain.d - 1:
                exhaustive = False
                break
            bps = S.breakpoints(ax, lo - a[ax], hi + a[ax])
            kinks = np.concatenate([bps - a[ax] / 2, bps + a[ax] / 2])
            kinks = kinks[(kinks > lo) & (kinks < hi)]
            if not _on_grid(kinks, g, step):
                exhaustive = False
                break
    gamma = float(np.clip(ratios[idx], 0.0, 1.0))
    return ThicknessCertificate(gamma, tuple(float(v) for v in a), worst, float(step), bool(exhaustive))


def sampled_min_ratio(S: SetDescription, a, centers: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimum ratio over an explicit list of centers; also returns all ratios."""
    a = np.asarray(a, dtype=float)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    ratios = box_measures(S, centers - a / 2, centers + a / 2) / float(np.prod(a))
    return float(ratios.min()), ratios


# -- reflection / embedding -----------------------------------------------------

def reflect_extend(S: SetDescription, domain: StripDomain, restrict: bool = False) -> SetDescription:
    """Mirror ``S cap Omega_L`` through each transverse coordinate plane, then
    repeat with period ``4*pi*L`` in the transverse directions."""
    d = domain.d
    current: SetDescription = Intersection([S, strip_set(d, domain.L)])
    for ax in range(d - 1):
        current = Union([current, Mirror(current, ax, 0.0)])
    w = domain.width
    extended = Periodic(current, (2 * w,) * (d - 1) + (None,), origin=(-w,) * (d - 1) + (0.0,))
    if restrict:
        return Intersection([extended, strip_set(d, 2 * domain.L)])
    return extended


def embed_thick(S: SetDescription, domain: StripDomain, certificate: ThicknessCertificate,
                step: Optional[float] = None) -> tuple[SetDescription, ThicknessCertificate, bool]:
    """``S cup (R^d minus Omega_L)`` with a searched certificate at sides ``2a``.

    Returns the set, the certificate found over boxes in R^d and whether it
    meets the guaranteed level ``gamma/2^d``.
    """
    d = domain.d
    strip = strip_set(d, domain.L)
    embedded = Union([Intersection([S, strip]), Complement(strip)])
    a2 = 2 * np.asarray(certificate.a, dtype=float)
    cert = estimate_thickness(embedded, a2, domain, step or certificate.step, region="full")
    target = certificate.gamma_est / 2 ** d
    return embedded, cert, bool(cert.gamma_est >= target * (1 - 1e-12))


def dump_boxes(S: SetDescription, lo, hi) -> list[tuple]:
    """Disjoint boxes (``lo_1, hi_1, ..., lo_d, hi_d``) covering ``S`` in the window."""
    edges, mask = decompose(S, lo, hi)
    rows = []
    for idx in zip(*np.nonzero(mask)):
        row = []
        for ax, i in enumerate(idx):
            row.extend([edges[ax][i], edges[ax][i + 1]])
        rows.append(tuple(float(v) for v in row))
    return _merge_last_axis(rows, S.dim)


def _merge_last_axis(rows: list, dim: int) -> list:
    # join boxes that agree on all but the last axis and touch along it
    rows = sorted(rows)
    merged: list = []
    for r in rows:
        if merged and merged[-1][:-2] == r[:-2] and merged[-1][-1] == r[-2]:
            merged[-1] = merged[-1][:-1] + (r[-1],)
        else:
            merged.append(r)
    return merged

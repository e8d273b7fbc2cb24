"""Regions in one and two dimensions and the strong star-shapedness test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from shapely import affinity
from shapely.geometry import Point, Polygon, box
from shapely.ops import unary_union

_EPS = 1e-12


class Region:
    """Bounded open set supporting box containment queries."""

    dim: int

    @property
    def measure(self) -> float:
        raise NotImplementedError

    @property
    def bounds(self):
        """``(lo, hi)`` arrays of the bounding box."""
        raise NotImplementedError

    def contains_box(self, lo, hi) -> bool:
        raise NotImplementedError

    def overlaps_box(self, lo, hi) -> bool:
        """True when the box meets the region in positive measure."""
        raise NotImplementedError


@dataclass
class Box(Region):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise ValueError("box needs lo < hi componentwise")
        self.dim = len(self.lo)

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls(np.zeros(d), np.ones(d))

    @property
    def measure(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def bounds(self):
        return self.lo, self.hi

    def contains_box(self, lo, hi) -> bool:
        return bool(np.all(np.asarray(lo) >= self.lo - _EPS) and np.all(np.asarray(hi) <= self.hi + _EPS))

    def overlaps_box(self, lo, hi) -> bool:
        return bool(np.all(np.minimum(hi, self.hi) - np.maximum(lo, self.lo) > _EPS))


@dataclass
class IntervalUnion(Region):
    """Union of open intervals (merged on construction)."""

    intervals: list

    def __post_init__(self):
        ivs = sorted((float(a), float(b)) for a, b in self.intervals if b > a)
        merged = []
        for a, b in ivs:
            if merged and a <= merged[-1][1] + _EPS:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        if not merged:
            raise ValueError("empty region")
        self.intervals = merged
        self.dim = 1

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    @property
    def bounds(self):
        return np.array([self.intervals[0][0]]), np.array([self.intervals[-1][1]])

    def contains_box(self, lo, hi) -> bool:
        lo, hi = float(np.ravel(lo)[0]), float(np.ravel(hi)[0])
        return any(a - _EPS <= lo and hi <= b + _EPS for a, b in self.intervals)

    def overlaps_box(self, lo, hi) -> bool:
        lo, hi = float(np.ravel(lo)[0]), float(np.ravel(hi)[0])
        return any(min(hi, b) - max(lo, a) > _EPS for a, b in self.intervals)


@dataclass
class PolygonRegion(Region):
    """Planar region backed by a shapely geometry."""

    geom: object

    def __post_init__(self):
        if self.geom.is_empty or self.geom.area <= 0:
            raise ValueError("empty region")
        self.dim = 2

    @classmethod
    def from_triangles(cls, tris: Sequence[np.ndarray]) -> "PolygonRegion":
        return cls(unary_union([Polygon(t) for t in tris]))

    @property
    def measure(self) -> float:
        return float(self.geom.area)

    @property
    def bounds(self):
        x0, y0, x1, y1 = self.geom.bounds
        return np.array([x0, y0]), np.array([x1, y1])

    def contains_box(self, lo, hi) -> bool:
        b = box(lo[0], lo[1], hi[0], hi[1])
        return bool(self.geom.buffer(_EPS).covers(b))

    def overlaps_box(self, lo, hi) -> bool:
        b = box(lo[0], lo[1], hi[0], hi[1])
        return bool(self.geom.intersection(b).area > _EPS)


def as_region(A) -> Region:
    if isinstance(A, Region):
        return A
    lo, hi = A
    return Box(lo, hi)


# -- strong star-shapedness ---------------------------------------------------


@dataclass
class DomainSpec:
    """Polygon (2D, optional holes) or interval (1D) with a candidate center."""

    vertices: list
    x0: Optional[Sequence[float]] = None
    holes: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.vertices[0]) if np.ndim(self.vertices[0]) else 1


@dataclass
class StarShapeResult:
    ok: bool
    x0: Optional[list]
    witness: dict = field(default_factory=dict)


DEFAULT_T_GRID = (2.0, 1.5, 1.1, 1.01, 1.001, 1.0 + 1e-4, 1.0 + 1e-5, 1.0 + 1e-6)


def _polygon(D: DomainSpec) -> Polygon:
    P = Polygon(D.vertices, holes=D.holes or None)
    if not P.is_valid or P.area <= 0:
        raise ValueError("invalid polygon")
    return P


def _check_center(P: Polygon, x0, t_grid) -> Optional[float]:
    """First ``t`` whose dilation fails to contain the closure, or ``None``."""
    S = affinity.translate(P, -x0[0], -x0[1])
    for t in t_grid:
        if not affinity.scale(S, t, t, origin=(0.0, 0.0)).contains_properly(S):
            return t
    return None


def star_shaped_check(D: DomainSpec, t_grid: Sequence[float] = DEFAULT_T_GRID, grid: int = 21) -> StarShapeResult:
    """``closure(Omega - x0)`` inside ``t (Omega - x0)`` for every ``t`` on a grid
    descending to ``1 + 1e-6``.

    A convex domain with ``x0`` inside passes immediately.  Without ``x0``
    (or when it fails) candidate centers on a ``grid x grid`` lattice of the
    bounding box are tried.
    """
    if any(t <= 1 for t in t_grid):
        raise ValueError("t_grid must exceed 1")
    if D.dim == 1:
        pts = [float(np.ravel(v)[0]) for v in D.vertices]
        a, b = min(pts), max(pts)
        x0 = 0.5 * (a + b) if D.x0 is None else float(np.ravel(D.x0)[0])
        return StarShapeResult(a < x0 < b, [x0], {"reason": "interval"})
    P = _polygon(D)
    candidates = []
    if D.x0 is not None:
        x0 = np.asarray(D.x0, dtype=float)
        convex = not D.holes and math.isclose(P.area, P.convex_hull.area, rel_tol=1e-12)
        if convex and P.contains(Point(*x0)):
            return StarShapeResult(True, x0.tolist(), {"reason": "convex"})
        candidates.append(x0)
    x_lo, y_lo, x_hi, y_hi = P.bounds
    for gx in np.linspace(x_lo, x_hi, grid)[1:-1]:
        for gy in np.linspace(y_lo, y_hi, grid)[1:-1]:
            candidates.append(np.array([gx, gy]))
    failures = 0
    last = {}
    for c in candidates:
        if not P.contains(Point(*c)):
            continue
        t_bad = _check_center(P, c, t_grid)
        if t_bad is None:
            return StarShapeResult(True, c.tolist(), {"reason": "vertex containment", "t_min": min(t_grid)})
        failures += 1
        last = {"x0": c.tolist(), "t": t_bad}
    return StarShapeResult(False, None, {"candidates_failed": failures, "last_failure": last})

"""Extended-real energy densities, convex gauges and constraint sets.

Densities are evaluated in batches: ``x`` has shape ``(N, d)`` and the
matrix argument ``xi`` has shape ``(N, m, d)``.  Infinite energy is the
float ``math.inf``; it saturates under addition and positive scaling, so
no separate tagged type is needed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

INFINITY = math.inf

BatchFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class PointClass(str, enum.Enum):
    INTERIOR = "INTERIOR"
    BOUNDARY = "BOUNDARY"
    EXTERIOR = "EXTERIOR"


def frobenius(xi: np.ndarray) -> np.ndarray:
    """Frobenius norm over the trailing two axes."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(np.sum(xi * xi, axis=(-2, -1)))


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Convex set of matrices given by a membership oracle.

    ``member`` takes a stack ``(N, m, d)`` and returns a boolean array.
    ``r0`` is a radius such that every matrix with Frobenius norm at most
    ``r0`` is a member (only meaningful when ``contains_zero_interior``).
    """

    member: Callable[[np.ndarray], np.ndarray]
    contains_zero_interior: bool = True
    r0: float = 0.0
    name: str = ""

    def contains(self, xi) -> bool:
        xi = np.asarray(xi, dtype=float)
        return bool(self.member(xi[None])[0])

    def classify(self, xi, tol: float = 1e-8) -> PointClass:
        """Classify ``xi`` along its ray from the origin."""
        return classify_point(self, xi, tol)

    def boundary_radius(self, direction, r_max: float = 10.0, iters: int = 60) -> float:
        """Distance from 0 to the boundary along ``direction`` (capped by ``r_max``)."""
        u = np.asarray(direction, dtype=float)
        u = u / frobenius(u)
        if self.contains(r_max * u):
            return r_max
        lo, hi = 0.0, r_max
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if self.contains(mid * u):
                lo = mid
            else:
                hi = mid
        return lo


def whole_space(name: str = "whole space") -> ConstraintSet:
    return ConstraintSet(
        member=lambda z: np.ones(np.asarray(z).shape[0], dtype=bool),
        contains_zero_interior=True,
        r0=INFINITY,
        name=name,
    )


def classify_point(S: ConstraintSet, xi, tol: float = 1e-8) -> PointClass:
    """Radial trichotomy: INTERIOR iff (1+tol)xi is a member, EXTERIOR iff
    (1-tol)xi is not, BOUNDARY otherwise.  ``xi = 0`` is always INTERIOR."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    xi = np.asarray(xi, dtype=float)
    if not np.any(xi):
        return PointClass.INTERIOR
    outer, inner = S.member(np.stack([(1.0 + tol) * xi, (1.0 - tol) * xi]))
    if outer:
        return PointClass.INTERIOR
    if not inner:
        return PointClass.EXTERIOR
    return PointClass.BOUNDARY


@dataclass(frozen=True, eq=False)
class ConvexGauge:
    """Convex function ``G`` with effective domain ``domain``."""

    func: Callable[[np.ndarray], np.ndarray]
    domain: ConstraintSet

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 2:
            return float(self.func(xi[None])[0])
        return self.func(xi)


@dataclass(frozen=True)
class Growth:
    """Convex-growth metadata: ``alpha*G <= W <= beta*(1 + G)``."""

    alpha: float
    beta: float
    gauge: ConvexGauge


@dataclass(frozen=True, eq=False)
class PeriodicWeight:
    """Strictly positive 1-periodic weight ``a(x)``."""

    func: Callable[[np.ndarray], np.ndarray]
    periodic: bool = True

    @classmethod
    def constant(cls, value: float) -> "PeriodicWeight":
        if value <= 0:
            raise ValueError("weight must be positive")
        return cls(lambda x: np.full(np.asarray(x).shape[0], float(value)))

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.func(np.atleast_2d(np.asarray(x, dtype=float))), dtype=float)

    def mean(self, d: int, n: int = 64) -> float:
        """Unit-cell mean by the tensor midpoint rule with ``n`` points per axis."""
        pts = (np.arange(n) + 0.5) / n
        grid = np.stack(np.meshgrid(*([pts] * d), indexing="ij"), axis=-1).reshape(-1, d)
        return float(np.mean(self(grid)))


@dataclass(frozen=True, eq=False)
class EnergyDensity:
    """Integrand ``W(x, xi)`` with values in ``[0, inf]``.

    Parameters
    ----------
    func : callable
        ``func(x, xi)`` with ``x`` of shape ``(N, d)`` and ``xi`` of shape
        ``(N, m, d)``; returns ``(N,)`` values, ``inf`` outside the domain.
    d, m : int
        Space dimension and number of field components.
    grad : callable, optional
        Derivative with respect to ``xi``, same calling convention,
        returning ``(N, m, d)``.  Central differences are used when absent.
    periodic : bool
        Declared 1-periodicity in ``x``.
    x_dependent : bool
        False when ``W`` ignores ``x``; enables exact one-point quadrature.
    coercivity_c, exponent_p : float
        Claimed constants in ``W >= c |xi|^p``.  ``coercivity_c=None`` means
        no coercivity is claimed.
    growth : Growth, optional
        Convex-growth metadata.
    domain : ConstraintSet, optional
        Effective domain; derived from finiteness of ``W`` at ``x=0`` when omitted.
    """

    name: str
    func: BatchFn
    d: int
    m: int
    grad: Optional[BatchFn] = None
    periodic: bool = True
    x_dependent: bool = True
    coercivity_c: Optional[float] = None
    exponent_p: float = 2.0
    growth: Optional[Growth] = None
    domain: Optional[ConstraintSet] = None
    version: str = "1"
    h_fd: float = 1e-6
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("d and m must be positive")
        if self.exponent_p <= 1:
            raise ValueError("exponent_p must exceed 1")
        if self.coercivity_c is not None and self.coercivity_c <= 0:
            raise ValueError("coercivity_c must be positive")
        if self.domain is None:
            object.__setattr__(self, "domain", self._derived_domain())

    def _derived_domain(self) -> ConstraintSet:
        def member(z):
            z = np.asarray(z, dtype=float)
            x = np.zeros((z.shape[0], self.d))
            return np.isfinite(self.func(x, z))

        return ConstraintSet(member=member, contains_zero_interior=True, name=f"dom {self.name}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.d)

    def eval_batch(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        xi = np.asarray(xi, dtype=float).reshape(-1, self.m, self.d)
        out = np.asarray(self.func(x, xi), dtype=float)
        out = np.where(np.isnan(out), INFINITY, out)
        return out

    def grad_batch(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        xi = np.asarray(xi, dtype=float).reshape(-1, self.m, self.d)
        if self.grad is not None:
            return np.asarray(self.grad(x, xi), dtype=float)
        return self.fd_grad_batch(x, xi)

    def fd_grad_batch(self, x: np.ndarray, xi: np.ndarray, h: Optional[float] = None) -> np.ndarray:
        """Central differences in each matrix entry."""
        h = self.h_fd if h is None else h
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        xi = np.asarray(xi, dtype=float).reshape(-1, self.m, self.d)
        out = np.empty_like(xi)
        for i in range(self.m):
            for a in range(self.d):
                e = np.zeros((self.m, self.d))
                e[i, a] = h
                out[:, i, a] = (self.func(x, xi + e) - self.func(x, xi - e)) / (2 * h)
        return out

    def __call__(self, x, xi) -> float:
        return eval_density(self, x, xi)


def eval_density(W: EnergyDensity, x, xi) -> float:
    """Evaluate ``W(x, xi)`` at a single point; ``inf`` is a value, not an error."""
    x = np.asarray(x, dtype=float).reshape(1, W.d)
    xi = np.asarray(xi, dtype=float).reshape(1, W.m, W.d)
    return float(W.eval_batch(x, xi)[0])


# -- audits -----------------------------------------------------------------


@dataclass
class Violation:
    kind: str
    x: list
    xi: list
    lhs: float
    rhs: float


@dataclass
class AuditReport:
    density: str
    auditable: bool
    n_samples: int
    violations: list = field(default_factory=list)
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.auditable and not self.violations

    def as_dict(self) -> dict:
        return {
            "density": self.density,
            "auditable": self.auditable,
            "n_samples": self.n_samples,
            "ok": self.ok,
            "note": self.note,
            "violations": [v.__dict__ for v in self.violations],
        }


def sample_pairs(W: EnergyDensity, n: int, rng: np.random.Generator, radius: float = 2.0):
    """Random ``(x, xi)`` pairs with ``x`` in the unit cell and ``|xi| <= radius``."""
    x = rng.random((n, W.d))
    xi = rng.normal(size=(n, W.m, W.d))
    xi *= (radius * rng.random(n) ** (1.0 / (W.m * W.d)) / frobenius(xi))[:, None, None]
    return x, xi


def growth_audit(
    W: EnergyDensity,
    x: np.ndarray,
    xi: np.ndarray,
    rtol: float = 1e-12,
    max_report: int = 20,
) -> AuditReport:
    """Check ``alpha G <= W <= beta (1 + G)`` and p-coercivity on samples."""
    x = np.asarray(x, dtype=float).reshape(-1, W.d)
    xi = np.asarray(xi, dtype=float).reshape(-1, W.m, W.d)
    report = AuditReport(density=W.name, auditable=W.growth is not None, n_samples=len(x))
    vals = W.eval_batch(x, xi)
    viols = []
    if W.coercivity_c is not None:
        lower = W.coercivity_c * frobenius(xi) ** W.exponent_p
        bad = vals < lower * (1 - rtol)
        for i in np.flatnonzero(bad):
            viols.append(Violation("coercivity", x[i].tolist(), xi[i].tolist(), float(vals[i]), float(lower[i])))
    if W.growth is None:
        report.note = "no growth metadata; growth bounds unauditable"
    else:
        g = W.growth
        G = np.asarray(g.gauge.func(xi), dtype=float)
        lo = g.alpha * G
        hi = g.beta * (1.0 + G)
        with np.errstate(invalid="ignore"):
            bad_lo = vals < lo * (1 - rtol)
            bad_hi = (vals > hi * (1 + rtol)) & np.isfinite(vals)
            # W infinite where G is finite breaks the upper bound as well
            bad_hi |= np.isinf(vals) & np.isfinite(G)
        for i in np.flatnonzero(bad_lo):
            viols.append(Violation("growth_lower", x[i].tolist(), xi[i].tolist(), float(lo[i]), float(vals[i])))
        for i in np.flatnonzero(bad_hi):
            viols.append(Violation("growth_upper", x[i].tolist(), xi[i].tolist(), float(vals[i]), float(hi[i])))
    report.violations = viols[:max_report] if max_report else viols
    if len(viols) > len(report.violations):
        report.note = (report.note + f"; {len(viols)} violations total").lstrip("; ")
    return report


def periodicity_check(
    W: EnergyDensity, x: np.ndarray, z: np.ndarray, xi: np.ndarray, rtol: float = 0.0
) -> list[int]:
    """Indices where ``W(x+z, xi)`` and ``W(x, xi)`` differ beyond ``rtol``."""
    a = W.eval_batch(x, xi)
    b = W.eval_batch(np.asarray(x) + np.asarray(z), xi)
    same_inf = np.isinf(a) & np.isinf(b)
    with np.errstate(invalid="ignore"):
        close = np.abs(a - b) <= rtol * np.maximum(np.abs(a), np.abs(b))
    return np.flatnonzero(~(same_inf | close)).tolist()


def convexity_violations(
    func: Callable[[np.ndarray], np.ndarray],
    a: np.ndarray,
    b: np.ndarray,
    lam: np.ndarray,
    rtol: float = 1e-10,
) -> np.ndarray:
    """Indices of sampled segments breaking convexity (both ends finite)."""
    fa, fb = func(a), func(b)
    mid = lam[:, None, None] * a + (1 - lam[:, None, None]) * b
    fm = func(mid)
    rhs = lam * fa + (1 - lam) * fb
    ok = ~(np.isfinite(fa) & np.isfinite(fb)) | (fm <= rhs + rtol * (1 + np.abs(rhs)))
    return np.flatnonzero(~ok)

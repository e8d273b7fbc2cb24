"""Radial calculus: the modulus Delta_L^a, ru-usc audits, the radial
extension L-hat and a brute-force lower-semicontinuous envelope oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .density import INFINITY, ConstraintSet, EnergyDensity, PeriodicWeight, PointClass, classify_point

DEFAULT_SCHEDULE = (0.9, 0.99, 0.999, 0.9999)


class NoFeasibleSamplesError(ValueError):
    """No sample lies in the effective domain (NO_FEASIBLE_SAMPLES)."""


def _weights(a, x: np.ndarray) -> np.ndarray:
    if isinstance(a, PeriodicWeight):
        return a(x)
    if callable(a):
        return np.asarray(a(x), dtype=float)
    return np.full(len(x), float(a))


def _pairs(L: EnergyDensity, x_samples, xi_samples, paired: bool):
    x = np.asarray(x_samples, dtype=float).reshape(-1, L.d)
    xi = np.asarray(xi_samples, dtype=float).reshape(-1, L.m, L.d)
    if paired:
        if len(x) != len(xi):
            raise ValueError("paired samples need equal lengths")
        return x, xi
    X = np.repeat(x, len(xi), axis=0)
    Z = np.tile(xi, (len(x), 1, 1))
    return X, Z


def delta_quotients(L: EnergyDensity, a, t: float, x_samples, xi_samples, paired: bool = False):
    """Quotients ``(L(x,t xi) - L(x,xi)) / (a(x) + L(x,xi))`` over feasible samples."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    X, Z = _pairs(L, x_samples, xi_samples, paired)
    base = L.eval_batch(X, Z)
    ok = np.isfinite(base)
    if not np.any(ok):
        raise NoFeasibleSamplesError("no sampled xi lies in the effective domain")
    X, Z, base = X[ok], Z[ok], base[ok]
    top = L.eval_batch(X, t * Z)
    with np.errstate(invalid="ignore"):
        q = (top - base) / (_weights(a, X) + base)
    return np.where(np.isinf(top), INFINITY, q), X, Z


def delta_lower(L: EnergyDensity, a, t: float, x_samples, xi_samples, paired: bool = False) -> float:
    """Sampled lower bound of ``Delta_L^a(t)``: the largest quotient over the
    samples.  Samples outside the domain are skipped."""
    q, _, _ = delta_quotients(L, a, t, x_samples, xi_samples, paired)
    return float(np.max(q))


@dataclass
class ModulusReport:
    t: list
    delta: list
    n_samples: list
    limsup_estimate: float
    threshold: float
    passed: bool
    worst_xi: list = field(default_factory=list)

    def rows(self):
        return [
            (t, d, n, bool(d <= self.threshold)) for t, d, n in zip(self.t, self.delta, self.n_samples)
        ]

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "delta_lower": self.delta,
            "n_samples": self.n_samples,
            "limsup_estimate": self.limsup_estimate,
            "threshold": self.threshold,
            "pass": self.passed,
        }


def ru_usc_audit(
    L: EnergyDensity,
    a,
    t_grid: Sequence[float] = (0.9, 0.99, 0.999),
    x_samples=None,
    xi_samples=None,
    threshold: float = 1e-2,
    paired: bool = False,
) -> ModulusReport:
    """Sampled modulus on ``t_grid``; PASS when the maximum over the last two
    grid points is at most ``threshold``."""
    t_grid = [float(t) for t in t_grid]
    if any(not 0 < t <= 1 for t in t_grid):
        raise ValueError("t_grid must lie in (0, 1]")
    deltas, counts, worst = [], [], []
    for t in t_grid:
        q, _, Z = delta_quotients(L, a, t, x_samples, xi_samples, paired)
        i = int(np.argmax(q))
        deltas.append(float(q[i]))
        counts.append(int(len(q)))
        worst.append(Z[i].tolist())
    lim = max(deltas[-2:])
    return ModulusReport(t_grid, deltas, counts, lim, threshold, bool(lim <= threshold), worst)


def radial_samples(
    member: Callable[[np.ndarray], np.ndarray],
    shape: tuple,
    n: int,
    rng: np.random.Generator,
    r_max: float = 3.0,
    near_boundary: float = 0.5,
    iters: int = 60,
) -> np.ndarray:
    """Matrices along random rays, with a fraction ``near_boundary`` pushed
    toward the boundary found by bisection on ``member``."""
    U = rng.normal(size=(n,) + tuple(shape))
    U /= np.sqrt(np.sum(U * U, axis=(-2, -1)))[:, None, None]
    lo = np.zeros(n)
    hi = np.full(n, r_max)
    inside = member(r_max * U)
    lo[inside] = r_max
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = member(mid[:, None, None] * U)
        lo = np.where(inside, lo, np.where(ok, mid, lo))
        hi = np.where(inside, hi, np.where(ok, hi, mid))
    s = rng.random(n)
    k = int(round(near_boundary * n))
    s[:k] = 1.0 - 10.0 ** (-rng.uniform(1.0, 8.0, size=k))
    return (lo * s)[:, None, None] * U


# -- radial extension ---------------------------------------------------------


MatrixFn = Union[EnergyDensity, Callable[[np.ndarray], float]]


def _matrix_fn(L: MatrixFn, x=None) -> Callable[[np.ndarray], float]:
    if isinstance(L, EnergyDensity):
        xx = np.zeros(L.d) if x is None else np.asarray(x, dtype=float)
        return lambda xi: L(xx, xi)
    return L


@dataclass
class RadialProbe:
    t_schedule: tuple = DEFAULT_SCHEDULE
    values: list = field(default_factory=list)
    liminf_estimate: float = math.nan
    limsup_estimate: float = math.nan
    limit: float = math.nan
    diverging: bool = False

    def __post_init__(self):
        t = np.asarray(self.t_schedule, dtype=float)
        if len(t) < 2 or np.any(np.diff(t) <= 0) or np.any(t >= 1) or np.any(t <= 0):
            raise ValueError("schedule must be strictly increasing in (0, 1) with >= 2 points")


def radial_probe(L: MatrixFn, xi, schedule: Sequence[float] = DEFAULT_SCHEDULE, x=None) -> RadialProbe:
    """Values ``L(t xi)`` along the schedule with tail min/max and a linear
    extrapolation in ``1 - t`` from the last two points."""
    f = _matrix_fn(L, x)
    xi = np.asarray(xi, dtype=float)
    pr = RadialProbe(tuple(float(t) for t in schedule))
    vals = [float(f(t * xi)) for t in pr.t_schedule]
    pr.values = vals
    tail = vals[len(vals) // 2 :]
    pr.liminf_estimate = min(tail)
    pr.limsup_estimate = max(tail)
    s1, s2 = 1 - pr.t_schedule[-2], 1 - pr.t_schedule[-1]
    v1, v2 = vals[-2], vals[-1]
    if math.isinf(v2):
        pr.diverging = True
        pr.limit = INFINITY
        return pr
    if v2 > v1 > 0:
        slope = math.log(v2 / v1) / math.log(s2 / s1)
        pr.diverging = slope < -0.5
    pr.limit = INFINITY if pr.diverging else v2 + (v2 - v1) * s2 / (s1 - s2)
    return pr


@dataclass
class HatResult:
    value: float
    branch: PointClass
    flag: str = "OK"
    probe: Optional[RadialProbe] = None


def hat(
    L: MatrixFn,
    xi,
    schedule: Sequence[float] = DEFAULT_SCHEDULE,
    x=None,
    domain: Optional[ConstraintSet] = None,
    tol: float = 1e-8,
    agree_tol: float = 1e-2,
) -> HatResult:
    """Radial lower limit ``liminf_{t->1} L(t xi)`` with its branch.

    Interior points return ``L(xi)``, exterior points ``inf``.  On the
    boundary the tail of the probe must settle (its min and max agree within
    ``agree_tol``); otherwise the result is flagged ``NONCONVERGED`` and the
    tail minimum is returned.
    """
    f = _matrix_fn(L, x)
    xi = np.asarray(xi, dtype=float)
    if domain is None:
        domain = ConstraintSet(
            member=lambda Z: np.array([math.isfinite(f(z)) for z in np.asarray(Z)]),
            contains_zero_interior=True,
        )
    branch = classify_point(domain, xi, tol)
    if branch is PointClass.INTERIOR:
        return HatResult(float(f(xi)), branch)
    if branch is PointClass.EXTERIOR:
        return HatResult(INFINITY, branch)
    pr = radial_probe(f, xi, schedule)
    if pr.diverging:
        return HatResult(INFINITY, branch, "OK", pr)
    spread = pr.limsup_estimate - pr.liminf_estimate
    if spread > agree_tol * (1.0 + abs(pr.limit)):
        return HatResult(pr.liminf_estimate, branch, "NONCONVERGED", pr)
    return HatResult(float(pr.limit), branch, "OK", pr)


def lsc_envelope_oracle(L: MatrixFn, nodes, h: float, levels: int = 40, x=None) -> np.ndarray:
    """Brute-force lsc envelope on a 1D or 2D grid of matrices.

    At each node the lower limit is approximated by the minimum of ``L`` on
    rings of radius ``h 2^-j`` (all grid directions), ``j = 0..levels``.
    Rings whose minima keep growing geometrically signal a divergent lower
    limit.  The envelope is ``min(L(node), lower limit)``.
    """
    f = _matrix_fn(L, x)
    nodes = np.asarray(nodes, dtype=float)
    shape = nodes.shape[1:]
    D = int(np.prod(shape))
    if D not in (1, 2):
        raise ValueError("oracle supports 1- or 2-entry matrices")
    offsets = np.array([o for o in np.ndindex(*(3,) * D) if any(v != 1 for v in o)], dtype=float) - 1.0
    offsets = offsets.reshape((-1,) + shape)
    out = np.empty(len(nodes))
    for i, node in enumerate(nodes):
        rings = []
        for j in range(levels + 1):
            r = h * 2.0**-j
            rings.append(min(float(f(node + r * o)) for o in offsets))
        tail = rings[-4:]
        ratios = [b / a if a > 0 else (INFINITY if b > 0 else 1.0) for a, b in zip(tail, tail[1:])]
        if all(rt >= 1.5 for rt in ratios):
            lower = INFINITY
        else:
            lower = min(rings[-2:])
        out[i] = min(float(f(node)), lower)
    return out

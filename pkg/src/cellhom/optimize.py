"""Feasible-region descent for discretized energies that are infinite
outside a convex set.

Feasibility is kept by rejection: the backtracking line search never
accepts a trial point with infinite objective, so a finite start yields a
finite, monotonically nonincreasing iterate sequence.
"""

from __future__ import annotations

import math
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

ValueGrad = Callable[[np.ndarray], "tuple[float, Optional[np.ndarray]]"]


class InfeasibleStartError(ValueError):
    """Raised when no start has finite objective (INFEASIBLE_START)."""


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 500
    g_tol: float = 1e-10
    f_tol: float = 1e-15
    shrink: float = 0.5
    armijo: float = 1e-4
    memory: int = 10
    dense_max: int = 600
    n_starts: int = 4
    seed: int = 0
    h_fd: float = 1e-6
    laminate_starts: bool = True
    laminate_freqs: tuple = (1, 2, 4)
    laminate_thetas: tuple = (0.5, 0.25, 0.75)
    start_scale: float = 0.5

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.g_tol <= 0:
            raise ValueError("g_tol must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.h_fd <= 0:
            raise ValueError("h_fd must be positive")

    def with_(self, **kw) -> "OptimizerConfig":
        return replace(self, **kw)


@dataclass
class MinimizeResult:
    value: float
    x: np.ndarray
    iterations: int
    converged: bool
    start_index: int = 0
    history: Optional[list] = None
    n_infeasible: int = 0
    message: str = ""


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


class _DenseBFGS:
    """Full inverse-Hessian BFGS; cheaper than the two-loop recursion for few dofs."""

    def __init__(self):
        self.H = None

    def __bool__(self):
        return self.H is not None

    def clear(self):
        self.H = None

    def direction(self, g):
        return -g if self.H is None else -(self.H @ g)

    def append(self, s, y, rho):
        if self.H is None:
            self.H = np.eye(len(s)) * ((s @ y) / (y @ y))
        Hy = self.H @ y
        self.H += rho * ((1 + rho * (y @ Hy)) * np.outer(s, s) - np.outer(Hy, s) - np.outer(s, Hy))


class _LBFGS:
    def __init__(self, memory):
        self.pairs = deque(maxlen=memory)

    def __bool__(self):
        return bool(self.pairs)

    def clear(self):
        self.pairs.clear()

    def direction(self, g):
        return -_two_loop(g, list(self.pairs))

    def append(self, s, y, rho):
        self.pairs.append((s, y, rho))


def minimize_feasible(
    fun: ValueGrad,
    x0: np.ndarray,
    cfg: OptimizerConfig = OptimizerConfig(),
    keep_history: bool = False,
) -> MinimizeResult:
    """Quasi-Newton descent with Armijo backtracking that rejects ``inf`` steps.

    Dense BFGS is used up to ``cfg.dense_max`` unknowns, limited-memory
    BFGS beyond.

    ``fun(x)`` returns ``(value, gradient)``; the gradient may be ``None``
    when the value is infinite.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    if not math.isfinite(f):
        raise InfeasibleStartError("objective is infinite at the initial field")
    pairs = _DenseBFGS() if x.size <= cfg.dense_max else _LBFGS(cfg.memory)
    hist = [f] if keep_history else None
    stall = 0
    it = 0
    converged = False
    message = "max_iters reached"
    if x.size == 0:
        return MinimizeResult(f, x, 0, True, history=hist, message="no free dofs")
    for it in range(cfg.max_iters + 1):
        gmax = float(np.max(np.abs(g)))
        if gmax <= cfg.g_tol:
            converged, message = True, "gradient tolerance reached"
            break
        if it == cfg.max_iters:
            break
        d = pairs.direction(g)
        slope = float(g @ d)
        if not slope < 0:
            pairs.clear()
            d = -g
            slope = -float(g @ g)
        # unscaled steepest descent: cap the first trial move at 0.1 per dof
        step = 1.0 if pairs else min(1.0, 0.1 / gmax)
        accepted = False
        while step > 1e-20:
            xn = x + step * d
            fn, gn = fun(xn)
            if math.isfinite(fn) and fn <= f + cfg.armijo * step * slope:
                accepted = True
                break
            step *= cfg.shrink
        if not accepted:
            if pairs:
                pairs.clear()
                continue
            message = "line search failed"
            converged = gmax <= math.sqrt(cfg.g_tol)
            break
        s, y = xn - x, gn - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            pairs.append(s, y, 1.0 / sy)
        decrease = f - fn
        x, f, g = xn, fn, gn
        if keep_history:
            hist.append(f)
        if decrease <= cfg.f_tol * max(1.0, abs(f)):
            stall += 1
            if stall >= 3:
                converged, message = True, "objective stagnated"
                it += 1
                break
        else:
            stall = 0
    return MinimizeResult(f, x, it, converged, history=hist, message=message)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("CELLHOM_THREADS", "1")))
    except ValueError:
        return 1


def multistart(
    fun: ValueGrad,
    starts: Sequence[np.ndarray],
    cfg: OptimizerConfig = OptimizerConfig(),
) -> MinimizeResult:
    """Best run over all feasible starts.

    Infeasible starts are skipped and counted.  Ties in the final value go
    to the lowest start index, so results are deterministic.
    """
    if len(starts) == 0:
        raise InfeasibleStartError("no starts given")

    def run(i_x):
        i, x0 = i_x
        try:
            r = minimize_feasible(fun, x0, cfg)
        except InfeasibleStartError:
            return None
        r.start_index = i
        return r

    items = list(enumerate(starts))
    nw = min(_workers(), len(items))
    if nw > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(run, items))
    else:
        results = [run(it) for it in items]
    feasible = [r for r in results if r is not None]
    if not feasible:
        raise InfeasibleStartError("all starts are infeasible")
    best = feasible[0]
    for r in feasible[1:]:
        if r.value < best.value:
            best = r
    best.n_infeasible = len(results) - len(feasible)
    return best


def feasibility_radius(member, xi: np.ndarray, rng: np.random.Generator, r_max: float = 1.0, n_dirs: int = 16) -> float:
    """Lower estimate of the distance from ``xi`` to the complement of the
    domain, by bisection along random and coordinate directions."""
    xi = np.asarray(xi, dtype=float)
    if not member(xi[None])[0]:
        return 0.0
    dirs = [rng.normal(size=xi.shape) for _ in range(n_dirs)]
    for idx in np.ndindex(*xi.shape):
        e = np.zeros(xi.shape)
        e[idx] = 1.0
        dirs += [e, -e]
    D = np.array([u / np.linalg.norm(u) for u in dirs])
    ok = member(xi + r_max * D)
    rho = r_max
    for u, inside in zip(D, ok):
        if inside:
            continue
        lo, hi = 0.0, r_max
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if member((xi + mid * u)[None])[0]:
                lo = mid
            else:
                hi = mid
        rho = min(rho, lo)
    return rho


def _zigzag(s: np.ndarray, period: float, theta: float) -> np.ndarray:
    """Zero-mean-slope zigzag vanishing at multiples of ``period``; slopes
    ``1 - theta`` on a fraction ``theta`` of each period and ``-theta`` elsewhere."""
    r = np.mod(s, period)
    up = theta * period
    return np.where(r <= up, (1 - theta) * r, (1 - theta) * up - theta * (r - up))


def field_starts(problem, cfg: OptimizerConfig, rng: Optional[np.random.Generator] = None, radius: Optional[float] = None):
    """Starting dof vectors for a :class:`~cellhom.mesh.DiscreteEnergy`.

    The zero field comes first, then ``n_starts - 1`` random fields whose
    elementwise gradients stay within the estimated feasibility radius around
    ``xi``, then laminate zigzags when ``cfg.laminate_starts`` is set.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    mesh, W = problem.mesh, problem.W
    nfree, m, d = len(problem.free), W.m, mesh.dim
    if radius is None:
        radius = feasibility_radius(W.domain.member, problem.xi, rng)
    radius = max(radius, 0.0)
    h = float(np.min(mesh.h))
    amp = cfg.start_scale * radius * h / (2.0 * math.sqrt(m * d))
    starts = [np.zeros(nfree * m)]
    for _ in range(cfg.n_starts - 1):
        starts.append(rng.uniform(-amp, amp, size=nfree * m))
    if cfg.laminate_starts and radius > 0:
        V = mesh.vertices[problem.free]
        side = mesh.hi - mesh.lo
        slope = cfg.start_scale * radius / math.sqrt(m)
        for a in range(d):
            cut = np.ones(len(V))
            for b in range(d):
                if b != a:
                    dist = np.minimum(V[:, b] - mesh.lo[b], mesh.hi[b] - V[:, b])
                    cut *= np.minimum(1.0, dist / mesh.h[b])
            for j in cfg.laminate_freqs:
                period = side[a] / j
                if period < 2 * mesh.h[a] - 1e-12:
                    continue
                for theta in cfg.laminate_thetas:
                    up = theta * period / mesh.h[a]
                    if abs(up - round(up)) > 1e-9 or round(up) == 0 or round(up) * mesh.h[a] >= period - 1e-12:
                        continue
                    prof = _zigzag(V[:, a] - mesh.lo[a], period, theta) * cut
                    for i in range(m):
                        U = np.zeros((nfree, m))
                        U[:, i] = slope * prof / max(theta, 1 - theta)
                        starts.append(U.ravel())
    return starts

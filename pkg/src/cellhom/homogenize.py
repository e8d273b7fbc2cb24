"""Cell problems ``S_xi(kY)``, the homogenization operator ``HW``, the periodic
oscillation construction and the subadditive convergence experiment."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .density import INFINITY, EnergyDensity, PointClass, classify_point
from .geometry import Box, Region, as_region
from .mesh import (
    DiscreteEnergy,
    PwAffineField,
    QuadratureRule,
    SimplicialMesh,
    box_mesh,
    build_mesh,
    energy,
    evaluate,
    tile_field,
)
from .optimize import InfeasibleStartError, OptimizerConfig, field_starts, multistart
from .ruusc import DEFAULT_SCHEDULE, hat

DEFAULT_K = (1, 2, 3)


@lru_cache(maxsize=64)
def cached_mesh(d: int, k: int, n: int) -> SimplicialMesh:
    return build_mesh(d, k, n)


def _quadrature(W: EnergyDensity, q: Optional[QuadratureRule]) -> QuadratureRule:
    if q is not None:
        return q
    return QuadratureRule.fine(W.d) if W.x_dependent else QuadratureRule.midpoint(W.d)


@dataclass
class CellResult:
    """Estimate of ``S_xi(kY) / k^d`` with its minimizing field."""

    xi: np.ndarray
    k: int
    n: int
    value: float
    field: Optional[PwAffineField] = None
    iterations: int = 0
    converged: bool = True
    branch: PointClass = PointClass.INTERIOR
    n_starts: int = 0
    n_infeasible: int = 0
    message: str = ""
    problem: Optional[DiscreteEnergy] = dc_field(default=None, repr=False)


def cell_value(
    W: EnergyDensity,
    xi,
    k: int = 1,
    n: int = 16,
    cfg: OptimizerConfig = OptimizerConfig(),
    q: Optional[QuadratureRule] = None,
    extra_starts: Sequence[np.ndarray] = (),
) -> CellResult:
    """Minimize the mean of ``W(x, xi + grad phi)`` over zero-boundary P1 fields on ``kY``.

    The zero field is always a start, so the value never exceeds the cell mean
    of ``W(., xi)``.  Exterior ``xi`` returns ``inf`` without optimization.
    """
    if k < 1 or n < 1:
        raise ValueError("k and n must be >= 1")
    xi = np.asarray(xi, dtype=float).reshape(W.m, W.d)
    branch = classify_point(W.domain, xi)
    if branch is PointClass.EXTERIOR:
        return CellResult(xi, k, n, INFINITY, branch=branch, converged=True, message="exterior")
    mesh = cached_mesh(W.d, k, n)
    prob = DiscreteEnergy(W, xi, mesh, q=_quadrature(W, q), scale=float(k**W.d))
    base = field_starts(prob, cfg)
    # zero field first so ties resolve to it; duplicates dropped
    starts = []
    for s in base[:1] + [np.asarray(s, dtype=float) for s in extra_starts] + base[1:]:
        if not any(np.array_equal(s, t) for t in starts):
            starts.append(s)
    try:
        res = multistart(prob.value_and_grad, starts, cfg)
    except InfeasibleStartError:
        return CellResult(xi, k, n, INFINITY, branch=branch, n_starts=len(starts), n_infeasible=len(starts),
                          message="no feasible start")
    return CellResult(
        xi, k, n, float(res.value), prob.field(res.x), res.iterations, res.converged, branch,
        len(starts), res.n_infeasible, res.message, prob,
    )


@dataclass
class HWEstimate:
    xi: np.ndarray
    table: list
    best: float
    branch: PointClass
    flag: str = "OK"
    tiling_ok: bool = True
    probe: object = None

    def rows(self):
        return [(r.k, r.n, r.value, r.iterations, r.converged) for r in self.table]


def _prolong(u: PwAffineField, fine: SimplicialMesh, free: np.ndarray) -> np.ndarray:
    return evaluate(u, fine.vertices[free]).ravel()


def hw_estimate(
    W: EnergyDensity,
    xi,
    k_list: Sequence[int] = DEFAULT_K,
    n_list: Sequence[int] = (16,),
    cfg: OptimizerConfig = OptimizerConfig(),
    q: Optional[QuadratureRule] = None,
    schedule: Sequence[float] = DEFAULT_SCHEDULE,
    tiling_tol: float = 1e-6,
) -> HWEstimate:
    """Table of cell values over ``k_list x n_list`` and its minimum.

    For each ``k > 1`` the tiled ``k = 1`` minimizer is an extra start, and
    for each refined ``n`` the prolonged coarser minimizer is one, so the
    table respects the discrete subadditive and refinement bounds.  Boundary
    ``xi`` are evaluated through the radial limit along ``t xi``.
    """
    if not k_list or not n_list:
        raise ValueError("k_list and n_list must be nonempty")
    xi = np.asarray(xi, dtype=float).reshape(W.m, W.d)
    branch = classify_point(W.domain, xi)
    if branch is PointClass.EXTERIOR:
        return HWEstimate(xi, [], INFINITY, branch)
    if branch is PointClass.BOUNDARY:
        def f(z):
            return hw_estimate(W, z, k_list, n_list, cfg, q, schedule, tiling_tol).best

        h = hat(f, xi, schedule, domain=W.domain)
        return HWEstimate(xi, [], h.value, branch, h.flag, True, h.probe)
    req = sorted(set(int(k) for k in k_list))
    ks = sorted(set(req) | {1})
    ns = sorted(set(int(n) for n in n_list))
    done = {}
    for n in ns:
        for k in ks:
            extra = []
            base = done.get((1, n))
            if k > 1 and base.field is not None:
                extra.append(tile_field(base.field, k))
            coarse = [done[(k, m)] for m in ns if m < n and n % m == 0]
            if coarse and coarse[-1].field is not None:
                extra.append(coarse[-1].field)
            mesh = cached_mesh(W.d, k, n)
            free = np.flatnonzero(~mesh.boundary)
            starts = [
                u.values[free].ravel() if u.mesh.n_vertices == mesh.n_vertices else _prolong(u, mesh, free)
                for u in extra
            ]
            done[(k, n)] = cell_value(W, xi, k, n, cfg, q, starts)
    table = [done[(k, n)] for k in req for n in ns]
    best = min(r.value for r in table)
    tiling_ok = all(done[(k, n)].value <= done[(1, n)].value + tiling_tol for k in ks for n in ns)
    flag = "OK" if all(r.converged for r in table) else "NONCONVERGED"
    return HWEstimate(xi, table, best, branch, flag, tiling_ok)


class HWMemo:
    """Thread-safe cache of coarse ``HW`` values and envelope-theorem gradients.

    Keys are matrices quantized to ``quantum``; the first computed value for
    a key wins (insert-if-absent).
    """

    def __init__(
        self,
        W: EnergyDensity,
        k: int = 1,
        n: int = 16,
        cfg: Optional[OptimizerConfig] = None,
        quantum: float = 1e-6,
        q: Optional[QuadratureRule] = None,
    ):
        self.W, self.k, self.n, self.quantum, self.q = W, k, n, quantum, q
        self.cfg = cfg if cfg is not None else OptimizerConfig(n_starts=1, laminate_starts=False, g_tol=1e-8, f_tol=1e-12)
        self._table: dict = {}
        self._keys: list = []
        self._fields: list = []
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _key(self, xi):
        return tuple(np.round(np.asarray(xi, dtype=float).ravel() / self.quantum).astype(np.int64).tolist())

    def _entry(self, xi):
        key = self._key(xi)
        with self._lock:
            hit = self._table.get(key)
            if hit is not None:
                self.hits += 1
                return hit
        # evaluate at the key's representative so the cache is order independent
        xq = (np.asarray(key, dtype=float) * self.quantum).reshape(self.W.m, self.W.d)
        r = cell_value(self.W, xq, self.k, self.n, self.cfg, self.q, self._warm_start(xq))
        grad = None
        if math.isfinite(r.value) and r.problem is not None:
            grad = r.problem.integrand_grad(r.problem.dofs(r.field))
        entry = (xq, r.value, grad, r)
        with self._lock:
            self.misses += 1
            if key not in self._table and r.field is not None:
                self._keys.append(xq.ravel())
                self._fields.append(r.problem.dofs(r.field))
            return self._table.setdefault(key, entry)

    def _warm_start(self, xq):
        """Minimizer cached at the nearest key, as an extra start."""
        with self._lock:
            if not self._keys:
                return []
            K = np.array(self._keys)
            i = int(np.argmin(np.sum((K - xq.ravel()) ** 2, axis=1)))
            return [self._fields[i]]

    def lookup(self, xi):
        """``(value, gradient, CellResult)`` at ``xi`` (gradient ``None`` if infinite).

        The value is the cached one corrected to first order from the key's
        representative, which keeps the cache from creating spurious minima.
        """
        xi = np.asarray(xi, dtype=float).reshape(self.W.m, self.W.d)
        xq, value, grad, r = self._entry(xi)
        if grad is not None:
            value = value + float(np.sum(grad * (xi - xq)))
        return value, grad, r

    def __len__(self):
        return len(self._table)

    def density(self) -> EnergyDensity:
        """``HW`` as an x-independent density backed by this cache."""
        W = self.W

        def func(x, Z):
            return np.array([self.lookup(z)[0] for z in Z])

        def grad(x, Z):
            out = np.empty_like(Z)
            for i, z in enumerate(Z):
                g = self.lookup(z)[1]
                out[i] = np.nan if g is None else g
            return out

        return EnergyDensity(
            name=f"H[{W.name}]",
            func=func,
            d=W.d,
            m=W.m,
            grad=grad,
            periodic=True,
            x_dependent=False,
            coercivity_c=W.coercivity_c,
            exponent_p=W.exponent_p,
            growth=W.growth,
            domain=W.domain,
            version=W.version,
        )


# -- periodic oscillation -----------------------------------------------------


@dataclass
class OscillationField:
    """``eps phi(x/eps)`` on the cells ``eps(z + kY)`` inside a region, zero elsewhere."""

    phi: PwAffineField
    k: int
    eps: float
    cells: np.ndarray  # (C, d) integer lattice origins z (multiples of k)

    def __call__(self, points) -> np.ndarray:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((len(P), self.phi.m))
        if len(self.cells) == 0:
            return out
        side = self.eps * self.k
        idx = np.floor(P / side + 1e-12).astype(int)
        keys = {tuple(c) for c in (self.cells // self.k).tolist()}
        mask = np.array([tuple(i) in keys for i in idx.tolist()])
        if not np.any(mask):
            return out
        y = P[mask] / self.eps - idx[mask] * self.k
        y = np.clip(y, 0.0, float(self.k))
        out[mask] = self.eps * evaluate(self.phi, y)
        return out


@dataclass
class OscillationReport:
    n_cells: int
    cell_side: float
    covered_volume: float
    residual_volume: float
    lhs: float = math.nan
    rhs: float = math.nan
    rel_error: float = math.nan
    field: Optional[OscillationField] = None


def lattice_cells(region: Region, side: float) -> np.ndarray:
    """Indices ``j`` of lattice cubes ``side * (j + [0,1]^d)`` contained in ``region``."""
    lo, hi = region.bounds
    ranges = [range(int(math.floor(l / side - 1e-9)), int(math.ceil(h / side + 1e-9))) for l, h in zip(lo, hi)]
    out = []
    for j in np.ndindex(*[len(r) for r in ranges]):
        jj = np.array([r[i] for r, i in zip(ranges, j)])
        if region.contains_box(side * jj, side * (jj + 1)):
            out.append(jj)
    return np.array(out, dtype=int).reshape(-1, region.dim)


def _physical_energy(W, xi, phi: PwAffineField, eps: float, cells: np.ndarray, k: int, q: QuadratureRule) -> float:
    """Integral of ``W(x/eps, xi + grad(eps phi(x/eps)))`` assembled on the
    physically placed copies of the cell mesh."""
    mesh = phi.mesh
    total = 0.0
    for z in cells:
        verts = eps * (z * k + mesh.vertices)
        P = verts[mesh.simplices]
        E = P[:, 1:, :] - P[:, :1, :]
        vol = np.abs(np.linalg.det(E)) / math.factorial(mesh.dim)
        vals = eps * phi.values[mesh.simplices]  # (S, d+1, m)
        dv = vals[:, 1:, :] - vals[:, :1, :]
        grads = np.linalg.solve(E, dv).transpose(0, 2, 1)  # (S, m, d)
        X = np.einsum("qj,sjd->sqd", q.points, P) / eps
        nq = len(q.weights)
        Z = np.repeat(xi + grads, nq, axis=0)
        v = W.eval_batch(X.reshape(-1, mesh.dim), Z).reshape(-1, nq)
        if not np.all(np.isfinite(v)):
            return INFINITY
        total += float(np.sum(vol * (v @ q.weights)))
    return total


def periodic_oscillation(
    phi: PwAffineField,
    k: int,
    eps: float,
    A,
    W: Optional[EnergyDensity] = None,
    xi=None,
    q: Optional[QuadratureRule] = None,
) -> OscillationReport:
    """Periodic extension of a zero-boundary ``kY`` field, rescaled by ``eps``
    and restricted to whole cells ``eps(z + kY)`` inside ``A`` (``z`` in ``kZ^d``).

    With ``W`` and ``xi`` given, both sides of the energy identity
    ``int W(x/eps, xi + grad phi_eps) = |covered| * mean_{kY} W(y, xi + grad phi)``
    are computed independently.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not phi.zero_boundary:
        raise ValueError("cell field must vanish on the cell boundary")
    region = as_region(A)
    side = eps * k
    cells = lattice_cells(region, side) * k
    covered = len(cells) * side**region.dim
    rep = OscillationReport(len(cells), side, covered, max(region.measure - covered, 0.0))
    rep.field = OscillationField(phi, k, eps, cells)
    if W is not None:
        xi = np.zeros((W.m, W.d)) if xi is None else np.asarray(xi, dtype=float).reshape(W.m, W.d)
        qq = _quadrature(W, q)
        rep.lhs = _physical_energy(W, xi, phi, eps, cells, k, qq)
        mean = energy(W, xi, phi, q=qq) / k**W.d
        rep.rhs = covered * mean
        if math.isfinite(rep.lhs) and math.isfinite(rep.rhs):
            rep.rel_error = abs(rep.lhs - rep.rhs) / max(abs(rep.rhs), 1e-300) if rep.rhs else abs(rep.lhs)
        else:
            rep.rel_error = 0.0 if rep.lhs == rep.rhs else INFINITY
    return rep


# -- subadditive convergence --------------------------------------------------


def counting_bound(k: int, d: int) -> float:
    """Boundary-cell fraction ``(k^d - (k-2)^d) / k^d`` (1 when ``k <= 2``)."""
    if k <= 2:
        return 1.0
    return (k**d - (k - 2) ** d) / k**d


@dataclass
class TraceEntry:
    eps: float
    value: float
    k_eps: int
    counting_bound: float
    n_vertices: int
    status: str = "OK"
    iterations: int = 0


@dataclass
class ConvergenceTrace:
    xi: np.ndarray
    Q: tuple
    entries: list
    reference: float
    reference_table: list

    def values(self):
        return [e.value for e in self.entries]


def subadditive_trace(
    W: EnergyDensity,
    xi,
    Q=None,
    eps_schedule: Sequence[float] = (0.5, 0.25, 0.125),
    k_ref_list: Sequence[int] = DEFAULT_K,
    n: int = 32,
    cfg: OptimizerConfig = OptimizerConfig(),
    vertex_cap: int = 200_000,
    q: Optional[QuadratureRule] = None,
) -> ConvergenceTrace:
    """Normalized cell values ``S_xi((1/eps)Q) / |(1/eps)Q|`` along ``eps_schedule``.

    ``n`` is the number of mesh subdivisions per unit length.  The
    reference is ``min_k S_xi(kY)/k^d`` over ``k_ref_list``.
    """
    xi = np.asarray(xi, dtype=float).reshape(W.m, W.d)
    if classify_point(W.domain, xi) is PointClass.EXTERIOR:
        raise ValueError("xi is exterior to the domain")
    eps_schedule = [float(e) for e in eps_schedule]
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])) or min(eps_schedule) <= 0:
        raise ValueError("eps schedule must be positive and strictly decreasing")
    Q = Box.unit(W.d) if Q is None else as_region(Q)
    if not isinstance(Q, Box) or not np.allclose(Q.hi - Q.lo, (Q.hi - Q.lo)[0]):
        raise ValueError("Q must be a cube")
    qq = _quadrature(W, q)
    entries = []
    for eps in eps_schedule:
        lo, hi = Q.lo / eps, Q.hi / eps
        N = int(math.ceil((hi[0] - lo[0]) * n - 1e-9))
        k_eps = int(max(math.ceil(h - 1e-9) - math.floor(l + 1e-9) for l, h in zip(lo, hi)))
        nv = (N + 1) ** W.d
        if nv > vertex_cap:
            entries.append(TraceEntry(eps, math.nan, k_eps, counting_bound(k_eps, W.d), nv, "SKIPPED"))
            continue
        mesh = box_mesh(lo, hi, N)
        prob = DiscreteEnergy(W, xi, mesh, q=qq, scale=mesh.measure)
        res = multistart(prob.value_and_grad, field_starts(prob, cfg), cfg)
        entries.append(
            TraceEntry(eps, float(res.value), k_eps, counting_bound(k_eps, W.d), nv,
                       "OK" if res.converged else "NONCONVERGED", res.iterations)
        )
    ref = [cell_value(W, xi, k, n, cfg, q) for k in k_ref_list]
    return ConvergenceTrace(xi, (Q.lo.tolist(), Q.hi.tolist()), entries, min(r.value for r in ref),
                            [(r.k, r.value) for r in ref])

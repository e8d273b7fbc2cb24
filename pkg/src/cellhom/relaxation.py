"""The relaxation operator ``ZL`` over zero-boundary P1 fields on ``Y``, the
dyadic Vitali rescaling construction and the composite ``Z(HW)-hat``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .density import INFINITY, EnergyDensity, PointClass, classify_point
from .geometry import Box, Region, as_region
from .homogenize import HWMemo, cached_mesh
from .mesh import DiscreteEnergy, PwAffineField, QuadratureRule, energy, evaluate
from .optimize import InfeasibleStartError, OptimizerConfig, field_starts, multistart
from .ruusc import DEFAULT_SCHEDULE, hat


def frozen_density(W: EnergyDensity, x=None) -> EnergyDensity:
    """``W(x, .)`` at a fixed point ``x`` as an x-independent density."""
    if not W.x_dependent:
        return W
    x0 = np.zeros((1, W.d)) if x is None else np.asarray(x, dtype=float).reshape(1, W.d)

    def func(x, xi):
        return W.func(np.broadcast_to(x0, (len(xi), W.d)), xi)

    grad = None
    if W.grad is not None:
        def grad(x, xi):
            return W.grad(np.broadcast_to(x0, (len(xi), W.d)), xi)

    return replace(W, func=func, grad=grad, x_dependent=False, name=f"{W.name}@x")


@dataclass
class ZResult:
    xi: np.ndarray
    level: int
    value: float
    witness: Optional[PwAffineField] = None
    iterations: int = 0
    converged: bool = True
    branch: PointClass = PointClass.INTERIOR
    flag: str = "OK"

    @property
    def witness_norm(self) -> float:
        return 0.0 if self.witness is None else self.witness.sup_norm()


def z_value(
    L: EnergyDensity,
    xi,
    level: int = 3,
    cfg: OptimizerConfig = OptimizerConfig(),
    x=None,
) -> ZResult:
    """Minimize ``int_Y L(xi + grad phi)`` over zero-boundary P1 fields on the
    dyadic mesh of ``Y`` with ``2^level`` subdivisions per axis.

    ``L`` is used at the fixed point ``x`` when it depends on ``x``.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    Lx = frozen_density(L, x)
    xi = np.asarray(xi, dtype=float).reshape(L.m, L.d)
    mesh = cached_mesh(L.d, 1, 2**level)
    prob = DiscreteEnergy(Lx, xi, mesh)
    try:
        res = multistart(prob.value_and_grad, field_starts(prob, cfg), cfg)
    except InfeasibleStartError:
        return ZResult(xi, level, INFINITY, None, 0, True, classify_point(L.domain, xi), "NO_FEASIBLE_START")
    return ZResult(xi, level, float(res.value), prob.field(res.x), res.iterations, res.converged,
                   classify_point(L.domain, xi))


def laminate_bound(L: Callable[[np.ndarray], float], xi, direction, s_grid) -> float:
    """Two-slope laminate value ``min_s (L(xi + s a) + L(xi - s a)) / 2``
    over ``s`` in ``s_grid`` (volume fractions one half)."""
    xi = np.asarray(xi, dtype=float)
    a = np.asarray(direction, dtype=float).reshape(xi.shape)
    return float(min(0.5 * (L(xi + s * a) + L(xi - s * a)) for s in s_grid))


# -- Vitali rescaling ---------------------------------------------------------


@dataclass
class VitaliCovering:
    """Disjoint scaled cells ``a_i + alpha_i Y`` inside a region."""

    region: Region
    anchors: np.ndarray  # (C, d)
    scales: np.ndarray  # (C,)
    residual: float
    cap: float
    status: str = "COMPLETE"

    @property
    def covered(self) -> float:
        return float(np.sum(self.scales ** self.region.dim))

    def __len__(self):
        return len(self.scales)


def vitali_pack(
    A,
    diameter_cap: float,
    residual_tol: float = 0.0,
    max_level: int = 24,
    max_cells: int = 200_000,
) -> VitaliCovering:
    """Greedy dyadic packing of ``A`` by cubes of side ``2^-j < diameter_cap``.

    Cubes of the largest admissible side are taken first; cubes that only
    partly meet ``A`` are split into ``2^d`` children.  Stops when the
    uncovered volume is at most ``residual_tol * |A|``.  Running out of
    levels or cells returns the packing so far flagged ``INCOMPLETE``.
    """
    if diameter_cap <= 0 or residual_tol < 0:
        raise ValueError("caps must be positive")
    region = as_region(A)
    d = region.dim
    lo, hi = region.bounds
    j0 = max(0, int(math.floor(-math.log2(diameter_cap))) + 1)
    while 2.0**-j0 >= diameter_cap:
        j0 += 1
    side = 2.0**-j0
    origin = lo if isinstance(region, Box) else np.zeros(d)
    start = np.floor((lo - origin) / side + 1e-9).astype(int)
    stop = np.ceil((hi - origin) / side - 1e-9).astype(int)
    frontier = [start + np.array(o) for o in np.ndindex(*(stop - start))]
    anchors, scales = [], []
    target = residual_tol * region.measure
    covered = 0.0
    status = "COMPLETE"
    level = j0
    while frontier:
        nxt = []
        for idx in frontier:
            a = origin + side * idx
            b = a + side
            if region.contains_box(a, b):
                anchors.append(a)
                scales.append(side)
                covered += side**d
            elif region.overlaps_box(a, b):
                nxt.append(idx)
            if len(scales) >= max_cells:
                break
        residual = region.measure - covered
        if residual <= target + 1e-15 * region.measure or not nxt:
            break
        if len(scales) >= max_cells or level >= max_level:
            status = "INCOMPLETE"
            break
        level += 1
        side /= 2.0
        frontier = [2 * idx + np.array(o) for idx in nxt for o in np.ndindex(*(2,) * d)]
    residual = max(region.measure - covered, 0.0)
    if residual > target + 1e-12 * region.measure:
        status = "INCOMPLETE"
    return VitaliCovering(region, np.array(anchors).reshape(-1, d), np.array(scales), residual, diameter_cap, status)


@dataclass
class TransferredField:
    """``alpha_i phi((x - a_i)/alpha_i)`` on each cover cell, zero elsewhere."""

    phi: PwAffineField
    cover: VitaliCovering

    def __call__(self, points) -> np.ndarray:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((len(P), self.phi.m))
        for a, alpha in zip(self.cover.anchors, self.cover.scales):
            inside = np.all((P >= a - 1e-12) & (P <= a + alpha + 1e-12), axis=1)
            if np.any(inside):
                y = np.clip((P[inside] - a) / alpha, 0.0, 1.0)
                out[inside] = alpha * evaluate(self.phi, y)
        return out

    def sup_norm(self) -> float:
        if len(self.cover) == 0:
            return 0.0
        return float(np.max(self.cover.scales)) * self.phi.sup_norm()


@dataclass
class TransferReport:
    lhs: float
    rhs: float
    rel_error: float
    cell_mean: float
    residual_term: float
    sup_norm: float
    sup_bound: float
    field: TransferredField = field(repr=False, default=None)


def vitali_transfer(phi: PwAffineField, cover: VitaliCovering, L: EnergyDensity, xi) -> TransferReport:
    """Place rescaled copies of ``phi`` on the cover and check
    ``int_A L(xi + grad phi_cover) = (sum alpha^d) int_Y L(xi + grad phi) + residual L(xi)``.

    The left side is integrated over the physically placed simplices.
    """
    if not phi.zero_boundary:
        raise ValueError("phi must vanish on the boundary of Y")
    Lx = frozen_density(L)
    xi = np.asarray(xi, dtype=float).reshape(L.m, L.d)
    mesh = phi.mesh
    cell_int = energy(Lx, xi, phi)
    L0 = Lx(np.zeros(L.d), xi)
    lhs = 0.0
    for a, alpha in zip(cover.anchors, cover.scales):
        P = a + alpha * mesh.vertices[mesh.simplices]
        E = P[:, 1:, :] - P[:, :1, :]
        vol = np.abs(np.linalg.det(E)) / math.factorial(mesh.dim)
        vals = alpha * phi.values[mesh.simplices]
        grads = np.linalg.solve(E, vals[:, 1:, :] - vals[:, :1, :]).transpose(0, 2, 1)
        v = Lx.eval_batch(np.zeros((len(grads), L.d)), xi + grads)
        lhs += float(np.sum(vol * v)) if np.all(np.isfinite(v)) else INFINITY
    res_term = cover.residual * L0 if cover.residual > 0 else 0.0
    lhs += res_term
    rhs = cover.covered * cell_int + res_term
    if math.isfinite(lhs) and math.isfinite(rhs):
        rel = abs(lhs - rhs) / max(abs(rhs), 1e-300) if rhs else abs(lhs)
    else:
        rel = 0.0 if lhs == rhs else INFINITY
    tf = TransferredField(phi, cover)
    return TransferReport(lhs, rhs, rel, cell_int, res_term, tf.sup_norm(), cover.cap * phi.sup_norm(), tf)


# -- composite Z(HW)-hat ------------------------------------------------------


def zh_value(
    W: EnergyDensity,
    xi,
    level: int = 3,
    memo: Optional[HWMemo] = None,
    cfg: Optional[OptimizerConfig] = None,
    schedule: Sequence[float] = DEFAULT_SCHEDULE,
) -> ZResult:
    """``Z`` applied to the memoized coarse ``HW``, with the radial limit on the boundary.

    Interior ``xi`` return ``Z(HW)(xi)``; boundary ``xi`` return the radial
    limit of ``Z(HW)(t xi)``; exterior ``xi`` return ``inf``.
    """
    memo = HWMemo(W) if memo is None else memo
    cfg = OptimizerConfig(n_starts=1, laminate_freqs=(1,), laminate_thetas=(0.5, 0.25)) if cfg is None else cfg
    HW = memo.density()
    xi = np.asarray(xi, dtype=float).reshape(W.m, W.d)
    branch = classify_point(W.domain, xi)
    if branch is PointClass.EXTERIOR:
        return ZResult(xi, level, INFINITY, None, 0, True, branch)
    if branch is PointClass.INTERIOR:
        r = z_value(HW, xi, level, cfg)
        r.branch = branch
        return r
    h = hat(lambda z: z_value(HW, z, level, cfg).value, xi, schedule, domain=W.domain)
    return ZResult(xi, level, h.value, None, 0, h.flag == "OK", branch, h.flag)


@dataclass
class ContinuityProbe:
    xi: float
    deltas: tuple
    diffs: list
    C: float
    passed: bool


def continuity_probe(
    L: EnergyDensity,
    xi,
    level: int = 3,
    deltas: tuple = (1e-2, 1e-3),
    cfg: OptimizerConfig = OptimizerConfig(),
    atol: float = 1e-8,
    slack: float = 1.5,
) -> ContinuityProbe:
    """Finite Lipschitz check of ``ZL`` near ``xi``: the constant fitted at
    the coarsest ``delta`` must bound the finer differences (with ``slack``)."""
    base = z_value(L, xi, level, cfg).value
    xi = np.asarray(xi, dtype=float)
    diffs = [abs(z_value(L, xi + dl, level, cfg).value - base) for dl in deltas]
    C = diffs[0] / deltas[0]
    ok = all(df <= slack * C * dl + atol for df, dl in zip(diffs[1:], deltas[1:]))
    return ContinuityProbe(float(np.ravel(xi)[0]), tuple(deltas), diffs, C, ok)

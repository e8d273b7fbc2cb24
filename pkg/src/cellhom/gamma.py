"""Numerical Gamma-limsup experiments: ``I_eps``, the recovery-sequence
construction and the star-shapedness precondition.

A recovery stage for target ``u`` and parameters ``(t, n_pa, z_level, eps)``
is built in four steps:

1. radial scaling ``u <- t u``;
2. P1 interpolation on a uniform mesh with ``n_pa`` cells per axis, whose
   simplices are grouped into pieces of equal gradient;
3. on each piece, the relaxation witness of ``Z(HW)`` is placed on a dyadic
   Vitali packing, splitting the piece into sub-pieces of constant gradient;
4. on each sub-piece of gradient ``zeta``, the ``HW`` cell minimizer at
   ``zeta`` is superposed as ``eps phi(x/eps)`` on whole periodic cells.

All pieces are stored exactly as P1 data on a fine dyadic mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
from shapely.geometry import Polygon, box as sbox
from shapely.ops import unary_union

from .density import INFINITY, EnergyDensity, PointClass, classify_point, frobenius
from .geometry import DomainSpec, IntervalUnion, PolygonRegion, Region, star_shaped_check
from .homogenize import HWMemo, periodic_oscillation
from .mesh import (
    PwAffineField,
    QuadratureRule,
    SimplicialMesh,
    box_mesh,
    check_resolution,
    energy,
    evaluate,
    quadrature_points,
)
from .optimize import OptimizerConfig
from .relaxation import vitali_pack, vitali_transfer, z_value


class BuildRefused(ValueError):
    """Precondition of the recovery construction fails."""


@dataclass(frozen=True)
class Stage:
    t: float
    n_pa: int
    z_level: int
    eps: float

    def __post_init__(self):
        if not 0 < self.t <= 1:
            raise ValueError("t must lie in (0, 1]")
        if self.n_pa < 1 or self.z_level < 0 or self.eps <= 0:
            raise ValueError("invalid stage parameters")


DEFAULT_SCHEDULE = (
    Stage(0.9, 8, 2, 1 / 4),
    Stage(0.99, 16, 3, 1 / 8),
    Stage(0.995, 32, 4, 1 / 16),
    Stage(0.999, 32, 4, 1 / 32),
)


def unit_domain(d: int) -> DomainSpec:
    if d == 1:
        return DomainSpec([0.0, 1.0], [0.5])
    if d == 2:
        return DomainSpec([(0, 0), (1, 0), (1, 1), (0, 1)], (0.5, 0.5))
    raise ValueError("experiments support d = 1 or 2")


def affine_target(xi, d: int, N: int = 4) -> PwAffineField:
    """``u(x) = xi x`` on the unit box mesh with ``N`` cells per axis."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float)).reshape(-1, d)
    mesh = box_mesh(np.zeros(d), np.ones(d), N)
    return PwAffineField(mesh, mesh.vertices @ xi.T)


def i_eps(W: EnergyDensity, u: PwAffineField, eps: Optional[float], q: Optional[QuadratureRule] = None) -> float:
    """``int_Omega W(x/eps, grad u)``; warns when ``eps`` is under-resolved."""
    if eps is not None and eps <= 0:
        raise ValueError("eps must be positive")
    if W.x_dependent:
        check_resolution(eps, u.mesh)
    if q is None:
        q = QuadratureRule.fine(W.d) if W.x_dependent else QuadratureRule.midpoint(W.d)
    return energy(W, np.zeros((W.m, W.d)), u, eps, q)


def gradient_pieces(u: PwAffineField, decimals: int = 9):
    """Group simplices by (rounded) gradient: list of ``(gradient, simplex ids)``."""
    G = u.gradients()
    keys = np.round(G.reshape(len(G), -1), decimals)
    groups = {}
    for s, key in enumerate(map(tuple, keys)):
        groups.setdefault(key, []).append(s)
    return [(G[ids[0]], np.array(ids)) for key, ids in sorted(groups.items())]


def _region(mesh_or_pts, d: int) -> Region:
    """Region spanned by simplices given as vertex arrays ``(S, d+1, d)``."""
    P = np.asarray(mesh_or_pts)
    if d == 1:
        return IntervalUnion([(float(p[:, 0].min()), float(p[:, 0].max())) for p in P])
    return PolygonRegion(unary_union([Polygon(p) for p in P]))


def _subtract_cells(region: Region, anchors, scales) -> Optional[Region]:
    d = region.dim
    if d == 1:
        ivs = list(region.intervals)
        for a, s in zip(anchors, scales):
            lo, hi = float(a[0]), float(a[0] + s)
            out = []
            for x0, x1 in ivs:
                if hi <= x0 or lo >= x1:
                    out.append((x0, x1))
                    continue
                if x0 < lo:
                    out.append((x0, lo))
                if hi < x1:
                    out.append((hi, x1))
            ivs = [(x0, x1) for x0, x1 in out if x1 - x0 > 1e-14]
        return IntervalUnion(ivs) if ivs else None
    g = region.geom.difference(unary_union([sbox(a[0], a[1], a[0] + s, a[1] + s) for a, s in zip(anchors, scales)]))
    return PolygonRegion(g) if g.area > 1e-14 else None


@dataclass
class StageResult:
    stage: Stage
    status: str
    energy: float = INFINITY
    lp_distance: float = math.nan
    failing_stage: Optional[int] = None
    field: Optional[PwAffineField] = None
    lower_bound: float = math.nan
    coercivity_bound: float = math.nan
    diagnostics: dict = dc_field(default_factory=dict)

    def row(self):
        s = self.stage
        return (s.t, s.n_pa, s.z_level, s.eps, self.energy, self.lp_distance)


def _fine_resolution(needs: Sequence[float], d: int, max_vertices: int) -> int:
    h = min(needs)
    N = 2 ** int(math.ceil(math.log2(1.0 / h) - 1e-9))
    while (N + 1) ** d > max_vertices and N > 1:
        N //= 2
    return N


def lp_distance(u: PwAffineField, v_vals: np.ndarray, p: float, q: QuadratureRule) -> float:
    """``||u - v||_{L^p}`` for P1 data ``v_vals`` on ``u``'s mesh."""
    mesh = u.mesh
    diff = u.values - v_vals
    Xq = np.einsum("qj,sjm->sqm", q.points, diff[mesh.simplices])
    vals = np.sum(np.abs(Xq) ** 2, axis=-1) ** (p / 2)
    return float(np.sum(mesh.volumes * (vals @ q.weights)) ** (1.0 / p))


def recovery_build(
    W: EnergyDensity,
    u_target: PwAffineField,
    stage: Stage,
    memo: Optional[HWMemo] = None,
    domain: Optional[DomainSpec] = None,
    z_cfg: Optional[OptimizerConfig] = None,
    cap: Optional[float] = None,
    max_vertices: int = 300_000,
) -> StageResult:
    """One stage of the recovery construction (see module docstring)."""
    d = W.d
    if u_target.mesh.dim != d or d not in (1, 2):
        raise BuildRefused("target must live on a 1D or 2D unit-box mesh")
    dom = unit_domain(d) if domain is None else domain
    star = star_shaped_check(dom)
    if not star.ok:
        raise BuildRefused("domain is not strongly star-shaped")
    for g, _ in gradient_pieces(u_target):
        if classify_point(W.domain, g) is PointClass.EXTERIOR:
            raise BuildRefused("target gradient exterior to the domain: homogenized energy is infinite")
    memo = HWMemo(W) if memo is None else memo
    z_cfg = OptimizerConfig(n_starts=1, laminate_freqs=(1,), laminate_thetas=(0.5, 0.25)) if z_cfg is None else z_cfg
    HW = memo.density()
    res = StageResult(stage, "OK")
    lo, hi = np.zeros(d), np.ones(d)

    # (1)-(2) scale and interpolate
    pa_mesh = box_mesh(lo, hi, stage.n_pa)
    v1 = PwAffineField(pa_mesh, stage.t * evaluate(u_target, pa_mesh.vertices))
    e2 = i_eps(HW, v1, None)
    if not math.isfinite(e2):
        return StageResult(stage, "REJECTED", failing_stage=2)
    cap = 1.0 / stage.n_pa if cap is None else cap

    # (3) relaxation witnesses on Vitali packings
    transfers = []
    subpieces = []  # (region, gradient)
    lower = 0.0
    vit_err = 0.0
    for g, ids in gradient_pieces(v1):
        region = _region(pa_mesh.vertices[pa_mesh.simplices[ids]], d)
        zr = z_value(HW, g, stage.z_level, z_cfg)
        if not math.isfinite(zr.value):
            return StageResult(stage, "REJECTED", failing_stage=3)
        lower += region.measure * zr.value
        if zr.witness is None or zr.witness.sup_norm() < 1e-10:
            subpieces.append((region, g))
            continue
        cover = vitali_pack(region, cap, 0.0, max_level=int(math.log2(stage.n_pa)) + 12)
        rep = vitali_transfer(zr.witness, cover, HW, g)
        vit_err = max(vit_err, rep.rel_error)
        transfers.append(rep.field)
        wmesh = zr.witness.mesh
        wgrads = zr.witness.gradients()
        for a, alpha in zip(cover.anchors, cover.scales):
            for s in range(wmesh.n_simplices):
                simplex = a + alpha * wmesh.vertices[wmesh.simplices[s]]
                subpieces.append((_region(simplex[None], d), g + wgrads[s]))
        rest = _subtract_cells(region, cover.anchors, cover.scales)
        if rest is not None:
            subpieces.append((rest, g))
    res.lower_bound = lower
    res.diagnostics["vitali_max_rel_error"] = vit_err

    # (4) periodic oscillations of HW cell minimizers
    oscillations = []
    osc_err = 0.0
    for region, g in subpieces:
        _, _, cell = memo.lookup(g)
        if cell.field is None or not math.isfinite(cell.value):
            return StageResult(stage, "REJECTED", failing_stage=4)
        if cell.field.sup_norm() < 1e-12:
            continue
        rep = periodic_oscillation(cell.field, memo.k, stage.eps, region)
        if rep.n_cells:
            oscillations.append(rep.field)
    res.diagnostics["n_pieces"] = len(subpieces)
    res.diagnostics["n_oscillations"] = len(oscillations)
    res.diagnostics["oscillation_max_rel_error"] = osc_err

    # assemble on a fine dyadic mesh
    needs = [1.0 / stage.n_pa, stage.eps / memo.n]
    for tf in transfers:
        needs.append(float(np.min(tf.cover.scales)) / tf.phi.mesh.N)
    N = _fine_resolution(needs, d, max_vertices)
    fine = box_mesh(lo, hi, N)
    vals = evaluate(v1, fine.vertices)
    for tf in transfers:
        vals = vals + tf(fine.vertices)
    for osc in oscillations:
        vals = vals + osc(fine.vertices)
    u = PwAffineField(fine, vals)
    res.field = u
    res.diagnostics["fine_N"] = N
    res.diagnostics["exact_assembly"] = bool(1.0 / N <= min(needs) + 1e-15)
    q = QuadratureRule.fine(d)
    res.energy = i_eps(W, u, stage.eps, q)
    if not math.isfinite(res.energy):
        res.status, res.failing_stage = "REJECTED", 4
        return res
    p = W.exponent_p
    res.lp_distance = lp_distance(u, evaluate(u_target, fine.vertices), p, q)
    if W.coercivity_c is not None:
        G = u.gradients()
        res.coercivity_bound = float(W.coercivity_c * np.sum(fine.volumes * frobenius(G) ** p))
    return res


def reference_energy(W: EnergyDensity, u_target: PwAffineField, level: int, memo: HWMemo,
                     z_cfg: Optional[OptimizerConfig] = None) -> float:
    """``int_Omega Z(HW)-hat(grad u)`` piece by piece."""
    from .relaxation import zh_value

    total = 0.0
    mesh = u_target.mesh
    for g, ids in gradient_pieces(u_target):
        total += float(np.sum(mesh.volumes[ids])) * zh_value(W, g, level, memo, z_cfg).value
    return total


def limsup_experiment(
    W: EnergyDensity,
    u_target: PwAffineField,
    schedule: Sequence[Stage] = DEFAULT_SCHEDULE,
    slack: float = 0.05,
    memo: Optional[HWMemo] = None,
    domain: Optional[DomainSpec] = None,
    lower_tol: float = 0.01,
) -> dict:
    """Run the stage schedule and compare with the homogenized energy.

    The gap is ``max over the late half of stages of (I_eps - reference)``,
    relative to ``|reference|``; PASS needs ``gap <= slack``, at least two
    stages and strictly decreasing ``L^p`` distances.
    """
    if not schedule:
        raise ValueError("schedule must be nonempty")
    memo = HWMemo(W) if memo is None else memo
    level = max(s.z_level for s in schedule)
    ref = reference_energy(W, u_target, level, memo)
    stages = [recovery_build(W, u_target, s, memo, domain) for s in schedule]
    kept = [r for r in stages if r.status == "OK"]
    late = stages[len(stages) // 2:]
    energies = [r.energy for r in late]
    scale = max(abs(ref), 1e-12)
    gap = (max(energies) - ref) / scale if all(math.isfinite(e) for e in energies) else INFINITY
    dists = [r.lp_distance for r in stages]
    monotone = len(dists) >= 2 and all(b < a for a, b in zip(dists, dists[1:]))
    lower_ok = all(
        r.energy >= (1 - lower_tol) * r.lower_bound - 1e-12
        and (math.isnan(r.coercivity_bound) or r.energy >= r.coercivity_bound * (1 - 1e-9))
        for r in kept
    )
    reasons = []
    if len(stages) < 2:
        reasons.append("schedule has fewer than two stages; convergence cannot be assessed")
    if len(kept) < len(stages):
        reasons.append("rejected stages: " + ", ".join(str(r.failing_stage) for r in stages if r.status != "OK"))
    if not gap <= slack:
        reasons.append(f"energy gap {gap:.4g} exceeds slack {slack:g}")
    if len(stages) >= 2 and not monotone:
        reasons.append("L^p distances do not decrease")
    if not lower_ok:
        reasons.append("lower-bound sanity check failed")
    return {
        "density": W.name,
        "reference": ref,
        "gap": gap,
        "slack": slack,
        "stages": [
            {"t": r.stage.t, "n_pa": r.stage.n_pa, "z_level": r.stage.z_level, "eps": r.stage.eps,
             "energy": r.energy, "lp_distance": r.lp_distance, "status": r.status,
             "failing_stage": r.failing_stage, "lower_bound": r.lower_bound, **r.diagnostics}
            for r in stages
        ],
        "rows": [r.row() for r in stages],
        "distances_decrease": monotone,
        "lower_bound_ok": lower_ok,
        "pass": not reasons,
        "diagnostics": reasons,
    }

"""Two-dimensional constrained hyperelastic-style density.

``W(x, xi) = F(x, xi) + g(xi)`` on the convex open set
``G = {xi : |I + xi| < tr(I + xi)}`` and ``inf`` elsewhere, with the barrier
``g(xi) = (tr(I + xi) - |I + xi|)^-2`` and ``F(x, xi) = c(x) |xi|^p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import (
    INFINITY,
    ConstraintSet,
    ConvexGauge,
    EnergyDensity,
    Growth,
    frobenius,
    growth_audit,
    periodicity_check,
)
from .ruusc import radial_samples, ru_usc_audit

I2 = np.eye(2)
G_AT_ZERO = 1.0 / (2.0 - math.sqrt(2.0)) ** 2


class NotInGError(ValueError):
    """Matrix outside the constraint set (NOT_IN_G)."""


def h_eval(t):
    """``1/(2t)`` for ``t > 0`` and ``inf`` otherwise (scalar or array)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(t > 0, 1.0 / (2.0 * np.where(t > 0, t, 1.0)), INFINITY)
    return float(out) if out.ndim == 0 else out


def _tr_norm(xi):
    A = I2 + np.asarray(xi, dtype=float)
    return A, A[..., 0, 0] + A[..., 1, 1], frobenius(A)


def in_G(xi) -> np.ndarray:
    """Membership in ``G`` for a stack of ``2x2`` matrices."""
    _, tr, nrm = _tr_norm(xi)
    return nrm < tr


def det_I(xi):
    return np.linalg.det(I2 + np.asarray(xi, dtype=float))


def g_eval(xi):
    """Barrier ``(tr(I+xi) - |I+xi|)^-2`` on ``G``, ``inf`` outside."""
    _, tr, nrm = _tr_norm(xi)
    gap = tr - nrm
    with np.errstate(divide="ignore"):
        out = np.where(gap > 0, 1.0 / np.where(gap > 0, gap, 1.0) ** 2, INFINITY)
    return float(out) if out.ndim == 0 else out


def g_grad(xi) -> np.ndarray:
    """Derivative of ``g`` on ``G``: ``-2 gap^-3 (I - A/|A|)`` with ``A = I + xi``."""
    A, tr, nrm = _tr_norm(xi)
    gap = tr - nrm
    return (-2.0 / gap**3)[..., None, None] * (I2 - A / nrm[..., None, None])


G_SET = ConstraintSet(member=in_G, contains_zero_interior=True, name="G")


@dataclass
class DetCheck:
    holds: bool
    lhs: float
    rhs: float


def det_inequality_check(xi) -> DetCheck:
    """``2 det(I+xi) > (tr(I+xi) - |I+xi|)^2`` for ``xi`` in ``G``."""
    xi = np.asarray(xi, dtype=float)
    if not in_G(xi):
        raise NotInGError("matrix is not in G")
    _, tr, nrm = _tr_norm(xi)
    lhs = 2.0 * float(det_I(xi))
    rhs = float((tr - nrm) ** 2)
    return DetCheck(lhs > rhs, lhs, rhs)


@dataclass(frozen=True)
class Hyper2DConfig:
    """Parameters of ``F(x, xi) = (1 + amp sin^2(pi x1) sin^2(pi x2)) |xi|^p``.

    ``c`` and ``C`` are the claimed constants in ``c|xi|^p <= F <= C(1+|xi|^p)``.
    """

    p: float = 4.0
    amp: float = 0.5
    c: float = 1.0
    C: float = 1.5

    def __post_init__(self):
        if self.p <= 2:
            raise ValueError("p must exceed d = 2")
        if self.amp < 0:
            raise ValueError("amp must be nonnegative")
        if self.c <= 0 or self.C <= 0:
            raise ValueError("c and C must be positive")

    @property
    def alpha(self) -> float:
        return min(self.c, 1.0)

    @property
    def beta(self) -> float:
        return max(self.C, 1.0)

    @property
    def K(self) -> float:
        """Lipschitz-growth constant of ``F``: ``p max c(x)`` by the mean value inequality."""
        return self.p * (1.0 + self.amp)

    @property
    def K_prime(self) -> float:
        return 3.0 * self.K * max(1.0, 1.0 / self.c)

    @property
    def modulus_slope(self) -> float:
        """``max{K', g(0)}``: slope of the bound ``Delta(t) <= slope (1 - t)``."""
        return max(self.K_prime, G_AT_ZERO)


def c_weight(x, amp: float = 0.5) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return 1.0 + amp * np.sin(np.pi * x[:, 0]) ** 2 * np.sin(np.pi * x[:, 1]) ** 2


def hyper2d_density(cfg: Hyper2DConfig = Hyper2DConfig()) -> EnergyDensity:
    p, amp = cfg.p, cfg.amp

    def func(x, xi):
        nrm = frobenius(xi)
        return np.where(in_G(xi), c_weight(x, amp) * nrm**p + g_eval(xi), INFINITY)

    def grad(x, xi):
        nrm = frobenius(xi)
        dF = (c_weight(x, amp) * p * nrm ** (p - 2))[:, None, None] * xi
        out = dF + g_grad(xi)
        return np.where(in_G(xi)[:, None, None], out, np.nan)

    gauge = ConvexGauge(lambda xi: np.where(in_G(xi), frobenius(xi) ** p + g_eval(xi), INFINITY), G_SET)
    return EnergyDensity(
        name="hyper2d_default",
        func=func,
        d=2,
        m=2,
        grad=grad,
        periodic=True,
        x_dependent=amp != 0,
        coercivity_c=cfg.c,
        exponent_p=p,
        growth=Growth(cfg.alpha, cfg.beta, gauge),
        domain=G_SET,
        version="1",
        meta={"p": p, "amp": amp, "c": cfg.c, "C": cfg.C},
    )


def sample_G(n: int, rng: np.random.Generator, r_max: float = 3.0, near_boundary: float = 0.5) -> np.ndarray:
    """Members of ``G`` along random rays, half of them pushed toward ``dG``."""
    Z = radial_samples(in_G, (2, 2), n, rng, r_max=r_max, near_boundary=near_boundary)
    return Z[in_G(Z)]


def _item(passed: bool, detail: str, witness=None) -> dict:
    out = {"pass": bool(passed), "detail": detail}
    if witness is not None:
        out["witness"] = witness
    return out


def prop24_suite(
    cfg: Hyper2DConfig = Hyper2DConfig(),
    n_samples: int = 10_000,
    seed: int = 0,
    t_grid=(0.9, 0.99, 0.999),
    threshold: float = 1e-2,
) -> dict:
    """Check items (i)-(vi) of the structural proposition on samples.

    Returns a dict with one entry per item (``pass``, ``detail``, optional
    ``witness``), the modulus table and ``all_pass``.
    """
    rng = np.random.default_rng(seed)
    W = hyper2d_density(cfg)
    Z = sample_G(n_samples, rng)
    # non-members: random large matrices rejected by the membership test
    R = rng.normal(scale=2.0, size=(n_samples, 2, 2))
    R = R[~in_G(R)]
    X = rng.random((len(Z), 2))
    items = {}

    # (i) p-coercivity on members and non-members
    allZ = np.concatenate([Z, R])
    allX = rng.random((len(allZ), 2))
    vals = W.eval_batch(allX, allZ)
    lower = cfg.c * frobenius(allZ) ** cfg.p
    bad = np.flatnonzero(vals < lower * (1 - 1e-12))
    items["i"] = _item(
        len(bad) == 0,
        f"W >= c|xi|^p on {len(allZ)} samples",
        None if len(bad) == 0 else {"xi": allZ[bad[0]].tolist(), "x": allX[bad[0]].tolist()},
    )

    # (ii) 1-periodicity in x
    shifts = rng.integers(-3, 4, size=(len(Z), 2)).astype(float)
    bad = periodicity_check(W, X, shifts, Z, rtol=1e-12)
    items["ii"] = _item(
        not bad,
        f"W(x+z) = W(x) on {len(Z)} samples",
        None if not bad else {"xi": Z[bad[0]].tolist(), "x": X[bad[0]].tolist()},
    )

    # (iii) convex growth, plus the p-growth claim on F itself
    rep = growth_audit(W, X, Z, rtol=1e-12)
    nrmp = frobenius(Z) ** cfg.p
    F = c_weight(X, cfg.amp) * nrmp
    F_bad = np.flatnonzero((F < cfg.c * nrmp * (1 - 1e-12)) | (F > cfg.C * (1 + nrmp) * (1 + 1e-12)))
    ok = rep.ok and len(F_bad) == 0
    wit = None
    if rep.violations:
        wit = rep.violations[0].__dict__
    elif len(F_bad):
        wit = {"kind": "F_growth", "xi": Z[F_bad[0]].tolist(), "x": X[F_bad[0]].tolist()}
    items["iii"] = _item(ok, f"alpha={cfg.alpha}, beta={cfg.beta}", wit)

    # (iv) ru-usc with a = 2 and the explicit linear bound
    audit = ru_usc_audit(W, 2.0, t_grid, X, Z, threshold=threshold, paired=True)
    bound = [cfg.modulus_slope * (1 - t) for t in audit.t]
    within = all(dv <= b for dv, b in zip(audit.delta, bound))
    items["iv"] = _item(
        audit.passed and within,
        f"Delta(t) <= {cfg.modulus_slope:g}(1-t); limsup estimate {audit.limsup_estimate:.3e}",
        None if audit.passed and within else {"t": audit.t, "delta": audit.delta, "bound": bound},
    )

    # (v) finiteness iff det(I+xi) > 0, on members of G
    fin = np.isfinite(W.eval_batch(X, Z))
    pos = det_I(Z) > 0
    bad = np.flatnonzero(fin != pos)
    chain = np.array([det_inequality_check(z).holds for z in Z])
    hg = h_eval(det_I(Z)) <= g_eval(Z)
    ok = len(bad) == 0 and bool(np.all(chain)) and bool(np.all(hg))
    items["v"] = _item(
        ok,
        f"finite <=> det>0 and 2det > (tr-|.|)^2 on {len(Z)} members",
        None if ok else {"xi": Z[(np.flatnonzero(~chain) if not np.all(chain) else bad)[0]].tolist()},
    )

    # (vi) barrier: W >= h(det) everywhere, blow-up along det -> 0
    hv = h_eval(det_I(allZ))
    ok_lower = bool(np.all(vals >= hv * (1 - 1e-12)))
    s = 10.0 ** -np.arange(1, 9)
    path = np.zeros((len(s), 2, 2))
    path[:, 0, 0] = -1.0 + s
    pv = W.eval_batch(rng.random((len(s), 2)), path)
    blow = bool(np.all(np.diff(pv) > 0) and np.all(pv[s < 5e-4] > 1e3))
    items["vi"] = _item(
        ok_lower and blow,
        "W >= h(det(I+xi)); W -> inf along diag(-1+s, 0)",
        None if ok_lower and blow else {"path_values": pv.tolist()},
    )
    return {
        "config": {"p": cfg.p, "amp": cfg.amp, "c": cfg.c, "C": cfg.C, "n_samples": n_samples, "seed": seed},
        "constants": {"K": cfg.K, "K_prime": cfg.K_prime, "g0": G_AT_ZERO, "slope": cfg.modulus_slope},
        "n_members": int(len(Z)),
        "items": items,
        "modulus": audit.as_dict(),
        "modulus_bound": bound,
        "worst_xi": audit.worst_xi,
        "all_pass": all(it["pass"] for it in items.values()),
    }


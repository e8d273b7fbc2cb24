"""Kuhn triangulations of boxes and continuous piecewise-affine (P1) fields."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .density import INFINITY, EnergyDensity


class MeshError(ValueError):
    pass


class UnderResolvedWarning(RuntimeWarning):
    """Oscillation period sampled by fewer than four mesh cells."""


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    """Kuhn (Freudenthal) triangulation of the box ``[lo, hi]`` with ``N``
    subdivisions along every axis.

    ``k`` and ``n`` are set for meshes of ``kY`` built by :func:`build_mesh`
    (``N = k * n``).
    """

    dim: int
    lo: np.ndarray
    hi: np.ndarray
    N: int
    vertices: np.ndarray
    simplices: np.ndarray
    boundary: np.ndarray
    k: Optional[int] = None
    n: Optional[int] = None

    @property
    def h(self) -> np.ndarray:
        return (self.hi - self.lo) / self.N

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_simplices(self) -> int:
        return len(self.simplices)

    @property
    def measure(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @cached_property
    def _geometry(self):
        P = self.vertices[self.simplices]  # (S, d+1, d)
        E = P[:, 1:, :] - P[:, :1, :]
        det = np.linalg.det(E)
        vol = np.abs(det) / math.factorial(self.dim)
        if np.any(vol <= 0):
            raise MeshError("degenerate simplex in mesh")
        Einv = np.linalg.inv(E)  # grad u = Einv @ (u_j - u_0)
        bg = np.empty((len(P), self.dim + 1, self.dim))
        bg[:, 1:, :] = np.transpose(Einv, (0, 2, 1))
        bg[:, 0, :] = -bg[:, 1:, :].sum(axis=1)
        return vol, bg

    @property
    def volumes(self) -> np.ndarray:
        return self._geometry[0]

    @property
    def bary_grad(self) -> np.ndarray:
        """Gradients of the barycentric coordinates, shape ``(S, d+1, d)``."""
        return self._geometry[1]

    @cached_property
    def grad_operator(self) -> sp.csr_matrix:
        """Sparse map from vertex values to stacked per-simplex gradients (``S*d`` rows)."""
        S, d = self.n_simplices, self.dim
        rows = (np.arange(S)[:, None, None] * d + np.arange(d)[None, None, :]).repeat(d + 1, axis=1)
        cols = np.broadcast_to(self.simplices[:, :, None], (S, d + 1, d))
        return sp.csr_matrix(
            (self.bary_grad.ravel(), (rows.ravel(), cols.ravel())), shape=(S * d, self.n_vertices)
        )

    def grid_index(self, multi: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(multi).T), (self.N + 1,) * self.dim)

    def to_text(self) -> str:
        """Plain-text vertex/simplex listing."""
        lines = [f"# dim {self.dim} N {self.N} lo {self.lo.tolist()} hi {self.hi.tolist()}"]
        lines.append(f"vertices {self.n_vertices}")
        for i, (v, b) in enumerate(zip(self.vertices, self.boundary)):
            lines.append(f"{i} " + " ".join(repr(float(c)) for c in v) + f" {int(b)}")
        lines.append(f"simplices {self.n_simplices}")
        for i, s in enumerate(self.simplices):
            lines.append(f"{i} " + " ".join(str(int(j)) for j in s))
        return "\n".join(lines) + "\n"


def box_mesh(lo, hi, N: int, k: Optional[int] = None, n: Optional[int] = None) -> SimplicialMesh:
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    d = len(lo)
    if d not in (1, 2, 3):
        raise MeshError(f"dimension {d} not supported (d must be 1, 2 or 3)")
    if N < 1:
        raise MeshError("N must be positive")
    if np.any(hi <= lo):
        raise MeshError("empty box")
    axes = [np.linspace(lo[a], hi[a], N + 1) for a in range(d)]
    multi = np.stack(np.meshgrid(*[np.arange(N + 1)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    vertices = np.stack([axes[a][multi[:, a]] for a in range(d)], axis=1)
    if k is not None and n is not None:
        # exact rational coordinates for kY meshes
        vertices = lo + multi / n
    boundary = np.any((multi == 0) | (multi == N), axis=1)

    corners = np.stack(np.meshgrid(*[np.arange(N)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    shape = (N + 1,) * d
    simplices = []
    for perm in itertools.permutations(range(d)):
        path = [corners.copy()]
        cur = corners.copy()
        for a in perm:
            cur = cur.copy()
            cur[:, a] += 1
            path.append(cur)
        simplices.append(np.stack([np.ravel_multi_index(tuple(p.T), shape) for p in path], axis=1))
    simplices = np.stack(simplices, axis=1).reshape(-1, d + 1)
    return SimplicialMesh(d, lo, hi, N, vertices, simplices, boundary, k, n)


def build_mesh(d: int, k: int, n: int) -> SimplicialMesh:
    """Kuhn mesh of ``(0, k)^d`` with ``n`` subdivisions per unit length.

    The mesh has ``(k n)^d`` subcubes split into ``d!`` simplices each.
    """
    if d not in (1, 2, 3):
        raise MeshError(f"dimension {d} not supported (d must be 1, 2 or 3)")
    if k < 1 or n < 1:
        raise MeshError("k and n must be >= 1")
    return box_mesh(np.zeros(d), np.full(d, float(k)), k * n, k=k, n=n)


@dataclass(frozen=True, eq=False)
class PwAffineField:
    """P1 field with ``m`` components on a simplicial mesh."""

    mesh: SimplicialMesh
    values: np.ndarray
    zero_boundary: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.mesh.n_vertices:
            raise MeshError("one value per vertex required")
        object.__setattr__(self, "values", vals)
        if self.zero_boundary and np.any(vals[self.mesh.boundary] != 0):
            raise MeshError("zero_boundary field has nonzero boundary values")

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @classmethod
    def zeros(cls, mesh: SimplicialMesh, m: int = 1) -> "PwAffineField":
        return cls(mesh, np.zeros((mesh.n_vertices, m)), zero_boundary=True)

    @classmethod
    def interpolate(cls, mesh: SimplicialMesh, f: Callable[[np.ndarray], np.ndarray], zero_boundary=False):
        vals = np.asarray(f(mesh.vertices), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if zero_boundary:
            vals = vals.copy()
            vals[mesh.boundary] = 0.0
        return cls(mesh, vals, zero_boundary)

    def gradients(self) -> np.ndarray:
        """Per-simplex Jacobians, shape ``(S, m, d)``."""
        local = self.values[self.mesh.simplices]  # (S, d+1, m)
        return np.einsum("sjd,sjm->smd", self.mesh.bary_grad, local)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def __call__(self, points) -> np.ndarray:
        return evaluate(self, points)


def gradient(u: PwAffineField, s: int) -> np.ndarray:
    """Constant Jacobian ``(m, d)`` of ``u`` on simplex ``s``."""
    if not 0 <= s < u.mesh.n_simplices:
        raise IndexError("simplex index out of range")
    bg = u.mesh.bary_grad[s]
    return np.einsum("jd,jm->md", bg, u.values[u.mesh.simplices[s]])


def locate(mesh: SimplicialMesh, points: np.ndarray):
    """Vertex indices ``(P, d+1)`` and barycentric weights of the Kuhn simplex
    containing each point (points are clipped into the box)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d, N = mesh.dim, mesh.N
    t = (pts - mesh.lo) / mesh.h
    t = np.clip(t, 0.0, float(N))
    cell = np.minimum(np.floor(t).astype(int), N - 1)
    f = t - cell
    order = np.argsort(-f, axis=1, kind="stable")
    fs = np.take_along_axis(f, order, axis=1)
    lam = np.empty((len(pts), d + 1))
    lam[:, 0] = 1.0 - fs[:, 0]
    lam[:, 1:d] = fs[:, :-1] - fs[:, 1:]
    lam[:, d] = fs[:, -1]
    idx = np.empty((len(pts), d + 1), dtype=int)
    cur = cell.copy()
    idx[:, 0] = mesh.grid_index(cur)
    rows = np.arange(len(pts))
    for j in range(d):
        cur = cur.copy()
        cur[rows, order[:, j]] += 1
        idx[:, j + 1] = mesh.grid_index(cur)
    return idx, lam


def evaluate(u: PwAffineField, points) -> np.ndarray:
    """Point values ``(P, m)`` of a P1 field on a box mesh."""
    idx, lam = locate(u.mesh, points)
    return np.einsum("pj,pjm->pm", lam, u.values[idx])


def tile_field(u: PwAffineField, k: int) -> PwAffineField:
    """Periodic tiling of a zero-boundary field on ``(0, k0)^d`` onto ``(0, k k0)^d``."""
    mesh = u.mesh
    if mesh.k is None or mesh.n is None:
        raise MeshError("tiling needs a kY mesh")
    if not u.zero_boundary:
        raise MeshError("only zero-boundary fields tile continuously")
    big = build_mesh(mesh.dim, mesh.k * k, mesh.n)
    multi = np.stack(np.unravel_index(np.arange(big.n_vertices), (big.N + 1,) * big.dim), axis=1)
    src = mesh.grid_index(multi % mesh.N)
    return PwAffineField(big, u.values[src], zero_boundary=True)


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points ``(Q, d+1)`` with positive weights summing to one."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w <= 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-14):
            raise ValueError("weights must be positive and sum to 1")

    @classmethod
    def midpoint(cls, d: int) -> "QuadratureRule":
        return cls(np.full((1, d + 1), 1.0 / (d + 1)), np.ones(1))

    @classmethod
    def subdivided(cls, d: int, r: int) -> "QuadratureRule":
        """Centroids of the ``r^d`` Freudenthal sub-simplices, equal weights."""
        pts = []
        for cell in itertools.product(range(r), repeat=d):
            for perm in itertools.permutations(range(d)):
                verts = [np.array(cell, dtype=float)]
                cur = verts[0].copy()
                for a in perm:
                    cur = cur.copy()
                    cur[a] += 1
                    verts.append(cur)
                c = np.mean(verts, axis=0) / r
                # reference Kuhn simplex 1 >= y_1 >= ... >= y_d >= 0
                if np.all(np.diff(c) <= 0) and c[0] <= 1 and c[-1] >= 0:
                    lam = np.empty(d + 1)
                    lam[0] = 1 - c[0]
                    lam[1:d] = c[:-1] - c[1:]
                    lam[d] = c[-1]
                    pts.append(lam)
        pts = np.array(pts)
        if len(pts) != r**d:
            raise AssertionError("sub-simplex enumeration failed")
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    @classmethod
    def fine(cls, d: int) -> "QuadratureRule":
        """Four points in 1D and 2D, eight in 3D."""
        return cls.subdivided(d, {1: 4, 2: 2, 3: 2}[d])


def quadrature_points(mesh: SimplicialMesh, q: QuadratureRule) -> np.ndarray:
    """Physical quadrature points, shape ``(S, Q, d)``."""
    return np.einsum("qj,sjd->sqd", q.points, mesh.vertices[mesh.simplices])


def check_resolution(eps: Optional[float], mesh: SimplicialMesh, min_cells: float = 4.0) -> bool:
    """Warn when a period ``eps`` spans fewer than ``min_cells`` mesh cells."""
    if eps is None:
        return True
    cells = eps / float(np.max(mesh.h))
    if cells < min_cells:
        warnings.warn(
            f"oscillation period {eps:g} spans only {cells:.2f} mesh cells", UnderResolvedWarning, stacklevel=3
        )
        return False
    return True


def energy(
    W: EnergyDensity,
    xi,
    u: PwAffineField,
    eps: Optional[float] = None,
    q: Optional[QuadratureRule] = None,
) -> float:
    """``sum_s |s| sum_q w_q W(x_q[/eps], xi + grad u|_s)``; ``inf`` if any term is."""
    mesh = u.mesh
    xi = np.asarray(xi, dtype=float).reshape(W.m, W.d)
    if q is None or not W.x_dependent:
        q = QuadratureRule.midpoint(mesh.dim)
    Z = xi + u.gradients()
    X = quadrature_points(mesh, q)
    if eps is not None:
        X = X / eps
    nq = len(q.weights)
    vals = W.eval_batch(X.reshape(-1, mesh.dim), np.repeat(Z, nq, axis=0)).reshape(-1, nq)
    if not np.all(np.isfinite(vals)):
        return INFINITY
    return float(np.sum(mesh.volumes * (vals @ q.weights)))


class DiscreteEnergy:
    """Energy of ``xi + grad u`` as a function of the free vertex values of ``u``.

    The objective is divided by ``scale`` (use the domain measure for a mean).
    """

    def __init__(
        self,
        W: EnergyDensity,
        xi,
        mesh: SimplicialMesh,
        eps: Optional[float] = None,
        q: Optional[QuadratureRule] = None,
        zero_boundary: bool = True,
        scale: float = 1.0,
    ):
        if mesh.dim != W.d:
            raise MeshError("mesh dimension does not match density")
        self.W = W
        self.xi = np.asarray(xi, dtype=float).reshape(W.m, W.d)
        self.mesh = mesh
        self.eps = eps
        if q is None or not W.x_dependent:
            q = QuadratureRule.midpoint(mesh.dim)
        self.q = q
        self.zero_boundary = zero_boundary
        self.scale = float(scale)
        self.free = np.flatnonzero(~mesh.boundary) if zero_boundary else np.arange(mesh.n_vertices)
        self._B = mesh.grad_operator[:, self.free].tocsr()
        self._BT = self._B.T.tocsr()
        X = quadrature_points(mesh, q)
        if eps is not None:
            X = X / eps
        self._X = X.reshape(-1, mesh.dim)
        self._w = (mesh.volumes[:, None] * q.weights[None, :]) / self.scale  # (S, Q)
        self.n_evals = 0

    @property
    def n_dofs(self) -> int:
        return len(self.free) * self.W.m

    def _Z(self, z: np.ndarray) -> np.ndarray:
        S, d, m = self.mesh.n_simplices, self.mesh.dim, self.W.m
        U = np.asarray(z, dtype=float).reshape(len(self.free), m)
        G = (self._B @ U).reshape(S, d, m).transpose(0, 2, 1)
        return self.xi + G

    def _vals(self, Z):
        nq = len(self.q.weights)
        return self.W.eval_batch(self._X, np.repeat(Z, nq, axis=0)).reshape(-1, nq)

    def value(self, z: np.ndarray) -> float:
        self.n_evals += 1
        vals = self._vals(self._Z(z))
        if not np.all(np.isfinite(vals)):
            return INFINITY
        return float(np.sum(self._w * vals))

    def value_and_grad(self, z: np.ndarray):
        self.n_evals += 1
        Z = self._Z(z)
        vals = self._vals(Z)
        if not np.all(np.isfinite(vals)):
            return INFINITY, None
        nq = len(self.q.weights)
        S, d, m = self.mesh.n_simplices, self.mesh.dim, self.W.m
        dW = self.W.grad_batch(self._X, np.repeat(Z, nq, axis=0)).reshape(S, nq, m, d)
        H = np.einsum("sq,sqmd->smd", self._w, dW)
        g = self._BT @ H.transpose(0, 2, 1).reshape(S * d, m)
        return float(np.sum(self._w * vals)), np.asarray(g).ravel()

    def integrand_grad(self, z: np.ndarray) -> np.ndarray:
        """Weighted mean of ``dW/dxi`` over the domain (derivative in ``xi``)."""
        Z = self._Z(z)
        nq = len(self.q.weights)
        S, d, m = self.mesh.n_simplices, self.mesh.dim, self.W.m
        dW = self.W.grad_batch(self._X, np.repeat(Z, nq, axis=0)).reshape(S, nq, m, d)
        return np.einsum("sq,sqmd->md", self._w, dW)

    def field(self, z: np.ndarray) -> PwAffineField:
        vals = np.zeros((self.mesh.n_vertices, self.W.m))
        vals[self.free] = np.asarray(z, dtype=float).reshape(len(self.free), self.W.m)
        return PwAffineField(self.mesh, vals, zero_boundary=self.zero_boundary)

    def dofs(self, u: PwAffineField) -> np.ndarray:
        if u.mesh is not self.mesh and u.mesh.n_vertices != self.mesh.n_vertices:
            raise MeshError("field lives on a different mesh")
        return np.array(u.values[self.free], dtype=float).ravel()

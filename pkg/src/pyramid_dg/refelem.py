"""The bi-unit reference pyramid.

Coordinates ``(r, s, t)`` satisfy ``r, s in [-1, -t]``, ``t in [-1, 1]``. The
collapsed (Duffy) map sends the bi-unit cube ``(a, b, c)`` onto it, with
change-of-variables factor ``((1 - c) / 2)**2``.

Vertex order (used by every mesh in the library)::

    V1 = (-1, -1, -1)   V2 = (-1, 1, -1)   V3 = (1, -1, -1)
    V4 = ( 1,  1, -1)   V5 = (-1, -1, 1)   (apex)

Two bases live here. The rational basis is orthonormal on the reference
pyramid only. The semi-nodal basis is Lagrange at Gauss-Legendre points in
``a, b`` (on ``k + 1`` points for layer ``k``) and weighted Jacobi in ``c``;
it stays orthogonal on every vertex-mapped pyramid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import InvalidParameterError, RankDeficiencyError, SingularityError
from .orthopoly import (
    MAX_ORDER,
    gauss_rule,
    jacobi_deriv,
    jacobi_eval,
    jacobi_orthonormal,
    lagrange_basis,
    lagrange_basis_deriv,
)

APEX_TOL = 1e-12

VERTICES = np.array([
    [-1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
])

# Face 0 is the quadrilateral base; faces 1-4 are triangles through the apex.
# Each triangle is the image of a cube face with a or b held at +-1.
FACE_VERTICES = ((0, 1, 2, 3), (0, 2, 4), (2, 3, 4), (1, 3, 4), (0, 1, 4))
FACE_NORMALS = np.array([
    [0.0, 0.0, -1.0],
    [0.0, -1.0, 0.0],
    [1.0 / np.sqrt(2), 0.0, 1.0 / np.sqrt(2)],
    [0.0, 1.0 / np.sqrt(2), 1.0 / np.sqrt(2)],
    [-1.0, 0.0, 0.0],
])
NFACES = 5


def _check_order(N):
    if not 0 <= N <= MAX_ORDER:
        raise InvalidParameterError(f"order must lie in [0, {MAX_ORDER}], got {N}")


def duffy_map(a, b, c):
    a, b, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c)))
    h = 0.5 * (1.0 - c)
    return (1.0 + a) * h - 1.0, (1.0 + b) * h - 1.0, c.copy()


def duffy_inverse(r, s, t):
    r, s, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, s, t)))
    if np.any(t >= 1.0 - APEX_TOL):
        raise SingularityError("collapsed coordinates are undefined at the apex")
    d = 1.0 - t
    return 2.0 * (1.0 + r) / d - 1.0, 2.0 * (1.0 + s) / d - 1.0, t.copy()


def vertex_shape_functions(r, s, t):
    """Rational vertex functions ``v1..v5``; returns shape ``r.shape + (5,)``."""
    r, s, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, s, t)))
    if np.any(t >= 1.0 - APEX_TOL):
        raise SingularityError("vertex functions are singular at the apex")
    d = 2.0 * (1.0 - t)
    return np.stack([
        (r + t) * (s + t) / d,
        -(r + t) * (s + 1.0) / d,
        -(1.0 + r) * (s + t) / d,
        (1.0 + r) * (1.0 + s) / d,
        0.5 * (1.0 + t),
    ], axis=-1)


def vertex_shape_gradients(r, s, t):
    """Gradients of the vertex functions; shape ``r.shape + (5, 3)`` ordered (d/dr, d/ds, d/dt)."""
    r, s, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, s, t)))
    if np.any(t >= 1.0 - APEX_TOL):
        raise SingularityError("vertex functions are singular at the apex")
    d = 2.0 * (1.0 - t)
    d2 = 2.0 * (1.0 - t) ** 2
    rt, st, r1, s1 = r + t, s + t, 1.0 + r, 1.0 + s
    g = np.empty(r.shape + (5, 3))
    g[..., 0, :] = np.stack([st / d, rt / d, (rt + st) / d + rt * st / d2], -1)
    g[..., 1, :] = np.stack([-s1 / d, -rt / d, -s1 / d - rt * s1 / d2], -1)
    g[..., 2, :] = np.stack([-st / d, -r1 / d, -r1 / d - r1 * st / d2], -1)
    g[..., 3, :] = np.stack([s1 / d, r1 / d, r1 * s1 / d2], -1)
    g[..., 4, :] = np.stack([np.zeros_like(r), np.zeros_like(r), np.full_like(r, 0.5)], -1)
    return g


class BasisIndex(NamedTuple):
    i: int
    j: int
    k: int
    flat: int


def num_basis(N: int) -> int:
    return (N + 1) * (N + 2) * (2 * N + 3) // 6


def seminodal_indices(N: int) -> list[BasisIndex]:
    """Layers ascending in k, then j-major, then i."""
    out = []
    for k in range(N + 1):
        for j in range(k + 1):
            for i in range(k + 1):
                out.append(BasisIndex(i, j, k, len(out)))
    return out


def rational_indices(N: int) -> list[BasisIndex]:
    out = []
    for i in range(N + 1):
        for j in range(N + 1):
            for k in range(N - max(i, j) + 1):
                out.append(BasisIndex(i, j, k, len(out)))
    return out


def c_norms(N: int) -> np.ndarray:
    """``D_k = int ((1-c)/2)**(2k+2) (P_{N-k}^{(2k+3,0)})**2 dc`` by exact Gauss-Jacobi quadrature."""
    if N < 0:
        raise InvalidParameterError(f"order must be nonnegative, got {N}")
    out = np.empty(N + 1)
    for k in range(N + 1):
        rule = gauss_rule(N - k + 1, 2 * k + 2, 0)
        p = jacobi_eval(N - k, 2 * k + 3, 0, rule.nodes)
        out[k] = np.dot(rule.weights, p * p) / 2.0 ** (2 * k + 2)
    return out


@dataclass(frozen=True)
class SemiNodalBasis:
    N: int
    indices: tuple
    layer_nodes: tuple
    layer_weights: tuple
    c_norms: np.ndarray

    @property
    def size(self) -> int:
        return len(self.indices)

    def reference_norms(self) -> np.ndarray:
        """Diagonal of the reference (J = 1) mass matrix: ``w_i^k w_j^k D_k``."""
        out = np.empty(self.size)
        for idx in self.indices:
            w = self.layer_weights[idx.k]
            out[idx.flat] = w[idx.i] * w[idx.j] * self.c_norms[idx.k]
        return out

    def layer_points(self) -> np.ndarray:
        """``(a_i^k, b_j^k)`` for every basis function, in flat order."""
        out = np.empty((self.size, 2))
        for idx in self.indices:
            x = self.layer_nodes[idx.k]
            out[idx.flat] = x[idx.i], x[idx.j]
        return out


@lru_cache(maxsize=None)
def seminodal_basis(N: int) -> SemiNodalBasis:
    _check_order(N)
    nodes, weights = [], []
    for k in range(N + 1):
        rule = gauss_rule(k + 1)
        nodes.append(rule.nodes)
        weights.append(rule.weights)
    return SemiNodalBasis(N, tuple(seminodal_indices(N)), tuple(nodes), tuple(weights), c_norms(N))


def seminodal_values_abc(N: int, a, b, c, with_grad: bool = False):
    """Semi-nodal basis in collapsed coordinates.

    Returns values of shape ``(npts, Np)`` and, when requested, the
    derivatives in ``(a, b, c)`` of shape ``(npts, Np, 3)``.
    """
    basis = seminodal_basis(N)
    a, b, c = (np.atleast_1d(np.asarray(v, dtype=float)).ravel() for v in (a, b, c))
    npts = len(a)
    vals = np.empty((npts, basis.size))
    grads = np.empty((npts, basis.size, 3)) if with_grad else None
    h = 0.5 * (1.0 - c)
    off = 0
    for k in range(N + 1):
        x = basis.layer_nodes[k]
        La, Lb = lagrange_basis(x, a), lagrange_basis(x, b)
        P = jacobi_eval(N - k, 2 * k + 3, 0, c)
        cf = h**k * P
        n = (k + 1) ** 2
        vals[:, off:off + n] = np.einsum("pj,pi,p->pji", Lb, La, cf).reshape(npts, n)
        if with_grad:
            dLa, dLb = lagrange_basis_deriv(x, a), lagrange_basis_deriv(x, b)
            dcf = h**k * jacobi_deriv(N - k, 2 * k + 3, 0, c)
            if k > 0:
                dcf = dcf - 0.5 * k * h ** (k - 1) * P
            grads[:, off:off + n, 0] = np.einsum("pj,pi,p->pji", Lb, dLa, cf).reshape(npts, n)
            grads[:, off:off + n, 1] = np.einsum("pj,pi,p->pji", dLb, La, cf).reshape(npts, n)
            grads[:, off:off + n, 2] = np.einsum("pj,pi,p->pji", Lb, La, dcf).reshape(npts, n)
        off += n
    return (vals, grads) if with_grad else vals


def seminodal_eval(N: int, a, b, c):
    """Semi-nodal basis values and reference gradients ``(d/dr, d/ds, d/dt)``.

    The gradient carries ``1 / (1 - c)`` chain-rule factors and is refused at
    the apex.
    """
    a, b, c = (np.atleast_1d(np.asarray(v, dtype=float)).ravel() for v in (a, b, c))
    if np.any(c >= 1.0 - APEX_TOL):
        raise SingularityError("basis gradients are singular at the apex")
    vals, g = seminodal_values_abc(N, a, b, c, with_grad=True)
    inv = (1.0 / (1.0 - c))[:, None]
    grad = np.empty_like(g)
    grad[..., 0] = 2.0 * inv * g[..., 0]
    grad[..., 1] = 2.0 * inv * g[..., 1]
    grad[..., 2] = (1.0 + a)[:, None] * inv * g[..., 0] + (1.0 + b)[:, None] * inv * g[..., 1] + g[..., 2]
    return vals, grad


def rational_basis_eval(N: int, a, b, c) -> np.ndarray:
    """Orthonormal rational basis; shape ``(npts, Np)`` in :func:`rational_indices` order.

    Uses orthonormal Legendre/Jacobi factors, the normalization under which
    ``sqrt(2**(2 mu + 2))`` makes the set orthonormal on the pyramid.
    """
    _check_order(N)
    a, b, c = (np.atleast_1d(np.asarray(v, dtype=float)).ravel() for v in (a, b, c))
    Pa = [jacobi_orthonormal(i, 0, 0, a) for i in range(N + 1)]
    Pb = [jacobi_orthonormal(j, 0, 0, b) for j in range(N + 1)]
    h = 0.5 * (1.0 - c)
    idx = rational_indices(N)
    out = np.empty((len(a), len(idx)))
    for i, j, k, flat in idx:
        mu = max(i, j)
        out[:, flat] = (np.sqrt(2.0 ** (2 * mu + 2)) * Pa[i] * Pb[j] * h**mu
                        * jacobi_orthonormal(k, 2 * mu + 2, 0, c))
    return out


@dataclass(frozen=True)
class Cubature:
    """Reference cubature. ``abc`` holds the collapsed coordinates of ``points``.

    Surface rules also carry the face id of each point; the reference outward
    unit normals are :data:`FACE_NORMALS`. Surface weights include the true
    reference area element of the (possibly slanted) face.
    """

    points: np.ndarray
    weights: np.ndarray
    abc: np.ndarray
    faces: np.ndarray | None = None

    @property
    def normals(self):
        return FACE_NORMALS

    def __len__(self):
        return len(self.weights)


def _frozen(*arrays):
    for x in arrays:
        x.setflags(write=False)


@lru_cache(maxsize=None)
def volume_cubature(N: int, npts: int | None = None) -> Cubature:
    """Tensor Gauss-Legendre x Gauss-Legendre x Gauss-Jacobi(2, 0) rule mapped to the pyramid.

    ``npts`` points per direction (default ``N + 1``, the minimal rule).
    """
    n = N + 1 if npts is None else npts
    gl, gj = gauss_rule(n), gauss_rule(n, 2.0, 0.0)
    # a fastest, c slowest
    C, B, A = np.meshgrid(gj.nodes, gl.nodes, gl.nodes, indexing="ij")
    WC, WB, WA = np.meshgrid(gj.weights, gl.weights, gl.weights, indexing="ij")
    abc = np.stack([A.ravel(), B.ravel(), C.ravel()], -1)
    w = (WA * WB * WC).ravel() / 4.0
    pts = np.stack(duffy_map(*abc.T), -1)
    _frozen(pts, w, abc)
    return Cubature(pts, w, abc)


@lru_cache(maxsize=None)
def surface_cubature(N: int, npts: int | None = None) -> Cubature:
    """Per-face rules, ``npts**2`` points on each of the 5 faces (default ``npts = N + 1``).

    The base gets tensor Gauss-Legendre; each triangle is a collapsed
    Gauss-Legendre x Gauss-Jacobi(1, 0) rule with collapse vertex at the apex.
    """
    n = N + 1 if npts is None else npts
    gl, gj = gauss_rule(n), gauss_rule(n, 1.0, 0.0)
    X, Y = np.meshgrid(gl.nodes, gl.nodes, indexing="ij")
    WX, WY = np.meshgrid(gl.weights, gl.weights, indexing="ij")
    base_w = (WX * WY).ravel()
    C, U = np.meshgrid(gj.nodes, gl.nodes, indexing="ij")
    WC, WU = np.meshgrid(gj.weights, gl.weights, indexing="ij")
    C, U = C.ravel(), U.ravel()
    tri_w = (WC * WU).ravel() / 2.0
    one = np.ones_like(U)
    s2 = np.sqrt(2.0)

    abc = [np.stack([Y.ravel(), X.ravel(), -np.ones(n * n)], -1),
           np.stack([U, -one, C], -1),
           np.stack([one, U, C], -1),
           np.stack([U, one, C], -1),
           np.stack([-one, U, C], -1)]
    weights = [base_w, tri_w, s2 * tri_w, s2 * tri_w, tri_w]
    abc = np.concatenate(abc)
    w = np.concatenate(weights)
    faces = np.repeat(np.arange(NFACES), n * n)
    pts = np.stack(duffy_map(*abc.T), -1)
    _frozen(pts, w, abc, faces)
    return Cubature(pts, w, abc, faces)


@dataclass(frozen=True)
class OperatorSet:
    N: int
    V: np.ndarray
    Dr: np.ndarray
    Ds: np.ndarray
    Dt: np.ndarray
    Vf: np.ndarray
    volume: Cubature
    surface: Cubature

    @property
    def Np(self):
        return self.V.shape[1]


@lru_cache(maxsize=None)
def build_operator_set(N: int) -> OperatorSet:
    """Reference Vandermonde and derivative matrices of the semi-nodal basis."""
    _check_order(N)
    vol, surf = volume_cubature(N), surface_cubature(N)
    V, grad = seminodal_eval(N, *vol.abc.T)
    Vf = seminodal_values_abc(N, *surf.abc.T)
    Dr, Ds, Dt = (np.ascontiguousarray(grad[..., d]) for d in range(3))
    _frozen(V, Dr, Ds, Dt, Vf)
    return OperatorSet(N, V, Dr, Ds, Dt, Vf, vol, surf)


def change_of_basis(N: int, normalized: bool = False) -> np.ndarray:
    """Matrix ``S`` taking rational-basis coefficients to semi-nodal coefficients.

    With ``normalized=True`` the semi-nodal functions are scaled to unit
    reference norm, which makes ``S`` orthogonal.
    """
    vol = volume_cubature(N)
    Vphi = seminodal_values_abc(N, *vol.abc.T)
    Vpsi = rational_basis_eval(N, *vol.abc.T)
    G = Vphi.T @ (vol.weights[:, None] * Vphi)
    if np.linalg.cond(G) > 1e12:
        raise RankDeficiencyError("semi-nodal Gram matrix is numerically singular")
    S = np.linalg.solve(G, Vphi.T @ (vol.weights[:, None] * Vpsi))
    if np.linalg.cond(S) > 1e12:
        raise RankDeficiencyError("change of basis is numerically singular")
    if normalized:
        S = np.sqrt(seminodal_basis(N).reference_norms())[:, None] * S
    return S

"""Vertex-mapped physical pyramids and their geometric factors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import refelem
from .errors import DegenerateElementError, InvalidParameterError
from .refelem import Cubature, duffy_map

J_TOL = 1e-12


@dataclass(frozen=True)
class VertexMappedPyramid:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.shape != (5, 3):
            raise InvalidParameterError(f"a pyramid needs 5 vertices in R^3, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def apex(self):
        return self.vertices[4]


def identity_pyramid() -> VertexMappedPyramid:
    return VertexMappedPyramid(refelem.VERTICES.copy())


def warped_pyramid(gamma: float, N: int = 5) -> VertexMappedPyramid:
    """Reference pyramid with base vertex V4 pushed down by ``gamma`` in z (non-planar base).

    ``J = 1 - gamma (1 + a)(1 + b) / 8``, so the element stays valid for ``gamma < 2``.
    """
    if gamma < 0:
        raise InvalidParameterError("gamma must be nonnegative")
    v = refelem.VERTICES.copy()
    v[3, 2] -= gamma
    pyr = VertexMappedPyramid(v)
    validate(pyr, N)
    return pyr


def map_to_physical(pyr: VertexMappedPyramid, r, s, t):
    return refelem.vertex_shape_functions(r, s, t) @ pyr.vertices


def jacobian(pyr: VertexMappedPyramid, r, s, t):
    """Jacobian matrix ``G[..., i, j] = dx_i / dr_j`` and its determinant."""
    dv = refelem.vertex_shape_gradients(r, s, t)
    G = np.einsum("vi,...vj->...ij", pyr.vertices, dv)
    return G, np.linalg.det(G)


def jacobian_det_abc(vertices, a, b, c):
    """Determinant of the mapping Jacobian at collapsed coordinates; ``vertices`` may be batched (K, 5, 3)."""
    a, b, c = (np.atleast_1d(np.asarray(v, dtype=float)).ravel() for v in (a, b, c))
    dv = refelem.vertex_shape_gradients(*duffy_map(a, b, c))
    G = np.einsum("...vi,pvj->...pij", np.asarray(vertices, dtype=float), dv)
    return np.linalg.det(G)


def check_J_bilinear(pyr: VertexMappedPyramid, N: int = 1) -> float:
    """Max residual of a least-squares fit of J on a 3x3x3 collapsed grid to span{1, a, b, ab}."""
    g = np.array([-1.0, 0.0, 1.0])
    C, B, A = np.meshgrid([-1.0, 0.0, 0.5], g, g, indexing="ij")
    a, b, c = A.ravel(), B.ravel(), C.ravel()
    J = jacobian_det_abc(pyr.vertices, a, b, c)
    X = np.stack([np.ones_like(a), a, b, a * b], -1)
    coef, *_ = np.linalg.lstsq(X, J, rcond=None)
    return float(np.max(np.abs(X @ coef - J)))


def _validity_points(N):
    vol = refelem.volume_cubature(N)
    corners = np.array([[a, b, -1.0] for a in (-1.0, 1.0) for b in (-1.0, 1.0)])
    return np.concatenate([vol.abc, corners])


def min_jacobian(vertices, N: int) -> np.ndarray:
    """Smallest J over the order-N volume cubature and the four base corners (per element if batched)."""
    abc = _validity_points(N)
    return jacobian_det_abc(vertices, *abc.T).min(axis=-1)


def validate(pyr: VertexMappedPyramid, N: int) -> None:
    if min_jacobian(pyr.vertices, N) <= J_TOL:
        raise DegenerateElementError("mapping Jacobian is not positive on the element")


@dataclass(frozen=True)
class GeometricFactors:
    """Per-point geometry; arrays carry a leading element axis when built in batch.

    ``metric[..., i, j]`` is ``d r_i / d x_j`` with ``r = (r, s, t)``.
    """

    x: np.ndarray
    J: np.ndarray
    metric: np.ndarray
    xf: np.ndarray
    normals: np.ndarray
    sJ: np.ndarray

    @property
    def rx(self):
        return self.metric[..., 0, 0]

    @property
    def sy(self):
        return self.metric[..., 1, 1]

    @property
    def tz(self):
        return self.metric[..., 2, 2]


def geometric_factors_batch(vertices, vol: Cubature, surf: Cubature) -> GeometricFactors:
    """Geometric factors for a stack of elements ``vertices`` of shape (K, 5, 3)."""
    verts = np.asarray(vertices, dtype=float)
    vol_v = refelem.vertex_shape_functions(*vol.points.T)
    vol_dv = refelem.vertex_shape_gradients(*vol.points.T)
    x = np.einsum("pv,kvi->kpi", vol_v, verts)
    G = np.einsum("kvi,pvj->kpij", verts, vol_dv)
    J = np.linalg.det(G)
    if np.any(np.abs(J) < J_TOL) or np.any(J <= 0):
        raise DegenerateElementError("mapping Jacobian is not positive at a volume cubature point")
    metric = np.linalg.inv(G)

    surf_v = refelem.vertex_shape_functions(*surf.points.T)
    surf_dv = refelem.vertex_shape_gradients(*surf.points.T)
    xf = np.einsum("pv,kvi->kpi", surf_v, verts)
    Gf = np.einsum("kvi,pvj->kpij", verts, surf_dv)
    Jf = np.linalg.det(Gf)
    if np.any(Jf <= J_TOL):
        raise DegenerateElementError("mapping Jacobian is not positive at a surface cubature point")
    nref = refelem.FACE_NORMALS[surf.faces]
    # cofactor action: J * G^{-T} nhat
    n = Jf[..., None] * np.einsum("kpji,pj->kpi", np.linalg.inv(Gf), nref)
    sJ = np.linalg.norm(n, axis=-1)
    n = n / sJ[..., None]

    centroid = verts.mean(axis=1)
    for f, fv in enumerate(refelem.FACE_VERTICES):
        out = verts[:, list(fv)].mean(axis=1) - centroid
        sel = surf.faces == f
        if np.any(np.einsum("kpi,ki->kp", n[:, sel], out) <= 0):
            raise DegenerateElementError(f"face {f} normal is not outward")
    return GeometricFactors(x, J, metric, xf, n, sJ)


def geometric_factors(pyr: VertexMappedPyramid, vol: Cubature, surf: Cubature) -> GeometricFactors:
    gf = geometric_factors_batch(pyr.vertices[None], vol, surf)
    return GeometricFactors(*(getattr(gf, f)[0] for f in ("x", "J", "metric", "xf", "normals", "sJ")))


def element_volume(vertices, N: int = 1):
    vol = refelem.volume_cubature(N)
    return jacobian_det_abc(vertices, *vol.abc.T) @ vol.weights


def element_surface_area(vertices, N: int = 1):
    surf = refelem.surface_cubature(N)
    verts = np.asarray(vertices, dtype=float)
    batched = verts.ndim == 3
    gf = geometric_factors_batch(verts if batched else verts[None], refelem.volume_cubature(N), surf)
    area = gf.sJ @ surf.weights
    return area if batched else area[0]

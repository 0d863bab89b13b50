"""Pyramid meshes of the bi-unit cube: K1D^3 hexahedra, each split into 6 pyramids.

Every hexahedron face becomes the base of a pyramid whose apex is the
hexahedron's center, so triangle faces pair up inside a hexahedron and quad
faces pair up across hexahedra (or across the periodic boundary).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import refelem
from .errors import ConnectivityError, InvalidParameterError, MeshGenerationError
from .geometry import geometric_factors_batch, min_jacobian

MESH_FORMAT_VERSION = 1
MAX_RETRIES = 100
FACE_TOL = 1e-8
POINT_TOL = 1e-9

INTERIOR, PERIODIC, FREE_SURFACE = 0, 1, 2


@dataclass(frozen=True)
class PyramidMesh:
    vertices: np.ndarray
    elements: np.ndarray
    K1D: int
    delta: float = 0.0
    seed: int = 0
    periodic: bool = False

    @property
    def K(self) -> int:
        return len(self.elements)

    def element_vertices(self) -> np.ndarray:
        return self.vertices[self.elements]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.elements, dtype="<i8").tobytes())
        h.update(b"periodic" if self.periodic else b"bounded")
        return h.hexdigest()

    def to_json(self) -> dict:
        return {
            "version": MESH_FORMAT_VERSION,
            "K1D": self.K1D,
            "delta": self.delta,
            "seed": self.seed,
            "periodic": self.periodic,
            "vertices": self.vertices.tolist(),
            "elements": self.elements.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PyramidMesh":
        if doc.get("version") != MESH_FORMAT_VERSION:
            raise InvalidParameterError(f"unsupported mesh format version {doc.get('version')!r}")
        return cls(np.asarray(doc["vertices"], dtype=float), np.asarray(doc["elements"], dtype=np.int64),
                   int(doc["K1D"]), float(doc["delta"]), int(doc["seed"]), bool(doc["periodic"]))


def save_mesh(mesh: PyramidMesh, path) -> None:
    Path(path).write_text(json.dumps(mesh.to_json()))


def load_mesh(path) -> PyramidMesh:
    return PyramidMesh.from_json(json.loads(Path(path).read_text()))


def _hex_pyramids(corner, center):
    """Local vertex lists of the 6 pyramids of one hexahedron.

    ``corner(dx, dy, dz)`` returns a corner vertex id; the base ordering puts
    the apex on the positive side of (V3 - V1) x (V2 - V1).
    """
    out = []
    for axis in range(3):
        u, v = [d for d in range(3) if d != axis]
        for side in (0, 1):
            def c(iu, iv):
                idx = [0, 0, 0]
                idx[axis], idx[u], idx[v] = side, iu, iv
                return corner(*idx)

            # for side 0 the apex lies in +axis, so the (u, v) frame must be right-handed about +axis
            cyclic = (v - u) % 3 == 1
            if cyclic == (side == 0):
                base = [c(0, 0), c(0, 1), c(1, 0), c(1, 1)]
            else:
                base = [c(0, 0), c(1, 0), c(0, 1), c(1, 1)]
            out.append(base + [center])
    return out


def _connectivity(K1D):
    n1 = K1D + 1
    ncorner = n1**3
    elements = []
    for k in range(K1D):
        for j in range(K1D):
            for i in range(K1D):
                center = ncorner + i + K1D * (j + K1D * k)

                def corner(dx, dy, dz, i=i, j=j, k=k):
                    return (i + dx) + n1 * ((j + dy) + n1 * (k + dz))

                elements.extend(_hex_pyramids(corner, center))
    return np.asarray(elements, dtype=np.int64)


def _positions(K1D, offsets, periodic):
    n1 = K1D + 1
    g = np.linspace(-1.0, 1.0, n1)
    Z, Y, X = np.meshgrid(g, g, g, indexing="ij")
    base = np.stack([X.ravel(), Y.ravel(), Z.ravel()], -1)
    I = np.stack(np.meshgrid(np.arange(n1), np.arange(n1), np.arange(n1), indexing="ij")[::-1], -1).reshape(-1, 3)
    if periodic:
        canon = I % K1D
        cid = canon[:, 0] + K1D * (canon[:, 1] + K1D * canon[:, 2])
    else:
        cid = np.arange(len(base))
    corners = base + offsets[cid]
    hexc = corners[_hex_corner_ids(K1D)].mean(axis=1)
    return np.concatenate([corners, hexc]), cid


def _hex_corner_ids(K1D):
    n1 = K1D + 1
    out = []
    for k in range(K1D):
        for j in range(K1D):
            for i in range(K1D):
                out.append([(i + dx) + n1 * ((j + dy) + n1 * (k + dz))
                            for dz in (0, 1) for dy in (0, 1) for dx in (0, 1)])
    return np.asarray(out)


def _draw_offsets(rng, n, delta, K1D, periodic):
    off = rng.uniform(-delta, delta, size=(n, 3))
    if not periodic:
        n1 = K1D + 1
        I = np.stack(np.meshgrid(np.arange(n1), np.arange(n1), np.arange(n1), indexing="ij")[::-1], -1).reshape(-1, 3)
        off[(I == 0) | (I == K1D)] = 0.0
    return off


def build_mesh(K1D: int, N: int = 1, delta: float | None = None, seed: int = 0,
               periodic: bool = False) -> PyramidMesh:
    """Perturbed 6-pyramid-per-hex mesh of ``[-1, 1]^3``.

    Corners get independent uniform offsets in ``[-delta, delta]^3`` (normal
    components zeroed on a non-periodic boundary; periodic images share one
    offset). Hex centers are the mean of their perturbed corners. Offsets of
    corners touching an invalid element are redrawn, at most 100 times.
    ``delta`` defaults to ``0.1 * 2 / K1D``.
    """
    if K1D < 1:
        raise InvalidParameterError("K1D must be >= 1")
    if delta is None:
        delta = 0.1 * 2.0 / K1D
    if delta < 0:
        raise InvalidParameterError("delta must be nonnegative")
    rng = np.random.default_rng(seed)
    ncanon = K1D**3 if periodic else (K1D + 1) ** 3
    offsets = _draw_offsets(rng, ncanon, delta, K1D, periodic)
    elements = _connectivity(K1D)
    for _ in range(MAX_RETRIES + 1):
        vertices, cid = _positions(K1D, offsets, periodic)
        bad = min_jacobian(vertices[elements], N) <= 1e-12
        if not np.any(bad):
            return PyramidMesh(vertices, elements, K1D, float(delta), int(seed), bool(periodic))
        hexes = np.unique(np.nonzero(bad)[0] // 6)
        redo = np.unique(cid[_hex_corner_ids(K1D)[hexes]])
        offsets[redo] = _draw_offsets(rng, ncanon, delta, K1D, periodic)[redo]
    raise MeshGenerationError(f"could not produce a valid mesh with delta={delta} after {MAX_RETRIES} retries")


@dataclass(frozen=True)
class FaceTable:
    """Face-to-face connectivity.

    For element ``e`` face ``f``: ``EToE/EToF`` give the partner (self for a
    free-surface face), ``tag`` is INTERIOR, PERIODIC or FREE_SURFACE, ``shift``
    is the translation taking partner points onto this face, and
    ``perm[e, f, q]`` is the partner's local face point matching point ``q``.
    ``mapP`` is the same information as a flat index into (K * Nfc) arrays.
    """

    EToE: np.ndarray
    EToF: np.ndarray
    tag: np.ndarray
    shift: np.ndarray
    perm: np.ndarray
    mapP: np.ndarray

    @property
    def boundary(self) -> np.ndarray:
        return self.tag == FREE_SURFACE


def face_centroids(mesh: PyramidMesh) -> np.ndarray:
    ev = mesh.element_vertices()
    return np.stack([ev[:, list(fv)].mean(axis=1) for fv in refelem.FACE_VERTICES], axis=1)


def connect_faces(mesh: PyramidMesh, N: int, xf: np.ndarray | None = None) -> FaceTable:
    """Match faces by centroid and face cubature points by nearest neighbor."""
    K = mesh.K
    cent = face_centroids(mesh).reshape(-1, 3)
    tree = cKDTree(cent)
    EToE = np.repeat(np.arange(K)[:, None], 5, axis=1)
    EToF = np.tile(np.arange(5), (K, 1))
    tag = np.full((K, 5), FREE_SURFACE, dtype=np.int8)
    shift = np.zeros((K, 5, 3))

    for idx, c in enumerate(cent):
        hits = [h for h in tree.query_ball_point(c, FACE_TOL) if h != idx]
        if len(hits) > 1:
            raise ConnectivityError(f"face {divmod(idx, 5)} has {len(hits)} partners")
        e, f = divmod(idx, 5)
        if hits:
            EToE[e, f], EToF[e, f] = divmod(hits[0], 5)
            tag[e, f] = INTERIOR
        elif mesh.periodic:
            d = int(np.argmax(np.abs(c)))
            s = np.zeros(3)
            s[d] = -2.0 * np.sign(c[d])
            hits = tree.query_ball_point(c + s, FACE_TOL)
            if len(hits) != 1:
                raise ConnectivityError(f"periodic face {(e, f)} has {len(hits)} partners")
            EToE[e, f], EToF[e, f] = divmod(hits[0], 5)
            tag[e, f] = PERIODIC
            shift[e, f] = -s

    if xf is None:
        gf = geometric_factors_batch(mesh.element_vertices(), refelem.volume_cubature(N),
                                     refelem.surface_cubature(N))
        xf = gf.xf
    nfp = (N + 1) ** 2
    nfc = 5 * nfp
    xf = xf.reshape(K, 5, nfp, 3)
    perm = np.empty((K, 5, nfp), dtype=np.int64)
    for e in range(K):
        for f in range(5):
            mine = xf[e, f]
            other = xf[EToE[e, f], EToF[e, f]] + shift[e, f]
            if tag[e, f] == FREE_SURFACE:
                perm[e, f] = np.arange(nfp)
                continue
            dist = np.linalg.norm(mine[:, None, :] - other[None, :, :], axis=-1)
            p = np.argmin(dist, axis=1)
            if np.max(dist[np.arange(nfp), p]) > POINT_TOL or len(np.unique(p)) != nfp:
                raise ConnectivityError(f"face points of {(e, f)} do not match their partner")
            perm[e, f] = p
    mapP = (EToE[:, :, None] * nfc + EToF[:, :, None] * nfp + perm).reshape(K, nfc)
    return FaceTable(EToE, EToF, tag, shift, perm, mapP)


def element_h(mesh: PyramidMesh, N: int = 1) -> np.ndarray:
    """Per-element volume / surface-area ratio."""
    from .geometry import element_surface_area, element_volume

    ev = mesh.element_vertices()
    return element_volume(ev, N) / element_surface_area(ev, N)

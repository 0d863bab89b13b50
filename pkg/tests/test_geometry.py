import numpy as np
import pytest
from conftest import random_pyramid

from pyramid_dg import refelem
from pyramid_dg.errors import DegenerateElementError, InvalidParameterError
from pyramid_dg.geometry import (
    VertexMappedPyramid, check_J_bilinear, element_surface_area, element_volume, geometric_factors,
    identity_pyramid, jacobian, jacobian_det_abc, map_to_physical, min_jacobian, validate, warped_pyramid,
)


def tet_volume(a, b, c, d):
    return abs(np.linalg.det(np.stack([b - a, c - a, d - a]))) / 6.0


def test_identity_pyramid_has_unit_jacobian(rng):
    pyr = identity_pyramid()
    r, s, t = refelem.duffy_map(*rng.uniform(-1, 0.99, (3, 30)))
    G, J = jacobian(pyr, r, s, t)
    assert np.allclose(G, np.eye(3), atol=1e-13) and np.allclose(J, 1.0)
    assert np.allclose(map_to_physical(pyr, r, s, t), np.stack([r, s, t], -1))


def test_bad_vertex_shape():
    with pytest.raises(InvalidParameterError):
        VertexMappedPyramid(np.zeros((4, 3)))


def test_vertices_read_only():
    pyr = identity_pyramid()
    with pytest.raises(ValueError):
        pyr.vertices[0, 0] = 3.0


def test_warped_pyramid_jacobian():
    assert np.allclose(jacobian_det_abc(warped_pyramid(0.0).vertices, 0.3, -0.2, 0.1), 1.0)
    pyr = warped_pyramid(1.0)
    a, b, c = np.meshgrid(np.linspace(-1, 1, 5), np.linspace(-1, 1, 5), np.linspace(-1, 0.9, 4), indexing="ij")
    J = jacobian_det_abc(pyr.vertices, a.ravel(), b.ravel(), c.ravel())
    assert np.allclose(J, 1 - (1 + a.ravel()) * (1 + b.ravel()) / 8, atol=1e-13)
    with pytest.raises(InvalidParameterError):
        warped_pyramid(-0.1)
    with pytest.raises(DegenerateElementError):
        warped_pyramid(2.5)


def test_J_bilinear_and_c_independent(rng):
    for _ in range(10):
        pyr = random_pyramid(rng)
        assert check_J_bilinear(pyr) < 1e-12
        a, b = rng.uniform(-1, 1, (2, 5))
        J1 = jacobian_det_abc(pyr.vertices, a, b, -np.ones(5))
        J2 = jacobian_det_abc(pyr.vertices, a, b, rng.uniform(-1, 0.99, 5))
        assert np.allclose(J1, J2, atol=1e-12)


def test_jacobian_finite_difference(rng):
    pyr = random_pyramid(rng)
    r, s, t = refelem.duffy_map(*rng.uniform(-0.9, 0.8, (3, 20)))
    G, _ = jacobian(pyr, r, s, t)
    h = 1e-6
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        fd = (map_to_physical(pyr, r + e[0], s + e[1], t + e[2]) - map_to_physical(pyr, r - e[0], s - e[1], t - e[2])) / (2 * h)
        assert np.allclose(G[..., d], fd, atol=1e-8)


def test_planar_base_volume_matches_two_tets(rng):
    for _ in range(5):
        v = refelem.VERTICES.copy()
        v[4] += rng.uniform(-0.3, 0.3, 3)
        v[:4, :2] += rng.uniform(-0.2, 0.2, (4, 2))  # keeps the base in the plane z = -1
        pyr = VertexMappedPyramid(v)
        exact = tet_volume(v[0], v[1], v[3], v[4]) + tet_volume(v[0], v[3], v[2], v[4])
        assert element_volume(pyr.vertices, 2) == pytest.approx(exact, rel=1e-12)


def test_nonplanar_volume_against_over_integration(rng):
    pyr = random_pyramid(rng)
    assert element_volume(pyr.vertices, 1) == pytest.approx(element_volume(pyr.vertices, 6), rel=1e-12)


def test_divergence_theorem(rng):
    # integral of div F over the element equals the surface flux for F = (x^2, y z, x z)
    for _ in range(5):
        pyr = random_pyramid(rng)
        N = 4
        vol, surf = refelem.volume_cubature(N), refelem.surface_cubature(N)
        gf = geometric_factors(pyr, vol, surf)
        x, y, z = gf.x.T
        div = 2 * x + z + x
        xf, yf, zf = gf.xf.T
        F = np.stack([xf**2, yf * zf, xf * zf], -1)
        flux = np.einsum("qd,qd->q", F, gf.normals)
        assert np.dot(vol.weights * gf.J, div) == pytest.approx(np.dot(surf.weights * gf.sJ, flux), abs=1e-11)


def test_metric_inverts_jacobian(rng):
    pyr = random_pyramid(rng)
    vol, surf = refelem.volume_cubature(2), refelem.surface_cubature(2)
    gf = geometric_factors(pyr, vol, surf)
    G, _ = jacobian(pyr, *vol.points.T)
    assert np.allclose(np.einsum("qij,qjk->qik", gf.metric, G), np.eye(3), atol=1e-12)
    assert np.allclose(gf.rx, gf.metric[:, 0, 0])


def test_reference_normals_and_areas():
    gf = geometric_factors(identity_pyramid(), refelem.volume_cubature(2), refelem.surface_cubature(2))
    surf = refelem.surface_cubature(2)
    assert np.allclose(gf.normals, refelem.FACE_NORMALS[surf.faces], atol=1e-14)
    assert np.allclose(gf.sJ, 1.0)
    assert element_surface_area(refelem.VERTICES, 2) == pytest.approx(8 + 4 * np.sqrt(2))


def test_inverted_element_is_rejected():
    v = refelem.VERTICES.copy()
    v[4, 2] = -2.0  # apex below the base
    with pytest.raises(DegenerateElementError):
        validate(VertexMappedPyramid(v), 2)
    assert min_jacobian(v, 2) < 0

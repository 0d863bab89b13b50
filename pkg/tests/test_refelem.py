import numpy as np
import pytest
from scipy import special

from pyramid_dg import refelem
from pyramid_dg.errors import InvalidParameterError, SingularityError


def random_ref_points(rng, n, tmax=0.999):
    a, b = rng.uniform(-1, 1, (2, n))
    c = rng.uniform(-1, tmax, n)
    return a, b, c


def scipy_volume_rule(m):
    """Collapsed tensor rule built from scipy nodes: the independent quadrature oracle."""
    xg, wg = special.roots_legendre(m)
    xj, wj = special.roots_jacobi(m, 2.0, 0.0)
    C, B, A = np.meshgrid(xj, xg, xg, indexing="ij")
    W = np.einsum("k,j,i->kji", wj, wg, wg).ravel() / 4.0
    return A.ravel(), B.ravel(), C.ravel(), W


def test_duffy_round_trip(rng):
    a, b, c = random_ref_points(rng, 100)
    r, s, t = refelem.duffy_map(a, b, c)
    assert np.all(r <= -t + 1e-14) and np.all(s <= -t + 1e-14)
    a2, b2, c2 = refelem.duffy_inverse(r, s, t)
    assert np.allclose([a2, b2, c2], [a, b, c], atol=1e-12)


def test_duffy_inverse_refuses_apex():
    with pytest.raises(SingularityError):
        refelem.duffy_inverse(-1.0, -1.0, 1.0)


def test_vertex_functions_partition_of_unity(rng):
    r, s, t = refelem.duffy_map(*random_ref_points(rng, 200))
    v = refelem.vertex_shape_functions(r, s, t)
    assert np.allclose(v.sum(axis=-1), 1.0, atol=1e-13)
    assert np.allclose(refelem.vertex_shape_gradients(r, s, t).sum(axis=-2), 0.0, atol=1e-12)


def test_vertex_cardinality():
    base = refelem.VERTICES[:4]
    v = refelem.vertex_shape_functions(*base.T)
    assert np.allclose(v[:, :4], np.eye(4), atol=1e-15)
    assert np.allclose(v[:, 4], 0.0)
    # apex: limit along an interior ray
    t = 1 - np.logspace(-3, -9, 4)
    v = refelem.vertex_shape_functions(-1 + 0.3 * (1 - t), -1 + 0.6 * (1 - t), t)
    assert np.allclose(v[-1], [0, 0, 0, 0, 1], atol=1e-8)


def test_vertex_functions_reproduce_linear_coordinates(rng):
    r, s, t = refelem.duffy_map(*random_ref_points(rng, 50))
    v = refelem.vertex_shape_functions(r, s, t)
    assert np.allclose(v @ refelem.VERTICES, np.stack([r, s, t], -1), atol=1e-13)


def test_vertex_gradients_finite_difference(rng):
    r, s, t = refelem.duffy_map(*random_ref_points(rng, 30, 0.9))
    g = refelem.vertex_shape_gradients(r, s, t)
    h = 1e-6
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        fd = (refelem.vertex_shape_functions(r + e[0], s + e[1], t + e[2])
              - refelem.vertex_shape_functions(r - e[0], s - e[1], t - e[2])) / (2 * h)
        assert np.allclose(g[..., d], fd, atol=1e-7)


@pytest.mark.parametrize("N,count", [(0, 1), (1, 5), (2, 14), (3, 30), (5, 91)])
def test_basis_counts(N, count):
    assert refelem.num_basis(N) == count
    assert len(refelem.seminodal_indices(N)) == count
    assert len(refelem.rational_indices(N)) == count


def test_seminodal_index_order():
    idx = refelem.seminodal_indices(2)
    assert [(i.i, i.j, i.k) for i in idx[:6]] == [(0, 0, 0), (0, 0, 1), (1, 0, 1), (0, 1, 1), (1, 1, 1), (0, 0, 2)]
    assert [i.flat for i in idx] == list(range(14))


@pytest.mark.parametrize("N,k,expected", [(0, 0, 2 / 3), (1, 1, 2 / 5), (2, 0, 2 / 3)])
def test_c_norms_examples(N, k, expected):
    assert refelem.c_norms(N)[k] == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("N", range(6))
def test_c_norms_against_high_order_quadrature(N):
    x, w = special.roots_legendre(60)
    for k, D in enumerate(refelem.c_norms(N)):
        p = special.eval_jacobi(N - k, 2 * k + 3, 0, x)
        assert D == pytest.approx(np.dot(w, ((1 - x) / 2) ** (2 * k + 2) * p * p), rel=1e-12)
        assert D == pytest.approx(2.0 / (2 * k + 3), rel=1e-12)


def test_seminodal_constant_at_N0(rng):
    a, b, c = random_ref_points(rng, 10)
    vals, grad = refelem.seminodal_eval(0, a, b, c)
    assert np.allclose(vals, 1.0) and np.allclose(grad, 0.0)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_seminodal_gradient_finite_difference(rng, N):
    a, b, c = random_ref_points(rng, 50, 0.8)
    r, s, t = refelem.duffy_map(a, b, c)
    _, grad = refelem.seminodal_eval(N, a, b, c)
    h = 1e-6
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        plus = refelem.seminodal_values_abc(N, *refelem.duffy_inverse(r + e[0], s + e[1], t + e[2]))
        minus = refelem.seminodal_values_abc(N, *refelem.duffy_inverse(r - e[0], s - e[1], t - e[2]))
        assert np.allclose(grad[..., d], (plus - minus) / (2 * h), atol=1e-6 * max(1.0, np.abs(grad).max()))


def test_seminodal_eval_refuses_apex():
    with pytest.raises(SingularityError):
        refelem.seminodal_eval(2, 0.0, 0.0, 1.0)


def test_invalid_order():
    with pytest.raises(InvalidParameterError):
        refelem.build_operator_set(-1)
    with pytest.raises(InvalidParameterError):
        refelem.c_norms(-1)


@pytest.mark.parametrize("N", range(6))
def test_rational_basis_orthonormal(N):
    vol = refelem.volume_cubature(N)
    V = refelem.rational_basis_eval(N, *vol.abc.T)
    assert np.allclose(V.T @ (vol.weights[:, None] * V), np.eye(V.shape[1]), atol=1e-12)


def test_rational_basis_N0_unit_norm():
    a, b, c, w = scipy_volume_rule(4)
    psi = refelem.rational_basis_eval(0, a, b, c)[:, 0]
    assert np.dot(w, psi**2) == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("N", range(6))
def test_seminodal_reference_gram_is_diagonal(N):
    a, b, c, w = scipy_volume_rule(N + 3)
    V = refelem.seminodal_values_abc(N, a, b, c)
    G = V.T @ (w[:, None] * V)
    norms = refelem.seminodal_basis(N).reference_norms()
    assert np.allclose(np.diag(G), norms, rtol=1e-12)
    assert np.abs(G - np.diag(np.diag(G))).max() < 1e-12


def test_volume_cubature_basics():
    vol = refelem.volume_cubature(0)
    assert np.allclose(vol.points, [[-0.25, -0.25, -0.5]])
    assert vol.weights[0] == pytest.approx(8 / 3)
    for N in range(7):
        vol = refelem.volume_cubature(N)
        assert len(vol) == (N + 1) ** 3
        assert vol.weights.sum() == pytest.approx(8 / 3, rel=1e-14)
        assert np.all(vol.points[:, 2] < 1.0)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_volume_cubature_exact_for_seminodal_products_with_bilinear_J(rng, N):
    vol = refelem.volume_cubature(N)
    a, b, c, w = scipy_volume_rule(N + 3)
    coef = rng.uniform(0.2, 1.0, 4)

    def J(a, b):
        return coef[0] + 0.2 * coef[1] * a + 0.2 * coef[2] * b + 0.1 * coef[3] * a * b

    V = refelem.seminodal_values_abc(N, *vol.abc.T)
    Vo = refelem.seminodal_values_abc(N, a, b, c)
    Mmin = V.T @ ((vol.weights * J(*vol.abc[:, :2].T))[:, None] * V)
    Mover = Vo.T @ ((w * J(a, b))[:, None] * Vo)
    assert np.abs(Mmin - Mover).max() < 1e-12


def test_surface_cubature_face_areas():
    areas = [4.0, 2.0, 2 * np.sqrt(2), 2 * np.sqrt(2), 2.0]
    for N in range(5):
        surf = refelem.surface_cubature(N)
        assert len(surf) == 5 * (N + 1) ** 2
        for f, fv in enumerate(refelem.FACE_VERTICES):
            v = refelem.VERTICES[list(fv)]
            if len(fv) == 3:
                oracle = 0.5 * np.linalg.norm(np.cross(v[1] - v[0], v[2] - v[0]))
            else:
                oracle = 4.0
            assert surf.weights[surf.faces == f].sum() == pytest.approx(oracle, rel=1e-14)
            assert oracle == pytest.approx(areas[f])


def test_surface_points_lie_on_their_faces():
    surf = refelem.surface_cubature(3)
    r, s, t = surf.points.T
    on_face = [np.isclose(t, -1), np.isclose(s, -1), np.isclose(r, -t), np.isclose(s, -t), np.isclose(r, -1)]
    for f in range(5):
        assert np.all(on_face[f][surf.faces == f])


def test_surface_cubature_exactness(rng):
    surf = refelem.surface_cubature(1)
    base = surf.faces == 0
    r, s, _ = surf.points[base].T
    assert abs(np.dot(surf.weights[base], r * s)) < 1e-14
    # degree 2N+1 on the s = -1 triangle (vertices V1 V3 V5) against a fine scipy rule
    N = 3
    surf = refelem.surface_cubature(N)
    sel = surf.faces == 1
    r, _, t = surf.points[sel].T
    p = lambda r, t: r**3 * t**2 + r * t**6 + t**7
    xs, ws = special.roots_legendre(20)
    R, T = np.meshgrid(xs, xs, indexing="ij")
    # map the square to the triangle r in [-1, -t]
    rr = -1 + (R + 1) * (1 - T) / 2
    oracle = np.sum(np.outer(ws, ws) * p(rr, T) * (1 - T) / 2)
    assert np.dot(surf.weights[sel], p(r, t)) == pytest.approx(oracle, abs=1e-13)


def test_operator_set_shapes_and_N0():
    ops = refelem.build_operator_set(0)
    assert np.allclose(ops.V, [[1.0]])
    ops = refelem.build_operator_set(2)
    assert ops.V.shape == (27, 14)
    assert ops.Vf.shape == (45, 14)
    assert ops.Np == 14


@pytest.mark.parametrize("N", [1, 2, 3])
def test_Dr_of_r_is_one(N):
    ops = refelem.build_operator_set(N)
    vol = ops.volume
    # expand r by projection with the reference mass
    M = ops.V.T @ (vol.weights[:, None] * ops.V)
    for d, D in enumerate((ops.Dr, ops.Ds, ops.Dt)):
        coef = np.linalg.solve(M, ops.V.T @ (vol.weights * vol.points[:, d]))
        assert np.allclose(ops.V @ coef, vol.points[:, d], atol=1e-12)
        assert np.allclose(D @ coef, 1.0, atol=1e-12)


def test_operators_are_read_only():
    ops = refelem.build_operator_set(1)
    with pytest.raises(ValueError):
        ops.V[0, 0] = 2.0


@pytest.mark.parametrize("N", range(6))
def test_change_of_basis(N):
    S = refelem.change_of_basis(N)
    assert np.allclose(np.linalg.solve(S, S), np.eye(len(S)), atol=1e-11)
    Sn = refelem.change_of_basis(N, normalized=True)
    assert np.abs(Sn @ Sn.T - np.eye(len(S))).max() < 1e-10


def test_change_of_basis_N0_scalar():
    S = refelem.change_of_basis(0)
    assert S.shape == (1, 1) and S[0, 0] != 0


@pytest.mark.parametrize("N", [1, 3, 5])
def test_span_equivalence(rng, N):
    S = refelem.change_of_basis(N)
    a, b, c = random_ref_points(rng, 100)
    psi = refelem.rational_basis_eval(N, a, b, c)
    phi = refelem.seminodal_values_abc(N, a, b, c)
    X = rng.standard_normal((len(S), 20))
    assert np.allclose(psi @ X, phi @ (S @ X), atol=1e-10)

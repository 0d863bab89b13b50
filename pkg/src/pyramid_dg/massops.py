"""Mass matrices on vertex-mapped pyramids and ways to invert them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import refelem
from .errors import DegenerateElementError, InvalidParameterError
from .geometry import VertexMappedPyramid, jacobian_det_abc, map_to_physical


@dataclass(frozen=True)
class DiagonalMass:
    entries: np.ndarray

    def solve(self, b):
        return b / self.entries

    def apply(self, x):
        return self.entries * x


def diag_mass_entries(vertices, N: int) -> np.ndarray:
    """``J(a_i^k, b_j^k) w_i^k w_j^k D_k`` for one element (5, 3) or a stack (K, 5, 3)."""
    basis = refelem.seminodal_basis(N)
    ab = basis.layer_points()
    # J does not depend on c; sample on the base
    J = jacobian_det_abc(vertices, ab[:, 0], ab[:, 1], -np.ones(len(ab)))
    if np.any(J <= 0):
        raise DegenerateElementError("non-positive Jacobian at a layer point")
    return J * basis.reference_norms()


def diag_mass(pyr: VertexMappedPyramid, N: int) -> DiagonalMass:
    return DiagonalMass(diag_mass_entries(pyr.vertices, N))


def _quadrature_J(pyr, cub):
    J = jacobian_det_abc(pyr.vertices, *cub.abc.T)
    if np.any(J <= 0):
        raise DegenerateElementError("non-positive Jacobian at a cubature point")
    return J


def seminodal_gram(pyr: VertexMappedPyramid, N: int, npts: int | None = None) -> np.ndarray:
    """Dense semi-nodal mass matrix by quadrature with ``npts`` points per direction."""
    cub = refelem.volume_cubature(N, npts)
    V = refelem.seminodal_values_abc(N, *cub.abc.T)
    wJ = cub.weights * _quadrature_J(pyr, cub)
    return V.T @ (wJ[:, None] * V)


def dense_mass_rational(pyr: VertexMappedPyramid, N: int) -> np.ndarray:
    """Rational-basis mass matrix; the minimal rule integrates it exactly."""
    cub = refelem.volume_cubature(N)
    V = refelem.rational_basis_eval(N, *cub.abc.T)
    wJ = cub.weights * _quadrature_J(pyr, cub)
    M = V.T @ (wJ[:, None] * V)
    return 0.5 * (M + M.T)


def eig_bounds(pyr: VertexMappedPyramid, N: int) -> tuple[float, float]:
    """Extreme mass eigenvalues: min and max of J over the (N+1)^2 Gauss-Legendre base points."""
    x = refelem.gauss_rule(N + 1).nodes
    A, B = np.meshgrid(x, x, indexing="ij")
    J = jacobian_det_abc(pyr.vertices, A.ravel(), B.ravel(), -np.ones(A.size))
    return float(J.min()), float(J.max())


@dataclass
class ChebyshevReport:
    """Per-iteration history of a Chebyshev solve.

    ``predicted`` is ``2 tau^k ||r_0||``: the residual polynomial is bounded
    by the same Chebyshev factor that bounds the error, so this is the rate
    curve the residuals are compared against. ``error_bound`` is the same
    factor applied to ``||x - x_0|| = ||x||``.
    """

    iterates: list = field(default_factory=list)
    predicted: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    error_bound: list = field(default_factory=list)
    tau: float = 0.0
    kappa: float = 1.0
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.iterates) - 1


def chebyshev_tau(lambda_min: float, lambda_max: float) -> float:
    q = np.sqrt(lambda_min / lambda_max)
    return (1.0 - q) / (1.0 + q)


def chebyshev_solve(apply_M, b, lambda_min: float, lambda_max: float,
                    tol: float = 1e-10, max_iter: int = 200, x_true=None):
    """Chebyshev semi-iteration for SPD ``M x = b`` with spectrum in ``[lambda_min, lambda_max]``.

    Starts from zero and stops once ``||b - M x_k|| < tol ||b||``. If
    ``x_true`` is given, errors are recorded too. Non-convergence is reported
    through ``report.converged``, not raised.
    """
    if lambda_min <= 0 or lambda_min > lambda_max:
        raise InvalidParameterError("need 0 < lambda_min <= lambda_max")
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    b = np.asarray(b, dtype=float)
    theta = 0.5 * (lambda_max + lambda_min)
    delta = 0.5 * (lambda_max - lambda_min)
    tau = chebyshev_tau(lambda_min, lambda_max)
    rep = ChebyshevReport(tau=tau, kappa=lambda_max / lambda_min)
    bnorm = np.linalg.norm(b)
    xnorm = np.linalg.norm(x_true) if x_true is not None else np.nan

    x = np.zeros_like(b)
    r = b.copy()

    def record(k):
        rep.iterates.append(float(np.linalg.norm(r)))
        rep.predicted.append(float(2.0 * tau**k * bnorm) if k else float(bnorm))
        if x_true is not None:
            rep.errors.append(float(np.linalg.norm(x_true - x)))
            rep.error_bound.append(float(2.0 * tau**k * xnorm) if k else float(xnorm))

    record(0)
    if bnorm == 0:
        rep.converged = True
        return x, rep
    if delta <= 1e-15 * theta:
        # spectrum is a single point; one step is exact
        x = b / theta
        r = b - apply_M(x)
        record(1)
        rep.converged = rep.iterates[-1] < tol * bnorm
        return x, rep

    sigma = theta / delta
    rho = 1.0 / sigma
    d = r / theta
    for k in range(1, max_iter + 1):
        x = x + d
        r = r - apply_M(d)
        record(k)
        if rep.iterates[-1] < tol * bnorm:
            rep.converged = True
            break
        rho_next = 1.0 / (2.0 * sigma - rho)
        d = rho_next * rho * d + (2.0 * rho_next / delta) * r
        rho = rho_next
    return x, rep


def _eval_f(f, xyz):
    return np.asarray(f(xyz[..., 0], xyz[..., 1], xyz[..., 2]), dtype=float)


def project(f, pyr: VertexMappedPyramid, N: int, mode: str = "seminodal"):
    """L2 projection of ``f(x, y, z)`` onto the element's semi-nodal or LSC-DG space.

    LSC-DG uses ``phi / sqrt(J)`` so its mass is the reference (diagonal)
    mass. Moments and the returned L2 error both use (N+3)^3 quadrature.
    """
    if mode not in ("seminodal", "lsc"):
        raise InvalidParameterError(f"unknown projection mode {mode!r}")
    cub = refelem.volume_cubature(N, N + 3)
    J = _quadrature_J(pyr, cub)
    V = refelem.seminodal_values_abc(N, *cub.abc.T)
    fq = _eval_f(f, map_to_physical(pyr, *cub.points.T))
    wJ = cub.weights * J
    if mode == "seminodal":
        coef = (V.T @ (wJ * fq)) / diag_mass_entries(pyr.vertices, N)
        uq = V @ coef
    else:
        Vt = V / np.sqrt(J)[:, None]
        coef = (Vt.T @ (wJ * fq)) / refelem.seminodal_basis(N).reference_norms()
        uq = Vt @ coef
    err = np.sqrt(np.dot(wJ, (fq - uq) ** 2))
    return coef, float(err)


def project_mesh(f, mesh, N: int, mode: str = "seminodal") -> float:
    """Global L2 projection error over every element of ``mesh``."""
    total = 0.0
    for verts in mesh.element_vertices():
        _, e = project(f, VertexMappedPyramid(verts), N, mode)
        total += e * e
    return float(np.sqrt(total))

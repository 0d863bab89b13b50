"""One-dimensional orthogonal polynomial primitives.

Jacobi polynomials use the classical normalization
``P_n^{(alpha, beta)}(1) = binom(n + alpha, n)``; the weight function of a
Gauss-Jacobi rule is ``(1 - x)**alpha * (1 + x)**beta`` on ``[-1, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, lgamma, log

import numpy as np

from .errors import InvalidParameterError

MAX_ORDER = 10


def _check_weights(alpha, beta):
    if alpha <= -1:
        raise InvalidParameterError(f"alpha must be > -1, got {alpha}")
    if beta <= -1:
        raise InvalidParameterError(f"beta must be > -1, got {beta}")


def jacobi_eval(n: int, alpha: float, beta: float, x):
    """Evaluate the Jacobi polynomial of degree ``n`` at ``x`` by the three-term recurrence."""
    _check_weights(alpha, beta)
    if n < 0:
        raise InvalidParameterError(f"degree must be nonnegative, got {n}")
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev
    ab = alpha + beta
    p = 0.5 * ((ab + 2.0) * x + (alpha - beta))
    for k in range(1, n):
        c = 2 * k + ab
        a1 = 2.0 * (k + 1) * (k + ab + 1) * c
        a2 = (c + 1) * (alpha * alpha - beta * beta)
        a3 = (c + 1) * (c + 2) * c
        a4 = 2.0 * (k + alpha) * (k + beta) * (c + 2)
        p_prev, p = p, ((a2 + a3 * x) * p - a4 * p_prev) / a1
    return p


def jacobi_deriv(n: int, alpha: float, beta: float, x):
    """Derivative of :func:`jacobi_eval` in ``x``."""
    _check_weights(alpha, beta)
    if n < 0:
        raise InvalidParameterError(f"degree must be nonnegative, got {n}")
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros_like(x)
    return 0.5 * (n + alpha + beta + 1) * jacobi_eval(n - 1, alpha + 1, beta + 1, x)


def jacobi_norm2(n: int, alpha: float, beta: float) -> float:
    """Squared weighted L2 norm of the classical Jacobi polynomial of degree ``n``."""
    _check_weights(alpha, beta)
    ab = alpha + beta
    if n == 0:
        return exp((ab + 1) * log(2.0) + lgamma(alpha + 1) + lgamma(beta + 1) - lgamma(ab + 2))
    return exp(
        (ab + 1) * log(2.0)
        - log(2 * n + ab + 1)
        + lgamma(n + alpha + 1)
        + lgamma(n + beta + 1)
        - lgamma(n + ab + 1)
        - lgamma(n + 1)
    )


def jacobi_orthonormal(n: int, alpha: float, beta: float, x):
    """Jacobi polynomial scaled to unit norm under its weight."""
    return jacobi_eval(n, alpha, beta, x) / np.sqrt(jacobi_norm2(n, alpha, beta))


def weight_mass(alpha: float, beta: float) -> float:
    """Integral of ``(1-x)**alpha (1+x)**beta`` over ``[-1, 1]``."""
    return jacobi_norm2(0, alpha, beta)


@dataclass(frozen=True)
class Rule1D:
    nodes: np.ndarray
    weights: np.ndarray
    alpha: float = 0.0
    beta: float = 0.0

    def __len__(self):
        return len(self.nodes)

    def integrate(self, f):
        """Apply the rule to ``f``; the weight function is implicit."""
        return np.dot(self.weights, f(self.nodes))


def _golub_welsch(npts, alpha, beta):
    ab = alpha + beta
    k = np.arange(npts, dtype=float)
    diag = np.empty(npts)
    diag[0] = (beta - alpha) / (ab + 2)
    c = 2 * k[1:] + ab
    diag[1:] = (beta**2 - alpha**2) / (c * (c + 2))

    if npts == 1:
        return diag
    k = np.arange(1, npts, dtype=float)
    c = 2 * k + ab
    with np.errstate(invalid="ignore", divide="ignore"):
        off2 = 4 * k * (k + alpha) * (k + beta) * (k + ab) / (c**2 * (c + 1) * (c - 1))
    # (k + ab) / (c - 1) is 0/0 at k=1 when ab=-1; the limit is 1
    off2[0] = 4 * (1 + alpha) * (1 + beta) / ((2 + ab) ** 2 * (3 + ab))
    off = np.sqrt(off2)
    return np.linalg.eigvalsh(np.diag(diag) + np.diag(off, 1) + np.diag(off, -1))


def gauss_rule(npts: int, alpha: float = 0.0, beta: float = 0.0,
               tol: float = 1e-14, max_iter: int = 100) -> Rule1D:
    """Gauss-Jacobi rule with ``npts`` nodes, exact through degree ``2*npts - 1``.

    Nodes start from the eigenvalues of the Jacobi matrix and are polished by
    Newton iteration on the recurrence; weights come from the closed form in
    terms of ``P_n'`` at the nodes.
    """
    if npts < 1:
        raise InvalidParameterError(f"npts must be >= 1, got {npts}")
    _check_weights(alpha, beta)
    x = _golub_welsch(npts, alpha, beta)
    for _ in range(max_iter):
        dx = jacobi_eval(npts, alpha, beta, x) / jacobi_deriv(npts, alpha, beta, x)
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            break
    x = np.sort(x)

    ab = alpha + beta
    logc = ((ab + 1) * log(2.0) + lgamma(npts + alpha + 1) + lgamma(npts + beta + 1)
            - lgamma(npts + ab + 1) - lgamma(npts + 1))
    dp = jacobi_deriv(npts, alpha, beta, x)
    w = exp(logc) / ((1 - x**2) * dp**2)
    return Rule1D(nodes=x, weights=w, alpha=float(alpha), beta=float(beta))


def _check_nodes(nodes):
    nodes = np.asarray(nodes, dtype=float)
    if len(np.unique(nodes)) != len(nodes):
        raise InvalidParameterError("interpolation nodes must be distinct")
    return nodes


def lagrange_basis(nodes, x):
    """Values of all Lagrange cardinal polynomials; shape ``x.shape + (len(nodes),)``."""
    nodes = _check_nodes(nodes)
    x = np.asarray(x, dtype=float)[..., None]
    n = len(nodes)
    out = np.ones(x.shape[:-1] + (n,))
    for i in range(n):
        for j in range(n):
            if j != i:
                out[..., i] *= (x[..., 0] - nodes[j]) / (nodes[i] - nodes[j])
    return out


def lagrange_basis_deriv(nodes, x):
    """Derivatives of all Lagrange cardinal polynomials, same layout as :func:`lagrange_basis`."""
    nodes = _check_nodes(nodes)
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    out = np.zeros(x.shape + (n,))
    for i in range(n):
        for m in range(n):
            if m == i:
                continue
            term = np.full(x.shape, 1.0 / (nodes[i] - nodes[m]))
            for j in range(n):
                if j != i and j != m:
                    term = term * (x - nodes[j]) / (nodes[i] - nodes[j])
            out[..., i] += term
    return out


def lagrange_eval(nodes, i: int, x):
    nodes = _check_nodes(nodes)
    if not 0 <= i < len(nodes):
        raise InvalidParameterError(f"index {i} out of range")
    return lagrange_basis(nodes, x)[..., i]


def lagrange_deriv(nodes, i: int, x):
    nodes = _check_nodes(nodes)
    if not 0 <= i < len(nodes):
        raise InvalidParameterError(f"index {i} out of range")
    return lagrange_basis_deriv(nodes, x)[..., i]

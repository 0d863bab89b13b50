"""The numerical studies behind the CLI, as plain functions returning rows."""

from __future__ import annotations

import numpy as np

from . import dg
from .geometry import warped_pyramid
from .massops import chebyshev_solve, dense_mass_rational, eig_bounds, project, project_mesh
from .mesh import build_mesh

BASES = ("seminodal", "lsc")
STUDY_CFL = 2.0


def smooth_target(x, y, z):
    return np.cosh(x + y + z)


def convergence_rate(errors, K1Ds):
    """Observed order between consecutive refinement levels."""
    e, k = np.asarray(errors, dtype=float), np.asarray(K1Ds, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(k[1:] / k[:-1])


def projection_vs_gamma(gammas, Ns):
    rows = []
    for basis in BASES:
        for g in gammas:
            for N in Ns:
                _, err = project(smooth_target, warped_pyramid(g, N), N, basis)
                rows.append((basis, g, N, err))
    return rows


def projection_vs_h(K1Ds, N, delta=None, seed=0):
    rows = []
    for basis in BASES:
        for K1D in K1Ds:
            mesh = build_mesh(K1D, N, delta=delta, seed=seed)
            rows.append((basis, K1D, N, project_mesh(smooth_target, mesh, N, basis)))
    return rows


def chebyshev_study(gamma, N=5, tol=1e-10, max_iter=200, seed=0):
    """Solve ``M x = b`` (rational-basis mass of the warped pyramid, random ``x``)."""
    pyr = warped_pyramid(gamma, N)
    M = dense_mass_rational(pyr, N)
    x = np.random.default_rng(seed).standard_normal(M.shape[0])
    b = M @ x
    lo, hi = eig_bounds(pyr, N)
    _, rep = chebyshev_solve(lambda v: M @ v, b, lo, hi, tol=tol, max_iter=max_iter,
                             x_true=np.linalg.solve(M, b))
    return rep


def eig_study(gammas, Ns):
    rows = []
    for g in gammas:
        for N in Ns:
            pyr = warped_pyramid(g, N)
            lo, hi = eig_bounds(pyr, N)
            ev = np.linalg.eigvalsh(dense_mass_rational(pyr, N))
            rows.append((g, N, lo, hi, float(ev[0]), float(ev[-1])))
    return rows


def study_dt(ctx, K1D, c_max=1.0, cfl=STUDY_CFL):
    """Stable step, capped at ``h^2`` with ``h = 2 / K1D`` the hexahedron size."""
    return min(dg.stable_dt(ctx, c_max, cfl), (2.0 / K1D) ** 2)


def advection_run(K1D, N, alpha=1.0, final_time=None, nsteps=None, delta=None, seed=0,
                  cfl=STUDY_CFL, diagnostics=None):
    """Advect ``sin(pi x)`` with ``beta = (1, 0, 0)`` on the periodic cube.

    Either ``final_time`` or a step count ``nsteps`` (at the stable step) is
    given. Returns ``(l2_error, energies)``.
    """
    ctx = dg.DGContext.build(build_mesh(K1D, N, delta=delta, seed=seed, periodic=True), N)
    st = dg.DGState.from_fields(ctx, dg.project_fields(ctx, lambda x, y, z: dg.advected_sine(x, y, z, 0.0)))
    dt = study_dt(ctx, K1D, 1.0, cfl)
    if final_time is None:
        final_time = (nsteps or 200) * dt
    energies = dg.run(ctx, st, lambda c, s: dg.advection_rhs(c, s, (1.0, 0.0, 0.0), alpha), dt, final_time,
                      exact=dg.advected_sine, diagnostics=diagnostics, error_every=0)
    return dg.l2_error(ctx, st, dg.advected_sine), np.asarray(energies)


def wave_run(K1D, N, final_time=0.5, delta=None, seed=0, cfl=STUDY_CFL, diagnostics=None):
    """Resonant cavity on the free-surface cube.

    Returns ``(pressure_error, all_fields_error)`` at ``final_time``.
    """
    ctx = dg.DGContext.build(build_mesh(K1D, N, delta=delta, seed=seed), N)
    st = dg.DGState.from_fields(ctx, dg.project_fields(ctx, lambda x, y, z: dg.resonant_cavity(x, y, z, 0.0)))
    dg.run(ctx, st, lambda c, s: dg.wave_rhs(c, s), study_dt(ctx, K1D, 1.0, cfl), final_time,
           exact=dg.resonant_cavity, diagnostics=diagnostics)
    return dg.l2_error(ctx, st, dg.resonant_cavity, fields=[0]), dg.l2_error(ctx, st, dg.resonant_cavity)


def spectral_radius(K1D, N, delta=0.0, seed=0):
    """Wave-operator spectral radius and ``rho h / (2 (N+1)(N+3) / 3)`` with ``h`` the mean volume/area ratio."""
    ctx = dg.DGContext.build(build_mesh(K1D, N, delta=delta, seed=seed), N)
    est = dg.estimate_spectral_radius(ctx, lambda c, s: dg.wave_rhs(c, s), 4, seed=seed)
    return est, est.rho * float(np.mean(ctx.h)) / dg.trace_constant(N)

"""Time-explicit DG for advection and acoustics on pyramid meshes.

A right-hand side evaluation is three array passes: the volume kernel (weak
derivatives at volume cubature), the surface kernel (numerical flux at face
cubature, lifted), and the diagonal mass inverse. The Runge-Kutta update
kernel advances coefficients and re-interpolates face traces so the next
surface pass reads current data.

Jump conventions: the advection flux uses ``u- - u+`` and the acoustic
penalties use ``q+ - q-``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels, refelem
from .errors import InvalidParameterError, ShapeMismatchError, StaleTraceError
from .geometry import geometric_factors_batch, jacobian_det_abc
from .massops import diag_mass_entries
from .mesh import FREE_SURFACE, PyramidMesh, connect_faces

CACHE_VERSION = 1

# Carpenter & Kennedy (1994), five-stage fourth-order 2N-storage scheme
RK4A = np.array([
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
])
RK4B = np.array([
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
])
RK4C = np.array([
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363962896.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
])


@dataclass
class DGContext:
    N: int
    mesh: PyramidMesh
    ops: refelem.OperatorSet
    J: np.ndarray
    metric: np.ndarray
    x: np.ndarray
    xf: np.ndarray
    normals: np.ndarray
    sJ: np.ndarray
    mass: np.ndarray
    mapP: np.ndarray
    bc: np.ndarray
    faces: object = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def K(self):
        return self.mesh.K

    @property
    def Np(self):
        return self.ops.Np

    @cached_property
    def wJ(self):
        return np.ascontiguousarray(self.ops.volume.weights * self.J)

    @cached_property
    def wsJ(self):
        return np.ascontiguousarray(self.ops.surface.weights * self.sJ)

    @cached_property
    def minv(self):
        return 1.0 / self.mass

    @cached_property
    def h(self) -> np.ndarray:
        """Per-element volume / surface area."""
        return self.wJ.sum(axis=1) / self.wsJ.sum(axis=1)

    def fine(self):
        """Basis values, physical points and ``w J`` on the (N+3)^3 over-integration rule."""
        if "fine" not in self._cache:
            cub = refelem.volume_cubature(self.N, self.N + 3)
            V = refelem.seminodal_values_abc(self.N, *cub.abc.T)
            ev = self.mesh.element_vertices()
            x = np.einsum("pv,kvi->kpi", refelem.vertex_shape_functions(*cub.points.T), ev)
            wJ = cub.weights * jacobian_det_abc(ev, *cub.abc.T)
            self._cache["fine"] = (V, x, wJ)
        return self._cache["fine"]

    @classmethod
    def build(cls, mesh: PyramidMesh, N: int, cache_path=None) -> "DGContext":
        ops = refelem.build_operator_set(N)
        if cache_path is not None and Path(cache_path).exists():
            arrays = load_operator_cache(cache_path, mesh, N)
            if arrays is not None:
                return cls(N, mesh, ops, **arrays)
        gf = geometric_factors_batch(mesh.element_vertices(), ops.volume, ops.surface)
        faces = connect_faces(mesh, N, gf.xf)
        nfp = (N + 1) ** 2
        bc = np.repeat(faces.tag == FREE_SURFACE, nfp, axis=1)
        ctx = cls(N, mesh, ops, gf.J, gf.metric, gf.x, gf.xf, gf.normals, gf.sJ,
                  diag_mass_entries(mesh.element_vertices(), N), faces.mapP, bc, faces)
        if cache_path is not None:
            save_operator_cache(ctx, cache_path)
        return ctx


_CACHED_FIELDS = ("J", "metric", "x", "xf", "normals", "sJ", "mass", "mapP", "bc")


def _cache_key(mesh, N):
    return f"{mesh.digest()}:N={N}"


def save_operator_cache(ctx: DGContext, path) -> None:
    """Versioned ``.npz`` holding reference operators and per-element geometry."""
    ops = ctx.ops
    np.savez(
        path,
        version=np.array(CACHE_VERSION),
        key=np.array(_cache_key(ctx.mesh, ctx.N)),
        V=ops.V, Dr=ops.Dr, Ds=ops.Ds, Dt=ops.Dt, Vf=ops.Vf,
        **{f: getattr(ctx, f) for f in _CACHED_FIELDS},
    )


def load_operator_cache(path, mesh: PyramidMesh, N: int):
    """Per-element arrays from a cache file, or ``None`` if it belongs to another (mesh, N)."""
    with np.load(path) as data:
        if int(data["version"]) != CACHE_VERSION or str(data["key"]) != _cache_key(mesh, N):
            return None
        ops = refelem.build_operator_set(N)
        for name in ("V", "Dr", "Ds", "Dt", "Vf"):
            if not np.allclose(data[name], getattr(ops, name), rtol=0, atol=1e-13):
                return None
        return {f: data[f] for f in _CACHED_FIELDS}


@dataclass
class DGState:
    """Coefficients ``q[field, element, mode]`` with face traces and RK residual."""

    q: np.ndarray
    traces: np.ndarray
    res: np.ndarray
    t: float = 0.0
    traces_valid: bool = False

    @property
    def nfields(self):
        return self.q.shape[0]

    @classmethod
    def zeros(cls, ctx: DGContext, nfields: int) -> "DGState":
        q = np.zeros((nfields, ctx.K, ctx.Np))
        st = cls(q, np.zeros((nfields, ctx.K, ctx.ops.Vf.shape[0])), np.zeros_like(q))
        st.refresh_traces(ctx)
        return st

    @classmethod
    def from_fields(cls, ctx: DGContext, q, t: float = 0.0) -> "DGState":
        q = np.array(q, dtype=float)
        if q.ndim == 2:
            q = q[None]
        if q.shape[1:] != (ctx.K, ctx.Np):
            raise ShapeMismatchError(f"coefficients must be (nfields, {ctx.K}, {ctx.Np}), got {q.shape}")
        st = cls(np.ascontiguousarray(q), np.zeros((q.shape[0], ctx.K, ctx.ops.Vf.shape[0])), np.zeros_like(q), t)
        st.refresh_traces(ctx)
        return st

    def refresh_traces(self, ctx: DGContext) -> None:
        kernels.get("interp_faces")(self.q, ctx.ops.Vf, self.traces)
        self.traces_valid = True

    def mark_stale(self) -> None:
        self.traces_valid = False

    def copy(self) -> "DGState":
        return DGState(self.q.copy(), self.traces.copy(), self.res.copy(), self.t, self.traces_valid)


def _check_state(ctx, state, nfields):
    if state.q.shape != (nfields, ctx.K, ctx.Np):
        raise ShapeMismatchError(f"expected state of shape {(nfields, ctx.K, ctx.Np)}, got {state.q.shape}")
    if not state.traces_valid:
        raise StaleTraceError("face traces are stale; call refresh_traces first")


def _beta_fields(ctx, beta):
    key = ("beta", beta if isinstance(beta, tuple) else id(beta))
    if key in ctx._cache:
        return ctx._cache[key]
    if callable(beta):
        bq = np.asarray(beta(*np.moveaxis(ctx.x, -1, 0)), dtype=float)
        bf = np.asarray(beta(*np.moveaxis(ctx.xf, -1, 0)), dtype=float)
        bq, bf = np.moveaxis(bq, 0, -1), np.moveaxis(bf, 0, -1)
    else:
        b = np.asarray(beta, dtype=float)
        if b.shape != (3,):
            raise ShapeMismatchError("constant beta must be a 3-vector")
        bq = np.broadcast_to(b, ctx.x.shape)
        bf = np.broadcast_to(b, ctx.xf.shape)
    out = (np.ascontiguousarray(bq), np.ascontiguousarray(np.einsum("kqd,kqd->kq", bf, ctx.normals)))
    ctx._cache[key] = out
    return out


def advection_volume(ctx, u, beta, out=None):
    """``S u`` for ``div(beta u)`` with divergence-free beta: ``V^T diag(w J) (beta . grad u)``."""
    bq, _ = _beta_fields(ctx, beta)
    out = np.empty((ctx.K, ctx.Np)) if out is None else out
    ops = ctx.ops
    kernels.get("volume_advection")(u, ops.Dr, ops.Ds, ops.Dt, ops.V, ctx.metric, ctx.wJ, bq, out)
    return out


def volume_residual(ctx: DGContext, q, kind: str = "wave", npts: int | None = None, beta=(1.0, 0.0, 0.0)):
    """Volume terms only, at an ``npts^3`` rule (default: the solver's own ``(N+1)^3``).

    Used to confirm the minimal rule integrates the volume terms exactly.
    """
    if npts is None:
        ops, metric, wJ, x = ctx.ops, ctx.metric, ctx.wJ, ctx.x
    else:
        vol = refelem.volume_cubature(ctx.N, npts)
        V, grad = refelem.seminodal_eval(ctx.N, *vol.abc.T)
        ops = refelem.OperatorSet(ctx.N, V, *(np.ascontiguousarray(grad[..., d]) for d in range(3)),
                                  ctx.ops.Vf, vol, ctx.ops.surface)
        gf = geometric_factors_batch(ctx.mesh.element_vertices(), vol, ctx.ops.surface)
        metric, wJ, x = gf.metric, np.ascontiguousarray(vol.weights * gf.J), gf.x
    if kind == "wave":
        vp, vu = np.empty((ctx.K, ctx.Np)), np.empty((3, ctx.K, ctx.Np))
        kernels.get("volume_wave")(q[0], q[1:], ops.Dr, ops.Ds, ops.Dt, ops.V, metric, wJ, vp, vu)
        return np.concatenate([vp[None], vu])
    if kind == "advection":
        if callable(beta):
            bq = np.moveaxis(np.asarray(beta(*np.moveaxis(x, -1, 0)), dtype=float), 0, -1)
        else:
            bq = np.broadcast_to(np.asarray(beta, dtype=float), x.shape)
        bq = np.ascontiguousarray(bq)
        out = np.empty((ctx.K, ctx.Np))
        kernels.get("volume_advection")(q[0], ops.Dr, ops.Ds, ops.Dt, ops.V, metric, wJ, bq, out)
        return out[None]
    raise InvalidParameterError(f"unknown kind {kind!r}")


def advection_rhs(ctx: DGContext, state: DGState, beta=(1.0, 0.0, 0.0), alpha: float = 1.0):
    """``du/dt`` for ``u_t + div(beta u) = 0``; ``alpha = 1`` upwind, ``0`` central.

    The lifted flux is ``(beta_n - alpha |beta_n|) / 2 * (u- - u+)`` entering
    with the sign that makes the scheme energy stable.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError("alpha must lie in [0, 1]")
    _check_state(ctx, state, 1)
    beta = tuple(beta) if not callable(beta) else beta
    _, bn = _beta_fields(ctx, beta)
    u, uf = state.q[0], state.traces[0]
    vol = advection_volume(ctx, u, beta)
    surf = np.empty_like(vol)
    kernels.get("surface_advection")(uf, ctx.mapP, bn, float(alpha), ctx.ops.Vf, ctx.wsJ, surf)
    return (-(vol + surf) * ctx.minv)[None]


@dataclass(frozen=True)
class WaveMaterial:
    """Piecewise-constant density and bulk modulus (scalars or per-element arrays)."""

    rho: object = 1.0
    kappa: object = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.rho) <= 0) or np.any(np.asarray(self.kappa) <= 0):
            raise InvalidParameterError("rho and kappa must be positive")

    @property
    def c(self):
        return np.sqrt(np.asarray(self.kappa) / np.asarray(self.rho))

    def per_element(self, K):
        return (np.broadcast_to(np.asarray(self.rho, dtype=float), (K,)),
                np.broadcast_to(np.asarray(self.kappa, dtype=float), (K,)))


def _wave_taus(ctx, material, tau_scale):
    key = ("tau", id(material), material.rho if np.isscalar(material.rho) else None,
           material.kappa if np.isscalar(material.kappa) else None, tau_scale)
    if key not in ctx._cache:
        rho, kappa = material.per_element(ctx.K)
        z = np.sqrt(rho * kappa)  # rho * c
        zM = np.repeat(z[:, None], ctx.mapP.shape[1], axis=1)
        zP = zM.ravel()[ctx.mapP]
        zavg = 0.5 * (zM + zP)
        ctx._cache[key] = (tau_scale / zavg, tau_scale * zavg)
    return ctx._cache[key]


def wave_rhs(ctx: DGContext, state: DGState, material: WaveMaterial = WaveMaterial(), tau_scale: float = 1.0):
    """Time derivative of ``(p, u1, u2, u3)`` for the first-order acoustic system.

    ``tau_scale = 0`` switches the penalties off (central, energy conserving).
    Free-surface faces use the mirror state ``p+ = -p-``, ``u+ = u-``.
    """
    _check_state(ctx, state, 4)
    ops = ctx.ops
    rho, kappa = material.per_element(ctx.K)
    tau_p, tau_u = _wave_taus(ctx, material, tau_scale)
    p, u = state.q[0], state.q[1:]
    vp, vu = np.empty((ctx.K, ctx.Np)), np.empty((3, ctx.K, ctx.Np))
    kernels.get("volume_wave")(p, u, ops.Dr, ops.Ds, ops.Dt, ops.V, ctx.metric, ctx.wJ, vp, vu)
    sp, su = np.empty_like(vp), np.empty_like(vu)
    kernels.get("surface_wave")(state.traces[0], state.traces[1:], ctx.mapP, ctx.bc, ctx.normals,
                                tau_p, tau_u, ops.Vf, ctx.wsJ, sp, su)
    out = np.empty_like(state.q)
    out[0] = -(kappa[:, None] * ctx.minv) * (vp + sp)
    out[1:] = -(ctx.minv / rho[:, None]) * (vu + su)
    return out


def lsrk4_step(ctx: DGContext, state: DGState, rhs_fn, dt: float) -> DGState:
    """Advance ``state`` in place by one 5-stage low-storage RK4 step.

    ``rhs_fn(ctx, state)`` returns the time derivative of ``state.q``;
    ``state.t`` is set to each stage time before the call.
    """
    if dt <= 0:
        raise InvalidParameterError("dt must be positive")
    update = kernels.get("rk_update")
    t0 = state.t
    state.res[...] = 0.0
    for a, b, c in zip(RK4A, RK4B, RK4C):
        state.t = t0 + c * dt
        rhs = np.ascontiguousarray(rhs_fn(ctx, state))
        update(state.q, state.res, rhs, a, b, dt, ctx.ops.Vf, state.traces)
        state.traces_valid = True
    state.t = t0 + dt
    return state


def stable_dt(ctx: DGContext, c_max: float = 1.0, cfl: float = 0.5) -> float:
    """``cfl * 3 h_min / (2 (N+1)(N+3) c_max)`` with ``h`` the volume / surface-area ratio."""
    N = ctx.N
    return cfl * 3.0 * float(ctx.h.min()) / (2.0 * (N + 1) * (N + 3) * c_max)


def trace_constant(N: int) -> float:
    return 2.0 * (N + 1) * (N + 3) / 3.0


def project_fields(ctx: DGContext, f) -> np.ndarray:
    """Element-wise L2 projection of ``f(x, y, z)`` (one field or a stack of fields)."""
    V, x, wJ = ctx.fine()
    vals = np.asarray(f(x[..., 0], x[..., 1], x[..., 2]), dtype=float)
    if vals.ndim == 2:
        vals = vals[None]
    return np.einsum("fkq,kq,qn->fkn", vals, wJ, V) / ctx.mass


def l2_error(ctx: DGContext, state: DGState, exact, t: float | None = None, fields=None) -> float:
    """L2 error against ``exact(x, y, z, t)`` with (N+3)^3 quadrature.

    ``fields`` selects a subset of the state (default: all of them).
    """
    V, x, wJ = ctx.fine()
    t = state.t if t is None else t
    ex = np.asarray(exact(x[..., 0], x[..., 1], x[..., 2], t), dtype=float)
    if ex.ndim == 2:
        ex = ex[None]
    q = state.q
    if fields is not None:
        q, ex = q[list(fields)], ex[list(fields)]
    uq = np.einsum("fkn,qn->fkq", q, V)
    return float(np.sqrt(np.einsum("kq,fkq->", wJ, (uq - ex) ** 2)))


def energy(ctx: DGContext, state: DGState, material: WaveMaterial | None = None) -> float:
    """``sum int u^2 / 2`` (one field) or ``sum int (p^2/kappa + rho |u|^2) / 2`` (four fields)."""
    mq2 = ctx.mass * state.q**2
    if state.nfields == 1:
        return 0.5 * float(mq2.sum())
    rho, kappa = (material or WaveMaterial()).per_element(ctx.K)
    return 0.5 * float((mq2[0].sum(axis=1) / kappa).sum() + (rho * mq2[1:].sum(axis=(0, 2))).sum())


def resonant_cavity(x, y, z, t):
    """Standing wave on ``[-1, 1]^3`` with ``p = 0`` on the boundary (rho = kappa = 1)."""
    w = np.sqrt(3.0) * np.pi / 2.0
    cx, cy, cz = np.cos(np.pi * x / 2), np.cos(np.pi * y / 2), np.cos(np.pi * z / 2)
    sx, sy, sz = np.sin(np.pi * x / 2), np.sin(np.pi * y / 2), np.sin(np.pi * z / 2)
    s = np.sin(w * t) / np.sqrt(3.0)
    return np.stack([cx * cy * cz * np.cos(w * t), sx * cy * cz * s, cx * sy * cz * s, cx * cy * sz * s])


def advected_sine(x, y, z, t):
    """``sin(pi (x - t))``: exact solution for ``beta = (1, 0, 0)`` on the periodic cube."""
    return np.sin(np.pi * (x - t))[None]


@dataclass
class SpectralRadiusEstimate:
    rho: float
    converged: bool
    restarts: int
    history: list


def arnoldi_spectral_radius(matvec, n: int, m: int = 40, tol: float = 1e-4, seed: int = 0,
                            max_restarts: int = 200) -> SpectralRadiusEstimate:
    """Largest eigenvalue magnitude of a linear operator by restarted Arnoldi.

    Each cycle builds an ``m``-dimensional Krylov basis and restarts from the
    (real span of the) dominant Ritz vector; it stops when the dominant Ritz
    magnitude changes by less than ``tol`` relative between cycles.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    m = min(m, n)
    history = []
    for cycle in range(max_restarts):
        Q = np.zeros((n, m + 1))
        H = np.zeros((m + 1, m))
        Q[:, 0] = v / np.linalg.norm(v)
        k = m
        for j in range(m):
            w = matvec(Q[:, j])
            for _ in range(2):  # classical Gram-Schmidt, twice
                c = Q[:, :j + 1].T @ w
                w -= Q[:, :j + 1] @ c
                H[:j + 1, j] += c
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] <= 1e-12 * np.abs(H[:j + 1, j]).max():
                k = j + 1
                break
            Q[:, j + 1] = w / H[j + 1, j]
        theta, Y = np.linalg.eig(H[:k, :k])
        i = int(np.argmax(np.abs(theta)))
        est = float(np.abs(theta[i]))
        history.append(est)
        if k < m or (cycle > 0 and abs(est - history[-2]) <= tol * est):
            return SpectralRadiusEstimate(est, True, cycle, history)
        y = Q[:, :k] @ Y[:, i]
        v = y.real + y.imag
    return SpectralRadiusEstimate(history[-1], False, max_restarts, history)


def estimate_spectral_radius(ctx: DGContext, rhs_operator, nfields: int, **kw) -> SpectralRadiusEstimate:
    """Spectral radius of the linear, autonomous semi-discrete operator ``rhs_operator(ctx, state)``."""
    shape = (nfields, ctx.K, ctx.Np)
    state = DGState.zeros(ctx, nfields)

    def matvec(x):
        state.q[...] = x.reshape(shape)
        state.refresh_traces(ctx)
        return np.asarray(rhs_operator(ctx, state)).ravel()

    return arnoldi_spectral_radius(matvec, int(np.prod(shape)), **kw)


class DiagnosticsWriter:
    """CSV rows ``step, t, energy, l2_error`` (the error column is left blank when not computed)."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(["step", "t", "energy", "l2_error"])

    def write(self, step, t, energy, l2=None):
        self._w.writerow([step, repr(float(t)), repr(float(energy)), "" if l2 is None else repr(float(l2))])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def run(ctx: DGContext, state: DGState, rhs_fn, dt: float, final_time: float, energy_fn=None,
        exact=None, diagnostics=None, error_every: int = 0):
    """Step to ``final_time`` (last step shortened to land on it); returns per-step energies."""
    energy_fn = energy_fn or (lambda c, s: energy(c, s))
    nsteps = int(np.ceil((final_time - state.t) / dt - 1e-12))
    if nsteps <= 0:
        return [energy_fn(ctx, state)]
    dt = (final_time - state.t) / nsteps
    energies = [energy_fn(ctx, state)]
    if diagnostics is not None:
        diagnostics.write(0, state.t, energies[0], l2_error(ctx, state, exact) if exact and error_every else None)
    for step in range(1, nsteps + 1):
        lsrk4_step(ctx, state, rhs_fn, dt)
        energies.append(energy_fn(ctx, state))
        if diagnostics is not None:
            want = exact is not None and error_every and (step % error_every == 0 or step == nsteps)
            diagnostics.write(step, state.t, energies[-1], l2_error(ctx, state, exact) if want else None)
    return energies


def write_manifest(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))

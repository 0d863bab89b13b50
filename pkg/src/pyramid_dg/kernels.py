"""Volume, surface and update kernels of the DG right-hand side.

Each kernel exists twice: a loop nest compiled with numba and a pure-numpy
version built from batched matrix products. Both take the same arguments and
write into ``out`` arrays; :func:`get` picks one per call according to
``PYRAMID_DG_NUMBA``.

Array conventions: coefficients ``(K, Np)``, volume cubature data
``(K, Nc)``, face data ``(K, Nfc)``, ``metric[k, q, i, j] = d r_i / d x_j``.
``mapP[k, q]`` is the flat index into a ``(K * Nfc)`` trace array of the
point facing ``(k, q)``.
"""

from __future__ import annotations

import numpy as np

from ._accel import njit, use_numba

# ---------------------------------------------------------------- numpy path


def _phys_grad_np(u, Dr, Ds, Dt, metric):
    ref = np.stack([u @ Dr.T, u @ Ds.T, u @ Dt.T], axis=-1)
    return np.einsum("kqij,kqi->kqj", metric, ref)


def volume_advection_np(u, Dr, Ds, Dt, V, metric, wJ, beta, out):
    grad = _phys_grad_np(u, Dr, Ds, Dt, metric)
    out[...] = (wJ * np.einsum("kqj,kqj->kq", beta, grad)) @ V


def volume_wave_np(p, u, Dr, Ds, Dt, V, metric, wJ, out_p, out_u):
    gp = _phys_grad_np(p, Dr, Ds, Dt, metric)
    div = np.zeros_like(wJ)
    for d in range(3):
        div += _phys_grad_np(u[d], Dr, Ds, Dt, metric)[..., d]
        out_u[d] = (wJ * gp[..., d]) @ V
    out_p[...] = (wJ * div) @ V


def surface_advection_np(uf, mapP, bn, alpha, Vf, wsJ, out):
    uP = uf.ravel()[mapP]
    flux = 0.5 * (bn - alpha * np.abs(bn)) * (uP - uf)
    out[...] = (wsJ * flux) @ Vf


def surface_wave_np(pf, uf, mapP, bc, normals, tau_p, tau_u, Vf, wsJ, out_p, out_u):
    pP = pf.ravel()[mapP]
    uP = np.stack([uf[d].ravel()[mapP] for d in range(3)])
    pP = np.where(bc, -pf, pP)
    uP = np.where(bc[None], uf, uP)
    dp = pP - pf
    ndu = np.einsum("dkq,kqd->kq", uP - uf, normals)
    Pp = 0.5 * (ndu - tau_p * dp)
    Pu = 0.5 * (dp - tau_u * ndu)
    out_p[...] = (wsJ * Pp) @ Vf
    for d in range(3):
        out_u[d] = (wsJ * normals[..., d] * Pu) @ Vf


def rk_update_np(q, res, rhs, rka, rkb, dt, Vf, traces):
    res *= rka
    res += dt * rhs
    q += rkb * res
    traces[...] = q @ Vf.T


def interp_faces_np(q, Vf, traces):
    traces[...] = q @ Vf.T


# ---------------------------------------------------------------- numba path


@njit(cache=True)
def _grad_at(u, k, q, Dr, Ds, Dt, metric):
    ur = 0.0
    us = 0.0
    ut = 0.0
    for n in range(u.shape[1]):
        c = u[k, n]
        ur += Dr[q, n] * c
        us += Ds[q, n] * c
        ut += Dt[q, n] * c
    gx = metric[k, q, 0, 0] * ur + metric[k, q, 1, 0] * us + metric[k, q, 2, 0] * ut
    gy = metric[k, q, 0, 1] * ur + metric[k, q, 1, 1] * us + metric[k, q, 2, 1] * ut
    gz = metric[k, q, 0, 2] * ur + metric[k, q, 1, 2] * us + metric[k, q, 2, 2] * ut
    return gx, gy, gz


@njit(cache=True)
def volume_advection_nb(u, Dr, Ds, Dt, V, metric, wJ, beta, out):
    K, Np = u.shape
    Nc = V.shape[0]
    for k in range(K):
        for n in range(Np):
            out[k, n] = 0.0
        for q in range(Nc):
            gx, gy, gz = _grad_at(u, k, q, Dr, Ds, Dt, metric)
            val = wJ[k, q] * (beta[k, q, 0] * gx + beta[k, q, 1] * gy + beta[k, q, 2] * gz)
            for n in range(Np):
                out[k, n] += V[q, n] * val


@njit(cache=True)
def volume_wave_nb(p, u, Dr, Ds, Dt, V, metric, wJ, out_p, out_u):
    K, Np = p.shape
    Nc = V.shape[0]
    for k in range(K):
        for n in range(Np):
            out_p[k, n] = 0.0
            out_u[0, k, n] = 0.0
            out_u[1, k, n] = 0.0
            out_u[2, k, n] = 0.0
        for q in range(Nc):
            px, py, pz = _grad_at(p, k, q, Dr, Ds, Dt, metric)
            div = _grad_at(u[0], k, q, Dr, Ds, Dt, metric)[0]
            div += _grad_at(u[1], k, q, Dr, Ds, Dt, metric)[1]
            div += _grad_at(u[2], k, q, Dr, Ds, Dt, metric)[2]
            w = wJ[k, q]
            for n in range(Np):
                v = V[q, n] * w
                out_p[k, n] += v * div
                out_u[0, k, n] += v * px
                out_u[1, k, n] += v * py
                out_u[2, k, n] += v * pz


@njit(cache=True)
def surface_advection_nb(uf, mapP, bn, alpha, Vf, wsJ, out):
    K, Nfc = uf.shape
    Np = Vf.shape[1]
    flat = uf.ravel()
    for k in range(K):
        for n in range(Np):
            out[k, n] = 0.0
        for q in range(Nfc):
            b = bn[k, q]
            flux = 0.5 * (b - alpha * abs(b)) * (flat[mapP[k, q]] - uf[k, q]) * wsJ[k, q]
            for n in range(Np):
                out[k, n] += Vf[q, n] * flux


@njit(cache=True)
def surface_wave_nb(pf, uf, mapP, bc, normals, tau_p, tau_u, Vf, wsJ, out_p, out_u):
    K, Nfc = pf.shape
    Np = Vf.shape[1]
    pflat = pf.ravel()
    u0, u1, u2 = uf[0].ravel(), uf[1].ravel(), uf[2].ravel()
    for k in range(K):
        for n in range(Np):
            out_p[k, n] = 0.0
            out_u[0, k, n] = 0.0
            out_u[1, k, n] = 0.0
            out_u[2, k, n] = 0.0
        for q in range(Nfc):
            nx, ny, nz = normals[k, q, 0], normals[k, q, 1], normals[k, q, 2]
            if bc[k, q]:
                dp = -2.0 * pf[k, q]
                ndu = 0.0
            else:
                m = mapP[k, q]
                dp = pflat[m] - pf[k, q]
                ndu = nx * (u0[m] - uf[0, k, q]) + ny * (u1[m] - uf[1, k, q]) + nz * (u2[m] - uf[2, k, q])
            w = wsJ[k, q]
            Pp = 0.5 * (ndu - tau_p[k, q] * dp) * w
            Pu = 0.5 * (dp - tau_u[k, q] * ndu) * w
            for n in range(Np):
                v = Vf[q, n]
                out_p[k, n] += v * Pp
                out_u[0, k, n] += v * nx * Pu
                out_u[1, k, n] += v * ny * Pu
                out_u[2, k, n] += v * nz * Pu


@njit(cache=True)
def interp_faces_nb(q, Vf, traces):
    nf, K, Np = q.shape
    Nfc = Vf.shape[0]
    for f in range(nf):
        for k in range(K):
            for i in range(Nfc):
                acc = 0.0
                for n in range(Np):
                    acc += Vf[i, n] * q[f, k, n]
                traces[f, k, i] = acc


@njit(cache=True)
def rk_update_nb(q, res, rhs, rka, rkb, dt, Vf, traces):
    nf, K, Np = q.shape
    for f in range(nf):
        for k in range(K):
            for n in range(Np):
                r = rka * res[f, k, n] + dt * rhs[f, k, n]
                res[f, k, n] = r
                q[f, k, n] += rkb * r
    interp_faces_nb(q, Vf, traces)


_KERNELS = {
    "volume_advection": (volume_advection_nb, volume_advection_np),
    "volume_wave": (volume_wave_nb, volume_wave_np),
    "surface_advection": (surface_advection_nb, surface_advection_np),
    "surface_wave": (surface_wave_nb, surface_wave_np),
    "rk_update": (rk_update_nb, rk_update_np),
    "interp_faces": (interp_faces_nb, interp_faces_np),
}


def get(name: str, numba: bool | None = None):
    """Kernel ``name`` from the compiled path, or the numpy path when numba is off."""
    compiled, plain = _KERNELS[name]
    if numba is None:
        numba = use_numba()
    return compiled if numba else plain


def backend() -> str:
    return "numba" if use_numba() else "numpy"

"""Compiled inner loops for the collision sums.

All loops work in index coordinates ``u`` where node ``i`` sits at
``u = i`` and velocity ``x = -L + (u + 1/2) h``. For a lattice difference
``m = u - u*`` and direction ``sigma`` the post-collision points are
``u' = (u + u*)/2 + |m| sigma / 2`` and ``u*' = (u + u*)/2 - |m| sigma / 2``.
The kernel table ``bt[mi, k]`` already holds ``min(B, n) * w_k * h^3``.

Interpolated fields are passed zero-padded by ``pad_width(N)`` cells per side,
which covers every post-collision point, so the gathers need no bounds checks.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange


def pad_width(n: int) -> int:
    return int(math.ceil(math.sqrt(3.0) * (n - 1) / 2.0)) + 2


def padded(f: np.ndarray) -> np.ndarray:
    p = pad_width(f.shape[0])
    return np.pad(np.ascontiguousarray(f, dtype=float), p)


PHI_ARRAY = 0
PHI_ONE = 1
PHI_COMPONENT = 2
PHI_ENERGY = 3
PHI_BRACKET = 4


@njit(cache=True, inline="always")
def _interp(f, ux, uy, uz):
    # coordinates are positive inside the padded array, so int() is floor
    ix = int(ux)
    iy = int(uy)
    iz = int(uz)
    tx = ux - ix
    ty = uy - iy
    tz = uz - iz
    sx = 1.0 - tx
    sy = 1.0 - ty
    sz = 1.0 - tz
    return (sx * (sy * (sz * f[ix, iy, iz] + tz * f[ix, iy, iz + 1])
                  + ty * (sz * f[ix, iy + 1, iz] + tz * f[ix, iy + 1, iz + 1]))
            + tx * (sy * (sz * f[ix + 1, iy, iz] + tz * f[ix + 1, iy, iz + 1])
                    + ty * (sz * f[ix + 1, iy + 1, iz] + tz * f[ix + 1, iy + 1, iz + 1])))


@njit(cache=True, inline="always")
def _phi(code, param, phi_pad, ux, uy, uz, origin, h):
    # (ux, uy, uz) are padded index coordinates; origin = -L + (1/2 - pad) h
    if code == PHI_ARRAY:
        return _interp(phi_pad, ux, uy, uz)
    if code == PHI_ONE:
        return 1.0
    x = origin + ux * h
    y = origin + uy * h
    z = origin + uz * h
    if code == PHI_COMPONENT:
        c = int(param)
        if c == 0:
            return x
        if c == 1:
            return y
        return z
    r2 = x * x + y * y + z * z
    if code == PHI_ENERGY:
        return r2
    return (1.0 + r2) ** (0.5 * param)


@njit(cache=True, parallel=True)
def collide_quadratic(f, fpad, pad, bt, sig, n_cut, k_cut):
    """Gain ``Q+_{n,K}(f)`` and loss frequency at every node.

    The loss frequency is ``sum B_n (f* ^ n)(1 + f' ^ K + f*' ^ K)``; the loss
    field is ``(f ^ n)`` times it.
    """
    n = f.shape[0]
    span = 2 * n - 1
    nsig = sig.shape[0]
    gain = np.zeros_like(f)
    rate = np.zeros_like(f)
    for flat in prange(n * n * n):
        i = flat // (n * n)
        j = (flat // n) % n
        k = flat % n
        fv_k = min(f[i, j, k], k_cut)
        g_acc = 0.0
        r_acc = 0.0
        for si in range(n):
            mx = i - si
            for sj in range(n):
                my = j - sj
                for sk in range(n):
                    mz = k - sk
                    if mx == 0 and my == 0 and mz == 0:
                        continue
                    mi = ((mx + n - 1) * span + (my + n - 1)) * span + (mz + n - 1)
                    fs = f[si, sj, sk]
                    fs_k = min(fs, k_cut)
                    fs_n = min(fs, n_cut)
                    half = 0.5 * math.sqrt(mx * mx + my * my + mz * mz)
                    cx = pad + 0.5 * (i + si)
                    cy = pad + 0.5 * (j + sj)
                    cz = pad + 0.5 * (k + sk)
                    for q in range(nsig):
                        b = bt[mi, q]
                        ax = half * sig[q, 0]
                        ay = half * sig[q, 1]
                        az = half * sig[q, 2]
                        fp = _interp(fpad, cx + ax, cy + ay, cz + az)
                        fps = _interp(fpad, cx - ax, cy - ay, cz - az)
                        g_acc += b * min(fp, n_cut) * min(fps, n_cut) * (1.0 + fv_k + fs_k)
                        r_acc += b * fs_n * (1.0 + min(fp, k_cut) + min(fps, k_cut))
        gain[i, j, k] = g_acc
        rate[i, j, k] = r_acc
    return gain, rate


@njit(cache=True, parallel=True)
def gain_bilinear(fpad, gpad, n, pad, bt, sig, n_cut):
    """``sum B_n (f(v') ^ n)(g(v*') ^ n)`` at every node."""
    span = 2 * n - 1
    nsig = sig.shape[0]
    out = np.zeros((n, n, n))
    for flat in prange(n * n * n):
        i = flat // (n * n)
        j = (flat // n) % n
        k = flat % n
        acc = 0.0
        for si in range(n):
            mx = i - si
            for sj in range(n):
                my = j - sj
                for sk in range(n):
                    mz = k - sk
                    if mx == 0 and my == 0 and mz == 0:
                        continue
                    mi = ((mx + n - 1) * span + (my + n - 1)) * span + (mz + n - 1)
                    half = 0.5 * math.sqrt(mx * mx + my * my + mz * mz)
                    cx = pad + 0.5 * (i + si)
                    cy = pad + 0.5 * (j + sj)
                    cz = pad + 0.5 * (k + sk)
                    for q in range(nsig):
                        ax = half * sig[q, 0]
                        ay = half * sig[q, 1]
                        az = half * sig[q, 2]
                        fp = _interp(fpad, cx + ax, cy + ay, cz + az)
                        gs = _interp(gpad, cx - ax, cy - ay, cz - az)
                        acc += bt[mi, q] * min(fp, n_cut) * min(gs, n_cut)
        out[i, j, k] = acc
    return out


@njit(cache=True, parallel=True)
def pairing_sum(f, fpad, pad, bt, sig, n_cut, k_cut, code, param, phi_pad, origin, h):
    """Per-node partial sums of the symmetrized weak form."""
    n = f.shape[0]
    span = 2 * n - 1
    nsig = sig.shape[0]
    out = np.zeros_like(f)
    for flat in prange(n * n * n):
        i = flat // (n * n)
        j = (flat // n) % n
        k = flat % n
        fv_n = min(f[i, j, k], n_cut)
        if fv_n == 0.0:
            continue
        phi_v = _phi(code, param, phi_pad, float(i + pad), float(j + pad), float(k + pad), origin, h)
        acc = 0.0
        for si in range(n):
            mx = i - si
            for sj in range(n):
                my = j - sj
                for sk in range(n):
                    mz = k - sk
                    if mx == 0 and my == 0 and mz == 0:
                        continue
                    fs_n = min(f[si, sj, sk], n_cut)
                    if fs_n == 0.0:
                        continue
                    mi = ((mx + n - 1) * span + (my + n - 1)) * span + (mz + n - 1)
                    phi_s = _phi(code, param, phi_pad, float(si + pad), float(sj + pad), float(sk + pad), origin, h)
                    half = 0.5 * math.sqrt(mx * mx + my * my + mz * mz)
                    cx = pad + 0.5 * (i + si)
                    cy = pad + 0.5 * (j + sj)
                    cz = pad + 0.5 * (k + sk)
                    for q in range(nsig):
                        ax = half * sig[q, 0]
                        ay = half * sig[q, 1]
                        az = half * sig[q, 2]
                        fp = _interp(fpad, cx + ax, cy + ay, cz + az)
                        fps = _interp(fpad, cx - ax, cy - ay, cz - az)
                        dphi = (_phi(code, param, phi_pad, cx + ax, cy + ay, cz + az, origin, h)
                                + _phi(code, param, phi_pad, cx - ax, cy - ay, cz - az, origin, h)
                                - phi_v - phi_s)
                        acc += bt[mi, q] * fs_n * (1.0 + min(fp, k_cut) + min(fps, k_cut)) * 0.5 * dphi
        out[i, j, k] = fv_n * acc
    return out


@njit(cache=True, parallel=True)
def contraction_sum(f, g, fpad, gpad, pad, bt, sig, n_cut, k_cut):
    """Per-node partial sums of ``|F_f - F_g|`` for the contraction integral."""
    n = f.shape[0]
    span = 2 * n - 1
    nsig = sig.shape[0]
    out = np.zeros_like(f)
    for flat in prange(n * n * n):
        i = flat // (n * n)
        j = (flat // n) % n
        k = flat % n
        fv = min(f[i, j, k], k_cut)
        gv = min(g[i, j, k], k_cut)
        acc = 0.0
        for si in range(n):
            mx = i - si
            for sj in range(n):
                my = j - sj
                for sk in range(n):
                    mz = k - sk
                    if mx == 0 and my == 0 and mz == 0:
                        continue
                    mi = ((mx + n - 1) * span + (my + n - 1)) * span + (mz + n - 1)
                    bf = 1.0 + fv + min(f[si, sj, sk], k_cut)
                    bg = 1.0 + gv + min(g[si, sj, sk], k_cut)
                    half = 0.5 * math.sqrt(mx * mx + my * my + mz * mz)
                    cx = pad + 0.5 * (i + si)
                    cy = pad + 0.5 * (j + sj)
                    cz = pad + 0.5 * (k + sk)
                    for q in range(nsig):
                        ax = half * sig[q, 0]
                        ay = half * sig[q, 1]
                        az = half * sig[q, 2]
                        ff = (min(_interp(fpad, cx + ax, cy + ay, cz + az), n_cut)
                              * min(_interp(fpad, cx - ax, cy - ay, cz - az), n_cut) * bf)
                        gg = (min(_interp(gpad, cx + ax, cy + ay, cz + az), n_cut)
                              * min(_interp(gpad, cx - ax, cy - ay, cz - az), n_cut) * bg)
                        acc += bt[mi, q] * abs(ff - gg)
        out[i, j, k] = acc
    return out

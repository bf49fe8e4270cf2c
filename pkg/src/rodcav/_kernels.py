"""Numba kernels for the Yee leapfrog update with CPML absorption.

All field and psi arrays are float32, shape (nx, ny, nz).  Derivatives along
axis u in H updates take the CPML coefficients at half-integer u nodes
(bh_u, ah_u); in E updates at integer u nodes (be_u, ae_u).  Interior cells
have a == 0 and are skipped.

Boundary handling is encoded in per-axis index/weight tables:
  ip_u[i], wp_u[i]: forward neighbor index and weight (wraps for periodic,
                    weight 0 at the top wall for PEC/PML so the tangential
                    field beyond the wall reads as zero);
  im_u[i]:          backward neighbor index (wraps for periodic);
  me_u[i]:          0 on a PEC/PML wall node, so tangential E stays pinned.
"""

import numba
import numpy as np

F32 = np.float32


@numba.njit(cache=True, fastmath=True)
def update_h(ex, ey, ez, hx, hy, hz,
             psi_hxy, psi_hxz, psi_hyx, psi_hyz, psi_hzx, psi_hzy,
             bhx, ahx, bhy, ahy, bhz, ahz,
             ipx, wpx, ipy, wpy, ipz, wpz,
             dt, inv_dx):
    nx, ny, nz = ex.shape
    for i in range(nx):
        ip = ipx[i]
        wx = wpx[i]
        ax = ahx[i]
        bx = bhx[i]
        for j in range(ny):
            jp = ipy[j]
            wy = wpy[j]
            ay = ahy[j]
            by = bhy[j]
            for k in range(nz):
                kp = ipz[k]
                wz = wpz[k]
                az = ahz[k]
                bz = bhz[k]

                # Hx -= dt * (dEz/dy - dEy/dz)
                d1 = (wy * ez[i, jp, k] - ez[i, j, k]) * inv_dx
                d2 = (wz * ey[i, j, kp] - ey[i, j, k]) * inv_dx
                if ay != 0.0:
                    p = by * psi_hxy[i, j, k] + ay * d1
                    psi_hxy[i, j, k] = p
                    d1 += p
                if az != 0.0:
                    p = bz * psi_hxz[i, j, k] + az * d2
                    psi_hxz[i, j, k] = p
                    d2 += p
                hx[i, j, k] -= dt * (d1 - d2)

                # Hy -= dt * (dEx/dz - dEz/dx)
                d1 = (wz * ex[i, j, kp] - ex[i, j, k]) * inv_dx
                d2 = (wx * ez[ip, j, k] - ez[i, j, k]) * inv_dx
                if az != 0.0:
                    p = bz * psi_hyz[i, j, k] + az * d1
                    psi_hyz[i, j, k] = p
                    d1 += p
                if ax != 0.0:
                    p = bx * psi_hyx[i, j, k] + ax * d2
                    psi_hyx[i, j, k] = p
                    d2 += p
                hy[i, j, k] -= dt * (d1 - d2)

                # Hz -= dt * (dEy/dx - dEx/dy)
                d1 = (wx * ey[ip, j, k] - ey[i, j, k]) * inv_dx
                d2 = (wy * ex[i, jp, k] - ex[i, j, k]) * inv_dx
                if ax != 0.0:
                    p = bx * psi_hzx[i, j, k] + ax * d1
                    psi_hzx[i, j, k] = p
                    d1 += p
                if ay != 0.0:
                    p = by * psi_hzy[i, j, k] + ay * d2
                    psi_hzy[i, j, k] = p
                    d2 += p
                hz[i, j, k] -= dt * (d1 - d2)


@numba.njit(cache=True, fastmath=True)
def update_e(ex, ey, ez, hx, hy, hz,
             ce_x, ce_y, ce_z,
             psi_exy, psi_exz, psi_eyx, psi_eyz, psi_ezx, psi_ezy,
             bex, aex, bey, aey, bez, aez,
             imx, mex, imy, mey, imz, mez,
             inv_dx):
    nx, ny, nz = ex.shape
    for i in range(nx):
        im = imx[i]
        mx = mex[i]
        ax = aex[i]
        bx = bex[i]
        for j in range(ny):
            jm = imy[j]
            my = mey[j]
            ay = aey[j]
            by = bey[j]
            for k in range(nz):
                km = imz[k]
                mz = mez[k]
                az = aez[k]
                bz = bez[k]

                # Ex += ce_x * (dHz/dy - dHy/dz), tangential to y/z walls
                if my != 0.0 and mz != 0.0:
                    d1 = (hz[i, j, k] - hz[i, jm, k]) * inv_dx
                    d2 = (hy[i, j, k] - hy[i, j, km]) * inv_dx
                    if ay != 0.0:
                        p = by * psi_exy[i, j, k] + ay * d1
                        psi_exy[i, j, k] = p
                        d1 += p
                    if az != 0.0:
                        p = bz * psi_exz[i, j, k] + az * d2
                        psi_exz[i, j, k] = p
                        d2 += p
                    ex[i, j, k] += ce_x[i, j, k] * (d1 - d2)

                # Ey += ce_y * (dHx/dz - dHz/dx), tangential to x/z walls
                if mx != 0.0 and mz != 0.0:
                    d1 = (hx[i, j, k] - hx[i, j, km]) * inv_dx
                    d2 = (hz[i, j, k] - hz[im, j, k]) * inv_dx
                    if az != 0.0:
                        p = bz * psi_eyz[i, j, k] + az * d1
                        psi_eyz[i, j, k] = p
                        d1 += p
                    if ax != 0.0:
                        p = bx * psi_eyx[i, j, k] + ax * d2
                        psi_eyx[i, j, k] = p
                        d2 += p
                    ey[i, j, k] += ce_y[i, j, k] * (d1 - d2)

                # Ez += ce_z * (dHy/dx - dHx/dy), tangential to x/y walls
                if mx != 0.0 and my != 0.0:
                    d1 = (hy[i, j, k] - hy[im, j, k]) * inv_dx
                    d2 = (hx[i, j, k] - hx[i, jm, k]) * inv_dx
                    if ax != 0.0:
                        p = bx * psi_ezx[i, j, k] + ax * d1
                        psi_ezx[i, j, k] = p
                        d1 += p
                    if ay != 0.0:
                        p = by * psi_ezy[i, j, k] + ay * d2
                        psi_ezy[i, j, k] = p
                        d2 += p
                    ez[i, j, k] += ce_z[i, j, k] * (d1 - d2)

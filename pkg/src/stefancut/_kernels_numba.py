"""numba @njit kernel implementations (default backend).

Loop twins of _kernels_numpy.py. The band index lists keep the cost
proportional to the interface length instead of the grid area.
"""

import numpy as np
from numba import njit

NG = 2
_JIT = dict(cache=True, nogil=True, fastmath=False)


@njit(**_JIT)
def _mm(a, b):
    if a * b > 0.0:
        if abs(a) < abs(b):
            return a
        return b
    return 0.0


@njit(**_JIT)
def advect_rhs(phi_pad, v_pad, ii, jj, dx):
    out = np.empty(ii.shape[0], dtype=np.float64)
    for k in range(ii.shape[0]):
        i = ii[k] + NG
        j = jj[k] + NG
        c = phi_pad[i, j]
        dxx_c = (phi_pad[i - 1, j] - 2.0 * c + phi_pad[i + 1, j]) / (dx * dx)
        dxx_p = (c - 2.0 * phi_pad[i + 1, j] + phi_pad[i + 2, j]) / (dx * dx)
        dxx_m = (phi_pad[i - 2, j] - 2.0 * phi_pad[i - 1, j] + c) / (dx * dx)
        dyy_c = (phi_pad[i, j - 1] - 2.0 * c + phi_pad[i, j + 1]) / (dx * dx)
        dyy_p = (c - 2.0 * phi_pad[i, j + 1] + phi_pad[i, j + 2]) / (dx * dx)
        dyy_m = (phi_pad[i, j - 2] - 2.0 * phi_pad[i, j - 1] + c) / (dx * dx)
        ax = (phi_pad[i + 1, j] - c) / dx - 0.5 * dx * _mm(dxx_c, dxx_p)
        bx = (c - phi_pad[i - 1, j]) / dx + 0.5 * dx * _mm(dxx_c, dxx_m)
        ay = (phi_pad[i, j + 1] - c) / dx - 0.5 * dx * _mm(dyy_c, dyy_p)
        by = (c - phi_pad[i, j - 1]) / dx + 0.5 * dx * _mm(dyy_c, dyy_m)
        v = v_pad[i, j]
        hp = (max(min(ax, 0.0) ** 2, max(bx, 0.0) ** 2)
              + max(min(ay, 0.0) ** 2, max(by, 0.0) ** 2))
        hm = (max(max(ax, 0.0) ** 2, min(bx, 0.0) ** 2)
              + max(max(ay, 0.0) ** 2, min(by, 0.0) ** 2))
        out[k] = -(max(v, 0.0) * np.sqrt(hp) + min(v, 0.0) * np.sqrt(hm))
    return out


@njit(**_JIT)
def redistance_rhs(phi_pad, branch_pos_pad, sgn_src_pad,
                   dxp_pad, dxm_pad, dyp_pad, dym_pad,
                   mxp_pad, mxm_pad, myp_pad, mym_pad,
                   ii, jj, dx):
    out = np.empty(ii.shape[0], dtype=np.float64)
    for k in range(ii.shape[0]):
        i = ii[k] + NG
        j = jj[k] + NG
        c = phi_pad[i, j]
        dxx_c = (phi_pad[i - 1, j] - 2.0 * c + phi_pad[i + 1, j]) / (dx * dx)
        dxx_p = (c - 2.0 * phi_pad[i + 1, j] + phi_pad[i + 2, j]) / (dx * dx)
        dxx_m = (phi_pad[i - 2, j] - 2.0 * phi_pad[i - 1, j] + c) / (dx * dx)
        dyy_c = (phi_pad[i, j - 1] - 2.0 * c + phi_pad[i, j + 1]) / (dx * dx)
        dyy_p = (c - 2.0 * phi_pad[i, j + 1] + phi_pad[i, j + 2]) / (dx * dx)
        dyy_m = (phi_pad[i, j - 2] - 2.0 * phi_pad[i, j - 1] + c) / (dx * dx)

        mmx_p = _mm(dxx_c, dxx_p)
        mmx_m = _mm(dxx_c, dxx_m)
        mmy_p = _mm(dyy_c, dyy_p)
        mmy_m = _mm(dyy_c, dyy_m)

        if mxp_pad[i, j]:
            d = dxp_pad[i, j]
            ax = (0.0 - c) / d - 0.5 * d * mmx_p
        else:
            ax = (phi_pad[i + 1, j] - c) / dx - 0.5 * dx * mmx_p
        if mxm_pad[i, j]:
            d = dxm_pad[i, j]
            bx = (c - 0.0) / d + 0.5 * d * mmx_m
        else:
            bx = (c - phi_pad[i - 1, j]) / dx + 0.5 * dx * mmx_m
        if myp_pad[i, j]:
            d = dyp_pad[i, j]
            ay = (0.0 - c) / d - 0.5 * d * mmy_p
        else:
            ay = (phi_pad[i, j + 1] - c) / dx - 0.5 * dx * mmy_p
        if mym_pad[i, j]:
            d = dym_pad[i, j]
            by = (c - 0.0) / d + 0.5 * d * mmy_m
        else:
            by = (c - phi_pad[i, j - 1]) / dx + 0.5 * dx * mmy_m

        if branch_pos_pad[i, j]:
            h2 = (max(min(ax, 0.0) ** 2, max(bx, 0.0) ** 2)
                  + max(min(ay, 0.0) ** 2, max(by, 0.0) ** 2))
        else:
            h2 = (max(max(ax, 0.0) ** 2, min(bx, 0.0) ** 2)
                  + max(max(ay, 0.0) ** 2, min(by, 0.0) ** 2))
        out[k] = -sgn_src_pad[i, j] * (np.sqrt(h2) - 1.0)
    return out


@njit(**_JIT)
def extend_rhs(v_pad, wx_pad, wy_pad, ii, jj, dx):
    out = np.empty(ii.shape[0], dtype=np.float64)
    for k in range(ii.shape[0]):
        i = ii[k] + NG
        j = jj[k] + NG
        c = v_pad[i, j]
        wx = wx_pad[i, j]
        wy = wy_pad[i, j]
        if wx > 0.0:
            gx = (c - v_pad[i - 1, j]) / dx
        elif wx < 0.0:
            gx = (v_pad[i + 1, j] - c) / dx
        else:
            gx = 0.0
        if wy > 0.0:
            gy = (c - v_pad[i, j - 1]) / dx
        elif wy < 0.0:
            gy = (v_pad[i, j + 1] - c) / dx
        else:
            gy = 0.0
        out[k] = -(wx * gx + wy * gy)
    return out


@njit(**_JIT)
def _edge_fraction_scalar(a, b):
    if a >= 0.0 and b >= 0.0:
        return 1.0
    if a < 0.0 and b < 0.0:
        return 0.0
    d = a - b
    if d == 0.0:
        d = 1.0
    t = a / d
    if a >= 0.0:
        return t
    return 1.0 - t


@njit(**_JIT)
def cut_geometry(pv, cc):
    n = pv.shape[0] - 1
    m = pv.shape[1] - 1
    face_x = np.empty((n + 1, m), dtype=np.float64)
    face_y = np.empty((n, m + 1), dtype=np.float64)
    for i in range(n + 1):
        for j in range(m):
            face_x[i, j] = _edge_fraction_scalar(pv[i, j], pv[i, j + 1])
    for i in range(n):
        for j in range(m + 1):
            face_y[i, j] = _edge_fraction_scalar(pv[i, j], pv[i + 1, j])

    vol = np.empty((n, m), dtype=np.float64)
    cx = np.full((n, m), 0.5)
    cy = np.full((n, m), 0.5)
    alpha_g = np.empty((n, m), dtype=np.float64)
    nx = np.zeros((n, m), dtype=np.float64)
    ny = np.zeros((n, m), dtype=np.float64)
    n_saddle = 0

    for i in range(n):
        for j in range(m):
            c00 = pv[i, j]
            c10 = pv[i + 1, j]
            c01 = pv[i, j + 1]
            c11 = pv[i + 1, j + 1]
            bits = 0
            if c00 >= 0.0:
                bits += 1
            if c10 >= 0.0:
                bits += 2
            if c11 >= 0.0:
                bits += 4
            if c01 >= 0.0:
                bits += 8

            d = c00 - c10
            ts = c00 / (d if d != 0.0 else 1.0)
            d = c10 - c11
            te = c10 / (d if d != 0.0 else 1.0)
            d = c01 - c11
            tn = c01 / (d if d != 0.0 else 1.0)
            d = c00 - c01
            tw = c00 / (d if d != 0.0 else 1.0)

            v1 = 0.5 * ts * tw
            v2 = 0.5 * (1.0 - ts) * te
            v4 = 0.5 * (1.0 - tn) * (1.0 - te)
            v8 = 0.5 * tn * (1.0 - tw)

            # segment endpoints; ax0.. = first endpoint, bx0.. = second
            ax0 = ay0 = bx0 = by0 = 0.0
            ax1 = ay1 = bx1 = by1 = 0.0
            two_segments = False

            if bits == 0:
                v = 0.0
            elif bits == 15:
                v = 1.0
            elif bits == 1:
                v = v1
                ax0, ay0, bx0, by0 = ts, 0.0, 0.0, tw
            elif bits == 14:
                v = 1.0 - v1
                ax0, ay0, bx0, by0 = ts, 0.0, 0.0, tw
            elif bits == 2:
                v = v2
                ax0, ay0, bx0, by0 = ts, 0.0, 1.0, te
            elif bits == 13:
                v = 1.0 - v2
                ax0, ay0, bx0, by0 = ts, 0.0, 1.0, te
            elif bits == 4:
                v = v4
                ax0, ay0, bx0, by0 = 1.0, te, tn, 1.0
            elif bits == 11:
                v = 1.0 - v4
                ax0, ay0, bx0, by0 = 1.0, te, tn, 1.0
            elif bits == 8:
                v = v8
                ax0, ay0, bx0, by0 = tn, 1.0, 0.0, tw
            elif bits == 7:
                v = 1.0 - v8
                ax0, ay0, bx0, by0 = tn, 1.0, 0.0, tw
            elif bits == 3:
                v = 0.5 * (tw + te)
                ax0, ay0, bx0, by0 = 0.0, tw, 1.0, te
            elif bits == 12:
                v = 0.5 * ((1.0 - tw) + (1.0 - te))
                ax0, ay0, bx0, by0 = 0.0, tw, 1.0, te
            elif bits == 9:
                v = 0.5 * (ts + tn)
                ax0, ay0, bx0, by0 = ts, 0.0, tn, 1.0
            elif bits == 6:
                v = 0.5 * ((1.0 - ts) + (1.0 - tn))
                ax0, ay0, bx0, by0 = ts, 0.0, tn, 1.0
            else:
                # saddle: two opposite corners share a phase
                n_saddle += 1
                two_segments = True
                cpos = cc[i, j] >= 0.0
                if bits == 5:
                    if cpos:
                        v = 1.0 - v2 - v8
                        ax0, ay0, bx0, by0 = ts, 0.0, 1.0, te
                        ax1, ay1, bx1, by1 = tn, 1.0, 0.0, tw
                    else:
                        v = v1 + v4
                        ax0, ay0, bx0, by0 = ts, 0.0, 0.0, tw
                        ax1, ay1, bx1, by1 = 1.0, te, tn, 1.0
                else:  # bits == 10
                    if cpos:
                        v = 1.0 - v1 - v4
                        ax0, ay0, bx0, by0 = ts, 0.0, 0.0, tw
                        ax1, ay1, bx1, by1 = 1.0, te, tn, 1.0
                    else:
                        v = v2 + v8
                        ax0, ay0, bx0, by0 = ts, 0.0, 1.0, te
                        ax1, ay1, bx1, by1 = tn, 1.0, 0.0, tw

            vol[i, j] = v
            if bits != 0 and bits != 15:
                if two_segments:
                    l0 = np.hypot(bx0 - ax0, by0 - ay0)
                    l1 = np.hypot(bx1 - ax1, by1 - ay1)
                    tot = l0 + l1
                    if tot == 0.0:
                        tot = 1.0
                    cx[i, j] = (0.5 * (ax0 + bx0) * l0 + 0.5 * (ax1 + bx1) * l1) / tot
                    cy[i, j] = (0.5 * (ay0 + by0) * l0 + 0.5 * (ay1 + by1) * l1) / tot
                else:
                    cx[i, j] = 0.5 * (ax0 + bx0)
                    cy[i, j] = 0.5 * (ay0 + by0)

            mx = face_x[i, j] - face_x[i + 1, j]
            my = face_y[i, j] - face_y[i, j + 1]
            ag = np.hypot(mx, my)
            alpha_g[i, j] = ag
            if ag > 0.0:
                nx[i, j] = mx / ag
                ny[i, j] = my / ag

    return vol, face_x, face_y, alpha_g, nx, ny, cx, cy, n_saddle


@njit(**_JIT)
def biquad_batch(f_pad, xs, ys, ox, oy, dx, n, m):
    npt = xs.shape[0]
    vals = np.empty(npt, dtype=np.float64)
    wc = np.empty(npt, dtype=np.float64)
    for k in range(npt):
        fx = (xs[k] - ox) / dx
        fy = (ys[k] - oy) / dx
        ic = int(np.floor(fx))
        jc = int(np.floor(fy))
        if ic < -1:
            ic = -1
        if ic > n:
            ic = n
        if jc < -1:
            jc = -1
        if jc > m:
            jc = m
        xi = fx - ic - 0.5
        eta = fy - jc - 0.5
        wx0 = 0.5 * xi * (xi - 1.0)
        wx1 = 1.0 - xi * xi
        wx2 = 0.5 * xi * (xi + 1.0)
        wy0 = 0.5 * eta * (eta - 1.0)
        wy1 = 1.0 - eta * eta
        wy2 = 0.5 * eta * (eta + 1.0)
        i = ic + NG
        j = jc + NG
        vals[k] = (wx0 * (wy0 * f_pad[i - 1, j - 1] + wy1 * f_pad[i - 1, j]
                          + wy2 * f_pad[i - 1, j + 1])
                   + wx1 * (wy0 * f_pad[i, j - 1] + wy1 * f_pad[i, j]
                            + wy2 * f_pad[i, j + 1])
                   + wx2 * (wy0 * f_pad[i + 1, j - 1] + wy1 * f_pad[i + 1, j]
                            + wy2 * f_pad[i + 1, j + 1]))
        wc[k] = wx1 * wy1
    return vals, wc


@njit(**_JIT)
def biquad_batch_masked(f_pad, valid_pad, xs, ys, ox, oy, dx, n, m):
    npt = xs.shape[0]
    vals = np.zeros(npt, dtype=np.float64)
    ok = np.ones(npt, dtype=np.bool_)
    for k in range(npt):
        fx = (xs[k] - ox) / dx
        fy = (ys[k] - oy) / dx
        ic = int(np.floor(fx))
        jc = int(np.floor(fy))
        if ic < -1:
            ic = -1
        if ic > n:
            ic = n
        if jc < -1:
            jc = -1
        if jc > m:
            jc = m
        xi = fx - ic - 0.5
        eta = fy - jc - 0.5
        wxs = np.empty(3, dtype=np.float64)
        wys = np.empty(3, dtype=np.float64)
        wxs[0] = 0.5 * xi * (xi - 1.0)
        wxs[1] = 1.0 - xi * xi
        wxs[2] = 0.5 * xi * (xi + 1.0)
        wys[0] = 0.5 * eta * (eta - 1.0)
        wys[1] = 1.0 - eta * eta
        wys[2] = 0.5 * eta * (eta + 1.0)
        acc = 0.0
        good_all = True
        for di in range(-1, 2):
            for dj in range(-1, 2):
                w = wxs[di + 1] * wys[dj + 1]
                good = valid_pad[ic + di + NG, jc + dj + NG]
                if not good and abs(w) > 1e-14:
                    good_all = False
                if good:
                    acc += w * f_pad[ic + di + NG, jc + dj + NG]
        vals[k] = acc
        ok[k] = good_all
    return vals, ok

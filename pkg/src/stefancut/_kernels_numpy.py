"""Pure-numpy kernel implementations (fallback backend).

Each function here has a numba twin in _kernels_numba.py with identical
semantics. Arrays named *_pad carry NG ghost layers on every side and use
axis 0 = x, axis 1 = y. Index lists (ii, jj) are interior cell indices.
"""

import numpy as np

NG = 2


def _mm(a, b):
    """minmod: 0 on sign disagreement, else the smaller-magnitude argument."""
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _shifts(phi_pad):
    """Interior-shaped views of center and +-1/+-2 neighbours along x and y."""
    c = phi_pad[2:-2, 2:-2]
    xe1 = phi_pad[3:-1, 2:-2]
    xw1 = phi_pad[1:-3, 2:-2]
    xe2 = phi_pad[4:, 2:-2]
    xw2 = phi_pad[:-4, 2:-2]
    yn1 = phi_pad[2:-2, 3:-1]
    ys1 = phi_pad[2:-2, 1:-3]
    yn2 = phi_pad[2:-2, 4:]
    ys2 = phi_pad[2:-2, :-4]
    return c, xe1, xw1, xe2, xw2, yn1, ys1, yn2, ys2


def _eno_one_sided(c, p1, m1, p2, m2, dx):
    """Second-order ENO one-sided differences along one axis.

    Returns (forward, backward). Forward uses the +1 neighbour, backward the
    -1 neighbour; both corrected with the minmod of adjacent second
    differences.
    """
    dxx_c = (m1 - 2.0 * c + p1) / (dx * dx)
    dxx_p = (c - 2.0 * p1 + p2) / (dx * dx)
    dxx_m = (m2 - 2.0 * m1 + c) / (dx * dx)
    fwd = (p1 - c) / dx - 0.5 * dx * _mm(dxx_c, dxx_p)
    bwd = (c - m1) / dx + 0.5 * dx * _mm(dxx_c, dxx_m)
    return fwd, bwd


def advect_rhs(phi_pad, v_pad, ii, jj, dx):
    """RHS of phi_t = -(v |grad phi|) with Godunov upwinding by sign(v)."""
    c, xe1, xw1, xe2, xw2, yn1, ys1, yn2, ys2 = _shifts(phi_pad)
    ax, bx = _eno_one_sided(c, xe1, xw1, xe2, xw2, dx)
    ay, by = _eno_one_sided(c, yn1, ys1, yn2, ys2, dx)
    v = v_pad[2:-2, 2:-2]

    hp = (np.maximum(np.minimum(ax, 0.0) ** 2, np.maximum(bx, 0.0) ** 2)
          + np.maximum(np.minimum(ay, 0.0) ** 2, np.maximum(by, 0.0) ** 2))
    hm = (np.maximum(np.maximum(ax, 0.0) ** 2, np.minimum(bx, 0.0) ** 2)
          + np.maximum(np.maximum(ay, 0.0) ** 2, np.minimum(by, 0.0) ** 2))
    rhs = -(np.maximum(v, 0.0) * np.sqrt(hp) + np.minimum(v, 0.0) * np.sqrt(hm))
    return np.ascontiguousarray(rhs[ii, jj])


def redistance_rhs(phi_pad, branch_pos_pad, sgn_src_pad,
                   dxp_pad, dxm_pad, dyp_pad, dym_pad,
                   mxp_pad, mxm_pad, myp_pad, mym_pad,
                   ii, jj, dx):
    """RHS of the distance-restoring iteration with sub-cell crossing fix.

    branch_pos selects the Godunov branch from the exact initial sign;
    sgn_src is the smoothed sign source. d*_pad hold the crossing distances
    where the frozen initial field changes sign (masks m*_pad), replacing
    both the difference denominator and the neighbour value (which is 0 at
    the crossing by construction).
    """
    c, xe1, xw1, xe2, xw2, yn1, ys1, yn2, ys2 = _shifts(phi_pad)
    dxx_c = (xw1 - 2.0 * c + xe1) / (dx * dx)
    dxx_p = (c - 2.0 * xe1 + xe2) / (dx * dx)
    dxx_m = (xw2 - 2.0 * xw1 + c) / (dx * dx)
    dyy_c = (ys1 - 2.0 * c + yn1) / (dx * dx)
    dyy_p = (c - 2.0 * yn1 + yn2) / (dx * dx)
    dyy_m = (ys2 - 2.0 * ys1 + c) / (dx * dx)

    sl = np.s_[2:-2, 2:-2]
    dxp = dxp_pad[sl]
    dxm = dxm_pad[sl]
    dyp = dyp_pad[sl]
    dym = dym_pad[sl]

    mmx_p = _mm(dxx_c, dxx_p)
    mmx_m = _mm(dxx_c, dxx_m)
    mmy_p = _mm(dyy_c, dyy_p)
    mmy_m = _mm(dyy_c, dyy_m)

    ax = np.where(mxp_pad[sl],
                  (0.0 - c) / dxp - 0.5 * dxp * mmx_p,
                  (xe1 - c) / dx - 0.5 * dx * mmx_p)
    bx = np.where(mxm_pad[sl],
                  (c - 0.0) / dxm + 0.5 * dxm * mmx_m,
                  (c - xw1) / dx + 0.5 * dx * mmx_m)
    ay = np.where(myp_pad[sl],
                  (0.0 - c) / dyp - 0.5 * dyp * mmy_p,
                  (yn1 - c) / dx - 0.5 * dx * mmy_p)
    by = np.where(mym_pad[sl],
                  (c - 0.0) / dym + 0.5 * dym * mmy_m,
                  (c - ys1) / dx + 0.5 * dx * mmy_m)

    hpos = (np.maximum(np.minimum(ax, 0.0) ** 2, np.maximum(bx, 0.0) ** 2)
            + np.maximum(np.minimum(ay, 0.0) ** 2, np.maximum(by, 0.0) ** 2))
    hneg = (np.maximum(np.maximum(ax, 0.0) ** 2, np.minimum(bx, 0.0) ** 2)
            + np.maximum(np.maximum(ay, 0.0) ** 2, np.minimum(by, 0.0) ** 2))
    h = np.sqrt(np.where(branch_pos_pad[sl], hpos, hneg))
    rhs = -sgn_src_pad[sl] * (h - 1.0)
    return np.ascontiguousarray(rhs[ii, jj])


def extend_rhs(v_pad, wx_pad, wy_pad, ii, jj, dx):
    """RHS of v_t = -(w . grad v) with first-order upwinding along w."""
    c = v_pad[2:-2, 2:-2]
    xe1 = v_pad[3:-1, 2:-2]
    xw1 = v_pad[1:-3, 2:-2]
    yn1 = v_pad[2:-2, 3:-1]
    ys1 = v_pad[2:-2, 1:-3]
    wx = wx_pad[2:-2, 2:-2]
    wy = wy_pad[2:-2, 2:-2]
    gx = np.where(wx > 0.0, (c - xw1) / dx,
                  np.where(wx < 0.0, (xe1 - c) / dx, 0.0))
    gy = np.where(wy > 0.0, (c - ys1) / dx,
                  np.where(wy < 0.0, (yn1 - c) / dx, 0.0))
    rhs = -(wx * gx + wy * gy)
    return np.ascontiguousarray(rhs[ii, jj])


def _edge_fraction(a, b):
    """Wetted fraction (value >= 0 side) of an edge with endpoint values a, b."""
    d = a - b
    t = a / np.where(d == 0.0, 1.0, d)
    pos_a = a >= 0.0
    pos_b = b >= 0.0
    return np.where(pos_a & pos_b, 1.0,
                    np.where(~pos_a & ~pos_b, 0.0,
                             np.where(pos_a, t, 1.0 - t)))


def cut_geometry(pv, cc):
    """Marching-squares cut-cell geometry for the (phi >= 0) phase.

    pv: (n+1, m+1) vertex values; cc: (n, m) cell-centred values used only
    to resolve checkerboard (saddle) vertex configurations.

    Returns (vol, face_x, face_y, alpha_g, nx, ny, cx, cy, n_saddle) where
    face_x is (n+1, m), face_y is (n, m+1), cx/cy are interface-segment
    centroids in unit-cell coordinates and (nx, ny) the unit normal pointing
    out of the phase. alpha_g * n is exactly the boundary-closure vector of
    the cell polygon, so the discrete divergence of a constant field is zero.
    """
    face_x = _edge_fraction(pv[:, :-1], pv[:, 1:])
    face_y = _edge_fraction(pv[:-1, :], pv[1:, :])

    c00 = pv[:-1, :-1]
    c10 = pv[1:, :-1]
    c01 = pv[:-1, 1:]
    c11 = pv[1:, 1:]

    def _t(a, b):
        d = a - b
        return a / np.where(d == 0.0, 1.0, d)

    ts = _t(c00, c10)
    te = _t(c10, c11)
    tn = _t(c01, c11)
    tw = _t(c00, c01)

    bits = ((c00 >= 0).astype(np.int64)
            + 2 * (c10 >= 0).astype(np.int64)
            + 4 * (c11 >= 0).astype(np.int64)
            + 8 * (c01 >= 0).astype(np.int64))
    center_pos = cc >= 0.0

    one = np.ones_like(ts)
    zero = np.zeros_like(ts)

    v1 = 0.5 * ts * tw
    v2 = 0.5 * (1.0 - ts) * te
    v4 = 0.5 * (1.0 - tn) * (1.0 - te)
    v8 = 0.5 * tn * (1.0 - tw)
    v3 = 0.5 * (tw + te)
    v12 = 0.5 * ((1.0 - tw) + (1.0 - te))
    v9 = 0.5 * (ts + tn)
    v6 = 0.5 * ((1.0 - ts) + (1.0 - tn))
    v5 = np.where(center_pos, 1.0 - v2 - v8, v1 + v4)
    v10 = np.where(center_pos, 1.0 - v1 - v4, v2 + v8)

    vol = np.select(
        [bits == 0, bits == 1, bits == 2, bits == 3, bits == 4, bits == 5,
         bits == 6, bits == 7, bits == 8, bits == 9, bits == 10, bits == 11,
         bits == 12, bits == 13, bits == 14],
        [zero, v1, v2, v3, v4, v5, v6, 1.0 - v8, v8, v9, v10, 1.0 - v4, v12,
         1.0 - v2, 1.0 - v1],
        default=one)

    # Interface segment endpoints on the four edges (unit-cell coordinates).
    ps = np.stack([ts, zero], axis=-1)
    pe = np.stack([one, te], axis=-1)
    pn = np.stack([tn, one], axis=-1)
    pw = np.stack([zero, tw], axis=-1)

    def _seg(pa, pb):
        mid = 0.5 * (pa + pb)
        ln = np.hypot(pb[..., 0] - pa[..., 0], pb[..., 1] - pa[..., 1])
        return mid, ln

    m_sw, l_sw = _seg(ps, pw)   # cuts off the SW corner
    m_se, l_se = _seg(ps, pe)   # SE corner
    m_ne, l_ne = _seg(pe, pn)   # NE corner
    m_nw, l_nw = _seg(pn, pw)   # NW corner
    m_we, l_we = _seg(pw, pe)   # horizontal split
    m_sn, l_sn = _seg(ps, pn)   # vertical split

    sel = [bits == 1, bits == 2, bits == 3, bits == 4, bits == 6, bits == 7,
           bits == 8, bits == 9, bits == 11, bits == 12, bits == 13,
           bits == 14]
    mids = [m_sw, m_se, m_we, m_ne, m_sn, m_nw, m_nw, m_sn, m_ne, m_we,
            m_se, m_sw]
    cx = np.select(sel, [m[..., 0] for m in mids], default=0.5)
    cy = np.select(sel, [m[..., 1] for m in mids], default=0.5)

    # Saddles: two segments; centroid = length-weighted midpoint average.
    is5 = bits == 5
    is10 = bits == 10
    saddle = is5 | is10
    if np.any(saddle):
        pair_a_m = np.where(is5[..., None], np.where(center_pos[..., None], m_se, m_sw),
                            np.where(center_pos[..., None], m_sw, m_se))
        pair_a_l = np.where(is5, np.where(center_pos, l_se, l_sw),
                            np.where(center_pos, l_sw, l_se))
        pair_b_m = np.where(is5[..., None], np.where(center_pos[..., None], m_nw, m_ne),
                            np.where(center_pos[..., None], m_ne, m_nw))
        pair_b_l = np.where(is5, np.where(center_pos, l_nw, l_ne),
                            np.where(center_pos, l_ne, l_nw))
        tot = pair_a_l + pair_b_l
        tot = np.where(tot == 0.0, 1.0, tot)
        scx = (pair_a_m[..., 0] * pair_a_l + pair_b_m[..., 0] * pair_b_l) / tot
        scy = (pair_a_m[..., 1] * pair_a_l + pair_b_m[..., 1] * pair_b_l) / tot
        cx = np.where(saddle, scx, cx)
        cy = np.where(saddle, scy, cy)
    n_saddle = int(np.count_nonzero(saddle))

    # Closure vector of the cell polygon gives alpha_g and the outward normal.
    mx = face_x[:-1, :] - face_x[1:, :]
    my = face_y[:, :-1] - face_y[:, 1:]
    alpha_g = np.hypot(mx, my)
    safe = np.where(alpha_g == 0.0, 1.0, alpha_g)
    nx = mx / safe
    ny = my / safe

    return vol, face_x, face_y, alpha_g, nx, ny, cx, cy, n_saddle


def biquad_batch(f_pad, xs, ys, ox, oy, dx, n, m):
    """Biquadratic Lagrange interpolation at points (xs, ys).

    Stencil is the 3x3 block centred on the containing cell. Returns the
    interpolated values and the centre Lagrange weight of each point.
    Points may reach one cell outside the domain (ghost values are used).
    """
    fx = (np.asarray(xs) - ox) / dx
    fy = (np.asarray(ys) - oy) / dx
    ic = np.clip(np.floor(fx).astype(np.int64), -1, n)
    jc = np.clip(np.floor(fy).astype(np.int64), -1, m)
    xi = fx - ic - 0.5
    eta = fy - jc - 0.5

    wx = np.stack([0.5 * xi * (xi - 1.0), 1.0 - xi * xi,
                   0.5 * xi * (xi + 1.0)], axis=-1)
    wy = np.stack([0.5 * eta * (eta - 1.0), 1.0 - eta * eta,
                   0.5 * eta * (eta + 1.0)], axis=-1)

    vals = np.zeros_like(fx, dtype=np.float64)
    for di in range(-1, 2):
        row = f_pad[ic + di + NG, :]
        for dj in range(-1, 2):
            vals = vals + wx[..., di + 1] * wy[..., dj + 1] * row[
                np.arange(len(ic)), jc + dj + NG]
    wc = wx[..., 1] * wy[..., 1]
    return vals, wc


def biquad_batch_masked(f_pad, valid_pad, xs, ys, ox, oy, dx, n, m):
    """Masked biquadratic interpolation.

    A point is ok only if every stencil cell with weight magnitude above
    1e-14 is valid. Invalid-cell contributions are zeroed so callers can
    still inspect the partial sum.
    """
    fx = (np.asarray(xs) - ox) / dx
    fy = (np.asarray(ys) - oy) / dx
    ic = np.clip(np.floor(fx).astype(np.int64), -1, n)
    jc = np.clip(np.floor(fy).astype(np.int64), -1, m)
    xi = fx - ic - 0.5
    eta = fy - jc - 0.5

    wx = np.stack([0.5 * xi * (xi - 1.0), 1.0 - xi * xi,
                   0.5 * xi * (xi + 1.0)], axis=-1)
    wy = np.stack([0.5 * eta * (eta - 1.0), 1.0 - eta * eta,
                   0.5 * eta * (eta + 1.0)], axis=-1)

    vals = np.zeros_like(fx, dtype=np.float64)
    ok = np.ones(fx.shape, dtype=bool)
    rng = np.arange(len(ic))
    for di in range(-1, 2):
        frow = f_pad[ic + di + NG, :]
        vrow = valid_pad[ic + di + NG, :]
        for dj in range(-1, 2):
            w = wx[..., di + 1] * wy[..., dj + 1]
            good = vrow[rng, jc + dj + NG]
            ok &= good | (np.abs(w) <= 1e-14)
            vals = vals + np.where(good, w * frow[rng, jc + dj + NG], 0.0)
    return vals, ok

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled tile compositing kernels (hot path of the renderer).

Semantics match clodgs._kernel_py exactly; see that module for the contract.
"""

from libc.math cimport exp

cdef double POWER_CUTOFF = -45.0


def forward_tiles(
    double[:, ::1] mean2d,
    double[:, ::1] conic,
    double[:, ::1] color,
    double[::1] alpha,
    long long[::1] pair_splat,
    long long[::1] tile_starts,
    Py_ssize_t t_lo,
    Py_ssize_t t_hi,
    Py_ssize_t tile,
    Py_ssize_t width,
    Py_ssize_t height,
    Py_ssize_t tiles_x,
    double alpha_clamp,
    double alpha_skip,
    double t_min,
    double[::1] background,
    double[:, :, ::1] image,
    double[:, ::1] t_final,
    int[:, ::1] n_contrib,
):
    cdef Py_ssize_t t, s0, s1, ty, tx, py0, py1, px0, px1, py, px, p, m
    cdef double trans, cr, cg, cb, dx, dy, power, w, a_raw, a, t_new
    cdef int nc
    with nogil:
        for t in range(t_lo, t_hi):
            s0 = tile_starts[t]
            s1 = tile_starts[t + 1]
            if s1 == s0:
                continue
            ty = t // tiles_x
            tx = t % tiles_x
            py0 = ty * tile
            py1 = min(py0 + tile, height)
            px0 = tx * tile
            px1 = min(px0 + tile, width)
            for py in range(py0, py1):
                for px in range(px0, px1):
                    trans = 1.0
                    cr = 0.0
                    cg = 0.0
                    cb = 0.0
                    nc = 0
                    for p in range(s0, s1):
                        m = pair_splat[p]
                        dx = px - mean2d[m, 0]
                        dy = py - mean2d[m, 1]
                        power = (
                            -0.5 * (conic[m, 0] * dx * dx + conic[m, 2] * dy * dy)
                            - conic[m, 1] * dx * dy
                        )
                        if power > 0.0 or power < POWER_CUTOFF:
                            continue
                        w = exp(power)
                        a_raw = alpha[m] * w
                        if a_raw < alpha_skip:
                            continue
                        a = a_raw if a_raw < alpha_clamp else alpha_clamp
                        t_new = trans * (1.0 - a)
                        if t_new < t_min:
                            break
                        cr += color[m, 0] * a * trans
                        cg += color[m, 1] * a * trans
                        cb += color[m, 2] * a * trans
                        trans = t_new
                        nc = <int> (p - s0 + 1)
                    image[py, px, 0] = cr + trans * background[0]
                    image[py, px, 1] = cg + trans * background[1]
                    image[py, px, 2] = cb + trans * background[2]
                    t_final[py, px] = trans
                    n_contrib[py, px] = nc


def backward_tiles(
    double[:, ::1] mean2d,
    double[:, ::1] conic,
    double[:, ::1] color,
    double[::1] alpha,
    long long[::1] pair_splat,
    long long[::1] tile_starts,
    Py_ssize_t t_lo,
    Py_ssize_t t_hi,
    Py_ssize_t tile,
    Py_ssize_t width,
    Py_ssize_t height,
    Py_ssize_t tiles_x,
    double alpha_clamp,
    double alpha_skip,
    double[::1] background,
    double[:, :, ::1] d_image,
    double[:, ::1] t_final,
    int[:, ::1] n_contrib,
    double[:, ::1] pair_dmean2d,
    double[:, ::1] pair_dconic,
    double[:, ::1] pair_dcolor,
    double[::1] pair_dalpha,
):
    cdef Py_ssize_t t, s0, s1, ty, tx, py0, py1, px0, px1, py, px, p, m
    cdef int nc, pos
    cdef double trans, br, bg, bb, gr, gg, gb
    cdef double dx, dy, power, w, a_raw, a, one_minus, at
    cdef double dcda_r, dcda_g, dcda_b, d_a, d_pow
    with nogil:
        for t in range(t_lo, t_hi):
            s0 = tile_starts[t]
            s1 = tile_starts[t + 1]
            if s1 == s0:
                continue
            ty = t // tiles_x
            tx = t % tiles_x
            py0 = ty * tile
            py1 = min(py0 + tile, height)
            px0 = tx * tile
            px1 = min(px0 + tile, width)
            for py in range(py0, py1):
                for px in range(px0, px1):
                    nc = n_contrib[py, px]
                    if nc == 0:
                        continue
                    trans = t_final[py, px]
                    br = trans * background[0]
                    bg = trans * background[1]
                    bb = trans * background[2]
                    gr = d_image[py, px, 0]
                    gg = d_image[py, px, 1]
                    gb = d_image[py, px, 2]
                    for pos in range(nc - 1, -1, -1):
                        p = s0 + pos
                        m = pair_splat[p]
                        dx = px - mean2d[m, 0]
                        dy = py - mean2d[m, 1]
                        power = (
                            -0.5 * (conic[m, 0] * dx * dx + conic[m, 2] * dy * dy)
                            - conic[m, 1] * dx * dy
                        )
                        if power > 0.0 or power < POWER_CUTOFF:
                            continue
                        w = exp(power)
                        a_raw = alpha[m] * w
                        if a_raw < alpha_skip:
                            continue
                        a = a_raw if a_raw < alpha_clamp else alpha_clamp
                        one_minus = 1.0 - a
                        trans = trans / one_minus
                        at = a * trans
                        dcda_r = color[m, 0] * trans - br / one_minus
                        dcda_g = color[m, 1] * trans - bg / one_minus
                        dcda_b = color[m, 2] * trans - bb / one_minus
                        d_a = gr * dcda_r + gg * dcda_g + gb * dcda_b
                        br += color[m, 0] * at
                        bg += color[m, 1] * at
                        bb += color[m, 2] * at
                        pair_dcolor[p, 0] += gr * at
                        pair_dcolor[p, 1] += gg * at
                        pair_dcolor[p, 2] += gb * at
                        if a_raw < alpha_clamp:
                            pair_dalpha[p] += d_a * w
                            d_pow = d_a * alpha[m] * w
                            pair_dconic[p, 0] += d_pow * (-0.5 * dx * dx)
                            pair_dconic[p, 1] += d_pow * (-dx * dy)
                            pair_dconic[p, 2] += d_pow * (-0.5 * dy * dy)
                            pair_dmean2d[p, 0] += d_pow * (conic[m, 0] * dx + conic[m, 1] * dy)
                            pair_dmean2d[p, 1] += d_pow * (conic[m, 2] * dy + conic[m, 1] * dx)

"""Pure-NumPy tile compositing kernels (fallback backend).

Mirrors clodgs._kernel operation-for-operation per pixel, vectorized over
the pixels of each tile, so both backends agree to float rounding. Splats
arrive depth-sorted; ``pair_splat`` lists (tile, splat) incidences grouped by
tile via ``tile_starts``.
"""

from __future__ import annotations

import numpy as np

# Exponents below this produce weights ~3e-20: skipped identically in both
# backends so branch decisions match.
POWER_CUTOFF = -45.0


def _tile_pixels(t, tile, width, height, tiles_x):
    ty, tx = divmod(t, tiles_x)
    py0, py1 = ty * tile, min(ty * tile + tile, height)
    px0, px1 = tx * tile, min(tx * tile + tile, width)
    ys, xs = np.meshgrid(
        np.arange(py0, py1, dtype=np.float64),
        np.arange(px0, px1, dtype=np.float64),
        indexing="ij",
    )
    return py0, py1, px0, px1, ys.ravel(), xs.ravel()


def forward_tiles(
    mean2d, conic, color, alpha, pair_splat, tile_starts,
    t_lo, t_hi, tile, width, height, tiles_x,
    alpha_clamp, alpha_skip, t_min, background,
    image, t_final, n_contrib,
):
    for t in range(t_lo, t_hi):
        s0, s1 = int(tile_starts[t]), int(tile_starts[t + 1])
        if s1 == s0:
            continue
        py0, py1, px0, px1, ys, xs = _tile_pixels(t, tile, width, height, tiles_x)
        q = ys.size
        trans = np.ones(q)
        done = np.zeros(q, dtype=bool)
        acc = np.zeros((q, 3))
        nc = np.zeros(q, dtype=np.int32)
        for p in range(s0, s1):
            if done.all():
                break
            m = int(pair_splat[p])
            dx = xs - mean2d[m, 0]
            dy = ys - mean2d[m, 1]
            power = (
                -0.5 * (conic[m, 0] * dx * dx + conic[m, 2] * dy * dy)
                - conic[m, 1] * dx * dy
            )
            hit = (power <= 0.0) & (power >= POWER_CUTOFF) & ~done
            if not hit.any():
                continue
            w = np.zeros(q)
            w[hit] = np.exp(power[hit])
            a_raw = alpha[m] * w
            hit &= a_raw >= alpha_skip
            a = np.minimum(a_raw, alpha_clamp)
            t_new = trans * (1.0 - a)
            stop = hit & (t_new < t_min)
            apply = hit & ~stop
            acc[apply] += color[m] * (a[apply] * trans[apply])[:, None]
            trans[apply] = t_new[apply]
            nc[apply] = p - s0 + 1
            done |= stop
        out = acc + trans[:, None] * background[None, :]
        shape = (py1 - py0, px1 - px0)
        image[py0:py1, px0:px1] = out.reshape(shape + (3,))
        t_final[py0:py1, px0:px1] = trans.reshape(shape)
        n_contrib[py0:py1, px0:px1] = nc.reshape(shape)


def backward_tiles(
    mean2d, conic, color, alpha, pair_splat, tile_starts,
    t_lo, t_hi, tile, width, height, tiles_x,
    alpha_clamp, alpha_skip, background,
    d_image, t_final, n_contrib,
    pair_dmean2d, pair_dconic, pair_dcolor, pair_dalpha,
):
    for t in range(t_lo, t_hi):
        s0, s1 = int(tile_starts[t]), int(tile_starts[t + 1])
        if s1 == s0:
            continue
        py0, py1, px0, px1, ys, xs = _tile_pixels(t, tile, width, height, tiles_x)
        shape = (py1 - py0, px1 - px0)
        trans = t_final[py0:py1, px0:px1].reshape(-1).copy()
        nc = n_contrib[py0:py1, px0:px1].reshape(-1)
        grad = d_image[py0:py1, px0:px1].reshape(-1, 3)
        behind = trans[:, None] * background[None, :]
        top = int(nc.max())
        for pos in range(top - 1, -1, -1):
            p = s0 + pos
            m = int(pair_splat[p])
            dx = xs - mean2d[m, 0]
            dy = ys - mean2d[m, 1]
            power = (
                -0.5 * (conic[m, 0] * dx * dx + conic[m, 2] * dy * dy)
                - conic[m, 1] * dx * dy
            )
            proc = (nc > pos) & (power <= 0.0) & (power >= POWER_CUTOFF)
            if not proc.any():
                continue
            w = np.zeros_like(power)
            w[proc] = np.exp(power[proc])
            a_raw = alpha[m] * w
            proc &= a_raw >= alpha_skip
            a = np.minimum(a_raw, alpha_clamp)
            one_minus = 1.0 - a
            trans[proc] /= one_minus[proc]
            at = a * trans
            # dC/d(alpha') = color * T - (what lies behind) / (1 - alpha')
            dcda = color[m][None, :] * trans[:, None] - behind / one_minus[:, None]
            d_a = np.where(proc, np.einsum("qc,qc->q", grad, dcda), 0.0)
            behind[proc] += color[m][None, :] * at[proc, None]
            pair_dcolor[p] += grad[proc].T @ at[proc]
            live = proc & (a_raw < alpha_clamp)
            if live.any():
                pair_dalpha[p] += float(np.sum(d_a[live] * w[live]))
                d_pow = d_a * alpha[m] * w
                pair_dconic[p, 0] += float(np.sum(d_pow[live] * (-0.5 * dx[live] ** 2)))
                pair_dconic[p, 1] += float(np.sum(d_pow[live] * (-dx[live] * dy[live])))
                pair_dconic[p, 2] += float(np.sum(d_pow[live] * (-0.5 * dy[live] ** 2)))
                pair_dmean2d[p, 0] += float(
                    np.sum(d_pow[live] * (conic[m, 0] * dx[live] + conic[m, 1] * dy[live]))
                )
                pair_dmean2d[p, 1] += float(
                    np.sum(d_pow[live] * (conic[m, 2] * dy[live] + conic[m, 1] * dx[live]))
                )

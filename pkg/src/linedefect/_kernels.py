"""Compiled inner loops: relaxation sweeps, edge energy and the greedy ball net."""
import math

import numba
import numpy as np


@numba.njit(cache=True)
def _sq_min(a0, a1, a2, a3, b0, b1, b2, b3):
    # difference form, no cancellation when a and b nearly agree
    dz = a0 - b0
    s = 1.0 if a1 * b1 + a2 * b2 + a3 * b3 >= 0.0 else -1.0
    d1 = a1 - s * b1
    d2 = a2 - s * b2
    d3 = a3 - s * b3
    return dz * dz + d1 * d1 + d2 * d2 + d3 * d3


@numba.njit(cache=True)
def edge_energy(v):
    n0, n1, n2 = v.shape[0], v.shape[1], v.shape[2]
    tot = 0.0
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                a0, a1, a2, a3 = v[i, j, k, 0], v[i, j, k, 1], v[i, j, k, 2], v[i, j, k, 3]
                if i + 1 < n0:
                    tot += _sq_min(a0, a1, a2, a3, v[i + 1, j, k, 0], v[i + 1, j, k, 1], v[i + 1, j, k, 2], v[i + 1, j, k, 3])
                if j + 1 < n1:
                    tot += _sq_min(a0, a1, a2, a3, v[i, j + 1, k, 0], v[i, j + 1, k, 1], v[i, j + 1, k, 2], v[i, j + 1, k, 3])
                if k + 1 < n2:
                    tot += _sq_min(a0, a1, a2, a3, v[i, j, k + 1, 0], v[i, j, k + 1, 1], v[i, j, k + 1, 2], v[i, j, k + 1, 3])
    return tot


@numba.njit(cache=True)
def _project(z, y1, y2, y3, slope, kappa, out):
    wn = math.sqrt(y1 * y1 + y2 * y2 + y3 * y3)
    rho = (slope * z + wn) / kappa
    if rho < 0.0:
        rho = 0.0
    out[0] = slope * rho
    if wn > 0.0:
        s = rho / wn
        out[1] = y1 * s
        out[2] = y2 * s
        out[3] = y3 * s
    else:
        out[1] = rho
        out[2] = 0.0
        out[3] = 0.0


@numba.njit(cache=True)
def _local(v, i, j, k, c0, c1, c2, c3, h, a, s_star, inv_sqrt_k):
    e = 0.0
    for d in range(6):
        ii, jj, kk = i, j, k
        if d == 0:
            ii += 1
        elif d == 1:
            ii -= 1
        elif d == 2:
            jj += 1
        elif d == 3:
            jj -= 1
        elif d == 4:
            kk += 1
        else:
            kk -= 1
        e += _sq_min(c0, c1, c2, c3, v[ii, jj, kk, 0], v[ii, jj, kk, 1], v[ii, jj, kk, 2], v[ii, jj, kk, 3])
    s = math.sqrt(c0 * c0 + c1 * c1 + c2 * c2 + c3 * c3) * inv_sqrt_k
    q = s * s - s_star * s_star
    return e * h + a * q * q * h * h * h


@numba.njit(cache=True)
def gs_color(v, free, color, h, kappa, a, s_star, active):
    """One color of a red-black sweep, in place.  Returns the max node displacement."""
    n0, n1, n2 = v.shape[0], v.shape[1], v.shape[2]
    slope = math.sqrt(kappa - 1.0)
    inv_sqrt_k = 1.0 / math.sqrt(kappa)
    out = np.empty(4)
    moved = 0.0
    for i in range(1, n0 - 1):
        for j in range(1, n1 - 1):
            k0 = 1 + ((i + j + 1 + color) % 2)
            for k in range(k0, n2 - 1, 2):
                if not free[i, j, k]:
                    continue
                c0, c1, c2, c3 = v[i, j, k, 0], v[i, j, k, 1], v[i, j, k, 2], v[i, j, k, 3]
                m0 = 0.0
                m1 = 0.0
                m2 = 0.0
                m3 = 0.0
                for d in range(6):
                    ii, jj, kk = i, j, k
                    if d == 0:
                        ii += 1
                    elif d == 1:
                        ii -= 1
                    elif d == 2:
                        jj += 1
                    elif d == 3:
                        jj -= 1
                    elif d == 4:
                        kk += 1
                    else:
                        kk -= 1
                    b1, b2, b3 = v[ii, jj, kk, 1], v[ii, jj, kk, 2], v[ii, jj, kk, 3]
                    sg = -1.0 if (c1 * b1 + c2 * b2 + c3 * b3) < 0.0 else 1.0
                    m0 += v[ii, jj, kk, 0]
                    m1 += sg * b1
                    m2 += sg * b2
                    m3 += sg * b3
                m0 /= 6.0
                m1 /= 6.0
                m2 /= 6.0
                m3 /= 6.0
                if active:
                    t = math.sqrt(m0 * m0 + m1 * m1 + m2 * m2 + m3 * m3)
                    if t > 0.0:
                        s = t * inv_sqrt_k
                        step = (h * h / 12.0) * 4.0 * a * s * (s * s - s_star * s_star) * inv_sqrt_k / t
                        m0 -= step * m0
                        m1 -= step * m1
                        m2 -= step * m2
                        m3 -= step * m3
                _project(m0, m1, m2, m3, slope, kappa, out)
                if active:
                    e_new = _local(v, i, j, k, out[0], out[1], out[2], out[3], h, a, s_star, inv_sqrt_k)
                    e_old = _local(v, i, j, k, c0, c1, c2, c3, h, a, s_star, inv_sqrt_k)
                    if e_new > e_old:
                        continue
                dm = _sq_min(out[0], out[1], out[2], out[3], c0, c1, c2, c3)
                if dm > moved:
                    moved = dm
                v[i, j, k, 0] = out[0]
                v[i, j, k, 1] = out[1]
                v[i, j, k, 2] = out[2]
                v[i, j, k, 3] = out[3]
    return math.sqrt(moved)


@numba.njit(cache=True)
def _cell_key(c0, c1, c2):
    return ((c0 + 1048576) * 2097152 + (c1 + 1048576)) * 2097152 + (c2 + 1048576)


@numba.njit(cache=True)
def greedy_net(pts, order, radius):
    """Scan ``order`` and keep a point when no kept point lies within ``radius``.

    Returns a boolean mask over pts.  Kept points are pairwise farther apart
    than ``radius`` and every scanned point ends up within ``radius`` of one.
    """
    keep = np.zeros(pts.shape[0], dtype=np.bool_)
    head = numba.typed.Dict.empty(key_type=numba.types.int64, value_type=numba.types.int64)
    nxt = np.full(pts.shape[0], -1, dtype=np.int64)
    inv = 1.0 / radius
    r2 = radius * radius
    for t in range(order.shape[0]):
        i = order[t]
        if keep[i]:
            continue
        c0 = int(math.floor(pts[i, 0] * inv))
        c1 = int(math.floor(pts[i, 1] * inv))
        c2 = int(math.floor(pts[i, 2] * inv))
        hit = False
        for a in range(-1, 2):
            for b in range(-1, 2):
                for c in range(-1, 2):
                    key = _cell_key(c0 + a, c1 + b, c2 + c)
                    if key in head:
                        j = head[key]
                        while j >= 0:
                            d0 = pts[i, 0] - pts[j, 0]
                            d1 = pts[i, 1] - pts[j, 1]
                            d2 = pts[i, 2] - pts[j, 2]
                            if d0 * d0 + d1 * d1 + d2 * d2 <= r2:
                                hit = True
                                break
                            j = nxt[j]
                    if hit:
                        break
                if hit:
                    break
            if hit:
                break
        if hit:
            continue
        keep[i] = True
        key = _cell_key(c0, c1, c2)
        if key in head:
            nxt[i] = head[key]
        head[key] = i
    return keep


@numba.njit(cache=True)
def farthest_pair(q):
    """Brute-force farthest pair (squared distance, i, j) with i < j; first maximum wins."""
    best = -1.0
    bi = 0
    bj = 0
    m = q.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            d0 = q[i, 0] - q[j, 0]
            d1 = q[i, 1] - q[j, 1]
            d2 = q[i, 2] - q[j, 2]
            d = d0 * d0 + d1 * d1 + d2 * d2
            if d > best:
                best = d
                bi = i
                bj = j
    return best, bi, bj

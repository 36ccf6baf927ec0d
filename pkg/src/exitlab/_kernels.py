"""Compiled path loops.  Domains are passed as (code, float params)."""

import math

import numba as nb
import numpy as np

from ._rng import normal, seed_stream, uniform

WHOLE, INTERVAL, BOX, BALL, SLAB, POLYGON, KORANYI = range(7)

# exp(-40) ~ 4e-18: crossing probabilities below this are not sampled
_BRIDGE_CUTOFF = 40.0


@nb.njit(inline="always", cache=True)
def inside(code, p, x):
    if code == WHOLE:
        return True
    if code == INTERVAL:
        return p[0] < x[0] < p[1]
    if code == BOX:
        d = x.shape[0]
        for i in range(d):
            if not (p[i] < x[i] < p[d + i]):
                return False
        return True
    if code == BALL:
        d = x.shape[0]
        r2 = 0.0
        for i in range(d):
            r2 += (x[i] - p[i]) ** 2
        return r2 < p[d] * p[d]
    if code == SLAB:
        return abs(x[0]) < p[0]
    if code == POLYGON:
        nv = p.shape[0] // 2
        c = False
        px = x[0]
        py = x[1]
        for i in range(nv):
            j = (i + 1) % nv
            x1 = p[2 * i]
            y1 = p[2 * i + 1]
            x2 = p[2 * j]
            y2 = p[2 * j + 1]
            if (y1 > py) != (y2 > py):
                xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
                if px < xint:
                    c = not c
        return c
    if code == KORANYI:
        n = int(p[0])
        # q = center^{-1} * x under (x,z)*(x',z') = (x+x', z+z'+x.y'-x'.y)
        w2 = 0.0
        z = x[2 * n] - p[1 + 2 * n]
        for i in range(n):
            cx = p[1 + i]
            cy = p[1 + n + i]
            dx = x[i] - cx
            dy = x[n + i] - cy
            w2 += dx * dx + dy * dy
            z += -cx * x[n + i] + x[i] * cy
        r = p[2 + 2 * n]
        return w2 * w2 + 16.0 * z * z < r ** 4
    return False


@nb.njit(inline="always", cache=True)
def boundary_distance(code, p, x):
    """Euclidean distance to the nearest boundary piece (euclidean domains)."""
    if code == INTERVAL:
        return min(x[0] - p[0], p[1] - x[0])
    if code == BOX:
        d = x.shape[0]
        best = np.inf
        for i in range(d):
            best = min(best, x[i] - p[i], p[d + i] - x[i])
        return best
    if code == BALL:
        d = x.shape[0]
        r2 = 0.0
        for i in range(d):
            r2 += (x[i] - p[i]) ** 2
        return p[d] - math.sqrt(r2)
    if code == SLAB:
        return p[0] - abs(x[0])
    if code == POLYGON:
        nv = p.shape[0] // 2
        best = np.inf
        for i in range(nv):
            j = (i + 1) % nv
            ax = p[2 * i]
            ay = p[2 * i + 1]
            bx = p[2 * j] - ax
            by = p[2 * j + 1] - ay
            t = ((x[0] - ax) * bx + (x[1] - ay) * by) / (bx * bx + by * by)
            t = min(1.0, max(0.0, t))
            ex = x[0] - ax - t * bx
            ey = x[1] - ay - t * by
            best = min(best, math.sqrt(ex * ex + ey * ey))
        return best
    return np.inf


@nb.njit(parallel=True, cache=True)
def euclidean_paths(code, p, start, sigma, h, nmax, t_max, bridge, seed, idx0,
                    taus, exited, points):
    n = taus.shape[0]
    d = start.shape[0]
    sh = sigma * math.sqrt(h)
    inv = 2.0 / (sigma * sigma * h)
    for j in nb.prange(n):
        s = np.empty(4, np.uint64)
        seed_stream(s, seed, idx0 + j)
        x = start.copy()
        d1 = boundary_distance(code, p, x) if bridge else 0.0
        k = 0
        out = False
        while k < nmax:
            for i in range(d):
                x[i] += sh * normal(s)
            k += 1
            if not inside(code, p, x):
                out = True
                break
            if bridge:
                d2 = boundary_distance(code, p, x)
                a = d1 * d2 * inv
                if a < _BRIDGE_CUTOFF:
                    if uniform(s) < math.exp(-a):
                        out = True
                        break
                d1 = d2
        taus[j] = min(k * h, t_max) if out else t_max
        exited[j] = out
        for i in range(d):
            points[j, i] = x[i]


@nb.njit(parallel=True, cache=True)
def heisenberg_paths(code, p, start, n_h, sigma, h, substeps, nmax, t_max, seed, idx0,
                     taus, exited, points):
    n = taus.shape[0]
    dim = start.shape[0]
    sd = sigma * math.sqrt(h / substeps)
    for j in nb.prange(n):
        s = np.empty(4, np.uint64)
        seed_stream(s, seed, idx0 + j)
        x = start.copy()
        k = 0
        out = False
        while k < nmax:
            for _ in range(substeps):
                for i in range(n_h):
                    du = sd * normal(s)
                    dv = sd * normal(s)
                    # left-point (Ito) area increment U dV - V dU
                    x[2 * n_h] += x[i] * dv - x[n_h + i] * du
                    x[i] += du
                    x[n_h + i] += dv
            k += 1
            if not inside(code, p, x):
                out = True
                break
        taus[j] = min(k * h, t_max) if out else t_max
        exited[j] = out
        for i in range(dim):
            points[j, i] = x[i]


@nb.njit(parallel=True, cache=True)
def graph_paths(indptr, indices, inside_mask, start, dt, nmax, t_max, seed, idx0,
                taus, exited, last):
    n = taus.shape[0]
    for j in nb.prange(n):
        s = np.empty(4, np.uint64)
        seed_stream(s, seed, idx0 + j)
        v = start
        k = 0
        out = False
        while k < nmax:
            lo = indptr[v]
            deg = indptr[v + 1] - lo
            v = indices[lo + int(uniform(s) * deg)]
            k += 1
            if not inside_mask[v]:
                out = True
                break
        taus[j] = min(k * dt, t_max) if out else t_max
        exited[j] = out
        last[j] = v

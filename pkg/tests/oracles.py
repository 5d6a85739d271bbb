"""Independent reference implementations used to check the package.

Everything here is written as plain loops over cells and faces, sharing no
code with ``robinms``, so agreement is evidence rather than tautology.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq


def dense_tpfa(K, hx, hy, left, right, bottom, top, q=None):
    """Cell-by-cell TPFA on a dense matrix.

    Each side is a list of ``(kind, value)`` per face with ``kind`` in
    ``{"p", "u"}``: a pressure, or an outward normal velocity.  Returns cell
    pressures and staggered velocities ``(ux, uy)``; with no pressure face the
    pressure is normalized to zero mean.
    """
    K = np.asarray(K, dtype=float)
    ny, nx = K.shape
    n = nx * ny
    q = np.zeros((ny, nx)) if q is None else np.asarray(q, dtype=float)
    A = np.zeros((n, n))
    b = np.zeros(n)
    idx = lambda j, i: j * nx + i  # noqa: E731

    def trans(k1, k2, length, h):
        return length * 2.0 * k1 * k2 / (k1 + k2) / h

    for j in range(ny):
        for i in range(nx):
            c = idx(j, i)
            b[c] += q[j, i] * hx * hy
            for dj, di, length, h in ((0, 1, hy, hx), (0, -1, hy, hx), (1, 0, hx, hy), (-1, 0, hx, hy)):
                jj, ii = j + dj, i + di
                if 0 <= jj < ny and 0 <= ii < nx:
                    t = trans(K[j, i], K[jj, ii], length, h)
                    A[c, c] += t
                    A[c, idx(jj, ii)] -= t
                    continue
                if di == -1:
                    kind, v = left[j]
                elif di == 1:
                    kind, v = right[j]
                elif dj == -1:
                    kind, v = bottom[i]
                else:
                    kind, v = top[i]
                if kind == "p":
                    t = 2.0 * K[j, i] * length / h
                    A[c, c] += t
                    b[c] += t * v
                else:
                    b[c] -= length * v
    any_p = any(k == "p" for side in (left, right, bottom, top) for k, _ in side)
    if not any_p:
        A = np.block([[A, np.ones((n, 1))], [np.ones((1, n)), np.zeros((1, 1))]])
        b = np.append(b, 0.0)
    p = np.linalg.solve(A, b)
    # refinement with extended-precision residuals
    A_ld, b_ld = A.astype(np.longdouble), b.astype(np.longdouble)
    for _ in range(5):
        r = b_ld - A_ld @ p.astype(np.longdouble)
        p = (p.astype(np.longdouble) + np.linalg.solve(A, r.astype(float))).astype(float)
    p = p[:n]
    P = p.reshape(ny, nx)
    ux = np.zeros((ny, nx + 1))
    uy = np.zeros((ny + 1, nx))
    for j in range(ny):
        for i in range(1, nx):
            ux[j, i] = trans(K[j, i - 1], K[j, i], hy, hx) * (P[j, i - 1] - P[j, i]) / hy
        for s, i, sign, face in (("l", 0, -1, 0), ("r", nx - 1, 1, nx)):
            kind, v = (left if s == "l" else right)[j]
            out = 2.0 * K[j, i] / hx * (P[j, i] - v) if kind == "p" else v
            ux[j, face] = sign * out
    for i in range(nx):
        for j in range(1, ny):
            uy[j, i] = trans(K[j - 1, i], K[j, i], hx, hy) * (P[j - 1, i] - P[j, i]) / hx
        for s, j, sign, face in (("b", 0, -1, 0), ("t", ny - 1, 1, ny)):
            kind, v = (bottom if s == "b" else top)[i]
            out = 2.0 * K[j, i] / hy * (P[j, i] - v) if kind == "p" else v
            uy[face, i] = sign * out
    if not any_p:
        P = P - P.mean()
    return P, ux, uy


def count_interfaces(nx, ny, mx, my):
    """Number of subdomain pairs sharing at least one fine face, by scanning every face."""
    sx, sy = nx // mx, ny // my
    owner = lambda j, i: (i // sx) + mx * (j // sy)  # noqa: E731
    pairs = set()
    for j in range(ny):
        for i in range(nx):
            a = owner(j, i)
            for jj, ii in ((j, i + 1), (j + 1, i)):
                if jj < ny and ii < nx and owner(jj, ii) != a:
                    pairs.add((min(a, owner(jj, ii)), max(a, owner(jj, ii))))
    return len(pairs)


def frac_flow(s, M):
    a = M * s * s
    return a / (a + (1 - s) ** 2)


def upwind_1d(n, T, M, cfl=0.1, s_in=1.0, s0=0.0):
    """Brute-force explicit upwind on [0, 1] with unit velocity, advanced to time ``T``."""
    h = 1.0 / n
    ss = np.linspace(0.0, 1.0, 20001)
    df = np.gradient(frac_flow(ss, M), ss)
    dt = cfl * h / np.abs(df).max()
    s = np.full(n, s0, dtype=float)
    t = 0.0
    f_in = frac_flow(s_in, M)
    while t < T:
        d = min(dt, T - t)
        f = frac_flow(s, M)
        upstream = np.concatenate(([f_in], f[:-1]))
        s = s - d / h * (f - upstream)
        t += d
    return s


def coarsen(s, factor):
    return s.reshape(-1, factor).mean(axis=1)


def welge_front(M, s0=0.0):
    """Shock saturation and speed from the tangent ``f(s)-f(s0) = f'(s)(s-s0)``."""
    def dfds(s):
        e = 1e-7
        return (frac_flow(s + e, M) - frac_flow(s - e, M)) / (2 * e)

    g = lambda s: (frac_flow(s, M) - frac_flow(s0, M)) - dfds(s) * (s - s0)  # noqa: E731
    s_star = brentq(g, s0 + 1e-3, 1 - 1e-6)
    return s_star, (frac_flow(s_star, M) - frac_flow(s0, M)) / (s_star - s0)

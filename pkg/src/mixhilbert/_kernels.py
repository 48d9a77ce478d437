"""Compiled inner loops for the lattice collision sums.

Every collision (i, j, omega) moves the pair product F_i G_j from the
pre-collision nodes to the post-collision points.  The post-collision mass is
spread over a (2p+1)^3 block of nodes with tensor Lagrange weights, which
reproduce 1, v and |v|^2 exactly for p >= 1.  A collision whose block leaves
the active node set is dropped from gain and loss alike, so the invariants of
the collision sum hold to rounding.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _bfun(mu, b_form, C_b):
    if b_form == 0:
        return C_b * mu
    return C_b * mu * mu


@njit(cache=True, inline="always")
def _weights1d(s, p, w):
    # Lagrange weights on nodes -p..p for a point at offset s
    for a in range(2 * p + 1):
        v = 1.0
        for b in range(2 * p + 1):
            if b != a:
                v *= (s - (b - p)) / (a - b)
        w[a] = v


@njit(cache=True)
def offset_geometry(d0, d1, d2, ca, cb, dirs, p, out_na, out_wa, out_nb, out_wb, out_cos):
    """Nearest-node offsets (index units, relative to the own pre-collision
    node) and block weights of both post-collision points, per direction, for
    the lattice offset (d0, d1, d2) = index(v*) - index(v).  Also stores
    |cos theta| between the offset and each direction."""
    r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    L = 2 * p + 1
    w0 = np.empty(L)
    w1 = np.empty(L)
    w2 = np.empty(L)
    for q in range(dirs.shape[0]):
        o0 = dirs[q, 0]
        o1 = dirs[q, 1]
        o2 = dirs[q, 2]
        uw = d0 * o0 + d1 * o1 + d2 * o2
        out_cos[q] = abs(uw) / r
        for side in range(2):
            t = ca * uw if side == 0 else -cb * uw
            x0 = t * o0
            x1 = t * o1
            x2 = t * o2
            n0 = int(math.floor(x0 + 0.5))
            n1 = int(math.floor(x1 + 0.5))
            n2 = int(math.floor(x2 + 0.5))
            _weights1d(x0 - n0, p, w0)
            _weights1d(x1 - n1, p, w1)
            _weights1d(x2 - n2, p, w2)
            na = out_na if side == 0 else out_nb
            wa = out_wa if side == 0 else out_wb
            na[q, 0] = n0
            na[q, 1] = n1
            na[q, 2] = n2
            c = 0
            for a in range(L):
                for b in range(L):
                    for e in range(L):
                        wa[q, c] = w0[a] * w1[b] * w2[e]
                        c += 1


@njit(cache=True)
def block_ok(active, N, p):
    """True where the (2p+1)^3 block centred at a node lies inside the active set."""
    out = np.zeros(N * N * N, dtype=np.bool_)
    for i0 in range(p, N - p):
        for i1 in range(p, N - p):
            for i2 in range(p, N - p):
                ok = True
                for a in range(-p, p + 1):
                    for b in range(-p, p + 1):
                        for c in range(-p, p + 1):
                            if not active[((i0 + a) * N + i1 + b) * N + i2 + c]:
                                ok = False
                out[(i0 * N + i1) * N + i2] = ok
    return out


@njit(cache=True)
def block_offsets(N, p):
    L = 2 * p + 1
    off = np.empty(L * L * L, dtype=np.int64)
    c = 0
    for a in range(-p, p + 1):
        for b in range(-p, p + 1):
            for e in range(-p, p + 1):
                off[c] = (a * N + b) * N + e
                c += 1
    return off


@njit(cache=True)
def collide_pass(F, G, active_a, active_b, ok_a, ok_b, N, p, h, ca, cb, kin_coeff, gamma,
                 dirs, dir_w, b_form, C_b, umax2, thr, dep_a, dep_b, out_a, out_b):
    """Accumulate Q^{ab}(F, G) into out_a and Q^{ba}(G, F) into out_b.

    ca = 2 m_b/(m_a+m_b) moves the species-a particle, cb = 2 m_a/(m_a+m_b)
    the species-b one.  Loops: lattice offset, source node, direction.
    """
    nd = dirs.shape[0]
    S = (2 * p + 1) ** 3
    bw = np.empty(nd)
    cs = np.empty(nd)
    na = np.empty((nd, 3), dtype=np.int64)
    nb = np.empty((nd, 3), dtype=np.int64)
    wa = np.empty((nd, S))
    wb = np.empty((nd, S))
    sa = np.empty(nd, dtype=np.int64)
    sb = np.empty(nd, dtype=np.int64)
    off = block_offsets(N, p)
    hi = N - 1 - p
    for d0 in range(-(N - 1), N):
        for d1 in range(-(N - 1), N):
            for d2 in range(-(N - 1), N):
                u2 = (d0 * d0 + d1 * d1 + d2 * d2) * h * h
                if u2 == 0.0 or u2 > umax2:
                    continue
                offset_geometry(d0, d1, d2, ca, cb, dirs, p, na, wa, nb, wb, cs)
                kin = kin_coeff * math.sqrt(u2) ** gamma
                for q in range(nd):
                    bw[q] = dir_w[q] * _bfun(cs[q], b_form, C_b)
                    sa[q] = (na[q, 0] * N + na[q, 1]) * N + na[q, 2]
                    sb[q] = (nb[q, 0] * N + nb[q, 1]) * N + nb[q, 2]
                dj = (d0 * N + d1) * N + d2
                for i0 in range(max(0, -d0), min(N, N - d0)):
                    for i1 in range(max(0, -d1), min(N, N - d1)):
                        for i2 in range(max(0, -d2), min(N, N - d2)):
                            i = (i0 * N + i1) * N + i2
                            if not active_a[i]:
                                continue
                            j = i + dj
                            if not active_b[j]:
                                continue
                            prod = F[i] * G[j]
                            if prod == 0.0 or abs(prod) <= thr:
                                continue
                            kp = kin * prod
                            for q in range(nd):
                                if bw[q] == 0.0:
                                    continue
                                c0 = i0 + na[q, 0]
                                c1 = i1 + na[q, 1]
                                c2 = i2 + na[q, 2]
                                if c0 < p or c0 > hi or c1 < p or c1 > hi or c2 < p or c2 > hi:
                                    continue
                                ka = i + sa[q]
                                if not ok_a[ka]:
                                    continue
                                c0 = i0 + d0 + nb[q, 0]
                                c1 = i1 + d1 + nb[q, 1]
                                c2 = i2 + d2 + nb[q, 2]
                                if c0 < p or c0 > hi or c1 < p or c1 > hi or c2 < p or c2 > hi:
                                    continue
                                kb = j + sb[q]
                                if not ok_b[kb]:
                                    continue
                                wk = kp * bw[q]
                                if dep_a:
                                    out_a[i] -= wk
                                    for c in range(S):
                                        out_a[ka + off[c]] += wk * wa[q, c]
                                if dep_b:
                                    out_b[j] -= wk
                                    for c in range(S):
                                        out_b[kb + off[c]] += wk * wb[q, c]





@njit(cache=True)
def linear_rows(rows_a, mu_b, sq_a, sq_b, isq_a, isq_b, ca, cb, idx_a, idx_b,
                N, p, h, kin_coeff, gamma, dirs, dir_w, b_form, C_b, umax2, thr, L, nu):
    """Rows of species a for the (a, b) part of L, pre/post form.

    (L g)(v) = sum int int B [mu_* g(v) + sqrt(mu mu_*) g_*
               - mu_* sqrt(mu) (phi(v') + phi_*(v_*'))],   phi = g / sqrt(mu),
    which uses mu(v') mu_*(v_*') = mu mu_* for a shared bulk velocity and
    temperature.  phi is interpolated with Lagrange weights of half-width p,
    so quadratic collision invariants are reproduced exactly away from the
    edge of the active set, where phi is extended by zero.  Partners are the
    nodes with idx_b >= 0.  Collisions with mu_* sqrt(mu) <= thr or a stencil
    leaving the lattice are skipped.  Loops: lattice offset, row, direction.
    """
    nd = dirs.shape[0]
    S = (2 * p + 1) ** 3
    NN = N * N
    hi = N - 1 - p
    nr = rows_a.shape[0]
    r0 = np.empty(nr, dtype=np.int64)
    r1 = np.empty(nr, dtype=np.int64)
    r2 = np.empty(nr, dtype=np.int64)
    for r in range(nr):
        r0[r] = rows_a[r] // NN
        r1[r] = (rows_a[r] // N) % N
        r2[r] = rows_a[r] % N
    na = np.empty((nd, 3), dtype=np.int64)
    nb = np.empty((nd, 3), dtype=np.int64)
    wa = np.empty((nd, S))
    wb = np.empty((nd, S))
    cs = np.empty(nd)
    bw = np.empty(nd)
    sa = np.empty(nd, dtype=np.int64)
    sb = np.empty(nd, dtype=np.int64)
    off = block_offsets(N, p)
    for d0 in range(-(N - 1), N):
        for d1 in range(-(N - 1), N):
            for d2 in range(-(N - 1), N):
                u2 = (d0 * d0 + d1 * d1 + d2 * d2) * h * h
                if u2 == 0.0 or u2 > umax2:
                    continue
                offset_geometry(d0, d1, d2, ca, cb, dirs, p, na, wa, nb, wb, cs)
                kin = kin_coeff * math.sqrt(u2) ** gamma
                for q in range(nd):
                    bw[q] = kin * dir_w[q] * _bfun(cs[q], b_form, C_b)
                    sa[q] = (na[q, 0] * N + na[q, 1]) * N + na[q, 2]
                    sb[q] = (nb[q, 0] * N + nb[q, 1]) * N + nb[q, 2]
                dj = (d0 * N + d1) * N + d2
                for r in range(nr):
                    i0 = r0[r]
                    i1 = r1[r]
                    i2 = r2[r]
                    j0 = i0 + d0
                    j1 = i1 + d1
                    j2 = i2 + d2
                    if j0 < 0 or j0 >= N or j1 < 0 or j1 >= N or j2 < 0 or j2 >= N:
                        continue
                    i = rows_a[r]
                    j = i + dj
                    rj = idx_b[j]
                    if rj < 0:
                        continue
                    base = mu_b[j] * sq_a[i]
                    if base <= thr:
                        continue
                    ri = idx_a[i]
                    acc_nu = 0.0
                    acc_l = 0.0
                    for q in range(nd):
                        W = bw[q]
                        if W == 0.0:
                            continue
                        c0 = i0 + na[q, 0]
                        c1 = i1 + na[q, 1]
                        c2 = i2 + na[q, 2]
                        if c0 < p or c0 > hi or c1 < p or c1 > hi or c2 < p or c2 > hi:
                            continue
                        c0 = j0 + nb[q, 0]
                        c1 = j1 + nb[q, 1]
                        c2 = j2 + nb[q, 2]
                        if c0 < p or c0 > hi or c1 < p or c1 > hi or c2 < p or c2 > hi:
                            continue
                        acc_nu += W
                        C = W * base
                        ka = i + sa[q]
                        kb = j + sb[q]
                        for c in range(S):
                            n = ka + off[c]
                            col = idx_a[n]
                            if col >= 0:
                                L[ri, col] -= C * wa[q, c] * isq_a[n]
                            n = kb + off[c]
                            col = idx_b[n]
                            if col >= 0:
                                L[ri, col] -= C * wb[q, c] * isq_b[n]
                    nu[ri] += acc_nu * mu_b[j]
                    L[ri, rj] += acc_nu * sq_a[i] * sq_b[j]


@njit(cache=True)
def symmetrize_inplace(L, block):
    """L <- (L + L^T)/2 blockwise; returns ||L - L^T||_F and ||L||_F before."""
    n = L.shape[0]
    dif = 0.0
    tot = 0.0
    for I in range(0, n, block):
        for J in range(I, n, block):
            for i in range(I, min(I + block, n)):
                j0 = J if J > I else i
                for j in range(j0, min(J + block, n)):
                    a = L[i, j]
                    b = L[j, i]
                    if i == j:
                        tot += a * a
                        continue
                    dif += 2.0 * (a - b) * (a - b)
                    tot += a * a + b * b
                    m = 0.5 * (a + b)
                    L[i, j] = m
                    L[j, i] = m
    return math.sqrt(dif), math.sqrt(tot)

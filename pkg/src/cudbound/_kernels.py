"""Compiled branch-and-bound for replicates with a full-rank weighted design.

This mirrors :func:`cudbound.cud.branch_and_bound` step for step (same
bounds, same order, same inheritance rules) so the two can be checked
against each other; only the bookkeeping differs (flat node pools instead
of objects).
"""

import heapq

import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps


@njit(cache=True)
def _ls_passive(M, rhs, P):
    # Householder least squares on the passive columns; falls back to the
    # SVD solver when the passive columns are numerically dependent
    m, k = M.shape
    idx = np.flatnonzero(P)
    r = idx.size
    z = np.zeros(k)
    if r == 0:
        return z
    R = np.empty((m, r))
    for a in range(r):
        R[:, a] = M[:, idx[a]]
    q = rhs.copy()
    scale = 0.0
    for a in range(r):
        for i in range(m):
            if abs(R[i, a]) > scale:
                scale = abs(R[i, a])
    dependent = r > m
    if not dependent:
        for a in range(r):
            nrm = 0.0
            for i in range(a, m):
                nrm += R[i, a] * R[i, a]
            nrm = np.sqrt(nrm)
            if nrm <= 1e-13 * max(scale, 1e-300):
                dependent = True
                break
            alpha = -nrm if R[a, a] >= 0 else nrm
            v = R[a:, a].copy()
            v[0] -= alpha
            vv = (v * v).sum()
            if vv > 0.0:
                for col in range(a, r):
                    t = 2.0 * (v @ R[a:, col]) / vv
                    R[a:, col] -= t * v
                t = 2.0 * (v @ q[a:]) / vv
                q[a:] -= t * v
            R[a, a] = alpha
    if dependent:
        sub = np.empty((m, r))
        for a in range(r):
            sub[:, a] = M[:, idx[a]]
        sol = np.linalg.lstsq(sub, rhs)[0]
    else:
        sol = np.empty(r)
        for a in range(r - 1, -1, -1):
            acc = q[a]
            for col in range(a + 1, r):
                acc -= R[a, col] * sol[col]
            sol[a] = acc / R[a, a]
    for a in range(r):
        z[idx[a]] = sol[a]
    return z


@njit(cache=True)
def nnls_kernel(M, rhs, warm):
    """Lawson-Hanson NNLS; ``warm`` is a boolean start set (may be all False)."""
    m, k = M.shape
    x = np.zeros(k)
    P = np.zeros(k, dtype=np.bool_)
    if k == 0:
        return x, P
    colmax = 1.0
    for j in range(k):
        s = np.abs(M[:, j]).sum()
        if s > colmax:
            colmax = s
    tol = 10.0 * _EPS * max(m, k) * colmax
    if warm.any():
        z = _ls_passive(M, rhs, warm)
        ok = True
        for j in range(k):
            if warm[j] and z[j] <= tol:
                ok = False
                break
        if ok:
            P[:] = warm
            x = z
    banned = np.zeros(k, dtype=np.bool_)
    for _ in range(3 * k + 30):
        w = M.T @ (rhs - M @ x)
        j = -1
        best = tol
        for i in range(k):
            if not P[i] and not banned[i] and w[i] > best:
                best = w[i]
                j = i
        if j < 0:
            break
        Pt = P.copy()
        Pt[j] = True
        z = _ls_passive(M, rhs, Pt)
        if z[j] <= tol:
            banned[j] = True
            continue
        banned[:] = False
        P = Pt
        for _inner in range(3 * k + 3):
            if not P.any():
                x = np.zeros(k)
                break
            z = _ls_passive(M, rhs, P)
            anybad = False
            alpha = 1.0
            for i in range(k):
                if P[i] and z[i] <= tol:
                    anybad = True
                    r = x[i] / max(x[i] - z[i], 1e-300)
                    if r < alpha:
                        alpha = r
            if not anybad:
                x = z
                break
            x = x + alpha * (z - x)
            for i in range(k):
                if not (P[i] and x[i] > tol):
                    P[i] = False
                    x[i] = 0.0
    return x, P


@njit(cache=True)
def interior_kernel(G, max_norm):
    """Least-distance interior direction of ``{G x >= 0}``; ``ok`` False when empty."""
    m, p = G.shape
    x = np.zeros(p)
    if m == 0:
        x[0] = 1.0
        return x, True
    U = np.empty((m, p))
    for i in range(m):
        nrm = np.sqrt((G[i] * G[i]).sum())
        if nrm == 0.0:
            return x, False
        U[i] = G[i] / nrm
    E = np.empty((p + 1, m))
    E[:p] = U.T
    E[p] = 1.0
    f = np.zeros(p + 1)
    f[p] = 1.0
    mu, _ = nnls_kernel(E, f, np.zeros(m, dtype=np.bool_))
    r = E @ mu - f
    if abs(r[p]) < 1e-14:
        return x, False
    x = -r[:p] / r[p]
    nrm = np.sqrt((x * x).sum())
    if not np.isfinite(nrm) or nrm > max_norm:
        return x, False
    if (U @ x).min() <= 0.5:
        return x, False
    return x, True


@njit(cache=True)
def _objective(beta, X, y, phi, A, b, loss_hat, alpha_n):
    n = X.shape[0]
    s = 0.0
    for i in range(n):
        pred = 1 if X[i] @ beta >= 0 else -1
        if pred != y[i]:
            s += phi[i] - 1.0
    r = A @ beta - b
    v = (r * r).sum()
    return abs(s) / n * min(alpha_n * (loss_hat - v) + 1.0, 1.0)


@njit(cache=True)
def _bound(F, P, N, v, n, loss_hat, alpha_n):
    gp = min(alpha_n * (loss_hat - v) + 1.0, 1.0)
    if gp < 0.0:
        gp = 0.0
    return max(F + P, -(F + N)) / n * gp


@njit(cache=True)
def _admissible(beta, rows, pts_all):
    for i in range(rows.shape[0]):
        if rows[i] @ beta <= 0.0:
            return False
    for i in range(pts_all.shape[0]):
        if pts_all[i] @ beta == 0.0:
            return False
    return True


@njit(cache=True)
def _grow2(a, cap):
    out = np.zeros((cap, a.shape[1]), dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def _grow1(a, cap):
    out = np.zeros(cap, dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@njit(cache=True)
def bnb_kernel(pts, Ex, flip_pos, flip_neg, pos_mass, neg_mass, pts_all,
               X, y, phi, A, b, c, Rinv, const, value_free, beta_free, interior0,
               loss_hat, alpha_n, F0, incumbent, prune, max_nodes, max_norm):
    n = X.shape[0]
    K, p = pts.shape
    P0 = pos_mass.sum()
    N0 = neg_mass.sum()
    root_u = _bound(F0, P0, N0, value_free, n, loss_hat, alpha_n)
    if K == 0:
        return max(incumbent, root_u), True, 1

    cap = 256
    depth = np.zeros(cap, dtype=np.int64)
    Fs = np.zeros(cap)
    Ps = np.zeros(cap)
    Ns = np.zeros(cap)
    vals = np.zeros(cap)
    mins = np.zeros((cap, p))
    ints = np.zeros((cap, p))
    pas = np.zeros((cap, K), dtype=np.bool_)
    sgn = np.zeros((cap, K))

    Fs[0] = F0
    Ps[0] = P0
    Ns[0] = N0
    vals[0] = value_free
    mins[0] = beta_free
    ints[0] = interior0
    count = 1

    heap = [(-root_u, 0, 0)]
    tick = 1
    n_nodes = 0
    while len(heap) > 0:
        item = heapq.heappop(heap)
        u = -item[0]
        nd = item[2]
        if prune and u <= incumbent:
            break
        n_nodes += 1
        if n_nodes > max_nodes:
            return max(incumbent, u), False, n_nodes
        dep = depth[nd]
        x = pts[dep]
        ex = Ex[dep]
        for si in range(2):
            s = 1.0 if si == 0 else -1.0
            k = dep + 1
            rows = np.empty((k, p))
            E = np.empty((k, p))
            for j in range(dep):
                rows[j] = sgn[nd, j] * pts[j]
                E[j] = sgn[nd, j] * Ex[j]
            rows[dep] = s * x
            E[dep] = s * ex
            if s * (x @ mins[nd]) >= 0.0:
                value = vals[nd]
                beta = mins[nd].copy()
                passive = pas[nd, :k].copy()
                passive[dep] = False
            else:
                warm = pas[nd, :k].copy()
                warm[dep] = True
                ET = np.ascontiguousarray(E.T)
                mu, passive = nnls_kernel(ET, -c, warm)
                shift = ET @ mu
                value = const + (shift * shift).sum()
                beta = Rinv @ (c + shift)
            contrib = flip_pos[dep] if s > 0 else flip_neg[dep]
            cF = Fs[nd] + contrib
            cP = Ps[nd] - pos_mass[dep]
            cN = Ns[nd] - neg_mass[dep]
            cu = _bound(cF, cP, cN, value, n, loss_hat, alpha_n)
            if prune and cu <= incumbent:
                continue
            interior = ints[nd].copy()
            row = rows[dep]
            if not (row @ interior > 1e-12 * np.sqrt((row * row).sum()) * np.sqrt((interior * interior).sum())):
                interior, ok = interior_kernel(rows, max_norm)
                if not ok:
                    continue
            # incumbent candidate near the closed-cone minimiser
            cand = beta.copy()
            inside = True
            for j in range(k):
                if rows[j] @ cand <= 0.0:
                    inside = False
                    break
            if not inside:
                scale = max(1.0, np.sqrt((beta * beta).sum())) / max(np.sqrt((interior * interior).sum()), 1e-300)
                for eta in (1e-7, 1e-5, 1e-3):
                    cand = beta + eta * scale * interior
                    inside = True
                    for j in range(k):
                        if rows[j] @ cand <= 0.0:
                            inside = False
                            break
                    if inside:
                        break
            if inside and _admissible(cand, rows, pts_all):
                o = _objective(cand, X, y, phi, A, b, loss_hat, alpha_n)
                if o > incumbent:
                    incumbent = o
            if k == K:
                if cu > incumbent:
                    incumbent = cu
                continue
            if count == cap:
                cap *= 2
                depth = _grow1(depth, cap)
                Fs = _grow1(Fs, cap)
                Ps = _grow1(Ps, cap)
                Ns = _grow1(Ns, cap)
                vals = _grow1(vals, cap)
                mins = _grow2(mins, cap)
                ints = _grow2(ints, cap)
                pas = _grow2(pas, cap)
                sgn = _grow2(sgn, cap)
            depth[count] = k
            Fs[count] = cF
            Ps[count] = cP
            Ns[count] = cN
            vals[count] = value
            mins[count] = beta
            ints[count] = interior
            pas[count, :k] = passive
            sgn[count, :dep] = sgn[nd, :dep]
            sgn[count, dep] = s
            heapq.heappush(heap, (-cu, tick, count))
            tick += 1
            count += 1
    return incumbent, True, n_nodes

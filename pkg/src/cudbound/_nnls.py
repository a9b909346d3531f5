"""Lawson-Hanson nonnegative least squares for small dense problems.

``scipy.optimize.nnls`` in some SciPy releases stops at non-optimal points on
small ill-conditioned inputs, so the cone solvers use this implementation.
It accepts a warm-start passive set, which branch-and-bound children inherit
from their parent.
"""

import numpy as np


def _solve_passive(A, b, P):
    # normal equations lose ~1e-9 in loss units on nearly dependent passive sets
    return np.linalg.lstsq(A[:, P], b, rcond=None)[0]


def nnls(A, b, passive=None, max_iter=None):
    """Return ``(x, passive)`` minimising ``||A x - b||`` subject to ``x >= 0``.

    ``passive`` is an optional boolean mask of columns to start in the free
    set; it is pruned by the usual feasibility back-steps before use.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, k = A.shape
    x = np.zeros(k)
    P = np.zeros(k, dtype=bool)
    if k == 0:
        return x, P
    tol = 10 * np.finfo(float).eps * max(m, k) * max(1.0, float(np.abs(A).sum(axis=0).max()))
    max_iter = max_iter or 3 * k + 30

    def inner(P, x):
        # restore x_P > 0 with x the least-squares solution on P
        for _ in range(3 * k + 3):
            if not P.any():
                return P, np.zeros(k)
            z = np.zeros(k)
            z[P] = _solve_passive(A, b, P)
            bad = P & (z <= tol)
            if not bad.any():
                return P, z
            ratio = x[bad] / np.maximum(x[bad] - z[bad], 1e-300)
            alpha = min(1.0, float(ratio.min()))
            x = x + alpha * (z - x)
            P = P & (x > tol)
            x[~P] = 0.0
        return P, np.maximum(x, 0.0)

    if passive is not None and np.any(passive):
        P = np.zeros(k, dtype=bool)
        P[: len(passive)] = passive[:k]
        # start from the least-squares point on the warm set, backing off if it is infeasible
        z = np.zeros(k)
        z[P] = _solve_passive(A, b, P)
        if np.all(z[P] > tol):
            x = z
        else:
            P = np.zeros(k, dtype=bool)
            x = np.zeros(k)

    banned = np.zeros(k, dtype=bool)
    for _ in range(max_iter):
        w = A.T @ (b - A @ x)
        cand = ~P & ~banned
        if not cand.any():
            break
        wc = np.where(cand, w, -np.inf)
        j = int(np.argmax(wc))
        if wc[j] <= tol:
            break
        P_try = P.copy()
        P_try[j] = True
        z = np.zeros(k)
        z[P_try] = _solve_passive(A, b, P_try)
        if z[j] <= tol:
            # numerically dependent column: adding it cannot help
            banned[j] = True
            continue
        banned[:] = False
        P, x = inner(P_try, x)
    return x, P

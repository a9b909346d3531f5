"""Weighted least squares over a polyhedral cone ``{beta : s_j (x_j . beta) >= 0}``.

Two exact solvers are provided.

``projection``
    When the weighted design ``A`` has full column rank, write
    ``||A beta - b||^2 = ||R beta - c||^2 + const`` with ``A = QR`` and
    ``c = Q^T b``. In ``z = R beta`` the cone becomes ``{z : E z >= 0}`` with
    ``E = G R^{-1}``, and the minimiser is the Euclidean projection of ``c``.
    By Moreau's decomposition the projection onto the polar cone
    ``{-E^T mu : mu >= 0}`` is a nonnegative least-squares problem, so one
    NNLS solve gives the answer.
``active_set``
    Primal active-set iterations on ``beta`` with minimum-norm least-squares
    subproblems. Handles rank-deficient designs (the infimum of a bounded
    quadratic on a polyhedron is always attained).

Strict feasibility uses the least-distance program ``min ||x|| s.t. G x >= 1``,
also solved by NNLS.
"""

from dataclasses import dataclass

import numpy as np

from ._nnls import nnls
from ._validation import check_signed_labels, check_weights

DEFAULT_TOL = 1e-8
# angular width below which a cone is treated as having empty interior
MAX_INTERIOR_NORM = 1e8


class ConeSolverError(RuntimeError):
    """Iteration limit hit; ``lower`` and ``upper`` bracket the infimum."""

    def __init__(self, message, lower, upper, beta):
        super().__init__(f"{message} (infimum in [{lower:.6g}, {upper:.6g}])")
        self.lower = lower
        self.upper = upper
        self.beta = beta


@dataclass(frozen=True, eq=False)
class SignConstraints:
    """Constraints ``signs[j] * (points[j] . beta) >= 0``."""

    points: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.points, dtype=np.float64)
        s = np.asarray(self.signs, dtype=np.float64).reshape(-1)
        if P.size == 0:
            P = P.reshape(0, P.shape[-1] if P.ndim == 2 else 0)
        if P.ndim != 2 or P.shape[0] != s.shape[0]:
            raise ValueError("points must be m x p with one sign per row")
        if not np.all((s == 1) | (s == -1)):
            raise ValueError("signs must be +1 or -1")
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "signs", s)

    @classmethod
    def empty(cls, p):
        return cls(np.zeros((0, p)), np.zeros(0))

    def __len__(self):
        return self.signs.shape[0]

    @property
    def rows(self):
        return self.signs[:, None] * self.points

    def add(self, point, sign):
        return SignConstraints(np.vstack([self.points, point]), np.append(self.signs, sign))

    def slacks(self, beta):
        return self.rows @ np.asarray(beta, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class ConeMinResult:
    value: float
    minimizer: np.ndarray
    active_set: tuple


def _unit_rows(G):
    norms = np.linalg.norm(G, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return G / norms[:, None], norms


def interior_direction(rows, max_norm=MAX_INTERIOR_NORM):
    """Least-norm ``x`` with ``u_j . x >= 1`` for the unit-normalised rows ``u_j``.

    Returns ``None`` when the cone ``{G x >= 0}`` has (numerically) empty
    interior. The returned ``x`` is strictly inside the cone.
    """
    G = np.asarray(rows, dtype=np.float64)
    p = G.shape[1]
    if G.shape[0] == 0:
        return np.eye(p)[0]
    U, norms = _unit_rows(G)
    if np.any(norms == 0):
        return None
    E = np.vstack([U.T, np.ones(U.shape[0])])
    f = np.zeros(p + 1)
    f[-1] = 1.0
    mu, _ = nnls(E, f)
    r = E @ mu - f
    if abs(r[-1]) < 1e-14:
        return None
    x = -r[:p] / r[-1]
    norm = np.linalg.norm(x)
    if not np.isfinite(norm) or norm > max_norm or np.min(U @ x) <= 0.5:
        return None
    return x


def strictly_feasible_point(constraints, reference):
    """A point with every slack strictly positive, found by pushing ``reference`` inward.

    Returns ``reference`` itself when it is already strictly feasible and
    ``None`` when the cone has no interior.
    """
    ref = np.asarray(reference, dtype=np.float64)
    if len(constraints) == 0:
        return ref.copy()
    U, norms = _unit_rows(constraints.rows)
    if np.all(norms > 0):
        s = U @ ref
        if np.all(s > 0):
            return ref.copy()
    x = interior_direction(constraints.rows)
    if x is None:
        return None
    t = max(0.0, float(np.max(-(U @ ref)))) + 1e-7 * max(1.0, float(np.linalg.norm(ref)))
    cand = ref + t * x
    if np.all(constraints.rows @ cand > 0):
        return cand
    return x if np.all(constraints.rows @ x > 0) else None


def _lstsq_floor(M, rhs, floor):
    # minimum-norm least squares dropping singular values <= floor (absolute, not
    # relative: a reduced design whose only column lies in the null space of A
    # must give a zero step, not a roundoff-sized column inverted)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > floor
    return Vt[keep].T @ ((U[:, keep].T @ rhs) / s[keep])


class LeastSquaresCone:
    """The objective ``(1/n) sum_i w_i (x_i . beta - y_i)^2`` prepared for repeated cone solves."""

    def __init__(self, design, labels, weights=None):
        X = np.asarray(design, dtype=np.float64)
        n, p = X.shape
        y = check_signed_labels(labels).astype(np.float64)
        w = check_weights(weights, n)
        sw = np.sqrt(w / n)
        self.A = X * sw[:, None]
        self.b = y * sw
        self.p = p
        self.bb = float(self.b @ self.b)
        s = np.linalg.svd(self.A, compute_uv=False) if n else np.zeros(0)
        self.full_rank = n >= p and s.size == p and s[-1] > s[0] * 1e-10
        self.norm = float(s[0]) if s.size else 0.0
        if self.full_rank:
            Q, R = np.linalg.qr(self.A)
            self.R = R
            self.Rinv = np.linalg.inv(R)
            self.c = Q.T @ self.b
            self.const = max(self.bb - float(self.c @ self.c), 0.0)
            self.beta_free = self.Rinv @ self.c
        else:
            self.beta_free = np.linalg.lstsq(self.A, self.b, rcond=None)[0]
        self.value_free = self.loss(self.beta_free)

    def loss(self, beta):
        r = self.A @ beta - self.b
        return float(r @ r)

    def gradient(self, beta):
        return 2.0 * self.A.T @ (self.A @ beta - self.b)

    def transform_rows(self, rows):
        """Rows of ``E = G R^{-1}`` (projection coordinates)."""
        return np.asarray(rows, dtype=np.float64) @ self.Rinv

    def hyperplane_minima(self, points):
        """Minimum loss on each hyperplane ``x_j . beta = 0`` (full-rank only)."""
        E = self.transform_rows(points)
        return self.const + (E @ self.c) ** 2 / np.einsum("ij,ij->i", E, E)

    def project(self, E, passive=None):
        """Solve over ``{E z >= 0}`` given transformed rows.

        Returns ``(value, beta, passive)``; ``passive`` marks the constraints
        carrying positive multipliers and can warm-start a superset problem.
        """
        if E.shape[0] == 0:
            return self.value_free, self.beta_free, np.zeros(0, dtype=bool)
        mu, passive = nnls(E.T, -self.c, passive=passive)
        shift = E.T @ mu
        z = self.c + shift
        return self.const + float(shift @ shift), self.Rinv @ z, passive

    def active_set(self, rows, beta0=None, tol=DEFAULT_TOL, max_iter=None):
        """Primal active-set solve over ``{rows @ beta >= 0}``; returns ``(value, beta)``."""
        G = np.asarray(rows, dtype=np.float64)
        m, p = G.shape
        if m == 0:
            return self.value_free, self.beta_free
        U, norms = _unit_rows(G)
        keep = norms > 0
        U = np.where(keep[:, None], U, 0.0)
        beta = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=np.float64).copy()
        if np.any(U @ beta < -1e-12):
            beta = np.zeros(p)
        if np.all(U @ self.beta_free >= 0):
            return self.value_free, self.beta_free
        work = []
        max_iter = max_iter or 20 * (m + p) + 50
        scale = 1.0 + np.sqrt(self.bb)
        for _ in range(max_iter):
            if work:
                _, sv, vt = np.linalg.svd(U[work], full_matrices=True)
                rank = int(np.sum(sv > 1e-12))
                Z = vt[rank:].T
            else:
                Z = np.eye(p)
            if Z.shape[1]:
                AZ = self.A @ Z
                step = Z @ _lstsq_floor(AZ, self.b - self.A @ beta, 1e-10 * self.norm)
            else:
                step = np.zeros(p)
            if np.linalg.norm(self.A @ step) <= 1e-13 * scale and np.linalg.norm(step) <= 1e-10 * (1 + np.linalg.norm(beta)):
                if not work:
                    return self.loss(beta), beta
                grad = self.gradient(beta)
                lam = np.linalg.lstsq(U[work].T, grad, rcond=None)[0]
                j = int(np.argmin(lam))
                if lam[j] >= -tol * scale:
                    return self.loss(beta), beta
                work.pop(j)
                continue
            Us = U @ step
            slack = np.maximum(U @ beta, 0.0)
            alpha, block = 1.0, -1
            for i in range(m):
                if i in work or not keep[i] or Us[i] >= -1e-15:
                    continue
                a = slack[i] / -Us[i]
                if a < alpha:
                    alpha, block = a, i
            beta = beta + alpha * step
            if block >= 0:
                work.append(block)
        raise ConeSolverError("active-set iteration limit exceeded", 0.0, self.loss(beta), beta)

    def solve(self, rows, method="auto", tol=DEFAULT_TOL):
        rows = np.asarray(rows, dtype=np.float64).reshape(-1, self.p)
        if method == "auto":
            method = "projection" if self.full_rank else "active_set"
        if method == "projection":
            if not self.full_rank:
                raise ValueError("projection solver needs a full-column-rank weighted design")
            return self.project(self.transform_rows(rows))[:2]
        if method == "active_set":
            return self.active_set(rows, tol=tol)
        raise ValueError(f"unknown method {method!r}")


def min_loss_over_cone(design, labels, weights, constraints, tol=DEFAULT_TOL, method="auto"):
    """Infimum of the mean weighted squared error over a closed sign cone."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    problem = LeastSquaresCone(design, labels, weights)
    if not isinstance(constraints, SignConstraints):
        constraints = SignConstraints(*constraints)
    value, beta = problem.solve(constraints.rows, method=method, tol=tol)
    slack = constraints.slacks(beta)
    scale = np.linalg.norm(constraints.points, axis=1) * max(1.0, float(np.linalg.norm(beta)))
    active = tuple(int(j) for j in np.flatnonzero(slack <= 1e-9 * scale))
    return ConeMinResult(value=value, minimizer=beta, active_set=active)

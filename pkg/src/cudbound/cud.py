"""The CUD bound: per-replicate suprema, their bootstrap quantile and the interval.

For a bootstrap replicate with copy counts ``phi`` the replicate statistic is

    Q_b = sup_beta  dev_b(beta) * g(alpha_n * (L_b(beta_hat) - L_b(beta)))

with ``dev_b(beta) = (1/n) |sum_i (phi_i - 1) z_i(beta)|`` and ``L_b`` the
multiplicity-weighted mean squared error. ``dev_b`` only depends on the signs
of ``x_j . beta`` at the distinct off-support points, so coefficient space is
cut into sign cells; inside a cell the supremum is the cell's deviation times
``g`` at the infimum of ``L_b`` over the cell. A best-first branch-and-bound
decides one point per tree level and prunes with an upper bound that assumes
the worst case on the undecided points.

Supremum semantics
------------------
Cells with empty interior (lower-dimensional sign patterns) carry zero
Lebesgue measure and are ignored, so ``Q_b`` is the essential supremum.
For a cell with nonempty interior the infimum over the open cell equals the
infimum over its closure, which is what the cone solvers return.
"""

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._seeding import make_rng
from ._validation import ParameterError, check_delta, check_positive, check_positive_int
from .bootstrap import Multiplicities, deviation, draw_multiplicities, off_support
from .interval import ConfidenceInterval
from .model import BasisExpansion, empirical_error, fit_least_squares, predict_signs
from .region_opt import (
    DEFAULT_TOL,
    MAX_INTERIOR_NORM,
    ConeSolverError,
    LeastSquaresCone,
    interior_direction,
)

NODE_ORDERS = ("weight", "index")
ENGINES = ("auto", "compiled", "python")
BRUTE_FORCE_MAX_D = 20


def g(x):
    """``min(x + 1, 1)``."""
    if np.ndim(x):
        return np.minimum(np.asarray(x, dtype=np.float64) + 1.0, 1.0)
    return min(float(x) + 1.0, 1.0)


@dataclass(frozen=True)
class CudConfig:
    """Settings for :func:`cud_interval`.

    Parameters
    ----------
    alpha_n : float or None
        Scale inside ``g``; ``None`` means the training-set size ``n``.
    n_bootstrap : int
        Number of bootstrap replicates ``B``.
    delta : float
        One minus the nominal coverage, in (0, 1].
    tol : float
        Tolerance passed to the active-set cone solver.
    node_order : {"weight", "index"}
        ``weight`` decides heavy off-support points first; ``index`` keeps
        sample order.
    max_nodes : int
        Node budget per replicate. On exhaustion the replicate returns the
        current global upper bound and the interval is flagged ``inexact``.
    prune : bool
        ``False`` walks every nonempty cell (no bound pruning, no screening).
    engine : {"auto", "compiled", "python"}
        Search implementation. Rank-deficient replicates always use the
        Python loop with the active-set solver.
    """

    alpha_n: float = None
    n_bootstrap: int = 500
    delta: float = 0.05
    tol: float = DEFAULT_TOL
    node_order: str = "weight"
    max_nodes: int = 200_000
    prune: bool = True
    engine: str = "auto"

    def __post_init__(self):
        if self.alpha_n is not None:
            check_positive(self.alpha_n, "alpha_n")
        check_positive_int(self.n_bootstrap, "n_bootstrap")
        check_delta(self.delta)
        check_positive(self.tol, "tol")
        check_positive_int(self.max_nodes, "max_nodes")
        if self.node_order not in NODE_ORDERS:
            raise ParameterError(f"node_order must be one of {NODE_ORDERS}, got {self.node_order!r}")
        if self.engine not in ENGINES:
            raise ParameterError(f"engine must be one of {ENGINES}, got {self.engine!r}")

    def resolve_alpha(self, n):
        return float(n) if self.alpha_n is None else float(self.alpha_n)


class ReplicateProblem:
    """One replicate prepared for the supremum search.

    Attributes
    ----------
    points : ndarray, shape (d, p)
        Distinct expanded rows among the off-support indices.
    flip_pos, flip_neg : ndarray, shape (d,)
        Contribution ``sum (phi_i - 1) z_i`` of each point's indices when the
        point is classified ``+1`` or ``-1``.
    pos_mass, neg_mass : ndarray, shape (d,)
        Largest possible positive and negative contribution of each point.
    """

    def __init__(self, design, labels, beta_hat, m, alpha_n=None):
        X = np.asarray(design, dtype=np.float64)
        y = np.asarray(labels)
        if not isinstance(m, Multiplicities):
            m = Multiplicities(m)
        if X.ndim != 2 or X.shape[0] != m.n or y.shape != (m.n,):
            raise ValueError("design, labels and multiplicities disagree on n")
        self.design, self.labels, self.m = X, y, m
        self.n = m.n
        self.beta_hat = np.asarray(beta_hat, dtype=np.float64)
        self.alpha_n = float(self.n if alpha_n is None else alpha_n)
        self.cone = LeastSquaresCone(X, y, m.phi)
        self.loss_hat = self.cone.loss(self.beta_hat)
        off = off_support(m, X)
        self.d = off.d
        p = X.shape[1]
        self.points = np.array(off.points).reshape(self.d, p)
        self.flip_pos = np.zeros(self.d)
        self.flip_neg = np.zeros(self.d)
        self.pos_mass = np.zeros(self.d)
        self.neg_mass = np.zeros(self.d)
        for j, grp in enumerate(off.groups):
            net = off.net[grp].astype(np.float64)
            lab = y[off.indices[grp]]
            # classified +1, the -1 labels are errors, and vice versa
            self.flip_pos[j] = net[lab == -1].sum()
            self.flip_neg[j] = net[lab == 1].sum()
            self.pos_mass[j] = max(self.flip_pos[j], self.flip_neg[j], 0.0)
            self.neg_mass[j] = min(self.flip_pos[j], self.flip_neg[j], 0.0)
        self.weight = np.array([np.abs(off.net[grp]).sum() for grp in off.groups], dtype=np.float64)

    def g_term(self, value):
        return g(self.alpha_n * (self.loss_hat - value))

    def objective(self, beta):
        """Exact ``dev_b(beta) * g(alpha_n (L_b(beta_hat) - L_b(beta)))``."""
        z = predict_signs(self.design, beta) != self.labels
        return deviation(self.m, z) * self.g_term(self.cone.loss(beta))

    def generic(self, beta):
        """True when no off-support point lies on the decision boundary."""
        return self.d == 0 or bool(np.all(self.points @ beta != 0))


@dataclass(eq=False)
class SignNode:
    """Branch-and-bound node: the first ``depth`` points (in search order) have fixed signs.

    ``rows`` holds the signed points ``s_j x_j`` of the node's cone, ``F`` the
    contribution already fixed, and ``P``/``N`` the largest positive and
    negative contribution still available from undecided points.
    """

    depth: int
    rows: np.ndarray
    F: float
    P: float
    N: float
    value: float = math.inf
    minimizer: np.ndarray = None
    interior: np.ndarray = None
    passive: np.ndarray = None
    E: np.ndarray = field(default=None, repr=False)
    signs: tuple = ()


def node_upper_bound(node, loss_inf_over_closure, problem):
    """``(1/n) max(F + P, -(F + N)) * max(0, g(alpha_n (L_b(beta_hat) - v)))``."""
    g_part = max(0.0, problem.g_term(loss_inf_over_closure))
    return max(node.F + node.P, -(node.F + node.N)) / problem.n * g_part


def node_incumbent(node, candidate, problem, incumbent=0.0):
    """Raise ``incumbent`` to the exact objective at ``candidate`` when admissible.

    The candidate must lie strictly inside the node's cone and off every
    off-support decision boundary; otherwise ``incumbent`` is returned as is.
    """
    if candidate is None:
        return incumbent
    candidate = np.asarray(candidate, dtype=np.float64)
    if node.rows.shape[0] and not np.all(node.rows @ candidate > 0):
        return incumbent
    if not problem.generic(candidate):
        return incumbent
    return max(incumbent, problem.objective(candidate))


@dataclass(frozen=True)
class ReplicateResult:
    value: float
    exact: bool
    n_nodes: int


def _push_inside(beta, interior, rows):
    """A point near ``beta`` strictly inside ``{rows @ x > 0}``, or ``None``."""
    if rows.shape[0] == 0 or np.all(rows @ beta > 0):
        return beta
    scale = max(1.0, float(np.linalg.norm(beta))) / max(float(np.linalg.norm(interior)), 1e-300)
    for eta in (1e-7, 1e-5, 1e-3):
        cand = beta + eta * scale * interior
        if np.all(rows @ cand > 0):
            return cand
    return None


def _prepare(problem, cfg):
    """Initial incumbent, search order after screening, and the fixed contribution ``F0``."""
    cone = problem.cone
    incumbent = max(0.0, problem.objective(problem.beta_hat))
    if problem.generic(cone.beta_free):
        incumbent = max(incumbent, problem.objective(cone.beta_free))

    order = np.arange(problem.d)
    if cfg.node_order == "weight":
        order = np.argsort(-problem.weight, kind="stable")

    # points whose whole hyperplane lies where g <= 0 keep the sign they have
    # at the unconstrained minimiser throughout the region that matters
    F0 = 0.0
    if cfg.prune and cone.full_rank:
        level = problem.loss_hat + 1.0 / problem.alpha_n
        screened = cone.hyperplane_minima(problem.points) >= level
        side = problem.points @ cone.beta_free >= 0
        for j in np.flatnonzero(screened):
            F0 += problem.flip_pos[j] if side[j] else problem.flip_neg[j]
        order = order[~screened[order]]
    return incumbent, order, F0


def _root_interior(cone, p):
    return cone.beta_free.copy() if np.any(cone.beta_free) else np.eye(p)[0]


def _compiled_search(problem, cfg, incumbent, order, F0):
    from ._kernels import bnb_kernel

    cone = problem.cone
    pts = np.ascontiguousarray(problem.points[order])
    value, exact, n_nodes = bnb_kernel(
        pts,
        np.ascontiguousarray(cone.transform_rows(pts)),
        problem.flip_pos[order],
        problem.flip_neg[order],
        problem.pos_mass[order],
        problem.neg_mass[order],
        np.ascontiguousarray(problem.points),
        problem.design,
        problem.labels.astype(np.int64),
        problem.m.phi.astype(np.float64),
        cone.A,
        cone.b,
        cone.c,
        cone.Rinv,
        cone.const,
        cone.value_free,
        cone.beta_free,
        _root_interior(cone, pts.shape[1]),
        problem.loss_hat,
        problem.alpha_n,
        F0,
        incumbent,
        cfg.prune,
        cfg.max_nodes,
        MAX_INTERIOR_NORM,
    )
    return ReplicateResult(float(value), bool(exact), int(n_nodes))


def branch_and_bound(problem, cfg):
    """Best-first search for the replicate supremum; returns a :class:`ReplicateResult`.

    ``cfg.engine`` selects the compiled kernel (full-rank designs only) or
    the pure-Python loop; ``auto`` uses the kernel whenever it applies.
    """
    n, d = problem.n, problem.d
    if d == 0:
        return ReplicateResult(0.0, True, 0)
    cone = problem.cone
    p = problem.points.shape[1]
    fast = cone.full_rank
    prune = cfg.prune
    incumbent, order, F0 = _prepare(problem, cfg)
    if fast and cfg.engine in ("auto", "compiled"):
        return _compiled_search(problem, cfg, incumbent, order, F0)

    K = order.size
    P0 = float(problem.pos_mass[order].sum())
    N0 = float(problem.neg_mass[order].sum())

    root = SignNode(
        depth=0,
        rows=np.zeros((0, p)),
        F=F0,
        P=P0,
        N=N0,
        value=cone.value_free,
        minimizer=cone.beta_free,
        interior=_root_interior(cone, p),
        passive=np.zeros(0, dtype=bool),
        E=np.zeros((0, p)),
    )
    root_u = node_upper_bound(root, root.value, problem)
    if K == 0:
        return ReplicateResult(max(incumbent, root_u), True, 1)

    counter = itertools.count()
    heap = [(-root_u, next(counter), root)]
    n_nodes = 0
    while heap:
        neg_u, _, node = heapq.heappop(heap)
        u = -neg_u
        if prune and u <= incumbent:
            break
        n_nodes += 1
        if n_nodes > cfg.max_nodes:
            return ReplicateResult(max(incumbent, u), False, n_nodes)
        t = order[node.depth]
        x = problem.points[t]
        ex = cone.transform_rows(x) if fast else None
        for s in (1.0, -1.0):
            row = s * x
            rows = np.vstack([node.rows, row])
            E = np.vstack([node.E, s * ex]) if fast else None
            if float(row @ node.minimizer) >= 0:
                value, beta = node.value, node.minimizer
                passive = np.append(node.passive, False) if fast else None
            elif fast:
                value, beta, passive = cone.project(E, passive=np.append(node.passive, True))
            else:
                passive = None
                try:
                    value, beta = cone.active_set(rows, beta0=node.minimizer, tol=cfg.tol)
                except ConeSolverError as exc:
                    value, beta = exc.lower, exc.beta
            contrib = problem.flip_pos[t] if s > 0 else problem.flip_neg[t]
            child = SignNode(
                depth=node.depth + 1,
                rows=rows,
                F=node.F + contrib,
                P=node.P - problem.pos_mass[t],
                N=node.N - problem.neg_mass[t],
                value=value,
                minimizer=beta,
                passive=passive,
                E=E,
                signs=node.signs + (int(s),),
            )
            child_u = node_upper_bound(child, value, problem)
            if prune and child_u <= incumbent:
                continue
            interior = node.interior
            if not float(row @ interior) > 1e-12 * np.linalg.norm(row) * np.linalg.norm(interior):
                interior = interior_direction(rows)
                if interior is None:
                    continue
            child.interior = interior
            incumbent = node_incumbent(child, _push_inside(beta, interior, rows), problem, incumbent)
            if child.depth == K:
                # leaf: the bound is the cell's exact value
                incumbent = max(incumbent, child_u)
                continue
            heapq.heappush(heap, (-child_u, next(counter), child))
    return ReplicateResult(incumbent, True, n_nodes)


def solve_replicate(design, labels, beta_hat, m, cfg=None):
    """Run the branch-and-bound and return the full :class:`ReplicateResult`."""
    cfg = cfg or CudConfig()
    problem = ReplicateProblem(design, labels, beta_hat, m, cfg.resolve_alpha(np.shape(design)[0]))
    return branch_and_bound(problem, cfg)


def q_replicate(design, labels, beta_hat, m, cfg=None):
    """Replicate supremum ``Q_b`` (nonnegative)."""
    return solve_replicate(design, labels, beta_hat, m, cfg).value


def _interior_lp(rows):
    # max t s.t. u_j . x >= t, |x|_inf <= 1, t <= 1; interior iff t* > 0
    from scipy.optimize import linprog

    U = rows / np.linalg.norm(rows, axis=1)[:, None]
    m, p = U.shape
    c = np.zeros(p + 1)
    c[-1] = -1.0
    A = np.hstack([-U, np.ones((m, 1))])
    bounds = [(-1.0, 1.0)] * p + [(None, 1.0)]
    res = linprog(c, A_ub=A, b_ub=np.zeros(m), bounds=bounds, method="highs")
    return res.status == 0 and -res.fun > 1e-9


def brute_force_q(design, labels, beta_hat, m, cfg=None, max_d=BRUTE_FORCE_MAX_D):
    """Exhaustive enumeration of all ``2^d`` sign patterns (oracle for small ``d``).

    Each pattern's closed-cone infimum comes from the primal active-set
    solver and interiors are tested by linear programming, so no numerical
    route is shared with :func:`q_replicate`.
    """
    cfg = cfg or CudConfig()
    problem = ReplicateProblem(design, labels, beta_hat, m, cfg.resolve_alpha(np.shape(design)[0]))
    d = problem.d
    if d > max_d:
        raise ValueError(f"brute force needs d <= {max_d} distinct off-support points, got {d}")
    if d == 0:
        return 0.0
    best = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=d):
        s = np.array(signs)
        F = np.where(s > 0, problem.flip_pos, problem.flip_neg).sum()
        C = abs(F) / problem.n
        if C <= best:
            continue
        rows = s[:, None] * problem.points
        value, _ = problem.cone.active_set(rows, tol=cfg.tol)
        cand = C * problem.g_term(value)
        # skipping patterns that cannot raise the maximum leaves it unchanged
        if cand > best and _interior_lp(rows):
            best = cand
    return best


def bootstrap_quantile(values, delta):
    """``k``-th smallest of ``values`` with ``k = ceil((1 - delta) B)``; ``0`` when ``k = 0``."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    check_delta(delta)
    if v.size == 0:
        raise ValueError("need at least one replicate value")
    k = math.ceil((1.0 - delta) * v.size - 1e-9)
    if k <= 0:
        return 0.0
    return float(v[k - 1])


@dataclass(frozen=True)
class CudFit:
    interval: ConfidenceInterval
    replicate_values: np.ndarray
    exact: np.ndarray
    beta_hat: np.ndarray
    training_error: float


def fit_cud(design, labels, cfg=None, seed=None):
    """CUD interval from an already expanded design matrix."""
    cfg = cfg or CudConfig()
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(labels)
    n = X.shape[0]
    beta_hat = fit_least_squares(X, y)
    err = empirical_error(X, y, beta_hat)
    alpha = cfg.resolve_alpha(n)
    values = np.zeros(cfg.n_bootstrap)
    exact = np.ones(cfg.n_bootstrap, dtype=bool)
    for b in range(cfg.n_bootstrap):
        m = draw_multiplicities(n, make_rng(seed, b))
        res = branch_and_bound(ReplicateProblem(X, y, beta_hat, m, alpha), cfg)
        values[b] = res.value
        exact[b] = res.exact
    q = bootstrap_quantile(values, cfg.delta)
    flags = () if exact.all() else ("inexact",)
    interval = ConfidenceInterval.symmetric(err, q, "CUD", 1.0 - cfg.delta, flags)
    return CudFit(interval, values, exact, beta_hat, err)


def cud_interval(data, basis="affine", cfg=None, seed=None):
    """CUD confidence interval for the generalization error of the least-squares sign rule.

    ``basis`` is fitted on ``data.features`` (a fresh copy when a
    :class:`BasisExpansion` instance is passed).
    """
    b = BasisExpansion.from_string(basis).fit(data.features)
    return fit_cud(b.transform(data.features), data.labels, cfg, seed).interval


class CUDInterval(BaseEstimator):
    """Estimator wrapper around :func:`fit_cud`.

    After :meth:`fit`, ``interval_`` holds the confidence interval,
    ``replicate_values_`` the ``B`` replicate suprema and ``coef_`` the
    fitted coefficients.
    """

    def __init__(self, basis="affine", n_bootstrap=500, delta=0.05, alpha_n=None,
                 max_nodes=200_000, prune=True, seed=None):
        self.basis = basis
        self.n_bootstrap = n_bootstrap
        self.delta = delta
        self.alpha_n = alpha_n
        self.max_nodes = max_nodes
        self.prune = prune
        self.seed = seed

    def fit(self, X, y):
        from ._validation import check_design

        X, y = check_design(X, y)
        cfg = CudConfig(alpha_n=self.alpha_n, n_bootstrap=self.n_bootstrap, delta=self.delta,
                        max_nodes=self.max_nodes, prune=self.prune)
        self.basis_ = BasisExpansion.from_string(self.basis).fit(X)
        fit = fit_cud(self.basis_.transform(X), y, cfg, self.seed)
        self.interval_ = fit.interval
        self.replicate_values_ = fit.replicate_values
        self.coef_ = fit.beta_hat
        self.training_error_ = fit.training_error
        return self

"""Competitor confidence sets for the generalization error.

Six constructions, all returning :class:`~cudbound.interval.ConfidenceInterval`:

======  =====================================================================
BS1     percentile interval of out-of-bag errors of bootstrap refits
BS2     bias-corrected percentile interval around the .632 estimate
K       normal approximation with the effective sample size (Kohavi)
Y       k-fold cross-validation mean plus/minus a normal standard error (Yang)
M       Beta posterior with the .632 estimate as pseudo-data (Martin)
L       inverted binomial tail with the effective sample size (Langford)
======  =====================================================================

The numeric cores (``percentile_interval``, ``kohavi_interval`` and so on)
take plain numbers so they can be checked on hand-computed inputs; the
``ci_*`` functions wire them to data.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats
from sklearn.base import BaseEstimator
from sklearn.model_selection import KFold

from ._seeding import derive_seed, make_rng
from ._validation import ParameterError, check_delta, check_positive, check_positive_int, check_probability
from .bootstrap import draw_multiplicities
from .interval import ConfidenceInterval
from .model import BasisExpansion, fit_least_squares, predict_signs

METHODS = ("BS1", "BS2", "K", "Y", "M", "L")
EFFECTIVE_SIZE_RULES = ("expected_unique",)


@dataclass(frozen=True)
class BaselineConfig:
    """Shared settings for the baseline intervals.

    ``n_bootstrap`` drives BS1, BS2 and the .632 estimate used by K, M and L.
    ``prior`` is the Beta prior ``(gamma, lambda)`` of the Bayesian interval.
    """

    delta: float = 0.05
    n_bootstrap: int = 500
    folds: int = 5
    prior: tuple = (1.0, 1.0)
    effective_size: str = "expected_unique"

    def __post_init__(self):
        check_delta(self.delta)
        check_positive_int(self.n_bootstrap, "n_bootstrap")
        check_positive_int(self.folds, "folds", minimum=2)
        if len(self.prior) != 2:
            raise ParameterError(f"prior must be a pair (gamma, lambda), got {self.prior!r}")
        for v in self.prior:
            check_positive(v, "prior parameter")
        if self.effective_size not in EFFECTIVE_SIZE_RULES:
            raise ParameterError(f"effective_size must be one of {EFFECTIVE_SIZE_RULES}")

    @property
    def level(self):
        return 1.0 - self.delta


def effective_sample_size(n):
    """Expected number of distinct points in a size-``n`` resample, ``n (1 - (1 - 1/n)^n)``."""
    n = check_positive_int(n, "n")
    return n * -math.expm1(n * math.log1p(-1.0 / n)) if n > 1 else 1.0


def beta_quantile(a, b, q):
    """``x`` with ``I_x(a, b) = q`` for the regularized incomplete beta ``I``.

    Uses :func:`scipy.special.betaincinv` and polishes with a bracketed root
    search when the residual exceeds ``1e-12``.
    """
    a = check_positive(a, "a")
    b = check_positive(b, "b")
    q = check_probability(q, "q")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    x = float(special.betaincinv(a, b, q))
    if not 0.0 <= x <= 1.0 or abs(special.betainc(a, b, x) - q) > 1e-12:
        x = optimize.brentq(lambda t: special.betainc(a, b, t) - q, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return x


def _z(delta):
    return float(stats.norm.ppf(1.0 - delta / 2.0))


@dataclass(frozen=True)
class PointEstimate632:
    """Efron's .632 estimate ``0.368 * training + 0.632 * leave-one-out bootstrap``."""

    value: float
    training: float
    oob: float

    @classmethod
    def combine(cls, training, oob):
        value = min(max(0.368 * training + 0.632 * oob, 0.0), 1.0)
        return cls(value=value, training=float(training), oob=float(oob))


@dataclass(frozen=True, eq=False)
class _Refits:
    """Misclassification indicators of bootstrap refits on every training point."""

    wrong: np.ndarray  # (B, n) bool
    in_bag: np.ndarray  # (B, n) bool
    training_wrong: np.ndarray  # (n,) bool, original fit

    def oob_errors(self):
        """Per-replicate out-of-bag error; replicates without out-of-bag points are dropped."""
        oob = ~self.in_bag
        counts = oob.sum(axis=1)
        keep = counts > 0
        return (self.wrong & oob).sum(axis=1)[keep] / counts[keep]

    def estimate_632(self):
        oob = ~self.in_bag
        counts = oob.sum(axis=0)
        per_point = np.where(
            counts > 0,
            (self.wrong & oob).sum(axis=0) / np.maximum(counts, 1),
            # never left out: fall back to the point's training indicator
            self.training_wrong,
        )
        return PointEstimate632.combine(self.training_wrong.mean(), per_point.mean())


def _design(data, basis):
    b = BasisExpansion.from_string(basis).fit(data.features)
    return b.transform(data.features), np.asarray(data.labels)


def _refits(X, y, n_bootstrap, seed):
    n = X.shape[0]
    beta = fit_least_squares(X, y)
    wrong = np.empty((n_bootstrap, n), dtype=bool)
    in_bag = np.empty((n_bootstrap, n), dtype=bool)
    for b in range(n_bootstrap):
        phi = draw_multiplicities(n, make_rng(seed, b)).phi
        beta_b = fit_least_squares(X, y, phi)
        wrong[b] = predict_signs(X, beta_b) != y
        in_bag[b] = phi > 0
    return _Refits(wrong, in_bag, predict_signs(X, beta) != y)


def estimate_632(data, basis="affine", cfg=None, seed=None):
    """.632 bootstrap estimate of the error of the least-squares sign rule."""
    cfg = cfg or BaselineConfig()
    X, y = _design(data, basis)
    return _refits(X, y, cfg.n_bootstrap, seed).estimate_632()


# numeric cores ---------------------------------------------------------------


def percentile_interval(estimates, delta, method="BS1"):
    """``(delta/2, 1 - delta/2)`` empirical quantiles (linear interpolation), centred at the median."""
    e = np.asarray(estimates, dtype=np.float64)
    delta = check_delta(delta)
    if e.size == 0:
        return ConfidenceInterval.from_bounds(0.0, 1.0, 0.5, method, 1 - delta, ("no_replicates",))
    lo, hi = np.quantile(e, [delta / 2, 1 - delta / 2])
    return ConfidenceInterval.from_bounds(lo, hi, np.median(e), method, 1 - delta)


def bc_percentile_interval(estimates, point, delta):
    """Bias-corrected percentile interval.

    ``z0 = Phi^{-1}(F)`` where ``F`` is the fraction of estimates below
    ``point``, ties counting one half. Endpoints are the empirical quantiles
    at ``Phi(2 z0 -+ z_{1-delta/2})``. When ``F`` is 0 or 1 the plain
    percentile interval is returned, flagged ``bc_fallback``.
    """
    e = np.asarray(estimates, dtype=np.float64)
    delta = check_delta(delta)
    if e.size == 0:
        return ConfidenceInterval.from_bounds(0.0, 1.0, point, "BS2", 1 - delta, ("no_replicates",))
    frac = (np.sum(e < point) + 0.5 * np.sum(e == point)) / e.size
    if frac <= 0.0 or frac >= 1.0:
        base = percentile_interval(e, delta)
        return ConfidenceInterval.from_bounds(base.lower, base.upper, point, "BS2", 1 - delta, ("bc_fallback",))
    z0 = float(stats.norm.ppf(frac))
    z = _z(delta)
    qlo, qhi = stats.norm.cdf([2 * z0 - z, 2 * z0 + z])
    lo, hi = np.quantile(e, [qlo, qhi])
    return ConfidenceInterval.from_bounds(lo, hi, point, "BS2", 1 - delta)


def kohavi_interval(xi, n_star, delta):
    """``xi -+ z_{1-delta/2} sqrt(xi (1 - xi) / n*)``; zero variance widens to ``1/(2 n*)``."""
    delta = check_delta(delta)
    half = _z(delta) * math.sqrt(xi * (1.0 - xi) / n_star)
    flags = ()
    if half == 0.0:
        half, flags = 1.0 / (2.0 * n_star), ("variance_floor",)
    return ConfidenceInterval.symmetric(xi, half, "K", 1 - delta, flags)


def cv_normal_interval(fold_errors, delta):
    """Fold-mean plus/minus ``z_{1-delta/2} s / sqrt(k)`` with ``s`` the fold standard deviation."""
    f = np.asarray(fold_errors, dtype=np.float64)
    delta = check_delta(delta)
    k = f.size
    if k < 2:
        raise ValueError("need at least two folds")
    half = _z(delta) * f.std(ddof=1) / math.sqrt(k)
    return ConfidenceInterval.symmetric(f.mean(), half, "Y", 1 - delta)


def bayes_interval(xi, n, n_star, prior, delta):
    """Central posterior interval of ``Beta(gamma + xi (n - n*), lambda + (1 - xi)(n - n*))``."""
    delta = check_delta(delta)
    gamma, lam = prior
    mass = n - n_star
    nu = gamma + xi * mass
    eta = lam + (1.0 - xi) * mass
    lo = beta_quantile(nu, eta, delta / 2)
    hi = beta_quantile(nu, eta, 1 - delta / 2)
    return ConfidenceInterval.from_bounds(lo, hi, nu / (nu + eta), "M", 1 - delta)


def binomial_inversion(k, m, delta):
    """Clopper-Pearson bounds ``(lower, upper)`` for ``k`` errors in ``m`` trials, ``delta/2`` per tail."""
    delta = check_delta(delta)
    if m <= 0:
        return 0.0, 1.0
    if not 0 <= k <= m:
        raise ValueError(f"need 0 <= k <= m, got k={k}, m={m}")
    lower = 0.0 if k == 0 else beta_quantile(k, m - k + 1, delta / 2)
    upper = 1.0 if k == m else beta_quantile(k + 1, m - k, 1 - delta / 2)
    return lower, upper


def langford_interval(xi, n, n_star, delta):
    """Binomial tail inversion on ``m = round(n - n*)`` pseudo-test points with ``round(m xi)`` errors."""
    delta = check_delta(delta)
    m = int(round(n - n_star))
    if m == 0:
        return ConfidenceInterval.from_bounds(0.0, 1.0, xi, "L", 1 - delta, ("no_pseudo_test_points",))
    k = int(round(m * xi))
    lo, hi = binomial_inversion(k, m, delta)
    return ConfidenceInterval.from_bounds(lo, hi, xi, "L", 1 - delta)


# data-level constructors -----------------------------------------------------


def ci_quantile_bootstrap(data, basis="affine", cfg=None, seed=None):
    """BS1: percentile interval of replicate out-of-bag errors."""
    cfg = cfg or BaselineConfig()
    X, y = _design(data, basis)
    return percentile_interval(_refits(X, y, cfg.n_bootstrap, seed).oob_errors(), cfg.delta)


def ci_corrected_bootstrap(data, basis="affine", cfg=None, seed=None):
    """BS2: bias-corrected percentile interval around the .632 estimate."""
    cfg = cfg or BaselineConfig()
    X, y = _design(data, basis)
    r = _refits(X, y, cfg.n_bootstrap, seed)
    return bc_percentile_interval(r.oob_errors(), r.estimate_632().value, cfg.delta)


def ci_normal_kohavi(data, basis="affine", cfg=None, seed=None):
    """K: normal interval on the .632 estimate with the effective sample size."""
    cfg = cfg or BaselineConfig()
    xi = estimate_632(data, basis, cfg, seed).value
    return kohavi_interval(xi, effective_sample_size(data.n), cfg.delta)


def ci_cv_normal_yang(data, basis="affine", cfg=None, seed=None):
    """Y: shuffled k-fold cross-validation with a normal interval on the fold errors."""
    cfg = cfg or BaselineConfig()
    X, y = _design(data, basis)
    if X.shape[0] < cfg.folds:
        raise ValueError(f"need n >= folds ({cfg.folds}), got n={X.shape[0]}")
    kf = KFold(cfg.folds, shuffle=True, random_state=derive_seed(seed, "folds") % 2**32)
    errs = []
    for tr, te in kf.split(X):
        beta = fit_least_squares(X[tr], y[tr])
        errs.append(np.mean(predict_signs(X[te], beta) != y[te]))
    return cv_normal_interval(errs, cfg.delta)


def ci_bayes_martin(data, basis="affine", cfg=None, seed=None):
    """M: Beta posterior interval with the .632 estimate as pseudo-data."""
    cfg = cfg or BaselineConfig()
    xi = estimate_632(data, basis, cfg, seed).value
    return bayes_interval(xi, data.n, effective_sample_size(data.n), cfg.prior, cfg.delta)


def ci_inverted_binomial_langford(data, basis="affine", cfg=None, seed=None):
    """L: inverted binomial tail with the effective sample size."""
    cfg = cfg or BaselineConfig()
    xi = estimate_632(data, basis, cfg, seed).value
    return langford_interval(xi, data.n, effective_sample_size(data.n), cfg.delta)


CONSTRUCTORS = {
    "BS1": ci_quantile_bootstrap,
    "BS2": ci_corrected_bootstrap,
    "K": ci_normal_kohavi,
    "Y": ci_cv_normal_yang,
    "M": ci_bayes_martin,
    "L": ci_inverted_binomial_langford,
}


def all_baselines(data, basis="affine", cfg=None, seed=None, methods=METHODS):
    """Every requested baseline, sharing one set of bootstrap refits."""
    cfg = cfg or BaselineConfig()
    X, y = _design(data, basis)
    out = {}
    refits = None
    n_star = effective_sample_size(data.n)
    for name in methods:
        if name not in CONSTRUCTORS:
            raise ParameterError(f"unknown baseline {name!r}; choose from {METHODS}")
        if name == "Y":
            out[name] = ci_cv_normal_yang(data, basis, cfg, seed)
            continue
        if refits is None:
            refits = _refits(X, y, cfg.n_bootstrap, seed)
        if name == "BS1":
            out[name] = percentile_interval(refits.oob_errors(), cfg.delta)
            continue
        xi = refits.estimate_632().value
        if name == "BS2":
            out[name] = bc_percentile_interval(refits.oob_errors(), xi, cfg.delta)
        elif name == "K":
            out[name] = kohavi_interval(xi, n_star, cfg.delta)
        elif name == "M":
            out[name] = bayes_interval(xi, data.n, n_star, cfg.prior, cfg.delta)
        else:
            out[name] = langford_interval(xi, data.n, n_star, cfg.delta)
    return out


class BaselineInterval(BaseEstimator):
    """Estimator wrapper: ``BaselineInterval("K").fit(X, y).interval_``."""

    def __init__(self, method="K", basis="affine", delta=0.05, n_bootstrap=500, folds=5,
                 prior=(1.0, 1.0), seed=None):
        self.method = method
        self.basis = basis
        self.delta = delta
        self.n_bootstrap = n_bootstrap
        self.folds = folds
        self.prior = prior
        self.seed = seed

    def fit(self, X, y):
        from .dataset import Dataset

        if self.method not in CONSTRUCTORS:
            raise ParameterError(f"unknown baseline {self.method!r}; choose from {METHODS}")
        cfg = BaselineConfig(delta=self.delta, n_bootstrap=self.n_bootstrap, folds=self.folds,
                             prior=tuple(self.prior))
        self.interval_ = CONSTRUCTORS[self.method](Dataset(X, y), self.basis, cfg, self.seed)
        return self

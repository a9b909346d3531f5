"""Basis expansions and the weighted least-squares sign classifier.

Classifiers have the form ``f(x) = sign(phi(x) . beta)`` with ``sign(0) = +1``.
Fitting minimises the mean weighted squared error

    L(beta) = (1/n) * sum_i w_i (phi(x_i) . beta - y_i)^2

where ``n`` is the number of rows, so bootstrap replicates are weighted fits
with multiplicities as weights.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin, clone
from sklearn.decomposition import PCA
from sklearn.preprocessing import PolynomialFeatures
from sklearn.utils.validation import check_is_fitted

from ._validation import ParameterError, check_design, check_signed_labels, check_weights

BASIS_KINDS = ("affine", "poly", "pca")


class BasisExpansion(TransformerMixin, BaseEstimator):
    """Fixed feature map ``x -> (1, phi_1(x), ..., phi_{p-1}(x))``.

    Parameters
    ----------
    kind : {"affine", "poly", "pca"}
        ``affine`` prepends a constant column to the raw features; ``poly``
        emits all monomials up to ``degree`` (constant included); ``pca``
        projects centred features onto the leading ``n_components`` principal
        directions and prepends a constant.
    degree : int
        Polynomial degree, used when ``kind == "poly"``.
    n_components : int or None
        Number of principal components; ``None`` keeps all ``q``.

    Anything learned from data (polynomial layout, PCA mean and directions) is
    frozen by :meth:`fit` and never revisited, so every bootstrap fit on the
    same training set sees the same feature map.
    """

    def __init__(self, kind="affine", degree=2, n_components=None):
        self.kind = kind
        self.degree = degree
        self.n_components = n_components

    @classmethod
    def from_string(cls, text):
        """Parse ``affine``, ``poly:<degree>`` or ``pca:<k>``."""
        if isinstance(text, BasisExpansion):
            return clone(text)
        name, _, arg = str(text).strip().lower().partition(":")
        if name in ("affine", "raw", "rawaffine", "linear") and not arg:
            return cls("affine")
        try:
            if name in ("poly", "polynomial"):
                return cls("poly", degree=int(arg or 2))
            if name in ("pca", "principalcomponents"):
                return cls("pca", n_components=int(arg) if arg else None)
        except ValueError:
            pass
        raise ParameterError(f"unrecognised basis {text!r}; use affine, poly:<deg> or pca:<k>")

    def to_string(self):
        if self.kind == "poly":
            return f"poly:{self.degree}"
        if self.kind == "pca":
            return "pca" if self.n_components is None else f"pca:{self.n_components}"
        return "affine"

    def fit(self, X, y=None):
        X = check_design(X)
        if self.kind not in BASIS_KINDS:
            raise ParameterError(f"kind must be one of {BASIS_KINDS}, got {self.kind!r}")
        self.n_features_in_ = X.shape[1]
        if self.kind == "poly":
            if int(self.degree) < 1:
                raise ParameterError(f"degree must be >= 1, got {self.degree}")
            self.poly_ = PolynomialFeatures(degree=int(self.degree), include_bias=True).fit(X)
            self.n_output_features_ = self.poly_.n_output_features_
        elif self.kind == "pca":
            k = X.shape[1] if self.n_components is None else int(self.n_components)
            if not 1 <= k <= min(X.shape):
                raise ParameterError(f"n_components must lie in [1, {min(X.shape)}], got {k}")
            pca = PCA(n_components=k, svd_solver="full").fit(X)
            self.mean_ = pca.mean_
            self.components_ = pca.components_
            self.n_output_features_ = k + 1
        else:
            self.n_output_features_ = X.shape[1] + 1
        return self

    def transform(self, X):
        check_is_fitted(self, "n_output_features_")
        X = check_design(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"basis was fitted on {self.n_features_in_} features, got {X.shape[1]}")
        if self.kind == "poly":
            return self.poly_.transform(X)
        if self.kind == "pca":
            Z = (X - self.mean_) @ self.components_.T
        else:
            Z = X
        return np.column_stack([np.ones(X.shape[0]), Z])


def expand(basis, data):
    """Design matrix of a fitted basis on a :class:`~cudbound.dataset.Dataset`."""
    return basis.transform(data.features)


def predict_signs(design, beta):
    return np.where(np.asarray(design) @ np.asarray(beta) >= 0, 1, -1)


def surrogate_loss(design, labels, weights, beta):
    """Mean weighted squared error ``(1/n) sum_i w_i (x_i . beta - y_i)^2``."""
    design = np.asarray(design, dtype=np.float64)
    n = design.shape[0]
    w = check_weights(weights, n)
    r = design @ np.asarray(beta, dtype=np.float64) - np.asarray(labels, dtype=np.float64)
    return float(np.dot(w, r * r) / n)


def fit_least_squares(design, labels, weights=None):
    """Minimum-norm global minimiser of :func:`surrogate_loss`."""
    design = np.asarray(design, dtype=np.float64)
    labels = check_signed_labels(labels)
    w = check_weights(weights, design.shape[0])
    if not np.any(w > 0):
        raise ValueError("at least one weight must be positive")
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(design * sw[:, None], labels * sw, rcond=None)
    return beta


def empirical_error(design, labels, beta):
    """Fraction of rows with ``sign(x_i . beta) != y_i``."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    return float(np.mean(predict_signs(design, beta) != labels))


class LeastSquaresClassifier(ClassifierMixin, BaseEstimator):
    """Sign of a least-squares fit to ±1 labels on a fixed basis.

    ``basis`` may be a :class:`BasisExpansion` or one of the strings accepted
    by :meth:`BasisExpansion.from_string`.
    """

    def __init__(self, basis="affine"):
        self.basis = basis

    def fit(self, X, y, sample_weight=None):
        X, y = check_design(X, y)
        self.basis_ = BasisExpansion.from_string(self.basis).fit(X)
        self.classes_ = np.array([-1, 1])
        self.coef_ = fit_least_squares(self.basis_.transform(X), y, sample_weight)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        return self.basis_.transform(X) @ self.coef_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def error(self, X, y):
        """Misclassification rate on ``(X, y)``."""
        return float(np.mean(self.predict(X) != check_signed_labels(y)))

    def loss(self, X, y, sample_weight=None):
        check_is_fitted(self, "coef_")
        return surrogate_loss(self.basis_.transform(X), y, sample_weight, self.coef_)

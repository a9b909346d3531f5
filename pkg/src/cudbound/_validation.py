"""Input validation helpers shared by the estimators and functional API."""

from numbers import Integral, Real

import numpy as np
from sklearn.utils.validation import check_array, check_X_y


class ParameterError(ValueError):
    """Raised when a configuration or distribution parameter is invalid."""


def check_signed_labels(y):
    """Return ``y`` as an int array, requiring every entry to be -1 or +1."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {y.shape}")
    if y.size and not np.all((y == 1) | (y == -1)):
        bad = np.unique(y[(y != 1) & (y != -1)])[:5]
        raise ValueError(f"labels must be in {{-1, +1}}, found {bad.tolist()}")
    return y.astype(np.int64)


def check_design(X, y=None):
    """Validate a design matrix (and optionally ±1 labels) of matching length."""
    if y is None:
        return check_array(X, dtype=np.float64, ensure_2d=True)
    X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
    return X, check_signed_labels(y)


def check_weights(weights, n):
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"weights must have shape ({n},), got {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    return w


def check_delta(delta):
    if not isinstance(delta, Real) or not 0.0 < float(delta) <= 1.0:
        raise ParameterError(f"delta must lie in (0, 1], got {delta!r}")
    return float(delta)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, Integral) or value < minimum:
        raise ParameterError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_positive(value, name):
    if not isinstance(value, Real) or not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be a positive real, got {value!r}")
    return float(value)


def check_probability(value, name):
    if not isinstance(value, Real) or not 0.0 <= float(value) <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {value!r}")
    return float(value)

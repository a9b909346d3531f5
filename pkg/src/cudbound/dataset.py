"""Labeled datasets: CSV ingestion, simulated families, and train/test splits.

The four simulated families mirror the scenarios used to stress confidence
sets for classification error:

``donut``
    Two concentric annuli in the plane, labelled by annulus with a small
    symmetric label-flip rate. A quadratic basis recovers the annulus rule, so
    the least-squares limit is close to the Bayes classifier.
``outlier``
    Two Gaussian blobs separated along the first axis plus a distant,
    high-leverage cluster whose label disagrees with its side of the blob
    boundary. The squared-error fit is dragged toward the cluster and away
    from the Bayes rule.
``chisquare``
    One chi-square feature. The positive class is a band ``[a, b]`` chosen so
    that ``P(y=+1) = 1/2`` and ``E[x y] = 0``; with an affine basis the
    population least-squares coefficients are exactly zero while the Bayes
    rule (the band) has error equal to the small flip rate.
``threepoints``
    Three fixed scalar features ``-1, 0, 1`` labelled ``+1, -1, +1`` with
    unequal sampling probabilities. No affine rule labels all three correctly
    and training error takes only a handful of values.

Constants are configuration defaults, chosen for these motivations.
"""

import csv
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize, stats

from ._seeding import make_rng
from ._validation import ParameterError, check_positive, check_probability, check_signed_labels


class DataFormatError(ValueError):
    """A CSV file could not be turned into a numeric dataset."""


class LabelColumnError(DataFormatError):
    """The requested label column does not exist."""


class DegenerateLabelsError(DataFormatError):
    """The label column has fewer than two distinct values."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` feature rows with labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be an n x q matrix with n, q >= 1, got shape {X.shape}")
        y = check_signed_labels(self.labels)
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def q(self):
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def subset(self, idx):
        return Dataset(self.features[idx], self.labels[idx])

    def equals(self, other):
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


FAMILIES = ("donut", "outlier", "chisquare", "threepoints")

_ALIASES = {
    "donut": "donut",
    "outlier": "outlier",
    "chisquare": "chisquare",
    "chisquaresmall": "chisquare",
    "chi2": "chisquare",
    "chisq": "chisquare",
    "threepoints": "threepoints",
    "three_points": "threepoints",
    "3pt": "threepoints",
}

DEFAULT_PARAMS = {
    "donut": {
        "r_inner_min": 0.5,
        "r_inner_max": 1.0,
        "r_outer_min": 1.0,
        "r_outer_max": 1.5,
        "p_outer": 0.5,
        "flip": 0.1,
    },
    "outlier": {
        "separation": 1.0,
        "sigma": 1.0,
        "outlier_prob": 0.1,
        "outlier_offset": 6.0,
        "outlier_sigma": 0.5,
    },
    "chisquare": {
        "df": 3.0,
        "flip": 0.05,
    },
    "threepoints": {
        "probs": (0.2, 0.5, 0.3),
        "points": (-1.0, 0.0, 1.0),
        "labels": (1, -1, 1),
    },
}

# Basis under which each family's motivation holds; "auto" in the harness uses it.
RECOMMENDED_BASIS = {
    "donut": "poly:2",
    "outlier": "affine",
    "chisquare": "affine",
    "threepoints": "affine",
}


def canonical_family(name):
    key = str(name).strip().lower().replace("-", "").replace(" ", "")
    try:
        return _ALIASES[key]
    except KeyError:
        raise ParameterError(f"unknown family {name!r}; expected one of {', '.join(FAMILIES)}") from None


@dataclass(frozen=True)
class SimSpec:
    """A simulated family plus overrides of its default shape parameters."""

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.family])
        if unknown:
            raise ParameterError(f"unknown parameters for {self.family}: {sorted(unknown)}")
        _validate_params(self.family, self.resolved())

    def resolved(self):
        out = dict(DEFAULT_PARAMS[self.family])
        out.update(self.params)
        return out

    def class_balance(self):
        """Exact ``P(y = +1)`` under this distribution."""
        p = self.resolved()
        if self.family == "donut":
            return p["p_outer"] * (1 - p["flip"]) + (1 - p["p_outer"]) * p["flip"]
        if self.family == "outlier":
            return (1 - p["outlier_prob"]) / 2
        if self.family == "chisquare":
            return 0.5
        return float(sum(pi for pi, yi in zip(p["probs"], p["labels"]) if yi == 1))


def _validate_params(family, p):
    if family == "donut":
        radii = [check_positive(p[k], k) for k in ("r_inner_min", "r_inner_max", "r_outer_min", "r_outer_max")]
        if not (radii[0] < radii[1] and radii[2] < radii[3]):
            raise ParameterError("each annulus needs r_min < r_max")
        check_probability(p["p_outer"], "p_outer")
        check_probability(p["flip"], "flip")
    elif family == "outlier":
        for k in ("separation", "sigma", "outlier_offset", "outlier_sigma"):
            check_positive(p[k], k)
        check_probability(p["outlier_prob"], "outlier_prob")
    elif family == "chisquare":
        check_positive(p["df"], "df")
        check_probability(p["flip"], "flip")
    else:
        probs = [check_probability(v, "probs") for v in p["probs"]]
        if len(probs) != 3 or len(p["points"]) != 3 or len(p["labels"]) != 3:
            raise ParameterError("threepoints needs exactly three probs, points and labels")
        if not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise ParameterError(f"probs must sum to 1, got {sum(probs)}")
        if len(set(float(v) for v in p["points"])) != 3:
            raise ParameterError("threepoints support points must be distinct")
        check_signed_labels(np.asarray(p["labels"]))


@lru_cache(maxsize=None)
def chisquare_band(df):
    """Return ``(a, b)`` with ``P(a <= X <= b) = 1/2`` and ``E[X; a <= X <= b] = E[X]/2``.

    Uses ``E[X 1{X <= t}] = df * F_{df+2}(t)`` for ``X ~ chi2(df)``.
    """
    lo, hi = stats.chi2(df), stats.chi2(df + 2)

    def upper(a):
        return lo.ppf(min(lo.cdf(a) + 0.5, 1.0))

    def excess(a):
        return hi.cdf(upper(a)) - hi.cdf(a) - 0.5

    a_max = lo.ppf(0.5) * (1 - 1e-12)
    a = optimize.brentq(excess, 0.0, a_max, xtol=1e-14)
    return float(a), float(upper(a))


def _flip(y, rate, rng):
    if rate <= 0:
        return y
    return np.where(rng.random(y.shape[0]) < rate, -y, y)


def _annulus(n, r_min, r_max, rng):
    # uniform by area
    r = np.sqrt(rng.uniform(r_min**2, r_max**2, size=n))
    theta = rng.uniform(0.0, 2 * np.pi, size=n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def generate_simulated(spec, n, seed):
    """Draw ``n`` i.i.d. labeled points from ``spec``; deterministic in ``seed``."""
    if not isinstance(spec, SimSpec):
        spec = SimSpec(spec)
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    rng = make_rng(seed)
    p = spec.resolved()

    if spec.family == "donut":
        outer = rng.random(n) < p["p_outer"]
        X = np.where(
            outer[:, None],
            _annulus(n, p["r_outer_min"], p["r_outer_max"], rng),
            _annulus(n, p["r_inner_min"], p["r_inner_max"], rng),
        )
        y = _flip(np.where(outer, 1, -1), p["flip"], rng)

    elif spec.family == "outlier":
        is_out = rng.random(n) < p["outlier_prob"]
        y_main = np.where(rng.random(n) < 0.5, 1, -1)
        centers = np.column_stack([y_main * p["separation"], np.zeros(n)])
        X = centers + p["sigma"] * rng.standard_normal((n, 2))
        out_center = np.array([p["outlier_offset"], p["outlier_offset"]])
        X_out = out_center + p["outlier_sigma"] * rng.standard_normal((n, 2))
        X = np.where(is_out[:, None], X_out, X)
        # the cluster sits deep on the positive side but carries the negative label
        y = np.where(is_out, -1, y_main)

    elif spec.family == "chisquare":
        a, b = chisquare_band(float(p["df"]))
        x = rng.chisquare(p["df"], size=n)
        y = _flip(np.where((x >= a) & (x <= b), 1, -1), p["flip"], rng)
        X = x[:, None]

    else:
        probs = np.asarray(p["probs"], dtype=np.float64)
        k = rng.choice(3, size=n, p=probs / probs.sum())
        X = np.asarray(p["points"], dtype=np.float64)[k][:, None]
        y = np.asarray(p["labels"], dtype=np.int64)[k]

    return Dataset(X, y)


def split(data, n_train, seed):
    """Partition ``data`` into a uniformly drawn training set of size ``n_train`` and the rest."""
    n = data.n
    if isinstance(n_train, bool) or int(n_train) != n_train or not 1 <= n_train < n:
        raise ParameterError(f"n_train must satisfy 1 <= n_train < {n}, got {n_train!r}")
    perm = make_rng(seed).permutation(n)
    return data.subset(np.sort(perm[: int(n_train)])), data.subset(np.sort(perm[int(n_train):]))


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _label_matches(cell, positive):
    cell = cell.strip()
    pos = str(positive).strip()
    if cell == pos:
        return True
    if _is_number(cell) and _is_number(pos):
        return float(cell) == float(pos)
    return False


def load_csv(path, label_column=-1, positive_label=1):
    """Read a comma-delimited file into a :class:`Dataset`.

    A header row is assumed when ``label_column`` is a name, and otherwise
    detected from a non-numeric cell in the first row's feature columns.
    Rows whose label equals ``positive_label`` become +1, all others -1.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such data file: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{path}: file is empty")

    width = len(rows[0])
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        header = [c.strip() for c in rows[0]]
        if label_column not in header:
            raise LabelColumnError(f"{path}: label column {label_column!r} not in header {header}")
        col = header.index(label_column)
        body = rows[1:]
    else:
        col = int(label_column)
        if not -width <= col < width:
            raise LabelColumnError(f"{path}: label column index {col} out of range for {width} columns")
        col %= width
        first = [c for j, c in enumerate(rows[0]) if j != col]
        body = rows[1:] if any(not _is_number(c) for c in first) else rows

    if not body:
        raise DataFormatError(f"{path}: no data rows")
    feats, raw_labels = [], []
    for i, row in enumerate(body):
        if len(row) != width:
            raise DataFormatError(f"{path}: row {i + 1} has {len(row)} cells, expected {width}")
        vals = []
        for j, cell in enumerate(row):
            if j == col:
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise DataFormatError(f"{path}: non-numeric feature cell {cell!r} at data row {i + 1}, column {j + 1}") from None
        feats.append(vals)
        raw_labels.append(row[col].strip())

    if len(set(raw_labels)) < 2:
        raise DegenerateLabelsError(f"{path}: degenerate labels, only {sorted(set(raw_labels))} present")
    if width < 2:
        raise DataFormatError(f"{path}: need at least one feature column besides the label")
    y = np.array([1 if _label_matches(c, positive_label) else -1 for c in raw_labels])
    return Dataset(np.array(feats, dtype=np.float64), y)


def write_csv(data, path):
    """Write ``data`` as ``x1,...,xq,label`` with round-trippable floats.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(data, path)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(data, fh)


def _write_rows(data, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow([f"x{j + 1}" for j in range(data.q)] + ["label"])
    for xi, yi in zip(data.features, data.labels):
        w.writerow([repr(float(v)) for v in xi] + [int(yi)])

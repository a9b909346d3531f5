"""Bootstrap replicates as multiplicity vectors.

A replicate of an ``n``-point sample is stored as the copy counts
``phi_i`` (summing to ``n``) rather than as a materialised resample. The
replicate's error deviation

    |err_replicate(beta) - err_original(beta)| = (1/n) |sum_i (phi_i - 1) z_i(beta)|

only involves the *off-support* points with ``phi_i != 1``.
"""

from dataclasses import dataclass

import numpy as np

from ._seeding import make_rng


@dataclass(frozen=True, eq=False)
class Multiplicities:
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi)
        if phi.ndim != 1 or phi.size < 1:
            raise ValueError("phi must be a nonempty 1-D sequence")
        if not np.all(phi == np.round(phi)) or np.any(phi < 0):
            raise ValueError("phi entries must be nonnegative integers")
        phi = phi.astype(np.int64)
        if phi.sum() != phi.size:
            raise ValueError(f"multiplicities must sum to n={phi.size}, got {phi.sum()}")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def n(self):
        return self.phi.size


@dataclass(frozen=True, eq=False)
class OffSupport:
    """Points with ``phi_i != 1``.

    ``groups[k]`` lists the entries of ``indices`` whose feature vector is
    ``points[k]``; coincident vectors share one classification.
    """

    indices: np.ndarray
    net: np.ndarray
    points: list
    groups: list

    @property
    def d(self):
        return len(self.points)


def draw_multiplicities(n, seed):
    """Copy counts of a size-``n`` resample, i.e. Multinomial(n; 1/n, ..., 1/n)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(seed)
    return Multiplicities(rng.multinomial(n, np.full(n, 1.0 / n)))


def replicate_multiplicities(n, B, seed):
    """``B`` replicates, replicate ``b`` drawn from the stream ``(seed, b)``."""
    return [draw_multiplicities(n, make_rng(seed, b)) for b in range(B)]


def off_support(m, features=None):
    """Indices with ``phi_i != 1``, their net weights, and the distinct feature rows among them.

    Without ``features`` each off-support index is its own point.
    Deduplication is by exact equality of coordinates.
    """
    phi = m.phi if isinstance(m, Multiplicities) else np.asarray(m)
    idx = np.flatnonzero(phi != 1)
    net = phi[idx] - 1
    if features is None:
        return OffSupport(idx, net, [np.array([float(i)]) for i in idx], [[k] for k in range(idx.size)])
    F = np.asarray(features, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    seen = {}
    points, groups = [], []
    for k, i in enumerate(idx):
        key = F[i].tobytes()
        if key not in seen:
            seen[key] = len(points)
            points.append(F[i].copy())
            groups.append([])
        groups[seen[key]].append(k)
    return OffSupport(idx, net, points, groups)


def deviation(m, misclassified):
    """``(1/n) |sum_i (phi_i - 1) z_i|`` for 0/1 misclassification flags ``z``."""
    phi = m.phi if isinstance(m, Multiplicities) else np.asarray(m)
    z = np.asarray(misclassified, dtype=np.float64)
    if z.shape != phi.shape:
        raise ValueError(f"flags have shape {z.shape}, expected {phi.shape}")
    return abs(float(np.dot(phi - 1, z))) / phi.size

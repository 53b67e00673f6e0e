"""Exact k-nearest-neighbour radii, neighbourhoods and radius envelopes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import ModelSpec, unit_ball_volume


@dataclass
class Neighborhood:
    x: np.ndarray
    k: int
    radius: float
    members: np.ndarray
    group_counts: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out = {
            "x": self.x.tolist(),
            "k": self.k,
            "radius": self.radius,
            "members": self.members.tolist(),
        }
        if self.group_counts is not None:
            out["group_counts"] = self.group_counts.tolist()
        return out


def _distances(X, x) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if X.shape[0] == 0:
        raise ValueError("empty covariate matrix")
    if x.shape[1] != X.shape[1]:
        raise ValueError(f"query has dimension {x.shape[1]}, covariates have {X.shape[1]}")
    return np.sqrt(np.sum((X - x) ** 2, axis=1))


def _nearest(dist: np.ndarray, k: int) -> np.ndarray:
    # lexsort: distance first, lowest index breaks ties
    order = np.lexsort((np.arange(len(dist)), dist))
    return order[:k]


def knn_radius(X, x, k: int, labels=None, G: Optional[int] = None) -> Neighborhood:
    """k-NN radius of ``x`` and its ``k`` nearest sample indices (sorted).

    Ties at equal distance go to the lowest node index; a sample point equal
    to ``x`` is a member (closed ball).
    """
    dist = _distances(X, x)
    N = len(dist)
    if not 1 <= k <= N:
        raise ValueError(f"k={k} must satisfy 1 <= k <= N={N}")
    idx = _nearest(dist, k)
    counts = None
    if labels is not None:
        labels = np.asarray(labels)
        G = G if G is not None else int(labels.max()) + 1
        counts = np.bincount(labels[idx], minlength=G)
    return Neighborhood(np.asarray(x, dtype=float).ravel(), k, float(dist[idx[-1]]), np.sort(idx), counts)


def subgroup_radius(X, labels, h: int, x, l: int) -> float:
    """l-NN radius of ``x`` among the nodes of community ``h``."""
    labels = np.asarray(labels)
    members = np.flatnonzero(labels == h)
    if len(members) < l:
        raise ValueError(f"community {h} has {len(members)} members, fewer than l={l}")
    if l < 1:
        raise ValueError("l must be >= 1")
    dist = _distances(np.asarray(X)[members], x)
    return float(np.partition(dist, l - 1)[l - 1])


def kth_distances(X, queries, k: int) -> np.ndarray:
    """``r_k`` at every query row (used for sup/inf over a grid)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    if not 1 <= k <= len(X):
        raise ValueError(f"k={k} must satisfy 1 <= k <= N={len(X)}")
    out = np.empty(len(Q))
    step = max(1, 4_000_000 // (X.size or 1))
    for start in range(0, len(Q), step):
        block = Q[start:start + step]
        d = np.sqrt(np.sum((block[:, None, :] - X[None, :, :]) ** 2, axis=2))
        out[start:start + step] = np.partition(d, k - 1, axis=1)[:, k - 1]
    return out


@dataclass
class RadiusEnvelope:
    R_upper: float
    R_lower: Optional[float]
    conditions: dict = field(default_factory=dict)

    @property
    def upper_applicable(self) -> bool:
        return self.conditions["upper_k_min"]["pass"] and self.conditions["upper_k_max"]["pass"]

    @property
    def lower_applicable(self) -> bool:
        return self.conditions["lower_k_min"]["pass"] and self.R_lower is not None


def radius_envelopes(spec_or_constants, N: int, k: int, delta: float, d: Optional[int] = None) -> RadiusEnvelope:
    """Upper envelope ``R_k`` for ``sup r_k`` and lower envelope for ``inf r_k``.

    ``R_k = (2k / (N b_X c V_d))^(1/d)`` and the lower envelope is
    ``((k - 12 d ln(12N/delta)) / (4 N Ubar_X V_d))^(1/d)``, reported as
    ``None`` when its radicand is not positive.
    """
    if isinstance(spec_or_constants, ModelSpec):
        const, d = spec_or_constants.constants, spec_or_constants.d
    else:
        const = spec_or_constants
    if d is None:
        raise ValueError("dimension d required with a bare constants dict")
    c, T, b_X, U_bar = const["c"], const["T"], const["b_X"], const["U_X_bar"]
    V = unit_ball_volume(d)
    R_upper = (2.0 * k / (N * b_X * c * V)) ** (1.0 / d)
    log_term = 12.0 * d * math.log(12.0 * N / delta)
    radicand = (k - log_term) / (4.0 * N * U_bar * V)
    R_lower = radicand ** (1.0 / d) if radicand > 0 else None
    k_max = T ** d * N * b_X * c * V / 2.0
    conditions = {
        "upper_k_min": {"lhs": 24.0 * d * math.log(12.0 * N / delta), "rhs": float(k),
                        "pass": 24.0 * d * math.log(12.0 * N / delta) <= k},
        "upper_k_max": {"lhs": float(k), "rhs": k_max, "pass": k <= k_max},
        "lower_k_min": {"lhs": log_term, "rhs": float(k), "pass": log_term <= k},
    }
    return RadiusEnvelope(R_upper, R_lower, conditions)

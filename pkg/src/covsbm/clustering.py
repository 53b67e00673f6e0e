"""Top-G SVD of a localized Laplacian and K-means co-clustering of its singular vectors."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .streams import stream

RANK_TOL = 1e-12


@dataclass
class SpectralDecomposition:
    U: np.ndarray
    V: np.ndarray
    sigma: np.ndarray
    next_sigma: float = 0.0

    @property
    def eigengap(self) -> float:
        return float(self.sigma[-1] - self.next_sigma)

    @property
    def rank_deficient(self) -> bool:
        return bool(self.sigma[-1] <= RANK_TOL * max(1.0, self.sigma[0]))


@dataclass
class ClusteringConfig:
    G: int
    restarts: int = 10
    max_iters: int = 300
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.G < 1:
            raise ValueError("G must be >= 1")


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    objective: float
    restart_objectives: list = field(default_factory=list)
    reseeded: int = 0

    @property
    def epsilon(self) -> float:
        """Largest relative excess of any restart over the best objective found."""
        best = self.objective
        worst = max(self.restart_objectives) if self.restart_objectives else best
        if best <= 0:
            return 0.0 if worst <= 0 else float("inf")
        return worst / best - 1.0

    def within(self, eps: float) -> float:
        """Fraction of restarts whose objective is within ``(1 + eps)`` of the best."""
        objs = np.asarray(self.restart_objectives)
        return float(np.mean(objs <= (1 + eps) * self.objective + 1e-15))


@dataclass
class CoClustering:
    labels_x: np.ndarray
    labels_xp: np.ndarray
    decomposition: SpectralDecomposition
    kmeans_x: KMeansResult
    kmeans_xp: KMeansResult


def top_svd(L, G: int) -> SpectralDecomposition:
    """Leading ``G`` singular triplets, sign-normalised.

    Each left vector's first non-negligible entry is made positive and the
    matching right vector flipped with it.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if G > min(L.shape):
        raise ValueError(f"G={G} exceeds matrix size {L.shape}")
    U, s, Vt = np.linalg.svd(L)
    U, V, sig = U[:, :G].copy(), Vt[:G].T.copy(), s[:G].copy()
    for c in range(G):
        col = U[:, c]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            U[:, c] *= -1
            V[:, c] *= -1
    nxt = float(s[G]) if len(s) > G else 0.0
    return SpectralDecomposition(U, V, sig, nxt)


def _sq_dists(M, C):
    return np.sum((M[:, None, :] - C[None, :, :]) ** 2, axis=2)


def _furthest_point_init(M, G, rng):
    centers = [int(rng.integers(len(M)))]
    d2 = np.sum((M - M[centers[0]]) ** 2, axis=1)
    for _ in range(1, G):
        nxt = int(np.argmax(d2))
        centers.append(nxt)
        d2 = np.minimum(d2, np.sum((M - M[nxt]) ** 2, axis=1))
    return M[centers].copy()


def _lloyd(M, C, max_iters):
    G = len(C)
    labels = None
    reseeded = 0
    for _ in range(max_iters):
        new = np.argmin(_sq_dists(M, C), axis=1)
        counts = np.bincount(new, minlength=G)
        for empty in np.flatnonzero(counts == 0):
            # furthest point from its current centroid opens the empty cluster
            resid = np.sum((M - C[new]) ** 2, axis=1)
            resid[np.bincount(new, minlength=G)[new] <= 1] = -1.0
            i = int(np.argmax(resid))
            new[i] = empty
            C[empty] = M[i]
            reseeded += 1
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for h in range(G):
            C[h] = M[labels == h].mean(axis=0)
    obj = float(np.sum((M - C[labels]) ** 2))
    return labels, C, obj, reseeded


def kmeans_rows(M, config: ClusteringConfig) -> KMeansResult:
    """Lloyd K-means on the rows of ``M``.

    Restart 0 uses greedy furthest-point seeding, the others uniform random
    rows. The lowest objective wins, earliest restart on ties.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n, G = len(M), config.G
    if n < G:
        raise ValueError(f"cannot form {G} clusters from {n} rows")
    runs = []
    for r in range(config.restarts):
        rng = stream(config.seed, r, "kmeans")
        if r == 0:
            C = _furthest_point_init(M, G, rng)
        else:
            C = M[rng.choice(n, size=G, replace=False)].copy()
        runs.append(_lloyd(M, C, config.max_iters))
    objs = [run[2] for run in runs]
    best = int(np.argmin(objs))
    labels, C, obj, reseeded = runs[best]
    return KMeansResult(labels, C, obj, objs, reseeded)


def cluster_neighborhoods(L, config: ClusteringConfig) -> CoClustering:
    dec = top_svd(L, config.G)
    km_x = kmeans_rows(dec.U, config)
    km_xp = kmeans_rows(dec.V, config)
    return CoClustering(km_x.labels, km_xp.labels, dec, km_x, km_xp)


def procrustes(A, B) -> np.ndarray:
    """Orthogonal ``Q`` minimising ``||A - B Q||_F``."""
    W, _, Zt = np.linalg.svd(B.T @ A)
    return W @ Zt

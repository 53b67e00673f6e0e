"""End-to-end estimation at one query pair."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .clustering import ClusteringConfig, cluster_neighborhoods
from .estimators import EstimationResult, align_by_assortativity, align_by_pi_ordering, estimate_B, estimate_pi
from .laplacian import laplacian
from .neighbors import knn_radius


def local_positions(nodes: Optional[np.ndarray], eta: np.ndarray) -> np.ndarray:
    """Positions of global indices ``eta`` inside the sorted node list of a sampled subgraph."""
    if nodes is None:
        return np.asarray(eta)
    pos = np.searchsorted(nodes, eta)
    if np.any(pos >= len(nodes)) or np.any(nodes[np.minimum(pos, len(nodes) - 1)] != eta):
        raise IndexError("neighbourhood node missing from the sampled subgraph")
    return pos


def fit_pair(A, X, x, xp, k: int, G: int, tau: Optional[float] = None,
             clustering: Optional[ClusteringConfig] = None, mode: str = "exclude",
             nodes: Optional[np.ndarray] = None, align: str = "none") -> EstimationResult:
    """Neighbourhoods, regularized Laplacian, co-clustering and plug-in estimates.

    ``A`` is either the full adjacency or the induced subgraph on ``nodes``.
    ``align`` is ``"none"``, ``"assortative"``, ``"disassortative"`` or ``"pi"``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    x, xp = np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(xp, dtype=float))
    nb_x, nb_xp = knn_radius(X, x, k), knn_radius(X, xp, k)
    eta_x, eta_xp = nb_x.members, nb_xp.members
    A = np.asarray(A)
    A_eta = A[np.ix_(local_positions(nodes, eta_x), local_positions(nodes, eta_xp))]
    lap = laplacian(A_eta, tau)
    config = clustering or ClusteringConfig(G)
    co = cluster_neighborhoods(lap.L, config)
    lx, lxp = co.labels_x, co.labels_xp
    pi_x, pi_xp = estimate_pi(lx, k, G), estimate_pi(lxp, k, G)
    B_hat = estimate_B(A_eta, lx, lxp, G, eta_x, eta_xp, mode)
    alignment = {"method": align}
    if align in ("assortative", "disassortative"):
        perm = align_by_assortativity(B_hat, disassortative=(align == "disassortative"))
        # column perm[g] of x' pairs with row g of x; relabel x' accordingly
        inv = np.empty(G, dtype=np.int64)
        inv[perm] = np.arange(G)
        lxp = inv[lxp]
        pi_xp = estimate_pi(lxp, k, G)
        B_hat = B_hat[:, perm]
        alignment["perm_xp"] = perm
    elif align == "pi":
        perm_x, perm_xp, tie = align_by_pi_ordering(pi_x, pi_xp)
        inv_x, inv_xp = np.argsort(perm_x), np.argsort(perm_xp)
        lx, lxp = inv_x[lx], inv_xp[lxp]
        pi_x, pi_xp = pi_x[perm_x], pi_xp[perm_xp]
        B_hat = B_hat[np.ix_(perm_x, perm_xp)]
        alignment.update(perm_x=perm_x, perm_xp=perm_xp, tie=tie)
    elif align != "none":
        raise ValueError(f"unknown alignment {align!r}")
    dec = co.decomposition
    diagnostics = {
        "radius_x": nb_x.radius,
        "radius_xp": nb_xp.radius,
        "singular_values": dec.sigma.tolist(),
        "eigengap": dec.eigengap,
        "rank_deficient": dec.rank_deficient,
        "kmeans_objective_x": co.kmeans_x.objective,
        "kmeans_objective_xp": co.kmeans_xp.objective,
        "kmeans_epsilon_x": co.kmeans_x.epsilon,
        "kmeans_epsilon_xp": co.kmeans_xp.epsilon,
        "undefined_B_entries": np.argwhere(np.isnan(B_hat)).tolist(),
        "mode": mode,
    }
    return EstimationResult(x, xp, int(k), lap.tau, lx, lxp, eta_x, eta_xp, pi_x, pi_xp, B_hat,
                            alignment, diagnostics)

"""Localized adjacency, regularized Laplacians and their population counterparts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .model import ModelSpec


@dataclass
class LocalizedLaplacian:
    """``L = O_tau^{-1/2} A_eta Q_tau^{-1/2}``; degree diagonals kept as vectors."""

    A_eta: np.ndarray
    O_tau: np.ndarray
    Q_tau: np.ndarray
    tau: float
    L: np.ndarray


@dataclass
class PopulationLaplacian:
    """Population matrices for one query pair.

    ``*_xg`` use the sample covariates ``B_{g_i g_j}(x_i, x_j)``;
    ``*_xx`` freeze covariates at the query pair ``B_{g_i g_j}(x, x')``.
    Degree vectors exclude ``tau``.
    """

    P_xg: np.ndarray
    P_xx: np.ndarray
    O_xg: np.ndarray
    Q_xg: np.ndarray
    O_xx: np.ndarray
    Q_xx: np.ndarray
    tau: float
    L_xg: np.ndarray
    L_xx: np.ndarray
    labels_x: np.ndarray
    labels_xp: np.ndarray
    B_point: np.ndarray


def build_localized(A, eta_x, eta_xp) -> np.ndarray:
    A = np.asarray(A)
    N = A.shape[0]
    eta_x, eta_xp = np.asarray(eta_x, dtype=np.int64), np.asarray(eta_xp, dtype=np.int64)
    for name, eta in (("eta_x", eta_x), ("eta_xp", eta_xp)):
        if eta.size and (eta.min() < 0 or eta.max() >= N):
            raise IndexError(f"{name} has an index outside [0, {N})")
    return A[np.ix_(eta_x, eta_xp)]


def mean_degree(A_eta) -> float:
    return float(np.asarray(A_eta).sum()) / A_eta.shape[0]


def _normalize(M, rows, cols):
    return M / np.sqrt(rows)[:, None] / np.sqrt(cols)[None, :]


def laplacian(A_eta, tau: Optional[float] = None) -> LocalizedLaplacian:
    """Regularized Laplacian of a localized block; ``tau=None`` uses the mean degree."""
    A_eta = np.asarray(A_eta, dtype=float)
    if tau is None:
        tau = mean_degree(A_eta)
    if tau < 0:
        raise ValueError("tau must be non-negative")
    O = A_eta.sum(axis=1) + tau
    Q = A_eta.sum(axis=0) + tau
    if tau == 0:
        if np.any(O <= 0):
            raise ValueError(f"tau=0 with isolated row {int(np.flatnonzero(O <= 0)[0])} of the localized adjacency")
        if np.any(Q <= 0):
            raise ValueError(f"tau=0 with isolated column {int(np.flatnonzero(Q <= 0)[0])} of the localized adjacency")
    return LocalizedLaplacian(A_eta, O, Q, float(tau), _normalize(A_eta, O, Q))


def hermitian_dilation(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    m, n = M.shape
    return np.block([[np.zeros((m, m)), M], [M.T, np.zeros((n, n))]])


def dilation_norm(M) -> float:
    """Spectral norm of ``M`` through a symmetric eigensolve of its dilation."""
    D = hermitian_dilation(M)
    n = D.shape[0]
    top = linalg.eigvalsh(D, subset_by_index=[n - 1, n - 1])[0]
    bottom = linalg.eigvalsh(D, subset_by_index=[0, 0])[0]
    return float(max(abs(top), abs(bottom)))


def population_laplacians(spec: ModelSpec, X, g, eta_x, eta_xp, x, xp, tau: float) -> PopulationLaplacian:
    if g is None:
        raise ValueError("population Laplacians need the true community labels")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    g = np.asarray(g)
    eta_x, eta_xp = np.asarray(eta_x), np.asarray(eta_xp)
    gx, gxp = g[eta_x], g[eta_xp]
    P_xg = spec.edge.pairwise(X[eta_x], gx, X[eta_xp], gxp)
    B_point = spec.B(x, xp)
    P_xx = B_point[np.ix_(gx, gxp)]
    O_xg, Q_xg = P_xg.sum(axis=1), P_xg.sum(axis=0)
    O_xx, Q_xx = P_xx.sum(axis=1), P_xx.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        L_xg = np.nan_to_num(_normalize(P_xg, O_xg + tau, Q_xg + tau))
        L_xx = np.nan_to_num(_normalize(P_xx, O_xx + tau, Q_xx + tau))
    return PopulationLaplacian(P_xg, P_xx, O_xg, Q_xg, O_xx, Q_xx, float(tau), L_xg, L_xx, gx, gxp, B_point)


def min_degree(pop: PopulationLaplacian) -> float:
    return float(min(pop.O_xx.min(), pop.Q_xx.min(), pop.O_xg.min(), pop.Q_xg.min()))


def decompose_population(pop: PopulationLaplacian, G: int) -> dict:
    """Block factorisation of the frozen-covariate population Laplacian.

    With ``n_h`` the true group counts, ``Obar``/``Qbar`` the per-group
    degrees and ``Ncal = diag(sqrt(n_h))``, the ``G x G`` core
    ``Ncal(x) Obar^{-1/2} B Qbar^{-1/2} Ncal(x')`` has SVD ``zU diag(lam) zV^T``
    and the Laplacian equals ``Theta_x Ncal(x)^{-1} zU diag(lam) zV^T Ncal(x')^{-1} Theta_x'^T``.
    Empty groups are dropped from the core.
    """
    n_x = np.bincount(pop.labels_x, minlength=G)
    n_xp = np.bincount(pop.labels_xp, minlength=G)
    B = pop.B_point
    O_bar = B @ n_xp + pop.tau
    Q_bar = n_x @ B + pop.tau
    rows, cols = np.flatnonzero(n_x), np.flatnonzero(n_xp)
    core = (np.sqrt(n_x[rows]) / np.sqrt(O_bar[rows]))[:, None] * B[np.ix_(rows, cols)] \
        * (np.sqrt(n_xp[cols]) / np.sqrt(Q_bar[cols]))[None, :]
    zU, lam, zVt = np.linalg.svd(core)
    ZU = zU / np.sqrt(n_x[rows])[:, None]
    ZV = zVt.T / np.sqrt(n_xp[cols])[:, None]
    r = len(lam)
    rank_x = {h: i for i, h in enumerate(rows)}
    rank_xp = {h: i for i, h in enumerate(cols)}
    theta_x = np.zeros((len(pop.labels_x), len(rows)))
    theta_x[np.arange(len(pop.labels_x)), [rank_x[h] for h in pop.labels_x]] = 1
    theta_xp = np.zeros((len(pop.labels_xp), len(cols)))
    theta_xp[np.arange(len(pop.labels_xp)), [rank_xp[h] for h in pop.labels_xp]] = 1
    reconstructed = theta_x @ ZU[:, :r] @ np.diag(lam) @ ZV[:, :r].T @ theta_xp.T
    return {
        "n_x": n_x, "n_xp": n_xp, "groups_x": rows, "groups_xp": cols,
        "O_bar": O_bar, "Q_bar": Q_bar, "core": core,
        "zU": zU, "zV": zVt.T, "singular_values": lam,
        "Z_U": ZU, "Z_V": ZV, "reconstructed": reconstructed,
    }

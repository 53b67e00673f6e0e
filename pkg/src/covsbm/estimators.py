"""Plug-in estimators of pi(x) and B(x, x'), oracle versions and label alignment."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

EXACT_PERMUTATION_MAX_G = 8


def _labels(theta_or_labels, G: Optional[int] = None) -> np.ndarray:
    a = np.asarray(theta_or_labels)
    if a.ndim == 2:
        if np.any(a.sum(axis=1) != 1):
            raise ValueError("membership matrix rows must contain exactly one 1")
        return np.argmax(a, axis=1)
    return a.astype(np.int64)


def estimate_pi(theta_hat, k: Optional[int] = None, G: Optional[int] = None) -> np.ndarray:
    """``pi_hat_h = n_hat_h / k``; accepts a membership matrix or a label vector."""
    a = np.asarray(theta_hat)
    if a.ndim == 2:
        G = a.shape[1] if G is None else G
    labels = _labels(a)
    k = len(labels) if k is None else k
    G = int(labels.max()) + 1 if G is None else G
    return np.bincount(labels, minlength=G) / k


def estimate_B(A_eta, theta_x, theta_xp, G: Optional[int] = None, eta_x=None, eta_xp=None,
               mode: str = "exclude") -> np.ndarray:
    """Block averages of the localized adjacency over estimated communities.

    ``B_hat_gh = sum_{g_hat(i)=g, g_hat(j)=h} A_ij / (n_hat_g(x) n_hat_h(x'))``.
    In ``"exclude"`` mode, when node indices are given and the two
    neighbourhoods overlap, the structural-zero pairs ``i == j`` are removed
    from numerator and denominator; ``"literal"`` keeps them. Entries with an
    empty estimated group are NaN (undefined), never 0.
    """
    if mode not in ("exclude", "literal"):
        raise ValueError(f"unknown mode {mode!r}")
    A_eta = np.asarray(A_eta, dtype=float)
    if G is None:
        G = np.asarray(theta_x).shape[1] if np.asarray(theta_x).ndim == 2 else None
    lx, lxp = _labels(theta_x), _labels(theta_xp)
    if G is None:
        G = int(max(lx.max(), lxp.max())) + 1
    Tx = np.zeros((len(lx), G))
    Tx[np.arange(len(lx)), lx] = 1
    Txp = np.zeros((len(lxp), G))
    Txp[np.arange(len(lxp)), lxp] = 1
    sums = Tx.T @ A_eta @ Txp
    denom = np.outer(Tx.sum(0), Txp.sum(0))
    if mode == "exclude" and eta_x is not None and eta_xp is not None:
        eta_x, eta_xp = np.asarray(eta_x), np.asarray(eta_xp)
        _, ia, ib = np.intersect1d(eta_x, eta_xp, return_indices=True)
        if ia.size:
            np.add.at(denom, (lx[ia], lxp[ib]), -1.0)
    out = np.full((G, G), np.nan)
    ok = denom > 0
    out[ok] = sums[ok] / denom[ok]
    return out


def oracle_estimators(A_eta, theta_x, theta_xp, k: Optional[int] = None, G: Optional[int] = None,
                      eta_x=None, eta_xp=None, mode: str = "exclude"):
    """Same formulas evaluated at the true memberships."""
    pi_or = estimate_pi(theta_x, k, G)
    B_or = estimate_B(A_eta, theta_x, theta_xp, G, eta_x, eta_xp, mode)
    return pi_or, B_or


def _all_permutations(G):
    if G > EXACT_PERMUTATION_MAX_G:
        raise ValueError(f"exact permutation search limited to G <= {EXACT_PERMUTATION_MAX_G}")
    return itertools.permutations(range(G))


def align_by_assortativity(B_candidate, disassortative: bool = False) -> np.ndarray:
    """Column permutation ``perm`` maximising ``trace(B[:, perm])`` (minimising if disassortative).

    Undefined (NaN) entries never win. Raises when a row maximum is tied,
    since the trace criterion cannot then separate the candidates.
    """
    B = np.asarray(B_candidate, dtype=float)
    G = B.shape[0]
    fill = np.inf if disassortative else -np.inf
    Bf = np.where(np.isnan(B), fill, B)
    for g in range(G):
        row = Bf[g]
        target = row.min() if disassortative else row.max()
        if np.sum(row == target) > 1:
            raise ValueError(f"tie in row {g} extremum; use align_by_pi_ordering instead")
    best, best_val = None, None
    for perm in _all_permutations(G):
        val = sum(Bf[g, perm[g]] for g in range(G))
        better = best_val is None or (val < best_val if disassortative else val > best_val)
        if better:
            best, best_val = perm, val
    return np.asarray(best, dtype=np.int64)


def align_by_pi_ordering(pi_hat_x, pi_hat_xp):
    """Permutations sorting both estimated pi vectors decreasingly.

    Returns ``(perm_x, perm_xp, tie)``; ties keep index order and set ``tie``.
    """
    px, pxp = np.asarray(pi_hat_x, dtype=float), np.asarray(pi_hat_xp, dtype=float)
    perm_x = np.argsort(-px, kind="stable")
    perm_xp = np.argsort(-pxp, kind="stable")
    tie = bool(len(np.unique(px)) < len(px) or len(np.unique(pxp)) < len(pxp))
    return perm_x, perm_xp, tie


@dataclass
class TruthAlignment:
    mapping: np.ndarray
    misclassified: np.ndarray
    group_sizes: np.ndarray
    measure: float
    empty_groups: list = field(default_factory=list)

    def relabel(self, labels) -> np.ndarray:
        return self.mapping[np.asarray(labels)]


def align_to_truth(theta_hat, theta_true, G: Optional[int] = None) -> TruthAlignment:
    """Relabelling of estimated communities that minimises disagreements with the truth.

    ``mapping[h_hat] = h_true``. Exact search for ``G <= 8``, optimal
    assignment on the confusion matrix above. ``measure`` is
    ``sum_g m_g / n_g`` over true groups with ``n_g > 0``.
    """
    est, true = _labels(theta_hat), _labels(theta_true)
    if len(est) != len(true):
        raise ValueError("memberships over different index sets")
    if G is None:
        G = int(max(est.max(), true.max())) + 1
    conf = np.zeros((G, G), dtype=np.int64)
    np.add.at(conf, (est, true), 1)
    if G <= EXACT_PERMUTATION_MAX_G:
        best, best_agree = None, -1
        for perm in itertools.permutations(range(G)):
            agree = int(sum(conf[h, perm[h]] for h in range(G)))
            if agree > best_agree:
                best, best_agree = perm, agree
        mapping = np.asarray(best, dtype=np.int64)
    else:
        rows, cols = linear_sum_assignment(-conf)
        mapping = np.empty(G, dtype=np.int64)
        mapping[rows] = cols
    mapped = mapping[est]
    sizes = np.bincount(true, minlength=G)
    wrong = np.bincount(true[mapped != true], minlength=G)
    present = sizes > 0
    measure = float(np.sum(wrong[present] / sizes[present]))
    return TruthAlignment(mapping, wrong, sizes, measure, np.flatnonzero(~present).tolist())


def _json_matrix(M):
    return [[None if not np.isfinite(v) else float(v) for v in row] for row in np.atleast_2d(M)]


@dataclass
class EstimationResult:
    x: np.ndarray
    xp: np.ndarray
    k: int
    tau: float
    labels_x: np.ndarray
    labels_xp: np.ndarray
    eta_x: np.ndarray
    eta_xp: np.ndarray
    pi_hat: np.ndarray
    pi_hat_xp: np.ndarray
    B_hat: np.ndarray
    alignment: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_hat_x(self) -> np.ndarray:
        return np.rint(self.pi_hat * self.k).astype(int)

    @property
    def n_hat_xp(self) -> np.ndarray:
        return np.rint(self.pi_hat_xp * self.k).astype(int)

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "xp": self.xp.tolist(),
            "k": self.k,
            "tau": self.tau,
            "pi_hat": self.pi_hat.tolist(),
            "pi_hat_xp": self.pi_hat_xp.tolist(),
            "n_hat_x": self.n_hat_x.tolist(),
            "n_hat_xp": self.n_hat_xp.tolist(),
            "B_hat": _json_matrix(self.B_hat),
            "alignment": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.alignment.items()},
            "neighborhood_x": self.eta_x.tolist(),
            "neighborhood_xp": self.eta_xp.tolist(),
            "labels_x": self.labels_x.tolist(),
            "labels_xp": self.labels_xp.tolist(),
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

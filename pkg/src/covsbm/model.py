"""Covariate stochastic block model: fields, model specification and generator.

Conventions used throughout the package:

* community labels are 0-based integers in ``range(G)``;
* covariates are rows of an ``(N, d)`` float array;
* the adjacency matrix is a dense symmetric ``uint8`` array with zero diagonal.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .streams import as_generator

SIMPLEX_TOL = 1e-12


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[low, high]`` in R^d."""

    low: tuple
    high: tuple

    def __post_init__(self):
        low = tuple(float(v) for v in np.atleast_1d(self.low))
        high = tuple(float(v) for v in np.atleast_1d(self.high))
        if len(low) != len(high):
            raise ValueError("box bounds must have the same dimension")
        if any(h <= l for l, h in zip(low, high)):
            raise ValueError(f"degenerate box low={low} high={high}")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def d(self) -> int:
        return len(self.low)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.high) - np.asarray(self.low)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.low) + np.asarray(self.high))

    def corners(self) -> np.ndarray:
        lo, hi = np.asarray(self.low), np.asarray(self.high)
        bits = np.array(np.meshgrid(*([[0, 1]] * self.d), indexing="ij")).reshape(self.d, -1).T
        return lo + bits * (hi - lo)

    def grid(self, per_axis: int) -> np.ndarray:
        """Regular grid with ``per_axis`` points per coordinate, endpoints included."""
        axes = [np.linspace(l, h, per_axis) for l, h in zip(self.low, self.high)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def contains(self, X, atol: float = 0.0) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= np.asarray(self.low) - atol) & (X <= np.asarray(self.high) + atol), axis=1)

    def to_dict(self) -> dict:
        return {"low": list(self.low), "high": list(self.high)}


# ---------------------------------------------------------------------------
# Edge-probability fields
# ---------------------------------------------------------------------------


class EdgeField:
    """Matrix-valued edge probability ``(x, x') -> B(x, x')`` of shape ``(G, G)``.

    Subclasses implement :meth:`pairwise`, the vectorised evaluation of
    ``B_{g_a[i], g_b[j]}(X_a[i], X_b[j])``.
    """

    name = "custom"
    G: int
    rho: float = 1.0

    def pairwise(self, Xa, ga, Xb, gb) -> np.ndarray:
        raise NotImplementedError

    def matrix(self, x, xp) -> np.ndarray:
        labels = np.arange(self.G)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xp = np.atleast_2d(np.asarray(xp, dtype=float))
        return self.pairwise(np.repeat(x, self.G, 0), labels, np.repeat(xp, self.G, 0), labels)

    def at_point(self, x, xp, ga, gb) -> np.ndarray:
        """``B_{ga[i], gb[j]}(x, x')`` for fixed covariates, shape ``(len(ga), len(gb))``."""
        return self.matrix(x, xp)[np.ix_(np.asarray(ga), np.asarray(gb))]

    def lipschitz(self, box: Box) -> Optional[float]:
        return None

    def delta(self, box: Box) -> Optional[float]:
        return None

    def params(self) -> dict:
        raise TypeError(f"{type(self).__name__} cannot be serialised")


class PlantedPartition(EdgeField):
    """Covariate-free field ``B = rho * (q + (p - q) I)``."""

    name = "planted-partition"

    def __init__(self, G: int, p: float, q: float, rho: float = 1.0):
        self.G, self.p, self.q, self.rho = int(G), float(p), float(q), float(rho)
        for v in (self.rho * self.p, self.rho * self.q):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"planted-partition probability {v} outside [0, 1]")

    def base(self) -> np.ndarray:
        return self.q + (self.p - self.q) * np.eye(self.G)

    def pairwise(self, Xa, ga, Xb, gb):
        ga, gb = np.asarray(ga), np.asarray(gb)
        same = ga[:, None] == gb[None, :]
        return self.rho * np.where(same, self.p, self.q)

    def lipschitz(self, box):
        return 0.0

    def lipschitz_base(self, box):
        return 0.0

    def delta(self, box):
        if self.G == 1:
            return self.rho * self.p
        return self.rho * max(self.p, self.q)

    def params(self):
        return {"G": self.G, "p": self.p, "q": self.q, "rho": self.rho}


class LogisticHomophily(EdgeField):
    """``B_gh(x, x') = rho * sigmoid(alpha_gh - beta * ||x - x'||)``."""

    name = "logistic-homophily"

    def __init__(self, alpha, beta: float, rho: float = 1.0):
        alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
        if alpha.shape[0] != alpha.shape[1]:
            raise ValueError("alpha must be square")
        if not np.allclose(alpha, alpha.T, rtol=0, atol=0):
            raise ValueError("alpha must be symmetric so that B_gh(x,x') = B_hg(x',x)")
        if beta < 0:
            raise ValueError("beta must be non-negative")
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"rho={rho} outside [0, 1]")
        self.alpha, self.beta, self.rho = alpha, float(beta), float(rho)
        self.G = alpha.shape[0]

    def pairwise(self, Xa, ga, Xb, gb):
        Xa = np.atleast_2d(np.asarray(Xa, dtype=float))
        Xb = np.atleast_2d(np.asarray(Xb, dtype=float))
        dist = cdist(Xa, Xb) if self.beta else 0.0
        a = self.alpha[np.ix_(np.asarray(ga), np.asarray(gb))]
        return self.rho * sigmoid(a - self.beta * dist)

    def _max_slope(self, box: Box) -> float:
        # sigmoid' over the attainable argument range [alpha - beta*diam, alpha]
        hi = self.alpha
        lo = self.alpha - self.beta * box.diameter
        z = np.clip(0.0, lo, hi)
        s = sigmoid(z)
        return float(np.max(s * (1 - s)))

    def lipschitz_base(self, box):
        return self.beta * math.sqrt(2.0) * self._max_slope(box)

    def lipschitz(self, box):
        return self.rho * self.lipschitz_base(box)

    def delta(self, box):
        far = sigmoid(self.alpha - self.beta * box.diameter)
        return float(self.rho * np.min(np.max(far, axis=1)))

    def params(self):
        return {"alpha": self.alpha.tolist(), "beta": self.beta, "rho": self.rho}


class FunctionEdgeField(EdgeField):
    """User field from a callable ``fn(x, xp) -> (G, G)`` array.

    The callable is symmetrised as ``(B(x,x') + B(x',x)^T) / 2`` so that the
    mirrored upper-triangle sampling stays consistent.
    """

    def __init__(self, fn: Callable, G: int, rho: float = 1.0, symmetrize: bool = True):
        self.fn, self.G, self.rho = fn, int(G), float(rho)
        self.symmetrize = symmetrize
        if symmetrize:
            warnings.warn("user edge field symmetrised as (B(x,x') + B(x',x)^T)/2", stacklevel=2)

    def _eval(self, x, xp):
        b = np.asarray(self.fn(x, xp), dtype=float)
        if self.symmetrize:
            b = 0.5 * (b + np.asarray(self.fn(xp, x), dtype=float).T)
        return self.rho * b

    def pairwise(self, Xa, ga, Xb, gb):
        Xa, Xb = np.atleast_2d(Xa), np.atleast_2d(Xb)
        out = np.empty((len(Xa), len(Xb)))
        for i in range(len(Xa)):
            for j in range(len(Xb)):
                out[i, j] = self._eval(Xa[i], Xb[j])[ga[i], gb[j]]
        return out

    def matrix(self, x, xp):
        return self._eval(np.asarray(x, dtype=float), np.asarray(xp, dtype=float))


# ---------------------------------------------------------------------------
# Community-probability fields
# ---------------------------------------------------------------------------


class PiField:
    name = "custom"
    G: int

    def __call__(self, X) -> np.ndarray:
        raise NotImplementedError

    def lipschitz(self) -> Optional[float]:
        return None

    def mean(self, box: Box) -> Optional[np.ndarray]:
        """Marginal ``P(g = h)`` under the uniform covariate law on ``box``."""
        return None

    def params(self) -> dict:
        raise TypeError(f"{type(self).__name__} cannot be serialised")


class ConstantPi(PiField):
    name = "constant"

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)
        self.G = len(self.weights)
        check_simplex(self.weights[None, :])

    def __call__(self, X):
        X = np.atleast_2d(X)
        return np.broadcast_to(self.weights, (len(X), self.G)).copy()

    def lipschitz(self):
        return 0.0

    def mean(self, box):
        return self.weights.copy()

    def params(self):
        return {"weights": self.weights.tolist()}


class LinearPi(PiField):
    """``pi_h(x) = intercept_h + slope_h . x`` with ``sum(intercept) = 1``, ``sum(slope) = 0``."""

    name = "linear"

    def __init__(self, intercept, slope):
        self.intercept = np.asarray(intercept, dtype=float)
        self.slope = np.atleast_2d(np.asarray(slope, dtype=float))
        if self.slope.shape[0] != len(self.intercept):
            # allow slope given as (d, G)
            self.slope = self.slope.T
        self.G = len(self.intercept)
        if abs(self.intercept.sum() - 1.0) > SIMPLEX_TOL or np.any(np.abs(self.slope.sum(0)) > SIMPLEX_TOL):
            raise ValueError("linear pi must have intercepts summing to 1 and slopes summing to 0")

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.intercept[None, :] + X @ self.slope.T

    def lipschitz(self):
        return float(np.max(np.linalg.norm(self.slope, axis=1)))

    def mean(self, box):
        return self(box.center[None, :])[0]

    def params(self):
        return {"intercept": self.intercept.tolist(), "slope": self.slope.tolist()}


class FunctionPi(PiField):
    def __init__(self, fn: Callable, G: int):
        self.fn, self.G = fn, int(G)

    def __call__(self, X):
        X = np.atleast_2d(X)
        return np.array([np.asarray(self.fn(x), dtype=float) for x in X])


def check_simplex(P: np.ndarray, tol: float = SIMPLEX_TOL) -> None:
    P = np.atleast_2d(P)
    bad_neg = np.flatnonzero(np.any(P < -tol, axis=1))
    bad_sum = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > tol)
    if bad_neg.size or bad_sum.size:
        i = int(bad_neg[0] if bad_neg.size else bad_sum[0])
        raise ValueError(f"pi(x) is not a probability vector at row {i}: {P[i].tolist()}")


# ---------------------------------------------------------------------------
# Model specification
# ---------------------------------------------------------------------------

CONSTANT_NAMES = ("c", "T", "b_X", "U_X", "b_X_bar", "U_X_bar", "l_B", "l_B_base", "l_pi", "Delta", "pi_min")


@dataclass
class ModelSpec:
    """Full generative specification.

    Covariates are uniform on ``support``; the bound constants refer to the
    region ``region`` (defaults to the support). Constants are declared: the
    built-in fields derive them exactly, user fields must supply them.
    """

    G: int
    d: int
    edge: EdgeField
    pi: PiField
    support: Box
    region: Optional[Box] = None
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.region is None:
            self.region = self.support
        if self.support.d != self.d or self.region.d != self.d:
            raise ValueError("box dimension does not match d")
        if self.edge.G != self.G or self.pi.G != self.G:
            raise ValueError("field community counts do not match G")
        derived = derive_constants(self)
        derived.update({k: v for k, v in self.constants.items() if v is not None})
        self.constants = derived

    @property
    def rho(self) -> float:
        return self.edge.rho

    @property
    def has_constants(self) -> bool:
        needed = ("c", "T", "b_X", "U_X_bar", "l_B", "Delta")
        return all(self.constants.get(k) is not None for k in needed)

    def B(self, x, xp) -> np.ndarray:
        return self.edge.matrix(x, xp)

    def sample_covariates(self, N: int, seed) -> np.ndarray:
        rng = as_generator(seed)
        lo, hi = np.asarray(self.support.low), np.asarray(self.support.high)
        return lo + rng.random((int(N), self.d)) * (hi - lo)

    def to_dict(self) -> dict:
        return {
            "G": self.G,
            "d": self.d,
            "edge": {"name": self.edge.name, **self.edge.params()},
            "pi": {"name": self.pi.name, **self.pi.params()},
            "support": self.support.to_dict(),
            "region": self.region.to_dict(),
            "constants": dict(self.constants),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        edge_cfg = dict(data["edge"])
        pi_cfg = dict(data["pi"])
        edge = _edge_from_config(edge_cfg, int(data["G"]))
        pi = _pi_from_config(pi_cfg)
        support = Box(**data["support"])
        region = Box(**data["region"]) if data.get("region") else None
        return cls(int(data["G"]), int(data["d"]), edge, pi, support, region, dict(data.get("constants", {})))


def derive_constants(spec: ModelSpec) -> dict:
    """Exact constants for uniform covariates on a box and built-in fields.

    For a box region, ``lambda(S n B(x, r)) >= 2^-d lambda(B(x, r))`` for all
    ``r`` up to the smallest side, which gives ``c`` and ``T``. Conditional
    densities are ``f(x|g) = pi_g(x) / (P(g) vol)``; the extremes of a linear
    ``pi`` sit at the box corners. ``U_X`` is reported as the (valid, loose)
    upper envelope ``U_X_bar`` and ``b_X_bar`` as ``b_X``.
    """
    S, support = spec.region, spec.support
    out = {k: None for k in CONSTANT_NAMES}
    out["c"] = 2.0 ** (-spec.d)
    out["T"] = float(np.min(S.widths))
    out["l_B"] = spec.edge.lipschitz(S)
    base = getattr(spec.edge, "lipschitz_base", None)
    out["l_B_base"] = base(S) if base else None
    out["Delta"] = spec.edge.delta(S)
    out["l_pi"] = spec.pi.lipschitz()
    marg = spec.pi.mean(support)
    if marg is not None:
        out["pi_min"] = float(np.min(marg))
        pts = S.corners()
        live = marg > 0  # groups of probability zero have no conditional density
        dens = spec.pi(pts)[:, live] / (marg[None, live] * support.volume)
        out["b_X"] = float(np.min(dens))
        out["U_X_bar"] = float(np.max(dens))
        out["U_X"] = out["U_X_bar"]
        out["b_X_bar"] = out["b_X"]
    return out


def _edge_from_config(cfg: dict, G: int) -> EdgeField:
    name = cfg.pop("name")
    if name == "planted-partition":
        return PlantedPartition(cfg.get("G", G), cfg["p"], cfg["q"], cfg.get("rho", 1.0))
    if name == "logistic-homophily":
        return LogisticHomophily(cfg["alpha"], cfg["beta"], cfg.get("rho", 1.0))
    raise ValueError(f"unknown edge field {name!r}; catalog: planted-partition, logistic-homophily")


def _pi_from_config(cfg: dict) -> PiField:
    name = cfg.pop("name")
    if name == "constant":
        return ConstantPi(cfg["weights"])
    if name == "linear":
        return LinearPi(cfg["intercept"], cfg["slope"])
    raise ValueError(f"unknown pi field {name!r}; catalog: constant, linear")


def builtin_fields(name: str, params: dict) -> tuple[EdgeField, PiField]:
    """Look up a catalog model.

    ``params`` holds the edge parameters (``p, q`` or ``alpha, beta``), the
    sparsity ``rho`` and optionally ``pi`` (a config dict, default uniform).
    """
    params = dict(params)
    pi_cfg = params.pop("pi", None)
    if name == "planted-partition":
        edge = PlantedPartition(params.get("G", 2), params["p"], params["q"], params.get("rho", 1.0))
    elif name == "logistic-homophily":
        edge = LogisticHomophily(params["alpha"], params.get("beta", 1.0), params.get("rho", 1.0))
    else:
        raise ValueError(f"unknown model {name!r}; catalog: planted-partition, logistic-homophily")
    if pi_cfg is None:
        pi = ConstantPi(np.full(edge.G, 1.0 / edge.G))
    else:
        pi = _pi_from_config(dict(pi_cfg))
    return edge, pi


def make_model(name: str, params: dict, d: int = 1, support: Optional[Box] = None,
               region: Optional[Box] = None) -> ModelSpec:
    edge, pi = builtin_fields(name, params)
    support = support or Box.unit(d)
    return ModelSpec(edge.G, d, edge, pi, support, region)


# ---------------------------------------------------------------------------
# Networks and sampling
# ---------------------------------------------------------------------------


@dataclass
class Network:
    X: np.ndarray
    A: np.ndarray
    g: Optional[np.ndarray] = None
    G: Optional[int] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.A = np.asarray(self.A, dtype=np.uint8)
        if self.g is not None:
            self.g = np.asarray(self.g, dtype=np.int64)
            if self.G is None:
                self.G = int(self.g.max()) + 1

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def theta(self) -> np.ndarray:
        if self.g is None:
            raise ValueError("network has no community labels")
        return membership_matrix(self.g, self.G)


def membership_matrix(labels, G: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), G), dtype=np.int64)
    out[np.arange(len(labels)), labels] = 1
    return out


def sample_communities(spec: ModelSpec, X, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``g(i) ~ pi(x(i))`` independently; returns ``(labels, Theta)``."""
    rng = as_generator(seed)
    P = spec.pi(X)
    check_simplex(P)
    cum = np.cumsum(P, axis=1)
    u = rng.random(len(P))
    g = np.sum(u[:, None] >= cum[:, :-1], axis=1).astype(np.int64)
    return g, membership_matrix(g, spec.G)


def _check_probabilities(P, rows, cols, mask):
    bad = np.argwhere(((P < 0) | (P > 1) | ~np.isfinite(P)) & mask)
    if bad.size:
        a, b = bad[0]
        raise ValueError(f"edge probability {float(P[a, b])} outside [0, 1] for pair ({rows[a]}, {cols[b]})")


def sample_adjacency(spec: ModelSpec, X, g, seed, nodes=None, noiseless: bool = False,
                     block_rows: int = 512) -> np.ndarray:
    """Symmetric Bernoulli adjacency with zero diagonal.

    Entries ``A_ij``, ``i < j``, are independent ``Bernoulli(B_{g_i g_j}(x_i, x_j))``
    and mirrored. With ``nodes`` given, only the induced subgraph on those
    (sorted, unique) node indices is drawn; its law is the restriction of the
    full graph's law. ``noiseless`` replaces draws by ``round(P)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    g = np.asarray(g)
    if g.min() < 0 or g.max() >= spec.G:
        raise ValueError(f"labels must lie in [0, {spec.G})")
    idx = np.arange(len(X)) if nodes is None else np.asarray(nodes, dtype=np.int64)
    Xs, gs = X[idx], g[idx]
    m = len(idx)
    rng = as_generator(seed)
    A = np.zeros((m, m), dtype=np.uint8)
    for start in range(0, m, block_rows):
        stop = min(m, start + block_rows)
        P = spec.edge.pairwise(Xs[start:stop], gs[start:stop], Xs, gs)
        upper = np.arange(m)[None, :] > np.arange(start, stop)[:, None]
        _check_probabilities(P, idx[start:stop], idx, upper)
        if noiseless:
            draw = np.rint(P) > 0
        else:
            draw = rng.random(P.shape) < P
        A[start:stop] = draw & upper
    return A | A.T


def generate_network(spec: ModelSpec, N: int, seed: int, replication: int = 0) -> Network:
    from .streams import stream

    X = spec.sample_covariates(N, stream(seed, replication, "covariates"))
    g, _ = sample_communities(spec, X, stream(seed, replication, "communities"))
    A = sample_adjacency(spec, X, g, stream(seed, replication, "adjacency"))
    return Network(X, A, g, spec.G)

"""Finite-sample bounds and their conditions, evaluated as plain numbers.

Every lemma record keeps all of its conditions as (lhs, op, rhs) triples
so a report shows how far a failing condition is from holding. Failed or
undefined quantities become ``inf``; NaN is never produced.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .clustering import RANK_TOL

from .model import ModelSpec, unit_ball_volume

INF = float("inf")


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _div(a, b):
    return a / b if b > 0 else INF


def _log(v):
    return math.log(v) if v > 0 else -INF


@dataclass
class BoundInputs:
    N: int
    k: int
    d: int
    G: int
    delta: float
    tau: float
    c: float
    T: float
    b_X: float
    U_X_bar: float
    l_B: float
    Delta: float
    l_pi: Optional[float] = None
    pi_min: Optional[float] = None
    U_X: Optional[float] = None
    b_X_bar: Optional[float] = None
    N_h: Optional[Sequence[int]] = None
    B_point: Optional[np.ndarray] = None
    R_k: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.B_point is not None:
            self.B_point = np.atleast_2d(np.asarray(self.B_point, dtype=float))
        if self.R_k is None:
            self.R_k = upper_radius(self.N, self.k, self.d, self.b_X, self.c)

    @classmethod
    def from_spec(cls, spec: ModelSpec, N: int, k: int, delta: float, tau: float, x=None, xp=None,
                  N_h=None) -> "BoundInputs":
        if not spec.has_constants:
            raise ValueError("model constants missing; bound evaluation disabled")
        c = spec.constants
        B = spec.B(x, xp) if x is not None and xp is not None else None
        return cls(N=int(N), k=int(k), d=spec.d, G=spec.G, delta=float(delta), tau=float(tau),
                   c=c["c"], T=c["T"], b_X=c["b_X"], U_X_bar=c["U_X_bar"], l_B=c["l_B"],
                   Delta=c["Delta"], l_pi=c.get("l_pi"), pi_min=c.get("pi_min"), U_X=c.get("U_X"),
                   b_X_bar=c.get("b_X_bar"), N_h=None if N_h is None else [int(v) for v in N_h],
                   B_point=B)

    @property
    def V_d(self) -> float:
        return unit_ball_volume(self.d)

    @property
    def B_max(self) -> float:
        return float(np.max(self.B_point))

    @property
    def sigma_G(self) -> float:
        s = np.linalg.svd(self.B_point, compute_uv=False)
        if len(s) < self.G or s[self.G - 1] <= RANK_TOL * max(1.0, s[0]):
            return 0.0
        return float(s[self.G - 1])

    def replace(self, **changes) -> "BoundInputs":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        if "R_k" not in changes and any(key in changes for key in ("N", "k", "d", "b_X", "c")):
            data["R_k"] = None
        data.update(changes)
        return BoundInputs(**data)

    def to_dict(self) -> dict:
        out = {}
        for f in self.__dataclass_fields__:
            v = getattr(self, f)
            if isinstance(v, np.ndarray):
                v = v.tolist()
            elif isinstance(v, float):
                v = _num(v)
            out[f] = v
        return out


def upper_radius(N, k, d, b_X, c) -> float:
    return (2.0 * k / (N * b_X * c * unit_ball_volume(d))) ** (1.0 / d)


@dataclass
class Condition:
    id: str
    lhs: float
    rhs: float
    op: str = "<="

    @property
    def passed(self) -> bool:
        if self.op == "<=":
            return bool(self.lhs <= self.rhs)
        if self.op == "<":
            return bool(self.lhs < self.rhs)
        raise ValueError(f"unknown relation {self.op!r}")

    def to_dict(self) -> dict:
        return {"id": self.id, "lhs": _num(self.lhs), "op": self.op, "rhs": _num(self.rhs), "pass": self.passed}


@dataclass
class LemmaRecord:
    name: str
    value: float
    conditions: list = field(default_factory=list)
    terms: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def applicable(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def failed(self) -> list:
        return [c.id for c in self.conditions if not c.passed]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": _num(self.value),
            "applicable": self.applicable,
            "conditions": [c.to_dict() for c in self.conditions],
            "terms": {k: _num(v) for k, v in self.terms.items()},
            "flags": list(self.flags),
        }


CSV_FIELDS = ("lemma", "value", "applicable", "n_conditions", "n_failed", "failed")


@dataclass
class BoundReport:
    inputs: BoundInputs
    lemmas: dict
    quantities: dict = field(default_factory=dict)

    def __getitem__(self, name) -> LemmaRecord:
        return self.lemmas[name]

    def to_dict(self) -> dict:
        return {
            "inputs": self.inputs.to_dict(),
            "quantities": {k: (_num(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v)
                           for k, v in self.quantities.items()},
            "lemmas": {name: rec.to_dict() for name, rec in self.lemmas.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for name, rec in self.lemmas.items():
            w.writerow([name, _num(rec.value), int(rec.applicable), len(rec.conditions),
                        len(rec.failed), ";".join(rec.failed)])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def _exact(v) -> Fraction:
    return Fraction(v) if not isinstance(v, Fraction) else v


def floor_group_size(inputs: BoundInputs):
    """Per-group floors ``floor((c/16)(N_h/N)(b_X/Ubar_X) k)`` and their minimum.

    Without ``N_h`` each group uses the surrogate ``pi_min N / 2``.
    Exact rational arithmetic, so values on an integer boundary never round down.
    """
    if inputs.N_h is not None:
        sizes = [Fraction(int(n)) for n in inputs.N_h]
    else:
        if inputs.pi_min is None:
            raise ValueError("need N_h or pi_min")
        sizes = [_exact(inputs.pi_min) * inputs.N / 2] * inputs.G
    scale = _exact(inputs.c) / 16 * _exact(inputs.b_X) / _exact(inputs.U_X_bar) * inputs.k / inputs.N
    floors = [math.floor(scale * n) for n in sizes]
    return floors, min(floors)


def pi_floor(inputs: BoundInputs) -> int:
    """``floor(pi_min c b_X k / (32 Ubar_X))``."""
    if inputs.pi_min is None:
        raise ValueError("pi_min required")
    val = _exact(inputs.pi_min) * _exact(inputs.c) * _exact(inputs.b_X) * inputs.k / (32 * _exact(inputs.U_X_bar))
    return math.floor(val)


def laplacian_bound(inputs: BoundInputs, degree: float, log_multiplier: float = 8.0,
                    delta: Optional[float] = None) -> float:
    """``4 sqrt(3 ln(m k/delta)/(D+tau)) + (2 k l_B R_k/(D+tau)) (2 k l_B R_k/(D+tau) + 3)``.

    ``degree`` is ``d_min`` (``m = 8``) or ``Delta * floor`` (``m = 24`` and
    upward for the integrated lemmas).
    """
    delta = inputs.delta if delta is None else delta
    denom = degree + inputs.tau
    if not denom > 0:
        return INF
    variance = 4.0 * math.sqrt(3.0 * math.log(log_multiplier * inputs.k / delta) / denom)
    bias = 2.0 * inputs.k * inputs.l_B * inputs.R_k / denom
    return variance + bias * (bias + 3.0)


def sigma_G_lower(inputs: BoundInputs, group_floor: float):
    """``sigma_G(B) min_h n_h / (||B||_max k + tau)``; returns ``(value, rank_deficient)``."""
    sig = inputs.sigma_G
    if sig <= 0:
        return 0.0, True
    denom = inputs.B_max * inputs.k + inputs.tau
    return _div(sig * group_floor, denom), False


def clustering_constraint(inputs: BoundInputs, group_floor: int, delta_tilde: float, log_multiplier: float,
                          cid: str) -> Condition:
    """Deviation bound at ``Delta * floor`` strictly below ``16 sqrt(2G)`` times the singular-value bound."""
    lhs = laplacian_bound(inputs, inputs.Delta * group_floor, log_multiplier, delta_tilde)
    lam, _ = sigma_G_lower(inputs, group_floor)
    return Condition(cid, lhs, 16.0 * math.sqrt(2.0 * inputs.G) * lam, "<")


def _prefactor(inputs: BoundInputs, group_floor: int, scale: float) -> float:
    sig = inputs.sigma_G
    if sig <= 0 or group_floor <= 0:
        return INF
    return scale * inputs.G * (inputs.B_max * inputs.k + inputs.tau) ** 2 / (sig ** 2 * group_floor ** 2)


def _times(a, b):
    if a == 0 or b == 0:
        return 0.0
    return a * b


def _k_range(inputs: BoundInputs, gn_mult: float, n_mult: float, prefix="") -> list:
    d, N, G, dl = inputs.d, inputs.N, inputs.G, inputs.delta
    V, T = inputs.V_d, inputs.T
    k_min = max(12 * d * _log(gn_mult * G * N / dl), 24 * d * _log(n_mult * N / dl))
    k_max = min(8 * T ** d * V * inputs.U_X_bar * N, 0.5 * T ** d * V * inputs.b_X * inputs.c * N)
    return [Condition(prefix + "k_min", k_min, inputs.k), Condition(prefix + "k_max", inputs.k, k_max)]


def _group_floor_conditions(inputs: BoundInputs, mult: float, prefix="floor_arg") -> list:
    if inputs.N_h is None:
        raise ValueError("per-group conditions need N_h")
    out = []
    for h, n in enumerate(inputs.N_h):
        arg = inputs.c / 16 * n / inputs.N * inputs.b_X / inputs.U_X_bar * inputs.k
        rhs = 24 * inputs.d * _log(mult * inputs.G * n / inputs.delta) + 1 if n > 0 else INF
        out.append(Condition(f"{prefix}[{h}]", rhs, arg))
    return out


# ---------------------------------------------------------------------------
# Lemmas
# ---------------------------------------------------------------------------

def deviation_bound(inputs: BoundInputs, d_min: Optional[float], sup_radius: Optional[float] = None) -> LemmaRecord:
    """Bound conditional on covariates and labels, at the observed minimum degree."""
    flags = []
    if d_min is None:
        flags.append("d_min unavailable")
        return LemmaRecord("boundLaplacians", INF, [Condition("min_degree", INF, inputs.tau)], flags=flags)
    conds = [Condition("min_degree", 3 * math.log(8 * inputs.k / inputs.delta), d_min + inputs.tau)]
    if sup_radius is None:
        flags.append("sup radius not evaluated")
    else:
        conds.insert(0, Condition("sup_radius", sup_radius, inputs.R_k))
    val = laplacian_bound(inputs, d_min, 8.0)
    return LemmaRecord("boundLaplacians", val, conds, flags=flags)


def group_size_bound(inputs: BoundInputs) -> LemmaRecord:
    d, N, G, dl = inputs.d, inputs.N, inputs.G, inputs.delta
    floors, F = floor_group_size(inputs)
    conds = [
        Condition("k_min", 12 * d * math.log(24 * G * N / dl), inputs.k),
        Condition("k_max", inputs.k, 8 * inputs.T ** d * inputs.V_d * inputs.U_X_bar * N),
    ] + _group_floor_conditions(inputs, 24)
    return LemmaRecord("bdlocalgpsize", float(F), conds, terms={f"floor[{h}]": float(v) for h, v in enumerate(floors)})


def degree_bound(inputs: BoundInputs) -> LemmaRecord:
    rec = group_size_bound(inputs)
    return LemmaRecord("bdlocaldegree", inputs.Delta * rec.value, rec.conditions, rec.terms)


def integrated_bound(inputs: BoundInputs) -> LemmaRecord:
    _, F = floor_group_size(inputs)
    D = inputs.Delta * F
    conds = [Condition("min_degree", 3 * math.log(24 * inputs.k / inputs.delta), D + inputs.tau)]
    conds += _k_range(inputs, 72, 36)
    conds += _group_floor_conditions(inputs, 72)
    return LemmaRecord("integr", laplacian_bound(inputs, D, 24.0), conds, terms={"floor": float(F)})


def misclustering_bound(inputs: BoundInputs) -> LemmaRecord:
    """Bound on the misclustering measure, with the deterministic clustering constraint at ``delta/3``."""
    base = integrated_bound(inputs)
    F = int(base.terms["floor"])
    conds = list(base.conditions)
    conds.append(clustering_constraint(inputs, F, inputs.delta / 3, 8.0, "clustering_constraint"))
    pre = _prefactor(inputs, F, 512.0)
    dev = base.value
    val = INF if math.isinf(pre) or math.isinf(dev) else pre * dev ** 2
    flags = ["rank-deficient B"] if inputs.sigma_G <= 0 else []
    return LemmaRecord("clustRate", val, conds, {"prefactor": pre, "deviation": dev, "floor": float(F)}, flags)


def _graphon_value(inputs: BoundInputs, F: int, log_multiplier: float):
    pre = _prefactor(inputs, F, 1024.0)
    dev = laplacian_bound(inputs, inputs.Delta * F, log_multiplier)
    ratio = _div(inputs.k, F) + _div(inputs.k ** 2, F ** 2) if F > 0 else INF
    if math.isinf(pre) or math.isinf(dev) or math.isinf(ratio):
        clus = INF
    else:
        clus = _times(pre * ratio, dev ** 2)
    bias = 2.0 * inputs.l_B * inputs.R_k
    var = _div(math.sqrt(2.0 * math.log(4.0 / inputs.delta)), F)
    return clus + bias + var, {"clustering": clus, "bias": bias, "variance": var, "floor": float(F)}


def graphon_bound_given_labels(inputs: BoundInputs) -> LemmaRecord:
    _, F = floor_group_size(inputs)
    D = inputs.Delta * F
    conds = [Condition("min_degree", 3 * math.log(48 * inputs.k / inputs.delta), D + inputs.tau)]
    conds += _k_range(inputs, 144, 72)
    conds += _group_floor_conditions(inputs, 144)
    conds.append(clustering_constraint(inputs, F, inputs.delta / 6, 8.0, "clustering_constraint"))
    val, terms = _graphon_value(inputs, F, 48.0)
    return LemmaRecord("rate_BHat_g", val, conds, terms)


def _pi_conditions(inputs: BoundInputs, Fpi: int, log_mult: float, gn_mult: float, n_mult: float,
                   constraint_delta: float, n_log_arg: float) -> list:
    d, N, G, dl = inputs.d, inputs.N, inputs.G, inputs.delta
    arg = inputs.pi_min * inputs.c * inputs.b_X / (32 * inputs.U_X_bar) * inputs.k
    conds = [Condition("min_degree", 3 * math.log(log_mult * inputs.k / dl), inputs.Delta * Fpi + inputs.tau)]
    conds += _k_range(inputs, gn_mult, n_mult)
    conds.append(Condition("floor_arg", 24 * d * math.log(gn_mult * G * N / dl) + 1, arg))
    conds.append(clustering_constraint(inputs, Fpi, constraint_delta, 24.0, "clustering_constraint"))
    conds.append(Condition("sample_size", 8 * math.log(n_log_arg * G / dl) / inputs.pi_min ** 2, N))
    return conds


def pi_bound(inputs: BoundInputs) -> LemmaRecord:
    if inputs.pi_min is None or inputs.l_pi is None:
        return LemmaRecord("rate_piHat", INF, [], flags=["pi constants missing"])
    d, N, dl, k = inputs.d, inputs.N, inputs.delta, inputs.k
    Fpi = pi_floor(inputs)
    conds = _pi_conditions(inputs, Fpi, 72, 216, 108, dl / 3, 3)
    conds.insert(-1, Condition("k_min_log", 2 ** 8 * d * math.log(24 / dl) * math.log(N), k))
    conds.insert(-1, Condition("k_max_radius", k, inputs.c * inputs.V_d * inputs.b_X * inputs.T ** d * N / 2))
    pre = _prefactor(inputs, Fpi, 512.0)
    dev = laplacian_bound(inputs, inputs.Delta * Fpi, 72.0)
    clus = INF if math.isinf(pre) or math.isinf(dev) else _times(pre, dev ** 2)
    bias = inputs.l_pi * inputs.R_k
    var = 2.0 * math.sqrt((d * math.log(N) + math.log(6.0 / dl)) / k)
    return LemmaRecord("rate_piHat", clus + bias + var, conds,
                       {"clustering": clus, "bias": bias, "variance": var, "floor": float(Fpi)})


def graphon_bound(inputs: BoundInputs) -> LemmaRecord:
    """Unconditional-label version with the pi_min floor; evaluated as displayed (``48k/delta``, ``ln(4/delta)``)."""
    if inputs.pi_min is None:
        return LemmaRecord("rate_BHat", INF, [], flags=["pi_min missing"])
    Fpi = pi_floor(inputs)
    conds = _pi_conditions(inputs, Fpi, 96, 288, 144, inputs.delta / 12, 2)
    val, terms = _graphon_value(inputs, Fpi, 48.0)
    return LemmaRecord("rate_BHat", val, conds, terms, ["statement conditioning on labels is ambiguous"])


def estimator_bounds(inputs: BoundInputs) -> dict:
    out = {"rate_piHat": pi_bound(inputs), "rate_BHat": graphon_bound(inputs)}
    if inputs.N_h is not None:
        out["rate_BHat_g"] = graphon_bound_given_labels(inputs)
    return out


def optimal_k(N: int, d: int = 1, rho: float = 1.0):
    """Suggested ``k = round((N^2 / rho^d)^(1/(d+2)))`` and the implied rate ``(rho N)^(-1/(d+2))``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    k = int(round((N ** 2 / rho ** d) ** (1.0 / (d + 2))))
    return min(max(k, 1), int(N)), (rho * N) ** (-1.0 / (d + 2))


def bound_report(inputs: BoundInputs, d_min: Optional[float] = None, sup_radius: Optional[float] = None) -> BoundReport:
    """All lemma records for one query pair."""
    lemmas = {"boundLaplacians": deviation_bound(inputs, d_min, sup_radius)}
    quantities = {"R_k": inputs.R_k, "V_d": inputs.V_d}
    if inputs.pi_min is not None:
        Fpi = pi_floor(inputs)
        quantities["pi_floor"] = Fpi
    if inputs.N_h is not None:
        lemmas["bdlocalgpsize"] = group_size_bound(inputs)
        lemmas["bdlocaldegree"] = degree_bound(inputs)
        lemmas["integr"] = integrated_bound(inputs)
        quantities["group_floor"] = int(lemmas["integr"].terms["floor"])
    if inputs.B_point is not None:
        quantities["B_max"] = inputs.B_max
        quantities["sigma_G"] = inputs.sigma_G
        if inputs.N_h is not None:
            lemmas["clustRate"] = misclustering_bound(inputs)
            lemmas["clusteringConstraintDeterm"] = LemmaRecord(
                "clusteringConstraintDeterm", 0.0,
                [clustering_constraint(inputs, quantities["group_floor"], inputs.delta, 8.0, "constraint")])
        if inputs.pi_min is not None:
            lemmas["clusteringConstraintIntegr"] = LemmaRecord(
                "clusteringConstraintIntegr", 0.0,
                [clustering_constraint(inputs, quantities["pi_floor"], inputs.delta, 24.0, "constraint")])
        lemmas.update(estimator_bounds(inputs))
    k_opt, rate = optimal_k(inputs.N, inputs.d)
    quantities["optimal_k"] = k_opt
    quantities["rate"] = rate
    return BoundReport(inputs, lemmas, quantities)

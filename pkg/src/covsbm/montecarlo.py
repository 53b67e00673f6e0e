"""Replicated experiments: empirical deviations, errors and bound coverage, rate slopes."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .bounds import BoundInputs, bound_report, optimal_k
from .clustering import ClusteringConfig, cluster_neighborhoods, procrustes, top_svd
from .estimators import align_to_truth, estimate_B, estimate_pi
from .laplacian import dilation_norm, laplacian, mean_degree, min_degree, population_laplacians
from .model import Box, ModelSpec, make_model, sample_adjacency, sample_communities
from .neighbors import kth_distances, knn_radius, radius_envelopes
from .pipeline import local_positions
from .streams import stream

METRIC_GROUPS = ("radius", "laplacian", "clustering", "estimation", "bounds")

# check name -> (metric column, bound column or None, lemma whose conditions define the stratum, relation)
CHECKS = {
    "radius_upper": ("sup_rk", "R_upper", "radius_upper", "<="),
    "radius_lower": ("inf_rk", "R_lower", "radius_lower", ">="),
    "laplacian_given_x": ("dev", "bound_boundLaplacians", "boundLaplacians", "<="),
    "laplacian": ("dev", "bound_integr", "integr", "<="),
    "group_size": ("min_group_count", "bound_bdlocalgpsize", "bdlocalgpsize", ">="),
    "degree": ("d_min", "bound_bdlocaldegree", "bdlocaldegree", ">="),
    "misclustering": ("S_measure_x", "bound_clustRate", "clustRate", "<="),
    "B_given_labels": ("B_err_max", "bound_rate_BHat_g", "rate_BHat_g", "<="),
    "B": ("B_err_max", "bound_rate_BHat", "rate_BHat", "<="),
    "pi": ("pi_err", "bound_rate_piHat", "rate_piHat", "<="),
    "davis_kahan": ("dk_lhs", "dk_rhs", None, "<="),
}

LEMMAS = ("boundLaplacians", "bdlocalgpsize", "bdlocaldegree", "integr", "clustRate",
          "rate_BHat_g", "rate_BHat", "rate_piHat")

RECORD_FIELDS = (
    "N", "k", "query", "rep", "status", "tau",
    "sup_rk", "inf_rk", "R_upper", "R_lower", "applicable_radius_upper", "applicable_radius_lower",
    "min_group_count", "dev", "dev_xg", "d_min", "lambda_G", "dk_lhs", "dk_rhs", "dk_lhs_V",
    "S_measure_x", "S_measure_xp", "misclass_x", "misclass_xp",
    "pi_err", "B_err", "B_err_max", "B_or_err_max", "kmeans_eps_x", "kmeans_eps_xp",
) + tuple(f"bound_{name}" for name in LEMMAS) + tuple(f"applicable_{name}" for name in LEMMAS)


@dataclass
class ExperimentPlan:
    """Experiment configuration; see ``from_dict`` for the JSON schema."""

    model: ModelSpec
    N: list
    k: object = None
    tau: object = 0.0
    delta: float = 0.1
    replications: int = 100
    seed: int = 0
    queries: list = field(default_factory=list)
    grid_size: int = 50
    metrics: list = field(default_factory=lambda: list(METRIC_GROUPS))
    checks: list = field(default_factory=list)
    adjacency: str = "local"
    noiseless: bool = False
    restarts: int = 10
    mode: str = "exclude"

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        self.N = [int(n) for n in np.atleast_1d(self.N)]
        self.queries = [(np.atleast_1d(np.asarray(a, dtype=float)), np.atleast_1d(np.asarray(b, dtype=float)))
                        for a, b in self.queries]
        for a, b in self.queries:
            pts = np.vstack([a, b])
            if pts.shape[1] != self.model.d or not np.all(self.model.region.contains(pts, atol=1e-12)):
                raise ValueError(f"query pair {a.tolist()}, {b.tolist()} not inside the region")
        unknown = set(self.metrics) - set(METRIC_GROUPS)
        if unknown:
            raise ValueError(f"unknown metric groups {sorted(unknown)}")
        unknown = set(self.checks) - set(CHECKS)
        if unknown:
            raise ValueError(f"unknown checks {sorted(unknown)}")
        if self.adjacency not in ("local", "full"):
            raise ValueError("adjacency must be 'local' or 'full'")
        if not (self.tau == "mean" or float(self.tau) >= 0):
            raise ValueError("tau must be 'mean' or a non-negative number")

    def k_values(self, N: int) -> list:
        k = self.k
        if isinstance(k, dict):
            k = k.get(str(N), k.get(N))
        if k is None or k == "optimal":
            return [optimal_k(N, self.model.d, self.model.rho)[0]]
        return [int(v) for v in np.atleast_1d(k)]

    def cells(self) -> list:
        return [(N, k) for N in self.N for k in self.k_values(N)]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        """Schema::

            {"model": <model.json content> | {"name": ..., "params": {...}, "d": 1},
             "N": [int], "k": null | int | [int] | {"<N>": int | [int]},
             "tau": 0 | "mean", "delta": 0.1, "replications": 200, "seed": 0,
             "queries": [[x, x'], ...], "grid_size": 50,
             "metrics": [...], "checks": [...], "adjacency": "local" | "full",
             "noiseless": false, "restarts": 10, "mode": "exclude" | "literal"}
        """
        data = dict(data)
        m = data.pop("model")
        if "edge" in m:
            spec = ModelSpec.from_dict(m)
        else:
            support = Box(**m["support"]) if m.get("support") else None
            spec = make_model(m["name"], m.get("params", {}), d=m.get("d", 1), support=support)
        return cls(model=spec, **data)

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(), "N": self.N, "k": self.k, "tau": self.tau, "delta": self.delta,
            "replications": self.replications, "seed": self.seed,
            "queries": [[a.tolist(), b.tolist()] for a, b in self.queries], "grid_size": self.grid_size,
            "metrics": list(self.metrics), "checks": list(self.checks), "adjacency": self.adjacency,
            "noiseless": self.noiseless, "restarts": self.restarts, "mode": self.mode,
        }


def _cell_seed(plan: ExperimentPlan, N: int, k: int) -> int:
    # distinct base seed per (N, k) cell so cells are independent experiments
    return int(np.random.SeedSequence([plan.seed, N, k]).generate_state(1)[0])


def _kmeans_seed(base: int, rep: int, q: int) -> int:
    return int(np.random.SeedSequence([base, rep, q]).generate_state(1)[0])


def _grid_group_minimum(X, g, G, grid, k) -> int:
    """``min_h min_{x in grid} n_h(x)``, the empirical counterpart of the group-size floor."""
    best = None
    step = max(1, 2_000_000 // max(1, X.size))
    for s in range(0, len(grid), step):
        block = grid[s:s + step]
        dist = np.sqrt(np.sum((block[:, None, :] - X[None, :, :]) ** 2, axis=2))
        idx = np.argsort(dist, axis=1, kind="stable")[:, :k]
        counts = np.stack([np.sum(g[idx] == h, axis=1) for h in range(G)], axis=1)
        m = int(counts.min())
        best = m if best is None else min(best, m)
    return best


def misclustering_measure(U_bar, U_pop_rot, labels_true, G) -> tuple[float, np.ndarray]:
    """``sum_g |S_g| / n_g`` where ``S_g`` holds the nodes of true group ``g`` whose centroid row
    is at least ``(1/2) sqrt(1/n_g + 1/max_{l != g} n_l)`` from the rotated population row."""
    n = np.bincount(labels_true, minlength=G)
    dist = np.linalg.norm(U_bar - U_pop_rot, axis=1)
    sizes = np.zeros(G, dtype=np.int64)
    total = 0.0
    for g in range(G):
        if n[g] == 0:
            continue
        others = [n[l] for l in range(G) if l != g]
        inv_other = 1.0 / max(others) if others and max(others) > 0 else 0.0
        thresh = 0.5 * math.sqrt(1.0 / n[g] + inv_other)
        sizes[g] = int(np.sum(dist[labels_true == g] >= thresh))
        total += sizes[g] / n[g]
    return float(total), sizes


def _query_metrics(plan, spec, X, g, A_loc, nodes, x, xp, k, delta, kseed, want, rec, sup_rk):
    G = spec.G
    nb_x, nb_xp = knn_radius(X, x, k, g, G), knn_radius(X, xp, k, g, G)
    ex, exp_ = nb_x.members, nb_xp.members
    A_eta = A_loc[np.ix_(local_positions(nodes, ex), local_positions(nodes, exp_))]
    tau = mean_degree(A_eta) if plan.tau == "mean" else float(plan.tau)
    rec["tau"] = tau
    lap = laplacian(A_eta, tau)
    gx, gxp = g[ex], g[exp_]
    config = ClusteringConfig(G, restarts=plan.restarts, seed=kseed)
    co = cluster_neighborhoods(lap.L, config)
    rec["kmeans_eps_x"], rec["kmeans_eps_xp"] = co.kmeans_x.epsilon, co.kmeans_xp.epsilon
    need_pop = want & {"laplacian", "clustering", "bounds"}
    d_min = None
    if need_pop:
        pop = population_laplacians(spec, X, g, ex, exp_, x, xp, tau)
        rec["dev"] = dilation_norm(lap.L - pop.L_xx)
        rec["dev_xg"] = dilation_norm(lap.L - pop.L_xg)
        d_min = min_degree(pop)
        rec["d_min"] = d_min
    if "clustering" in want:
        pop_dec = top_svd(pop.L_xx, G)
        lam = float(pop_dec.sigma[-1])
        rec["lambda_G"] = lam
        U, V = co.decomposition.U, co.decomposition.V
        QU = procrustes(U, pop_dec.U)
        QV = procrustes(V, pop_dec.V)
        rec["dk_lhs"] = float(np.linalg.norm(U - pop_dec.U @ QU))
        rec["dk_lhs_V"] = float(np.linalg.norm(V - pop_dec.V @ QV))
        rec["dk_rhs"] = 4.0 * math.sqrt(2.0 * G) / lam * rec["dev"] if lam > 0 else math.inf
        U_bar = co.kmeans_x.centroids[co.labels_x]
        V_bar = co.kmeans_xp.centroids[co.labels_xp]
        rec["S_measure_x"] = misclustering_measure(U_bar, pop_dec.U @ QU, gx, G)[0]
        rec["S_measure_xp"] = misclustering_measure(V_bar, pop_dec.V @ QV, gxp, G)[0]
    al_x = align_to_truth(co.labels_x, gx, G)
    al_xp = align_to_truth(co.labels_xp, gxp, G)
    rec["misclass_x"], rec["misclass_xp"] = al_x.measure, al_xp.measure
    if "estimation" in want or "bounds" in want:
        lx, lxp = al_x.relabel(co.labels_x), al_xp.relabel(co.labels_xp)
        pi_hat = estimate_pi(lx, k, G)
        rec["pi_err"] = float(np.max(np.abs(pi_hat - spec.pi(np.atleast_2d(x))[0])))
        B_true = spec.B(x, xp)
        err = np.abs(estimate_B(A_eta, lx, lxp, G, ex, exp_, plan.mode) - B_true)
        rec["B_err"] = float(np.mean(err)) if np.all(np.isfinite(err)) else math.inf
        rec["B_err_max"] = float(np.max(err)) if np.all(np.isfinite(err)) else math.inf
        err_or = np.abs(estimate_B(A_eta, gx, gxp, G, ex, exp_, plan.mode) - B_true)
        rec["B_or_err_max"] = float(np.max(err_or)) if np.all(np.isfinite(err_or)) else math.inf
    if "bounds" in want and spec.has_constants:
        inputs = BoundInputs.from_spec(spec, len(X), k, delta, tau, x, xp, N_h=np.bincount(g, minlength=G))
        report = bound_report(inputs, d_min, sup_rk)
        for name in LEMMAS:
            if name in report.lemmas:
                rec[f"bound_{name}"] = report[name].value
                rec[f"applicable_{name}"] = int(report[name].applicable)


def run_replication(plan: ExperimentPlan, rep: int, N: Optional[int] = None, k: Optional[int] = None) -> list:
    """One replication of one (N, k) cell: a list of records, one per query pair.

    Pipeline failures are caught and stored in ``status``; they never abort the batch.
    """
    if N is None or k is None:
        N, k = plan.cells()[0]
    spec = plan.model
    want = set(plan.metrics)
    base = _cell_seed(plan, N, k)
    X = spec.sample_covariates(N, stream(base, rep, "covariates"))
    g, _ = sample_communities(spec, X, stream(base, rep, "communities"))
    shared = {"N": N, "k": k, "rep": rep, "status": "ok"}
    sup_rk = inf_rk = None
    if "radius" in want or "bounds" in want:
        env = radius_envelopes(spec, N, k, plan.delta)
        if plan.grid_size > 0:
            grid = spec.region.grid(plan.grid_size)
            rk = kth_distances(X, grid, k)
            sup_rk, inf_rk = float(rk.max()), float(rk.min())
            shared.update(sup_rk=sup_rk, inf_rk=inf_rk)
            if "bounds" in want:
                shared["min_group_count"] = _grid_group_minimum(X, g, spec.G, grid, k)
        shared.update(R_upper=env.R_upper, R_lower=env.R_lower if env.R_lower is not None else -math.inf,
                      applicable_radius_upper=int(env.upper_applicable),
                      applicable_radius_lower=int(env.lower_applicable))
    records = []
    pipeline = want - {"radius"}
    if not pipeline or not plan.queries:
        rec = dict(shared, query=-1)
        return [rec]
    try:
        if plan.adjacency == "local":
            members = [knn_radius(X, q, k).members for pair in plan.queries for q in pair]
            nodes = np.unique(np.concatenate(members))
        else:
            nodes = None
        A_loc = sample_adjacency(spec, X, g, stream(base, rep, "adjacency"), nodes=nodes, noiseless=plan.noiseless)
    except Exception as exc:  # recorded, not fatal
        return [dict(shared, query=q, status=f"error: {type(exc).__name__}: {exc}")
                for q in range(len(plan.queries))]
    for q, (x, xp) in enumerate(plan.queries):
        rec = dict(shared, query=q)
        try:
            _query_metrics(plan, spec, X, g, A_loc, nodes, x, xp, k, plan.delta,
                           _kmeans_seed(base, rep, q), pipeline, rec, sup_rk)
        except Exception as exc:  # recorded, not fatal
            rec["status"] = f"error: {type(exc).__name__}: {exc}"
        records.append(rec)
    return records


def run_plan(plan: ExperimentPlan) -> list:
    records = []
    for N, k in plan.cells():
        for rep in range(plan.replications):
            records.extend(run_replication(plan, rep, N, k))
    return sort_records(records)


def sort_records(records: Sequence[dict]) -> list:
    return sorted(records, key=lambda r: (r["N"], r["k"], r["query"], r["rep"]))


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

@dataclass
class Coverage:
    fraction: float
    se: float
    n: int
    passed: int

    def to_dict(self) -> dict:
        return {"fraction": self.fraction, "se": self.se, "n": self.n, "passed": self.passed}


def coverage(records, metric, bound=None, relation: str = "<=") -> Coverage:
    """Fraction of records with ``metric <= bound`` and its binomial standard error.

    ``records`` may be a list of dicts (``metric``/``bound`` are keys) or a
    boolean indicator sequence.
    """
    if bound is None and metric is None:
        ok = np.asarray(records, dtype=bool)
    elif bound is None:
        ok = np.asarray([bool(r[metric]) for r in records])
    else:
        vals = [(r.get(metric), r.get(bound)) for r in records]
        if relation == "<=":
            ok = np.asarray([m is not None and b is not None and m <= b for m, b in vals])
        else:
            ok = np.asarray([m is not None and b is not None and m >= b for m, b in vals])
    n = len(ok)
    if n == 0:
        raise ValueError("coverage needs at least one record")
    p = float(ok.mean())
    return Coverage(p, math.sqrt(p * (1 - p) / n), n, int(ok.sum()))


def indicator_coverage(indicators) -> Coverage:
    return coverage(indicators, None, None)


def check_summary(records, check: str, delta: float) -> dict:
    """Coverage in the all-records stratum and in the stratum where the lemma's conditions pass."""
    metric, bound, lemma, rel = CHECKS[check]
    ok_records = [r for r in records if r["status"] == "ok" and r.get(metric) is not None and r.get(bound) is not None]
    out = {"metric": metric, "bound": bound, "relation": rel, "records": len(ok_records)}
    if not ok_records:
        out.update(status="no-data", passed=False)
        return out
    if check == "davis_kahan":
        cov = coverage(ok_records, metric, bound, rel)
        out["all"] = cov.to_dict()
        out["violations"] = cov.n - cov.passed
        out.update(status="checked", passed=cov.passed == cov.n)
        return out
    cov_all = coverage(ok_records, metric, bound, rel)
    out["all"] = cov_all.to_dict()
    cond = [r for r in ok_records if r.get(f"applicable_{lemma}") == 1]
    target = 1.0 - delta
    if cond:
        cov = coverage(cond, metric, bound, rel)
        out["conditioned"] = cov.to_dict()
        out["threshold"] = target - 3 * cov.se
        out.update(status="checked", passed=cov.fraction >= target - 3 * cov.se)
    else:
        out["conditioned"] = {"n": 0}
        out.update(status="vacuous", passed=True)
    return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    return str(v)


def write_records(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in sort_records(records):
            w.writerow([_fmt(r.get(f)) for f in RECORD_FIELDS])


def read_records(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for key, v in row.items():
                if v == "":
                    rec[key] = None
                elif key in ("N", "k", "query", "rep") or key.startswith("applicable_"):
                    rec[key] = int(v)
                elif key == "status":
                    rec[key] = v
                else:
                    rec[key] = float(v)
            out.append(rec)
    return out


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def summarize(plan: ExperimentPlan, records) -> dict:
    checks = plan.checks or [c for c in CHECKS if any(r.get(CHECKS[c][0]) is not None for r in records)]
    cells = []
    for N, k in plan.cells():
        cell_recs = [r for r in records if r["N"] == N and r["k"] == k]
        errors = [r for r in cell_recs if r["status"] != "ok"]
        cells.append({
            "N": N, "k": k, "records": len(cell_recs), "errors": len(errors),
            "checks": {c: check_summary(cell_recs, c, plan.delta) for c in checks},
        })
    requested = plan.checks
    passed = all(cell["checks"][c]["passed"] for cell in cells for c in requested)
    return _json_safe({"plan": plan.to_dict(), "cells": cells, "requested_checks": requested, "passed": passed})


def verify(plan: ExperimentPlan, out_dir) -> dict:
    """Run the plan, write ``records.csv`` and ``summary.json``; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = run_plan(plan)
    write_records(records, out / "records.csv")
    summary = summarize(plan, records)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# ---------------------------------------------------------------------------
# Rate slopes
# ---------------------------------------------------------------------------

@dataclass
class SlopeFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    n_points: int
    excluded: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "n_points": self.n_points, "excluded": self.excluded}


def fit_loglog_slope(Ns, values, level: float = 0.95) -> SlopeFit:
    """OLS slope of ``log(values)`` on ``log(Ns)`` with a t-interval.

    Non-positive or non-finite values are dropped and listed; at least four
    points must remain.
    """
    Ns, values = np.asarray(Ns, dtype=float), np.asarray(values, dtype=float)
    keep = np.isfinite(values) & (values > 0)
    excluded = Ns[~keep].tolist()
    if keep.sum() < 4:
        raise ValueError(f"need at least 4 positive points for a slope, got {int(keep.sum())}")
    lx, ly = np.log(Ns[keep]), np.log(values[keep])
    fit = stats.linregress(lx, ly)
    n = int(keep.sum())
    t = stats.t.ppf(0.5 + level / 2, n - 2)
    return SlopeFit(float(fit.slope), float(fit.intercept), float(fit.slope - t * fit.stderr),
                    float(fit.slope + t * fit.stderr), n, excluded)


def rate_slope(plan: ExperimentPlan, metric: str = "B_err", records=None):
    """Median of ``metric`` per N (k from the plan) and its log-log slope."""
    if records is None:
        records = run_plan(plan)
    rows = []
    for N, k in plan.cells():
        vals = [r.get(metric) for r in records if r["N"] == N and r["k"] == k and r["status"] == "ok"]
        vals = [v for v in vals if v is not None]
        med = float(np.median(vals)) if vals else math.nan
        rows.append({"N": N, "k": k, "median": med, "n": len(vals)})
    fit = fit_loglog_slope([r["N"] for r in rows], [r["median"] for r in rows])
    return fit, rows


def write_slopes(fit: SlopeFit, rows, metric: str, path, d: int = 1) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "slope", "ci_low", "ci_high", "intercept", "n_points", "expected"])
        w.writerow([metric, repr(fit.slope), repr(fit.ci_low), repr(fit.ci_high), repr(fit.intercept),
                    fit.n_points, repr(-1.0 / (d + 2))])
    with open(path.with_name(path.stem + "_medians.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "k", "median", "n"])
        for r in rows:
            w.writerow([r["N"], r["k"], repr(r["median"]), r["n"]])

"""Command-line entry point: ``covariate-sbm <subcommand>``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .bounds import BoundInputs, bound_report
from .clustering import ClusteringConfig
from .laplacian import build_localized, laplacian, population_laplacians
from .model import generate_network
from .montecarlo import ExperimentPlan, rate_slope, verify, write_slopes
from .neighbors import knn_radius
from .pipeline import fit_pair


def _vector(text: str) -> np.ndarray:
    return np.asarray([float(v) for v in text.replace(",", " ").split()], dtype=float)


def cmd_generate(args) -> int:
    spec = io.load_model(args.model)
    net = generate_network(spec, args.n, args.seed)
    io.save_network(net, args.out, spec)
    print(f"wrote {net.N} nodes, {int(net.A.sum()) // 2} edges to {args.out}")
    return 0


def cmd_estimate(args) -> int:
    net = io.load_network(edges=args.edges, covariates=args.covariates, labels=args.labels, G=args.groups)
    tau = None if args.tau == "mean" else float(args.tau)
    config = ClusteringConfig(args.groups, restarts=args.restarts, epsilon=args.epsilon, seed=args.seed)
    result = fit_pair(net.A, net.X, _vector(args.x), _vector(args.xp), args.k, args.groups, tau, config,
                      mode=args.mode, align=args.align)
    payload = result.to_dict()
    if args.model:
        spec = io.load_model(args.model)
        inputs = BoundInputs.from_spec(spec, net.N, args.k, args.delta, result.tau, result.x, result.xp,
                                       N_h=None if net.g is None else np.bincount(net.g, minlength=args.groups))
        payload["bounds"] = bound_report(inputs).to_dict()
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_verify(args) -> int:
    plan = ExperimentPlan.load(args.plan)
    summary = verify(plan, args.out)
    for cell in summary["cells"]:
        for name, chk in cell["checks"].items():
            cond = chk.get("conditioned", {})
            print(f"N={cell['N']} k={cell['k']} {name}: {chk['status']} "
                  f"all={chk.get('all', {}).get('fraction')} conditioned_n={cond.get('n')} "
                  f"conditioned={cond.get('fraction')} pass={chk['passed']}")
    print("PASS" if summary["passed"] else "FAIL")
    return 0 if summary["passed"] else 1


def cmd_sweep(args) -> int:
    plan = ExperimentPlan.load(args.plan)
    fit, rows = rate_slope(plan, args.metric)
    write_slopes(fit, rows, args.metric, args.out, plan.model.d)
    print(json.dumps(fit.to_dict()))
    if args.expect is not None:
        ok = abs(fit.slope - args.expect) <= args.tolerance
        print("PASS" if ok else "FAIL")
        return 0 if ok else 1
    return 0


def cmd_neighborhood(args) -> int:
    X = io.load_covariates(args.covariates)
    labels = np.loadtxt(args.labels, skiprows=1, dtype=np.int64, ndmin=1) if args.labels else None
    nb = knn_radius(X, _vector(args.x), args.k, labels)
    print(json.dumps(nb.to_dict(), indent=2))
    return 0


def cmd_laplacian(args) -> int:
    net = io.load_network(edges=args.edges, covariates=args.covariates, labels=args.labels)
    x, xp = _vector(args.x), _vector(args.xp)
    eta_x, eta_xp = knn_radius(net.X, x, args.k).members, knn_radius(net.X, xp, args.k).members
    tau = None if args.tau == "mean" else float(args.tau)
    lap = laplacian(build_localized(net.A, eta_x, eta_xp), tau)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "L.csv", lap.L, fmt="%.17g", delimiter=",")
    written = ["L.csv"]
    if args.model and net.g is not None:
        spec = io.load_model(args.model)
        pop = population_laplacians(spec, net.X, net.g, eta_x, eta_xp, x, xp, lap.tau)
        np.savetxt(out / "L_pop.csv", pop.L_xx, fmt="%.17g", delimiter=",")
        np.savetxt(out / "L_pop_sample_covariates.csv", pop.L_xg, fmt="%.17g", delimiter=",")
        written += ["L_pop.csv", "L_pop_sample_covariates.csv"]
    print(f"tau={lap.tau} wrote {', '.join(written)} to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covariate-sbm", description="Covariate stochastic block model toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a synthetic network")
    g.add_argument("--model", required=True, help="model.json")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="estimate pi(x) and B(x, x') at one query pair")
    e.add_argument("--edges", required=True)
    e.add_argument("--covariates", required=True)
    e.add_argument("--labels", default=None, help="optional truth, used for bound inputs")
    e.add_argument("--x", required=True, help="query covariate, comma or space separated")
    e.add_argument("--xp", required=True)
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--tau", default="mean", help="number or 'mean'")
    e.add_argument("--groups", type=int, required=True)
    e.add_argument("--restarts", type=int, default=10)
    e.add_argument("--epsilon", type=float, default=0.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--mode", choices=("exclude", "literal"), default="exclude")
    e.add_argument("--align", choices=("none", "assortative", "disassortative", "pi"), default="none")
    e.add_argument("--model", default=None, help="model.json; adds a bound report")
    e.add_argument("--delta", type=float, default=0.1)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("verify", help="Monte Carlo coverage of the bounds")
    v.add_argument("--plan", required=True)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="log-log rate slope over the plan's N grid")
    s.add_argument("--plan", required=True)
    s.add_argument("--metric", default="B_err")
    s.add_argument("--out", required=True)
    s.add_argument("--expect", type=float, default=None, help="expected slope; sets the exit code")
    s.add_argument("--tolerance", type=float, default=0.15)
    s.set_defaults(func=cmd_sweep)

    n = sub.add_parser("neighborhood", help="dump the k-NN neighbourhood of a point as JSON")
    n.add_argument("--covariates", required=True)
    n.add_argument("--labels", default=None)
    n.add_argument("--x", required=True)
    n.add_argument("--k", type=int, required=True)
    n.set_defaults(func=cmd_neighborhood)

    lp = sub.add_parser("laplacian", help="dump sample (and population) Laplacians as CSV")
    lp.add_argument("--edges", required=True)
    lp.add_argument("--covariates", required=True)
    lp.add_argument("--labels", default=None)
    lp.add_argument("--model", default=None)
    lp.add_argument("--x", required=True)
    lp.add_argument("--xp", required=True)
    lp.add_argument("--k", type=int, required=True)
    lp.add_argument("--tau", default="mean")
    lp.add_argument("--out", required=True)
    lp.set_defaults(func=cmd_laplacian)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""On-disk formats: ``edges.csv``, ``covariates.csv``, ``labels.csv``, ``model.json``."""
from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np

from .model import ModelSpec, Network

FLOAT_FMT = "%.17g"


def save_network(net: Network, out_dir, spec: ModelSpec | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    i, j = np.nonzero(np.triu(net.A, 1))
    np.savetxt(out / "edges.csv", np.column_stack([i, j]), fmt="%d", delimiter=",", header="i,j", comments="")
    header = ",".join(f"x{c}" for c in range(net.d))
    np.savetxt(out / "covariates.csv", net.X, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")
    if net.g is not None:
        np.savetxt(out / "labels.csv", net.g, fmt="%d", header="g", comments="")
    if spec is not None:
        save_model(spec, out / "model.json")
    return out


def load_covariates(path) -> np.ndarray:
    X = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return X


def load_edges(path, N: int) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", "loadtxt: input contained no data")
        E = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    A = np.zeros((N, N), dtype=np.uint8)
    if E.size:
        if E.min() < 0 or E.max() >= N:
            raise ValueError(f"edge endpoint outside [0, {N})")
        if np.any(E[:, 0] == E[:, 1]):
            raise ValueError("self-loops are not allowed")
        A[E[:, 0], E[:, 1]] = 1
        A[E[:, 1], E[:, 0]] = 1
    return A


def load_network(directory=None, edges=None, covariates=None, labels=None, G=None) -> Network:
    if directory is not None:
        d = Path(directory)
        edges, covariates = d / "edges.csv", d / "covariates.csv"
        if labels is None and (d / "labels.csv").exists():
            labels = d / "labels.csv"
    X = load_covariates(covariates)
    A = load_edges(edges, len(X))
    g = None
    if labels is not None:
        g = np.loadtxt(labels, skiprows=1, dtype=np.int64, ndmin=1)
    return Network(X, A, g, G)


def save_model(spec: ModelSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")


def load_model(path) -> ModelSpec:
    return ModelSpec.from_dict(json.loads(Path(path).read_text()))

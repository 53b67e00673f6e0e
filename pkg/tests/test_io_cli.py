from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from covsbm import io
from covsbm.cli import main
from covsbm.model import generate_network


@pytest.fixture
def model_file(tmp_path, planted):
    path = tmp_path / "model.json"
    io.save_model(planted, path)
    return path


@pytest.fixture
def network_dir(tmp_path, model_file):
    out = tmp_path / "net"
    assert main(["generate", "--model", str(model_file), "--n", "400", "--seed", "5", "--out", str(out)]) == 0
    return out


def test_network_round_trip(tmp_path, planted):
    net = generate_network(planted, 150, 9)
    io.save_network(net, tmp_path, planted)
    back = io.load_network(tmp_path)
    assert np.array_equal(back.A, net.A)
    assert np.array_equal(back.X, net.X)
    assert np.array_equal(back.g, net.g)
    assert io.load_model(tmp_path / "model.json").to_dict() == planted.to_dict()


def test_load_edges_rejects_bad_endpoints(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("i,j\n0,5\n")
    with pytest.raises(ValueError):
        io.load_edges(p, 3)
    p.write_text("i,j\n1,1\n")
    with pytest.raises(ValueError):
        io.load_edges(p, 3)


def test_load_edges_empty(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("i,j\n")
    assert io.load_edges(p, 4).sum() == 0


def test_generate_is_seeded(tmp_path, model_file, network_dir):
    other = tmp_path / "again"
    main(["generate", "--model", str(model_file), "--n", "400", "--seed", "5", "--out", str(other)])
    for name in ("edges.csv", "covariates.csv", "labels.csv"):
        assert (other / name).read_bytes() == (network_dir / name).read_bytes()


def test_estimate_writes_result(tmp_path, network_dir, model_file):
    out = tmp_path / "result.json"
    code = main(["estimate", "--edges", str(network_dir / "edges.csv"),
                 "--covariates", str(network_dir / "covariates.csv"),
                 "--labels", str(network_dir / "labels.csv"), "--x", "0.3", "--xp", "0.7",
                 "--k", "80", "--tau", "0", "--groups", "2", "--align", "assortative",
                 "--model", str(model_file), "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert len(data["pi_hat"]) == 2 and sum(data["n_hat_x"]) == 80
    assert np.allclose(np.diag(data["B_hat"]), 0.6, atol=0.12)
    assert "boundLaplacians" in data["bounds"]["lemmas"]


def test_estimate_prints_without_out(capsys, network_dir):
    capsys.readouterr()
    main(["estimate", "--edges", str(network_dir / "edges.csv"), "--covariates",
          str(network_dir / "covariates.csv"), "--x", "0.5", "--xp", "0.5", "--k", "60", "--groups", "2"])
    data = json.loads(capsys.readouterr().out)
    assert data["tau"] > 0  # default tau is the mean degree


def test_neighborhood_command(capsys, network_dir):
    capsys.readouterr()
    main(["neighborhood", "--covariates", str(network_dir / "covariates.csv"), "--labels",
          str(network_dir / "labels.csv"), "--x", "0.5", "--k", "25"])
    data = json.loads(capsys.readouterr().out)
    assert len(data["members"]) == 25


def test_laplacian_command(tmp_path, network_dir, model_file):
    out = tmp_path / "lap"
    main(["laplacian", "--edges", str(network_dir / "edges.csv"), "--covariates",
          str(network_dir / "covariates.csv"), "--labels", str(network_dir / "labels.csv"),
          "--model", str(model_file), "--x", "0.2", "--xp", "0.8", "--k", "40", "--tau", "0",
          "--out", str(out)])
    L = np.loadtxt(out / "L.csv", delimiter=",")
    Lp = np.loadtxt(out / "L_pop.csv", delimiter=",")
    assert L.shape == Lp.shape == (40, 40)
    assert np.linalg.norm(L, 2) <= 1 + 1e-9


def _plan(tmp_path, **kw):
    plan = {"model": {"name": "planted-partition", "params": {"p": 0.6, "q": 0.2, "G": 2}},
            "N": [300], "k": 60, "replications": 3, "seed": 1, "queries": [[0.3, 0.7]],
            "metrics": ["laplacian", "clustering"], "checks": ["davis_kahan"]}
    plan.update(kw)
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan))
    return path


def test_verify_command_exit_code(tmp_path, capsys):
    assert main(["verify", "--plan", str(_plan(tmp_path)), "--out", str(tmp_path / "rep")]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")
    # a check whose data is never collected cannot pass
    bad = _plan(tmp_path, checks=["B"])
    assert main(["verify", "--plan", str(bad), "--out", str(tmp_path / "rep2")]) == 1


def test_sweep_command(tmp_path):
    plan = _plan(tmp_path, N=[200, 400, 800, 1600], k=None, metrics=["estimation"], checks=[])
    out = tmp_path / "slopes.csv"
    code = main(["sweep", "--plan", str(plan), "--metric", "B_err", "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["metric"] == "B_err" and float(rows[0]["expected"]) == pytest.approx(-1 / 3)
    assert (tmp_path / "slopes_medians.csv").exists()
    assert main(["sweep", "--plan", str(plan), "--out", str(out), "--expect", "5", "--tolerance", "0.1"]) == 1


def test_unknown_command_exits():
    with pytest.raises(SystemExit):
        main(["frobnicate"])

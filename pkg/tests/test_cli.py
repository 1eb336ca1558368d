import json

import numpy as np
import pytest

from offgrid import cli
from offgrid.experiment import (
    ConfigError,
    RunConfig,
    SchemaError,
    deterministic_view,
    dumps,
    report,
    run_experiment,
)

from conftest import blobs


@pytest.fixture
def dataset(tmp_path):
    X, y = blobs(45, 2, 3, 7)
    path = tmp_path / "pts.csv"
    np.savetxt(path, np.c_[X, y], delimiter=",", fmt="%.12g")
    return path


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def read(path):
    return json.loads(path.read_text())


@pytest.mark.parametrize("command", ["search", "grid", "mknn", "binsearch"])
def test_strategies_write_traces(tmp_path, dataset, command):
    out = tmp_path / f"{command}.json"
    assert run_cli(command, "--data", dataset, "--label-col", -1, "--k", 3, "--seeds", "0,1",
                   "--out", out) == 0
    doc = read(out)
    assert doc["schema"] == 1 and doc["kind"] == "trace"
    assert [r["seed"] for r in doc["runs"]] == [0, 1]
    for r in doc["runs"]:
        sigmas = [s["sigma"] for s in r["trace"]["steps"]]
        assert all(b > a for a, b in zip(sigmas, sigmas[1:]))
        assert all("wall_time_ms" not in s for s in r["trace"]["steps"])
        if command == "grid":
            assert len(sigmas) == 13
    assert len(doc["timings"]["per_seed"]) == 2


def test_mknn_count_bound(tmp_path, dataset):
    out = tmp_path / "m.json"
    assert run_cli("mknn", "--data", dataset, "--label-col", -1, "--k", 3, "--out", out) == 0
    n = 45
    assert read(out)["runs"][0]["summary"]["n_sigmas"] <= int(2 * (np.log(n) + 1))


def test_search_schedule_restrict_and_sigma0(tmp_path, dataset):
    out = tmp_path / "s.json"
    code = run_cli("search", "--data", dataset, "--label-col", -1, "--standardize", "--k", 3,
                   "--schedule", "1,2", "--sigma0", "theorem1", "--restrict", "margin:0.5",
                   "--max-steps", 20, "--out", out)
    assert code == 0
    doc = read(out)
    first = doc["runs"][0]["trace"]["steps"][0]
    assert first["kkm_iterations"] == 1
    assert doc["config"]["schedule"] == [1, 2]


def test_cluster_and_newton_check(tmp_path, dataset):
    out = tmp_path / "c.json"
    assert run_cli("cluster", "--data", dataset, "--label-col", -1, "--k", 3, "--sigma", 4.0,
                   "--out", out) == 0
    doc = read(out)
    assert doc["sigma"] == 4.0 and len(doc["runs"][0]["assignment"]) == 45
    out = tmp_path / "n.json"
    assert run_cli("newton-check", "--data", dataset, "--label-col", -1, "--k", 2,
                   "--seeds", "0:3", "--out", out) == 0
    checks = read(out)["checks"]
    assert len(checks) == 3
    for c in checks:
        if c["dyadic"] and c["bisection"]:
            assert c["dyadic"] == pytest.approx(c["bisection"], rel=1e-4)


def test_gen_tight_then_search(tmp_path, capsys):
    dist = tmp_path / "tight.csv"
    labels = tmp_path / "labels.txt"
    assert run_cli("gen-tight", "--n1", 5, "--n2", 6, "--eps", 2.0, "--out", dist,
                   "--labels-out", labels) == 0
    meta = json.loads(capsys.readouterr().out)
    assert meta["n"] == 11 and meta["special"] == 5
    D = np.loadtxt(dist, delimiter=",")
    assert D.shape == (11, 11) and D[5, 6] == 4.0
    assert np.loadtxt(labels).tolist() == [0] * 5 + [1] * 6
    out = tmp_path / "t.json"
    assert run_cli("search", "--distances", dist, "--k", 2, "--out", out) == 0


def test_bench_synthetic(tmp_path):
    out, csv_path = tmp_path / "b.json", tmp_path / "b.csv"
    assert run_cli("bench", "--synthetic", "200", "--depth", 6, "--repeats", 1, "--out", out,
                   "--csv", csv_path) == 0
    row = read(out)["rows"][0]
    assert row["n"] == 200 and row["offgrid_probes"] == 6
    assert csv_path.read_text().splitlines()[0].startswith("n,")


def test_report_roundtrip(tmp_path, dataset, capsys):
    paths = []
    for seeds in ("0", "1"):
        p = tmp_path / f"g{seeds}.json"
        run_cli("grid", "--data", dataset, "--label-col", -1, "--k", 3, "--seeds", seeds, "--out", p)
        paths.append(p)
    csv_path = tmp_path / "r.csv"
    assert run_cli("report", *paths, "--csv", csv_path) == 0
    table = capsys.readouterr().out
    assert "grid" in table and "best_nmi" in table
    docs = [read(p) for p in paths]
    expected = np.mean([d["runs"][0]["summary"]["best_nmi"] for d in docs])
    row = csv_path.read_text().splitlines()[1].split(",")
    assert float(row[3]) == pytest.approx(expected)


def fixture_doc(name, strategy, summaries):
    runs = [{"seed": i, "summary": s, "trace": {"method": strategy, "stop_reason": "",
             "steps": [{"sigma": 1.0, "cnnc": s["best_cnnc"], "kkm_iterations": 1}]}}
            for i, s in enumerate(summaries)]
    return {"schema": 1, "kind": "trace", "config": {"strategy": strategy},
            "dataset": {"name": name}, "runs": runs}


def test_report_fixture_aggregation():
    a = fixture_doc("toy", "offgrid", [{"best_nmi": 0.5, "best_cnnc": 0.2, "n_sigmas": 4}])
    b = fixture_doc("toy", "offgrid", [{"best_nmi": 0.7, "best_cnnc": 0.4, "n_sigmas": 6},
                                       {"best_nmi": 0.9, "best_cnnc": 0.3, "n_sigmas": 5}])
    c = fixture_doc("toy", "grid", [{"best_nmi": None, "best_cnnc": 0.25, "n_sigmas": 13}])
    table, table_csv = report([a, b, c])
    rows = table_csv.splitlines()
    assert rows[0] == "dataset,strategy,seeds,best_nmi,best_cnnc,n_sigmas"
    off = rows[1].split(",")
    assert off[:3] == ["toy", "offgrid", "3"]
    assert float(off[3]) == pytest.approx((0.5 + 0.7 + 0.9) / 3)
    assert float(off[4]) == pytest.approx(0.3)
    assert rows[2].split(",")[3] == ""
    # single-seed report equals that seed
    single = report([a])[1].splitlines()[1].split(",")
    assert float(single[3]) == 0.5


def test_report_schema_errors(tmp_path):
    with pytest.raises(SchemaError):
        report([{"schema": 2}])
    with pytest.raises(SchemaError):
        report([{"schema": 1, "kind": "bench"}])
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("report", bad) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["search", "--k", 2],
        ["search", "--data", "missing.csv", "--k", 2],
        ["grid", "--data", "{data}", "--k", 0],
        ["search", "--data", "{data}", "--k", 2, "--schedule", "2,1"],
        ["search", "--data", "{data}", "--k", 2, "--restrict", "margin:2"],
        ["search", "--data", "{data}", "--k", 2, "--sigma0", "percentile:0"],
        ["search", "--data", "{data}", "--k", 2, "--sigma0", "banana"],
        ["search", "--data", "{data}", "--k", 2, "--depth", 0],
        ["newton-check", "--data", "{data}", "--k", 3],
        ["search", "--data", "{data}", "--k", 2, "--seeds", "x"],
        ["bench"],
        ["nonsense"],
    ],
)
def test_config_errors_exit_2(dataset, argv, capsys):
    argv = [str(a).replace("{data}", str(dataset)) for a in argv]
    assert cli.main(argv) == 2


def test_runtime_failure_exit_3(dataset, monkeypatch):
    def boom(cfg):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert run_cli("search", "--data", dataset, "--k", 2) == 3


def test_thread_env(dataset, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "nope")
    assert run_cli("grid", "--data", dataset, "--k", 2, "--out", tmp_path / "x.json") == 2
    monkeypatch.setenv(cli.THREADS_ENV, "2")
    assert run_cli("grid", "--data", dataset, "--k", 2, "--out", tmp_path / "x.json") == 0


def test_runconfig_validation_names_fields(dataset):
    with pytest.raises(ConfigError, match="strategy"):
        RunConfig("magic", 2, data=str(dataset))
    with pytest.raises(ConfigError, match="seeds"):
        RunConfig("grid", 2, data=str(dataset), seeds=())
    with pytest.raises(ConfigError, match="data"):
        RunConfig("grid", 2)


def test_same_config_same_bytes(dataset):
    cfg = RunConfig("offgrid", 3, data=str(dataset), label_col=-1, schedule=(1, 2), seeds=(0, 1))
    a = dumps(deterministic_view(run_experiment(cfg)))
    b = dumps(deterministic_view(run_experiment(cfg)))
    assert a == b

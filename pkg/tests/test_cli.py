import csv
import json

import numpy as np
import pytest

from netelastic import tables
from netelastic.cli import main
from netelastic.errors import ParseError, SchemaError

from oracles import ridge

FAST = ["--max-iters", "1500", "--eps-abs", "1e-5", "--eps-rel", "1e-4"]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def toy(tmp_path):
    ex = write_csv(tmp_path / "e.csv", ["patient_id", "g1", "g2"],
                   [["a", 1, 2], ["b", 3, 4], ["c", 5, 6]])
    cl = write_csv(tmp_path / "c.csv", list(tables.CLINICAL_COLUMNS),
                   [["a", 10, 1, 5, 1], ["b", 20, 0, 6, 2], ["c", 30, 1, 7, ""]])
    return ex, cl


def test_ingest_toy(toy):
    c = tables.ingest(*toy)
    assert c.ids == ["a", "b", "c"] and c.genes == ["g1", "g2"]
    assert np.array_equal(c.expression, [[1, 2], [3, 4], [5, 6]])
    recs = c.to_records()
    assert [r.event for r in recs] == [1, 0, 1]
    assert recs[2].stage is None and recs[1].exposure == 6.0


def test_ingest_drops_and_counts(tmp_path, toy):
    ex, _ = toy
    cl = write_csv(tmp_path / "c2.csv", list(tables.CLINICAL_COLUMNS),
                   [["a", 10, 1, 5, 1], ["b", "", 0, 6, 2], ["c", 30, 1, "", 1], ["z", 1, 1, 1, 1]])
    c = tables.ingest(ex, cl)
    assert c.ids == ["a"] and c.dropped == 3


def test_ingest_order_invariant(tmp_path, toy):
    ex, cl = toy
    ex2 = write_csv(tmp_path / "e2.csv", ["patient_id", "g1", "g2"], [["c", 5, 6], ["a", 1, 2], ["b", 3, 4]])
    a, b = tables.ingest(ex, cl), tables.ingest(ex2, cl)
    assert a.ids == b.ids and np.array_equal(a.expression, b.expression)


def test_ingest_errors(tmp_path, toy):
    ex, _ = toy
    bad = write_csv(tmp_path / "c3.csv", ["patient_id", "survival_months", "censored", "stage"], [["a", 1, 1, 1]])
    with pytest.raises(SchemaError, match="pack_years"):
        tables.ingest(ex, bad)
    bad = write_csv(tmp_path / "e3.csv", ["patient_id", "g1"], [["a", "x"]])
    with pytest.raises(ParseError, match=r"row 2.*'g1'"):
        tables.ingest(bad, toy[1])


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out)]) == 0
    return out


def test_synth_outputs(synth_dir):
    c = tables.ingest(synth_dir / "expression.csv", synth_dir / "clinical.csv")
    assert len(c) == 100 and c.expression.shape == (100, 10)
    assert len(tables.read_edges(synth_dir / "edges.csv")) > 0
    assert len(tables.read_table(synth_dir / "true_coefficients.csv", ["node_id"])) == 100


def test_fit_writes_100_rows(synth_dir, tmp_path):
    out = tmp_path / "fit"
    rc = main(["fit", "--config", str(synth_dir / "config.json"), "--lambda", "1.12", "--alpha", "0.6",
               "--out", str(out)])
    assert rc == 0
    rows = tables.read_table(out / "coefficients.csv", ["node_id"])
    assert len(rows) == 100
    assert json.loads((out / "fit_summary.json").read_text())["converged"]


def test_fit_lambda_zero_is_per_node_ridge(synth_dir, tmp_path):
    out = tmp_path / "fit0"
    rc = main(["fit", "--config", str(synth_dir / "config.json"), "--lambda", "0", "--mu", "0.5",
               "--out", str(out), "--eps-abs", "1e-10", "--eps-rel", "1e-10"])
    assert rc == 0
    c = tables.ingest(synth_dir / "expression.csv", synth_dir / "clinical.csv")
    rows = tables.read_table(out / "coefficients.csv", ["node_id"])
    for k, row in enumerate(rows):
        x = np.array([float(row[g]) for g in c.genes])
        expected = ridge(c.expression[k : k + 1], c.time[k : k + 1], 0.5)
        assert x == pytest.approx(expected, abs=1e-8)


def test_path_has_six_alpha_groups(synth_dir, tmp_path):
    out = tmp_path / "path"
    rc = main(["path", "--config", str(synth_dir / "config.json"), "--out", str(out),
               "--gamma", "3", "--lambda-init", "0.05", *FAST])
    assert rc == 0
    scores = tables.read_table(out / "scores.csv", tables.SCORE_COLUMNS)
    assert sorted({float(r["alpha"]) for r in scores}) == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    path_rows = tables.read_table(out / "path.csv", tables.PATH_COLUMNS)
    n_train = len({r["node_id"] for r in path_rows})
    assert n_train == 79  # 7 of each 33/33/34 stage block held out
    assert len(path_rows) == len(scores) * n_train * 10
    summary = json.loads((out / "path_summary.json").read_text())
    sel = summary["selected"]
    assert 0.0 < sel["lambda"] < summary["lambda_critical"][str(sel["alpha"])]


def test_error_exit(tmp_path, capsys):
    rc = main(["fit", "--expression", str(tmp_path / "missing.csv"), "--clinical", str(tmp_path / "x.csv")])
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["command"] == "fit" and err["error"] == "InvalidInputError"


def test_bad_parameter_exit(synth_dir, tmp_path, capsys):
    rc = main(["fit", "--config", str(synth_dir / "config.json"), "--alpha", "2", "--out", str(tmp_path)])
    assert rc == 1
    assert "alpha" in json.loads(capsys.readouterr().err.strip().splitlines()[-1])["message"]


def test_deterministic_outputs(tmp_path):
    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert main(["synth", "--out", str(d), "--seed", "4"]) == 0
        assert main(["cluster", "--config", str(d / "config.json"), "--out", str(d), *FAST]) == 0
        outs.append({f: (d / f).read_bytes() for f in
                     ("expression.csv", "clinical.csv", "edges.csv", "clusters.csv", "cluster_summary.json")})
    assert outs[0] == outs[1]


def test_aft_mode_on_censored_data(tmp_path):
    r = np.random.default_rng(2)
    n, g = 60, 8
    X = r.standard_normal((n, g))
    time = np.exp(1.0 + 0.5 * X[:, 0] + 0.2 * r.standard_normal(n))
    event = (r.uniform(size=n) < 0.7).astype(int)
    ids = [f"T{k:02d}" for k in range(n)]
    tables.write_cohort(tmp_path, ids, [f"g{j}" for j in range(g)], X, time, event,
                        r.uniform(0, 80, n), r.integers(1, 4, n))
    common = ["--expression", str(tmp_path / "expression.csv"), "--clinical", str(tmp_path / "clinical.csv"),
              "--out", str(tmp_path / "o"), "--top-genes", "4", "--lambda", "0.5", *FAST]
    assert main(["predict", *common]) == 0
    pred = tables.read_table(tmp_path / "o" / "predictions.csv", tables.PREDICTION_COLUMNS)
    assert len(pred) == 12
    assert main(["cluster", *common]) == 0
    assert main(["enrich", *common]) == 0
    rows = tables.read_table(tmp_path / "o" / "enrichment.csv", tables.ENRICHMENT_COLUMNS)
    assert all(0.0 <= float(x["p_value"]) <= 1.0 for x in rows)

"""Acceptance suite: one group of tests per criterion.

Run ``pytest tests/test_acceptance.py`` (or this file directly); the terminal
summary prints one PASS/FAIL line per criterion.
"""

import itertools
import json
import math
from fractions import Fraction

import cvxpy as cp
import numpy as np
import pytest

from netelastic import tables
from netelastic.aft import stute_weights
from netelastic.cli import main
from netelastic.cluster import adjusted_rand_index, consensus_clusters, hypergeom_tail
from netelastic.inference import weber_point
from netelastic.path import aic_score
from netelastic.prox import EdgeProxParams, edge_objective, edge_prox
from netelastic.solver import EdgeState, SolverConfig, admm_fit
from netelastic.synth import TRUE_BLOCK_COEFFICIENTS, SynthSpec, generate_instance

from conftest import random_graph
from oracles import km_jumps, km_jumps_exact, network_lasso_admm, pooled_ridge, ridge

CRITERIA = {
    1: "edge prox matches a generic convex minimizer (500 cases, 1e-6)",
    2: "alpha=0 reduces to network lasso (theta formula 1e-10, full fits 1e-6)",
    3: "lambda=0 gives per-node ridge (1e-8); lambda=1e6 gives pooled ridge (1e-4)",
    4: "synthetic recovery at lambda=1.12: block means within 0.5, ARI >= 0.9",
    5: "KM jump weights: uniform, fixtures exact, sum in [0, 1]",
    6: "hypergeometric tail exact vs enumeration (N <= 12), monotone",
    7: "Weiszfeld monotone on 200 instances, within 1e-6 of grid minimum",
    8: "AIC fixtures exact",
    9: "synthetic pipeline path/predict/cluster/enrich: schema, determinism, r >= 0.9",
}

ALPHAS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


# 1 -------------------------------------------------------------------------

def _convex_edge_min(a, b, params):
    zi, zj = cp.Variable(len(a)), cp.Variable(len(a))
    obj = (params.c1 * cp.norm(zi - zj, 2) + params.c2 * cp.norm(zi - zj, 1)
           + params.rho / 2 * (cp.sum_squares(zi - a) + cp.sum_squares(zj - b)))
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver="CLARABEL")
    return prob.value


def test_criterion_1_edge_prox_oracle():
    r = np.random.default_rng(1)
    worst = 0.0
    for _ in range(500):
        p = int(r.integers(1, 5))
        a, b = r.normal(0, 2, p), r.normal(0, 2, p)
        params = EdgeProxParams(r.uniform(0.1, 5), r.uniform(0, 3), r.uniform(0, 3))
        zi, zj = edge_prox(a, b, params)
        gap = abs(edge_objective(zi, zj, a, b, params) - _convex_edge_min(a, b, params))
        worst = max(worst, gap)
    assert worst <= 1e-6


# 2 -------------------------------------------------------------------------

def test_criterion_2_theta_formula():
    r = np.random.default_rng(2)
    for _ in range(1000):
        p = int(r.integers(1, 6))
        a, b = r.normal(0, 3, p), r.normal(0, 3, p)
        rho, c1 = r.uniform(0.1, 5), r.uniform(0, 4) * (r.uniform() < 0.9)
        zi, zj = edge_prox(a, b, EdgeProxParams(rho, c1, 0.0))
        theta = max(0.5, 1.0 - c1 / (rho * np.linalg.norm(a - b)))
        assert np.max(np.abs(zi - (theta * a + (1 - theta) * b))) <= 1e-10
        assert np.max(np.abs(zj - ((1 - theta) * a + theta * b))) <= 1e-10


def test_criterion_2_admm_z_step_is_theta_formula():
    # one iteration from a random dual state, checked against the formula
    r = np.random.default_rng(22)
    g = random_graph(r, 8, 3)
    idx, w = g.edge_index()
    x0 = r.standard_normal((8, 3))
    st = EdgeState(x0[idx[:, 0]], x0[idx[:, 1]], r.standard_normal((len(w), 3)), r.standard_normal((len(w), 3)))
    cfg = SolverConfig(lam=0.8, rho=1.3, max_iters=1)
    sol = admm_fit(g, cfg, warm=(x0, st))
    a = sol.coefficients[idx[:, 0]] + st.u_ij
    b = sol.coefficients[idx[:, 1]] + st.u_ji
    gap = np.linalg.norm(a - b, axis=1)
    theta = np.maximum(0.5, 1 - 0.8 * w / (1.3 * gap))[:, None]
    assert np.max(np.abs(sol.state.z_ij - (theta * a + (1 - theta) * b))) <= 1e-10
    assert np.max(np.abs(sol.state.z_ji - ((1 - theta) * a + theta * b))) <= 1e-10


@pytest.mark.parametrize("n,lam", [(5, 0.3), (12, 0.7), (20, 1.5)])
def test_criterion_2_full_fit_matches_network_lasso(n, lam):
    g = random_graph(np.random.default_rng(n), n, 3, m=3)
    sol = admm_fit(g, SolverConfig(lam=lam, alpha=0.0, eps_abs=1e-12, eps_rel=1e-12, max_iters=200000))
    ref = network_lasso_admm(g, lam)
    assert np.max(np.abs(sol.coefficients - ref)) <= 1e-6


# 3 -------------------------------------------------------------------------

@pytest.mark.parametrize("mu", [0.0, 0.3])
def test_criterion_3_lambda_zero_decouples(mu):
    g = random_graph(np.random.default_rng(3), 15, 3, m=4)
    sol = admm_fit(g, SolverConfig(lam=0.0, mu=mu, eps_abs=1e-12, eps_rel=1e-12))
    for k, nd in enumerate(g.nodes):
        assert np.max(np.abs(sol.coefficients[k] - ridge(nd.design, nd.response, mu))) <= 1e-8


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
def test_criterion_3_huge_lambda_pools(alpha):
    g = random_graph(np.random.default_rng(33), 12, 3, m=2)
    sol = admm_fit(g, SolverConfig(lam=1e6, alpha=alpha, mu=0.1, eps_abs=1e-10, eps_rel=1e-10, max_iters=100000))
    x = sol.coefficients
    assert g.is_connected()
    assert np.ptp(x, axis=0).max() <= 1e-4
    assert np.max(np.abs(x - pooled_ridge(g, 0.1))) <= 1e-4


# 4 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def synthetic_fits():
    inst = generate_instance(SynthSpec())
    fits = {a: admm_fit(inst.graph, SolverConfig(lam=1.12, alpha=a, mu=0.0)) for a in ALPHAS}
    return inst, fits


@pytest.mark.parametrize("alpha", ALPHAS)
def test_criterion_4_block_means(synthetic_fits, alpha):
    inst, fits = synthetic_fits
    x = fits[alpha].coefficients
    errors = np.array([np.abs(x[inst.labels == b].mean(axis=0) - TRUE_BLOCK_COEFFICIENTS[b]).max()
                       for b in range(3)])
    assert fits[alpha].converged
    assert errors.max() <= 0.5, f"per-block max error {np.round(errors, 3)}"


@pytest.mark.parametrize("alpha", ALPHAS)
def test_criterion_4_block_clusters(synthetic_fits, alpha):
    inst, fits = synthetic_fits
    assignment = consensus_clusters(inst.graph, fits[alpha], tol=1e-2)
    assert adjusted_rand_index(assignment.labels, inst.labels) >= 0.9


# 5 -------------------------------------------------------------------------

def test_criterion_5_uncensored_uniform():
    for n in (1, 2, 4, 7, 50):
        w = stute_weights(np.arange(1.0, n + 1), np.ones(n, dtype=int))
        assert np.all(w == 1.0 / n)


def test_criterion_5_fixtures_match_km():
    for time, event, expected in [([1, 2], [0, 1], [0.0, 1.0]), ([1, 2, 3], [1, 0, 1], [1 / 3, 0.0, 2 / 3])]:
        w = stute_weights(time, event)
        exact = km_jumps_exact(time, event)
        assert [float(v) for v in exact] == expected
        assert w.tolist() == [float(v) for v in exact]
        assert np.allclose(w, km_jumps(time, event), rtol=0, atol=1e-15)


def test_criterion_5_sum_in_unit_interval():
    r = np.random.default_rng(5)
    for _ in range(1000):
        n = int(r.integers(1, 60))
        event = (r.uniform(size=n) < r.uniform()).astype(int)
        w = stute_weights(np.sort(r.uniform(1, 100, n)), event)
        assert np.all(w >= 0) and 0.0 <= w.sum() <= 1.0 + 1e-12


# 6 -------------------------------------------------------------------------

def test_criterion_6_exact_vs_enumeration():
    for N in range(1, 13):
        for M in range(N + 1):
            for n in range(N + 1):
                counts = [0] * (n + 1)
                for draw in itertools.combinations(range(N), n):
                    counts[sum(1 for d in draw if d < M)] += 1
                total = math.comb(N, n)
                for m in range(n + 1):
                    exact = Fraction(sum(counts[m:]), total)
                    assert abs(hypergeom_tail(m, N, M, n) - float(exact)) <= 1e-15 * max(1.0, float(exact))


def test_criterion_6_monotone_in_overlap():
    r = np.random.default_rng(6)
    for _ in range(500):
        N = int(r.integers(1, 400))
        M, n = int(r.integers(0, N + 1)), int(r.integers(0, N + 1))
        tails = [hypergeom_tail(m, N, M, n) for m in range(n + 2)]
        assert all(b <= a for a, b in zip(tails, tails[1:]))


# 7 -------------------------------------------------------------------------

def _grid_minimum(anchors, weights, levels=14, size=61):
    lo, hi = anchors.min(axis=0), anchors.max(axis=0)
    center, half = (lo + hi) / 2, (hi - lo).max() / 2 + 1e-9
    best = np.inf
    for _ in range(levels):
        g = np.linspace(-half, half, size)
        pts = center + np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
        vals = np.linalg.norm(pts[:, None, :] - anchors[None], axis=2) @ weights
        k = int(np.argmin(vals))
        center, best = pts[k], min(best, vals[k])
        half *= 6.0 / size
    return best


@pytest.fixture(scope="module")
def weber_instances():
    r = np.random.default_rng(7)
    out = []
    for _ in range(200):
        m = int(r.integers(2, 9))
        anchors, weights = r.normal(0, 3, (m, 2)), r.uniform(0.1, 3, m)
        out.append((anchors, weights, weber_point(anchors, weights, tol=1e-12, max_iters=100000)))
    return out


def test_criterion_7_monotone_history(weber_instances):
    for _, _, res in weber_instances:
        assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_criterion_7_matches_grid_search(weber_instances):
    for anchors, weights, res in weber_instances:
        assert res.objective <= _grid_minimum(anchors, weights) + 1e-6


# 8 -------------------------------------------------------------------------

def test_criterion_8_aic_fixtures():
    assert aic_score(100, 1.0, 0) == 0.0
    assert aic_score(50, 2.0, 3) == 50 * math.log(2.0) + 6
    assert round(aic_score(50, 2.0, 3), 3) == 40.657
    assert aic_score(100, math.e, 5) == 110.0


# 9 -------------------------------------------------------------------------

PIPELINE_FLAGS = ["--max-iters", "2000", "--eps-abs", "1e-5", "--eps-rel", "1e-4", "--lambda-init", "0.01"]
OUTPUTS = {
    "path.csv": tables.PATH_COLUMNS, "scores.csv": tables.SCORE_COLUMNS,
    "predictions.csv": tables.PREDICTION_COLUMNS, "clusters.csv": tables.CLUSTER_COLUMNS,
    "enrichment.csv": tables.ENRICHMENT_COLUMNS,
}


def _run_pipeline(root):
    assert main(["synth", "--out", str(root)]) == 0
    cfg = str(root / "config.json")
    for cmd in ("path", "predict", "cluster", "enrich"):
        assert main([cmd, "--config", cfg, "--out", str(root / "run"), *PIPELINE_FLAGS]) == 0, cmd
    return root / "run"


@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    return [_run_pipeline(tmp_path_factory.mktemp(f"pipeline{k}")) for k in range(2)]


def test_criterion_9_schema_valid(pipeline_runs):
    run = pipeline_runs[0]
    for name, cols in OUTPUTS.items():
        rows = tables.read_table(run / name, cols)
        assert rows and list(rows[0]) == list(cols), name
    scores = tables.read_table(run / "scores.csv", tables.SCORE_COLUMNS)
    assert sorted({float(r["alpha"]) for r in scores}) == list(ALPHAS)
    for r in tables.read_table(run / "enrichment.csv", tables.ENRICHMENT_COLUMNS):
        assert 0.0 <= float(r["p_value"]) <= 1.0 and r["significant"] in ("0", "1")
    labels = tables.read_clusters(run / "clusters.csv")
    assert min(labels.values()) == 1


def test_criterion_9_prediction_correlation(pipeline_runs):
    summary = json.loads((pipeline_runs[0] / "predict_summary.json").read_text())
    assert summary["correlation"] >= 0.9


def test_criterion_9_deterministic(pipeline_runs):
    a, b = pipeline_runs
    for f in sorted(p.name for p in a.iterdir()):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))

"""Command-line entry point.

Every command reads an optional JSON config (``--config``) whose keys match
the long flag names; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import tables
from .cluster import SIGNIFICANCE, ClusterAssignment, consensus_clusters, stage_enrichment
from .errors import NetworkElasticNetError
from .inference import predict_holdout
from .path import regularization_path, select_model, significant_features
from .pipeline import RunConfig, build_graph, load_config, pearson, prepare, split_indices
from .solver import admm_fit
from .synth import SynthSpec, generate_instance

logger = logging.getLogger("netelastic")

COMMANDS = ("synth", "fit", "path", "predict", "cluster", "enrich")


def _write_summary(out: Path, name: str, data: dict):
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}_summary.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _load(cfg: RunConfig):
    if not (cfg.expression and cfg.clinical):
        raise NetworkElasticNetError("--expression and --clinical are required")
    cohort = tables.ingest(cfg.expression, cfg.clinical)
    logger.info("ingested %d patients (%d dropped)", len(cohort), cohort.dropped)
    return cohort


def _training(cfg: RunConfig, all_patients=False):
    cohort = _load(cfg)
    frac = 1.0 if all_patients else cfg.train_frac
    train, test = split_indices(cohort, frac, cfg.seed)
    prep = prepare(cohort, train, test, cfg)
    return cohort, prep, build_graph(prep, cfg)


def cmd_synth(cfg: RunConfig):
    out = Path(cfg.out)
    spec = SynthSpec(**{"seed": cfg.seed, **cfg.synth})
    inst = generate_instance(spec)
    ids = [f"P{k:03d}" for k in range(spec.n)]
    genes = [f"x{j + 1}" for j in range(spec.p)]
    X = np.vstack([nd.design for nd in inst.nodes])
    y = np.concatenate([nd.response for nd in inst.nodes])
    exposure = [nd.exposure for nd in inst.nodes]
    tables.write_cohort(out, ids, genes, X, y, [1] * spec.n, exposure, inst.labels + 1)
    tables.write_table(out / "edges.csv", tables.EDGE_COLUMNS,
                       ((ids[e.i], ids[e.j], e.weight) for e in inst.graph.edges))
    tables.write_table(out / "true_coefficients.csv", [tables.COEFFICIENT_ID, *genes],
                       ([pid, *row] for pid, row in zip(ids, inst.coefficients)))
    run = {
        "expression": "expression.csv", "clinical": "clinical.csv", "edges": "edges.csv",
        "response": "raw", "intercept": False, "standardize": False, "top_genes": None,
        "lambda": 1.12, "alpha": 0.0, "mu": 0.0, "seed": spec.seed,
        "alpha_grid": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
    }
    (out / "config.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n")
    _write_summary(out, "synth", {"spec": asdict(spec), "block_retries": inst.retries,
                                  "n_edges": len(inst.graph.edges)})
    print(f"synth: wrote {spec.n} patients and {len(inst.graph.edges)} edges to {out}")


def _coefficient_rows(ids, x):
    return ([pid, *row] for pid, row in zip(ids, x))


def cmd_fit(cfg: RunConfig):
    out = Path(cfg.out)
    _, prep, graph = _training(cfg, all_patients=True)
    sol = admm_fit(graph, cfg.solver_config())
    tables.write_table(out / "coefficients.csv", [tables.COEFFICIENT_ID, *prep.feature_names],
                       _coefficient_rows(prep.train_ids, sol.coefficients))
    sig = significant_features(sol.coefficients, cfg.gene_norm_threshold)
    _write_summary(out, "fit", {
        "converged": sol.converged, "iterations": sol.iterations, "objective": sol.objective,
        "n_nodes": graph.n_nodes, "n_edges": len(graph.edges),
        "significant_features": [prep.feature_names[j] for j in sig],
    })
    print(f"fit: {'converged' if sol.converged else 'NOT converged'} after {sol.iterations} iterations, "
          f"objective {sol.objective:.6g}")


def cmd_path(cfg: RunConfig):
    out = Path(cfg.out)
    _, prep, graph = _training(cfg)
    result = regularization_path(graph, cfg.solver_config(), cfg.path_config())
    best = select_model(result, prep.holdout, graph, cfg.n_attach, cfg.zero_tol)
    p = prep.n_features
    tables.write_table(out / "path.csv", tables.PATH_COLUMNS, (
        (e.alpha, e.lam, prep.train_ids[k], j, e.coefficients[k, j])
        for e in result.entries for k in range(graph.n_nodes) for j in range(p)))
    tables.write_table(out / "scores.csv", tables.SCORE_COLUMNS,
                       ((e.alpha, e.lam, e.cv_score, e.k_nonzero, e.aic) for e in result.entries))
    sig = significant_features(best.coefficients, cfg.gene_norm_threshold)
    _write_summary(out, "path", {
        "selected": {"alpha": best.alpha, "lambda": best.lam, "aic": best.aic,
                     "cv_score": best.cv_score, "K": best.k_nonzero},
        "lambda_critical": {str(a): v for a, v in result.lambda_critical.items()},
        "n_entries": len(result.entries),
        "significant_features": [prep.feature_names[j] for j in sig],
        "response_center": prep.y_center,
    })
    print(f"path: {len(result.entries)} fits; selected alpha={best.alpha:g} lambda={best.lam:.6g} "
          f"AIC={best.aic:.6g}")


def cmd_predict(cfg: RunConfig):
    out = Path(cfg.out)
    _, prep, graph = _training(cfg)
    if len(prep.holdout) == 0:
        raise NetworkElasticNetError("predict needs a test split (train_frac < 1)")
    sol = admm_fit(graph, cfg.solver_config())
    pred = predict_holdout(graph, sol.coefficients, prep.holdout, cfg.n_attach)
    actual = prep.holdout.actual
    tables.write_table(out / "predictions.csv", tables.PREDICTION_COLUMNS,
                       zip(prep.holdout.ids, pred, actual))
    known = np.isfinite(actual)
    r = pearson(pred[known], actual[known])
    _write_summary(out, "predict", {
        "correlation": r, "n_test": len(pred), "n_known": int(known.sum()),
        "mse": float(np.mean((pred[known] - actual[known]) ** 2)) if known.any() else None,
        "converged": sol.converged, "response_center": prep.y_center,
    })
    print(f"predict: {len(pred)} test patients, correlation(actual, predicted) = {r:.4f}")


def cmd_cluster(cfg: RunConfig):
    out = Path(cfg.out)
    _, prep, graph = _training(cfg)
    sol = admm_fit(graph, cfg.solver_config())
    assignment = consensus_clusters(graph, sol, cfg.tol)
    tables.write_table(out / "clusters.csv", tables.CLUSTER_COLUMNS, zip(prep.train_ids, assignment.labels))
    _write_summary(out, "cluster", {"sizes": assignment.sizes, "converged": sol.converged})
    print(f"cluster: {assignment.n_clusters} clusters, sizes {assignment.sizes}")


def cmd_enrich(cfg: RunConfig):
    out = Path(cfg.out)
    cohort = _load(cfg)
    path = Path(cfg.clusters) if cfg.clusters else out / "clusters.csv"
    labels = tables.read_clusters(path)
    pos = {pid: k for k, pid in enumerate(cohort.ids)}
    missing = [pid for pid in labels if pid not in pos]
    if missing:
        raise NetworkElasticNetError(f"{len(missing)} clustered patient(s) absent from clinical data, e.g. {missing[0]}")
    ids = sorted(labels)
    lab = np.array([labels[i] for i in ids])
    sizes = [int(np.sum(lab == c)) for c in range(1, lab.max() + 1)]
    stages = [cohort.stages()[pos[i]] for i in ids]
    rows = stage_enrichment(ClusterAssignment(lab, sizes), stages)
    tables.write_table(out / "enrichment.csv", tables.ENRICHMENT_COLUMNS,
                       ((r.cluster, r.stage, r.count, r.p_value, r.significant) for r in rows))
    hits = [f"cluster {r.cluster}/stage {r.stage}" for r in rows if r.significant]
    _write_summary(out, "enrich", {"significant": hits, "threshold": SIGNIFICANCE})
    print(f"enrich: {len(rows)} cells, {len(hits)} significant at p < {SIGNIFICANCE}")


HANDLERS = {"synth": cmd_synth, "fit": cmd_fit, "path": cmd_path, "predict": cmd_predict,
            "cluster": cmd_cluster, "enrich": cmd_enrich}


def _bool(s):
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def build_parser() -> argparse.ArgumentParser:
    d = RunConfig()
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("input/output")
    g.add_argument("--config", help="JSON config; keys mirror the long flag names")
    g.add_argument("--expression", help="expression CSV: patient_id plus one column per gene")
    g.add_argument("--clinical", help="clinical CSV: " + ", ".join(tables.CLINICAL_COLUMNS))
    g.add_argument("--edges", help="optional edge list CSV (source,target,weight); replaces the k-NN graph")
    g.add_argument("--clusters", help="clusters.csv for enrich (default: <out>/clusters.csv)")
    g.add_argument("--out", help=f"output directory (default {d.out})")
    g.add_argument("-v", "--verbose", action="count", default=0)
    m = common.add_argument_group("model")
    m.add_argument("--lambda", dest="lam", type=float, help=f"edge penalty strength (default {d.lam})")
    m.add_argument("--alpha", type=float, help=f"L1 share of the edge penalty in [0,1] (default {d.alpha})")
    m.add_argument("--mu", type=float, help=f"ridge strength on coefficients (default {d.mu})")
    m.add_argument("--rho", type=float, help=f"ADMM penalty parameter (default {d.rho})")
    m.add_argument("--max-iters", dest="max_iters", type=int, help=f"ADMM iteration cap (default {d.max_iters})")
    m.add_argument("--eps-abs", dest="eps_abs", type=float, help=f"absolute tolerance (default {d.eps_abs})")
    m.add_argument("--eps-rel", dest="eps_rel", type=float, help=f"relative tolerance (default {d.eps_rel})")
    m.add_argument("--response", choices=("aft", "raw"),
                   help=f"aft: Kaplan-Meier weighted transform; raw: use survival_months as is (default {d.response})")
    m.add_argument("--log-time", dest="log_time", type=_bool, help=f"model log survival time (default {d.log_time})")
    m.add_argument("--intercept", type=_bool, help=f"append a constant feature (default {d.intercept})")
    m.add_argument("--standardize", type=_bool, help=f"scale genes to unit variance (default {d.standardize})")
    m.add_argument("--top-genes", dest="top_genes", type=int,
                   help=f"keep the most response-correlated genes (default {d.top_genes})")
    p = common.add_argument_group("path and graph")
    p.add_argument("--gamma", type=float, help=f"lambda multiplier along the path (default {d.gamma})")
    p.add_argument("--lambda-init", dest="lambda_init", type=float, help=f"first nonzero lambda (default {d.lambda_init})")
    p.add_argument("--alpha-grid", dest="alpha_grid", type=lambda s: [float(v) for v in s.split(",")],
                   help="comma-separated alpha values for path (default 0)")
    p.add_argument("--tol", type=float, help=f"consensus tolerance for path stop and clustering (default {d.tol})")
    p.add_argument("--kernel", choices=("inverse_exposure", "euclidean", "correlation", "diffusion"),
                   help=f"similarity kernel for the k-NN graph (default {d.kernel})")
    p.add_argument("--knn", type=int, help=f"neighbours per node in the training graph (default {d.knn})")
    p.add_argument("--n-attach", dest="n_attach", type=int,
                   help=f"training nodes a test patient attaches to (default {d.n_attach})")
    p.add_argument("--seed", type=int, help=f"random seed (default {d.seed})")
    p.add_argument("--train-frac", dest="train_frac", type=float, help=f"training share of the split (default {d.train_frac})")

    parser = argparse.ArgumentParser(prog="netelastic", description="Network elastic net regression on graphs.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "write the synthetic three-block benchmark (cohort CSVs, edges, config.json)",
        "fit": "fit all patients at one (lambda, alpha); writes coefficients.csv",
        "path": "regularization path on the training split with AIC selection; writes path.csv, scores.csv",
        "predict": "fit the training split and predict test patients; writes predictions.csv",
        "cluster": "consensus clusters of the fitted training network; writes clusters.csv",
        "enrich": "stage over-representation per cluster; writes enrichment.csv",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "synth":
            cfg = replace(cfg, expression=None, clinical=None, edges=None)
        cfg.validate()
        HANDLERS[args.command](cfg)
    except (NetworkElasticNetError, OSError) as exc:
        err = {"error": type(exc).__name__, "command": args.command, "message": str(exc)}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

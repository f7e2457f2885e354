"""End-to-end steps shared by the CLI commands: configuration, train/test
split, design preparation and graph construction."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import aft
from .errors import DegenerateDataError, InvalidInputError
from .graph import KERNELS, Edge, NodeData, ProblemGraph, build_knn_graph
from .inference import Holdout
from .path import DEFAULT_ALPHA_GRID, PathConfig
from .solver import SolverConfig
from .tables import Cohort, read_edges

logger = logging.getLogger(__name__)

PATH_KEYS = ("expression", "clinical", "edges", "clusters", "out")


@dataclass
class RunConfig:
    expression: Optional[str] = None
    clinical: Optional[str] = None
    edges: Optional[str] = None
    clusters: Optional[str] = None
    out: str = "out"
    # response handling
    response: str = "aft"
    log_time: bool = False
    intercept: bool = True
    standardize: bool = True
    top_genes: Optional[int] = 100
    # solver
    lam: float = 0.5
    alpha: float = 0.0
    mu: float = 0.0
    rho: float = 1.0
    eps_abs: float = 1e-6
    eps_rel: float = 1e-5
    max_iters: int = 10000
    # path
    gamma: float = 1.5
    lambda_init: float = 1e-3
    alpha_grid: list = field(default_factory=lambda: [0.0])
    tol: float = 1e-4
    max_steps: int = 200
    zero_tol: float = 1e-6
    gene_norm_threshold: float = 0.05
    # graph and attachment
    kernel: str = "inverse_exposure"
    knn: int = 5
    n_attach: int = 5
    w_cap: float = 1e3
    # split
    seed: int = 0
    train_frac: float = 0.8
    # synthetic generator overrides
    synth: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.response not in ("aft", "raw"):
            raise InvalidInputError(f"response must be 'aft' or 'raw' (got {self.response!r})")
        if self.kernel not in KERNELS:
            raise InvalidInputError(f"kernel must be one of {KERNELS}")
        if not 0.0 < self.train_frac <= 1.0:
            raise InvalidInputError("train_frac must lie in (0, 1]")
        if self.knn < 1 or self.n_attach < 1:
            raise InvalidInputError("knn and n_attach must be >= 1")
        if self.top_genes is not None and self.top_genes < 1:
            raise InvalidInputError("top_genes must be >= 1")
        self.solver_config()
        self.path_config()
        for key in ("expression", "clinical", "edges"):
            p = getattr(self, key)
            if p is not None and not Path(p).is_file():
                raise InvalidInputError(f"{key} file not found: {p}")
        return self

    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.lam, self.alpha, self.mu, self.rho, self.eps_abs, self.eps_rel, self.max_iters)

    def path_config(self) -> PathConfig:
        return PathConfig(self.gamma, self.lambda_init, tuple(float(a) for a in self.alpha_grid),
                          self.tol, 1.0 - self.train_frac if self.train_frac < 1 else 0.2,
                          self.max_steps, self.zero_tol)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def load_config(path=None, overrides=None) -> RunConfig:
    """Defaults, then the JSON file (relative paths resolved against its
    directory), then non-None ``overrides``."""
    values = {}
    known = {f.name for f in fields(RunConfig)}
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read config {path}: {exc}") from None
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown config key(s): {sorted(unknown)}")
        for key in PATH_KEYS:
            if data.get(key) is not None and not Path(data[key]).is_absolute():
                data[key] = str(path.parent / data[key])
        values.update(data)
    for key, v in (overrides or {}).items():
        if v is not None:
            values[key] = v
    return RunConfig(**values)


def split_indices(cohort: Cohort, train_frac: float, seed: int):
    """Seeded train/test split, stratified by stage when every stage is known."""
    n = len(cohort)
    if train_frac >= 1.0:
        return np.arange(n), np.arange(0)
    rng = np.random.default_rng(seed)
    if np.all(np.isfinite(cohort.stage)):
        strata = [np.flatnonzero(cohort.stage == s) for s in np.unique(cohort.stage)]
    else:
        strata = [np.arange(n)]
    test = []
    for members in strata:
        perm = rng.permutation(members)
        test.extend(perm[: int(round((1.0 - train_frac) * len(members)))].tolist())
    test = np.array(sorted(test), dtype=int)
    train = np.setdiff1d(np.arange(n), test)
    if len(train) < 2:
        raise InvalidInputError("training split has fewer than 2 patients")
    return train, test


@dataclass
class Prepared:
    """Training nodes on the design scale plus the matching test transform."""

    train_ids: list
    nodes: list
    features: np.ndarray  # per-node kernel features (standardised genes)
    feature_names: list
    holdout: Holdout
    y_center: float = 0.0

    @property
    def n_features(self):
        return len(self.feature_names)


def prepare(cohort: Cohort, train: np.ndarray, test: np.ndarray, cfg: RunConfig) -> Prepared:
    tr, te = cohort.subset(train), cohort.subset(test)
    if cfg.response == "aft":
        return _prepare_aft(tr, te, cfg)
    return _prepare_raw(tr, te, cfg)


def _screen(X, y, cfg, genes):
    if cfg.top_genes is None or cfg.top_genes >= X.shape[1]:
        return list(range(X.shape[1]))
    cols = aft.screen_top_genes(X, y, cfg.top_genes)
    logger.info("screened %d of %d genes", len(cols), len(genes))
    return sorted(cols)


def _scale(X, cfg):
    if not cfg.standardize:
        return np.ones(X.shape[1])
    s = X.std(axis=0)
    return np.where(s > 0, s, 1.0)


def _with_intercept(X, cfg):
    return np.hstack([X, np.ones((X.shape[0], 1))]) if cfg.intercept else X


def _prepare_aft(tr: Cohort, te: Cohort, cfg: RunConfig) -> Prepared:
    order = sorted(range(len(tr)), key=lambda r: (tr.time[r], -tr.event[r]))
    tr = tr.subset(order)
    records = tr.to_records()
    w = aft.km_weights(records)
    if w.sum() <= 0:
        raise DegenerateDataError("training split has no observed events")
    x_star, y_star = aft.stute_transform(records, w, cfg.log_time)
    cols = _screen(x_star, y_star, cfg, tr.genes)
    scale = _scale(tr.expression[:, cols], cfg)
    Xs = tr.expression[:, cols] / scale
    y = aft.response_values(records, cfg.log_time)
    x_bar, y_bar = aft.weighted_means(Xs, y, w)
    root = np.sqrt(len(records) * w)
    design = root[:, None] * _with_intercept(Xs - x_bar, cfg)
    response = root * (y - y_bar)
    nodes = [NodeData(k, design[k : k + 1], response[k : k + 1], tr.exposure[k]) for k in range(len(tr))]

    Xt = _with_intercept(te.expression[:, cols] / scale - x_bar, cfg)
    yt = np.log(te.time) if cfg.log_time else te.time.astype(float)
    actual = np.where(te.event == 1, yt - y_bar, np.nan)
    names = [tr.genes[c] for c in cols] + (["intercept"] if cfg.intercept else [])
    return Prepared(tr.ids, nodes, Xs, names, Holdout(Xt, te.exposure.astype(float), actual, te.ids), y_bar)


def _prepare_raw(tr: Cohort, te: Cohort, cfg: RunConfig) -> Prepared:
    cols = _screen(tr.expression, tr.time, cfg, tr.genes)
    X = tr.expression[:, cols]
    center = X.mean(axis=0) if cfg.standardize else np.zeros(X.shape[1])
    scale = _scale(X, cfg)
    Xs = (X - center) / scale
    design = _with_intercept(Xs, cfg)
    nodes = [NodeData(k, design[k : k + 1], tr.time[k : k + 1], tr.exposure[k]) for k in range(len(tr))]
    Xt = _with_intercept((te.expression[:, cols] - center) / scale, cfg)
    names = [tr.genes[c] for c in cols] + (["intercept"] if cfg.intercept else [])
    return Prepared(tr.ids, nodes, Xs, names, Holdout(Xt, te.exposure.astype(float), te.time.astype(float), te.ids))


def build_graph(prep: Prepared, cfg: RunConfig) -> ProblemGraph:
    """Edges from ``cfg.edges`` restricted to training patients, else a
    symmetric k-NN graph under ``cfg.kernel``."""
    nodes = prep.nodes
    if cfg.edges:
        pos = {pid: k for k, pid in enumerate(prep.train_ids)}
        edges = {}
        for a, b, wt in read_edges(cfg.edges):
            if a in pos and b in pos and a != b:
                e = Edge(pos[a], pos[b], wt)
                edges[e.endpoints] = e
        return ProblemGraph(nodes, [edges[k] for k in sorted(edges)])
    k = min(cfg.knn, len(nodes) - 1)
    features = None if cfg.kernel == "inverse_exposure" else prep.features
    kw = {"w_cap": cfg.w_cap} if cfg.kernel == "inverse_exposure" else {}
    return build_knn_graph(nodes, cfg.kernel, k, features=features, **kw)


def pearson(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if len(a) < 2 or np.std(a) == 0 or np.std(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])

"""ADMM solver for network elastic net regression.

Minimises::

    sum_i ||y_i - D_i x_i||^2 + mu ||x_i||^2
      + lam * (1 - alpha) * sum_(j,k) w_jk ||x_j - x_k||_2
      + lam * alpha       * sum_(j,k) w_jk ||x_j - x_k||_1

with one consensus copy per edge endpoint (``z_ij`` lives on edge (i, j)
next to node i) and scaled duals ``u``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DivergenceError, InvalidInputError, SingularSystemError
from .graph import NodeData, ProblemGraph
from .prox import difference_prox

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.0
    alpha: float = 0.0
    mu: float = 0.0
    rho: float = 1.0
    eps_abs: float = 1e-6
    eps_rel: float = 1e-5
    max_iters: int = 10000

    def __post_init__(self):
        for name in ("lam", "alpha", "mu", "rho", "eps_abs", "eps_rel"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")
        if self.lam < 0 or self.mu < 0:
            raise InvalidInputError("lam and mu must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError("alpha must lie in [0, 1]")
        if self.rho <= 0 or self.eps_abs <= 0 or self.eps_rel <= 0:
            raise InvalidInputError("rho, eps_abs and eps_rel must be > 0")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class EdgeState:
    """Per-edge consensus copies and scaled duals, stacked over edges.

    Row ``e`` of ``z_ij``/``u_ij`` belongs to the lower endpoint of edge ``e``,
    ``z_ji``/``u_ji`` to the upper one.
    """

    z_ij: np.ndarray
    z_ji: np.ndarray
    u_ij: np.ndarray
    u_ji: np.ndarray

    @classmethod
    def from_coefficients(cls, x, edge_idx):
        zi, zj = x[edge_idx[:, 0]].copy(), x[edge_idx[:, 1]].copy()
        return cls(zi, zj, np.zeros_like(zi), np.zeros_like(zj))

    def copy(self) -> "EdgeState":
        return EdgeState(self.z_ij.copy(), self.z_ji.copy(), self.u_ij.copy(), self.u_ji.copy())


@dataclass
class Solution:
    coefficients: np.ndarray
    iterations: int
    primal_residuals: list = field(default_factory=list)
    dual_residuals: list = field(default_factory=list)
    converged: bool = False
    objective: float = float("nan")
    state: Optional[EdgeState] = None
    config: Optional[SolverConfig] = None


def node_objective(node: NodeData, x, mu: float) -> float:
    """``||response - design @ x||^2 + mu ||x||^2``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (node.n_features,):
        raise InvalidInputError(f"node {node.node_id}: expected {node.n_features} coefficients, got {x.shape}")
    r = node.response - node.design @ x
    return float(r @ r + mu * (x @ x))


def _system_matrix(node: NodeData, mu: float, rho: float, deg: int) -> np.ndarray:
    p = node.n_features
    A = 2.0 * node.design.T @ node.design + (2.0 * mu + rho * deg) * np.eye(p)
    if mu == 0 and deg == 0:
        if np.linalg.matrix_rank(node.design) < p:
            raise SingularSystemError(node.node_id)
    return A


def x_update(node: NodeData, neighbors: Sequence, config: SolverConfig):
    """Exact node subproblem: ``argmin f_i(x) + sum (rho/2)||x - v_j||^2``
    where each ``v_j = z_ij - u_ij``."""
    p = node.n_features
    vs = [np.asarray(v, dtype=float) for v in neighbors]
    for v in vs:
        if v.shape != (p,):
            raise InvalidInputError(f"node {node.node_id}: neighbor vector has shape {v.shape}")
    A = _system_matrix(node, config.mu, config.rho, len(vs))
    rhs = 2.0 * node.design.T @ node.response
    if vs:
        rhs = rhs + config.rho * np.sum(vs, axis=0)
    return np.linalg.solve(A, rhs)


def penalty_terms(x, edge_idx, weights):
    """Return ``(sum w ||dx||_2, sum w ||dx||_1)`` over edges."""
    if len(weights) == 0:
        return 0.0, 0.0
    d = x[edge_idx[:, 0]] - x[edge_idx[:, 1]]
    return float(weights @ np.linalg.norm(d, axis=1)), float(weights @ np.abs(d).sum(axis=1))


def total_objective(graph: ProblemGraph, x, config: SolverConfig) -> float:
    edge_idx, w = graph.edge_index()
    l2, l1 = penalty_terms(x, edge_idx, w)
    fit = sum(node_objective(nd, x[k], config.mu) for k, nd in enumerate(graph.nodes))
    return fit + config.lam * (1 - config.alpha) * l2 + config.lam * config.alpha * l1


class _EdgeScatter:
    """Sums per-edge-endpoint rows into per-node rows via a cached sort."""

    def __init__(self, edge_idx, n):
        rows = np.concatenate([edge_idx[:, 0], edge_idx[:, 1]])
        self.order = np.argsort(rows, kind="stable")
        self.nodes, self.starts = np.unique(rows[self.order], return_index=True)
        self.n = n

    def __call__(self, at_i, at_j):
        acc = np.zeros((self.n, at_i.shape[1]))
        if len(self.order):
            vals = np.concatenate([at_i, at_j])[self.order]
            acc[self.nodes] = np.add.reduceat(vals, self.starts, axis=0)
        return acc


class _NodeSystems:
    """Cached inverses of the per-node x-update matrices."""

    def __init__(self, graph: ProblemGraph, config: SolverConfig):
        self.inv = np.empty((graph.n_nodes, graph.n_features, graph.n_features))
        self.dty = np.empty((graph.n_nodes, graph.n_features))
        for k, nd in enumerate(graph.nodes):
            A = _system_matrix(nd, config.mu, config.rho, graph.degree(k))
            try:
                np.linalg.cholesky(A)
            except np.linalg.LinAlgError:
                raise SingularSystemError(k) from None
            self.inv[k] = np.linalg.inv(A)
            self.dty[k] = 2.0 * nd.design.T @ nd.response

    def solve(self, acc, rho):
        return np.matmul(self.inv, (self.dty + rho * acc)[:, :, None])[:, :, 0]


def admm_fit(graph: ProblemGraph, config: SolverConfig, warm=None) -> Solution:
    """Fit all node coefficient vectors by two-block ADMM.

    ``warm`` is an optional ``(coefficients, EdgeState)`` pair (or a previous
    :class:`Solution`) from a fit on the same graph.
    """
    n, p = graph.n_nodes, graph.n_features
    edge_idx, w = graph.edge_index()
    rho = config.rho
    systems = _NodeSystems(graph, config)
    c1 = config.lam * (1.0 - config.alpha) * w
    c2 = config.lam * config.alpha * w
    i0, i1 = edge_idx[:, 0], edge_idx[:, 1]
    scatter = _EdgeScatter(edge_idx, n)

    if isinstance(warm, Solution):
        warm = (warm.coefficients, warm.state)
    if warm is not None:
        x = np.array(warm[0], dtype=float)
        if x.shape != (n, p):
            raise InvalidInputError(f"warm coefficients have shape {x.shape}, expected {(n, p)}")
        st = warm[1].copy() if warm[1] is not None else EdgeState.from_coefficients(x, edge_idx)
    else:
        x = np.zeros((n, p))
        st = EdgeState.from_coefficients(x, edge_idx)

    sqrt_np = np.sqrt(n * p)
    r_hist, s_hist = [], []
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        x = systems.solve(scatter(st.z_ij - st.u_ij, st.z_ji - st.u_ji), rho)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(it)

        xi, xj = x[i0], x[i1]
        a = xi + st.u_ij
        b = xj + st.u_ji
        delta = difference_prox(a - b, rho, c1, c2)
        zi_old, zj_old = st.z_ij, st.z_ji
        st.z_ij = (a + b + delta) / 2.0
        st.z_ji = (a + b - delta) / 2.0
        st.u_ij = a - st.z_ij
        st.u_ji = b - st.z_ji

        r = np.sqrt(np.sum((xi - st.z_ij) ** 2) + np.sum((xj - st.z_ji) ** 2))
        s = rho * np.sqrt(np.sum((st.z_ij - zi_old) ** 2) + np.sum((st.z_ji - zj_old) ** 2))
        x_norm = np.sqrt(np.sum(xi**2) + np.sum(xj**2))
        z_norm = np.sqrt(np.sum(st.z_ij**2) + np.sum(st.z_ji**2))
        u_norm = np.sqrt(np.sum(st.u_ij**2) + np.sum(st.u_ji**2))
        eps_pri = sqrt_np * config.eps_abs + config.eps_rel * max(x_norm, z_norm)
        eps_dual = sqrt_np * config.eps_abs + config.eps_rel * rho * u_norm
        r_hist.append(float(r))
        s_hist.append(float(s))
        if r <= eps_pri and s <= eps_dual:
            converged = True
            break

    if not converged:
        logger.warning("ADMM stopped at max_iters=%d without converging (r=%.3g, s=%.3g)",
                       config.max_iters, r_hist[-1], s_hist[-1])
    return Solution(
        coefficients=x,
        iterations=it,
        primal_residuals=r_hist,
        dual_residuals=s_hist,
        converged=converged,
        objective=total_objective(graph, x, config),
        state=st,
        config=config,
    )

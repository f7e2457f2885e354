"""Out-of-sample coefficients: attach a new node to its nearest training nodes
and place its coefficient vector at their weighted geometric median."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .graph import W_CAP, ProblemGraph, kernel_weight


@dataclass
class AttachmentResult:
    neighbor_ids: list
    weights: list
    inferred_x: np.ndarray
    converged: bool = True


@dataclass
class WeberResult:
    point: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def weber_objective(x, anchors, weights) -> float:
    return float(weights @ np.linalg.norm(anchors - x, axis=1))


def _pull(y, anchors, weights, skip=None):
    """Weighted sum of unit vectors from ``y`` to every anchor except ``skip``."""
    diff = anchors - y
    dist = np.linalg.norm(diff, axis=1)
    mask = dist > 0
    if skip is not None:
        mask[skip] = False
    return (weights[mask, None] * diff[mask] / dist[mask, None]).sum(axis=0)


def weber_point(anchors, weights=None, tol=1e-8, max_iters=1000) -> WeberResult:
    """Minimise ``sum_k w_k ||x - a_k||`` by Weiszfeld iteration.

    An anchor that satisfies the subgradient optimality condition
    ``||sum_{j != k} w_j (a_j - a_k)/||a_j - a_k|| || < w_k`` is returned
    directly. Iterates that land on an anchor use the Vardi-Zhang step.
    Stops once the objective decrease drops below ``tol``.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    m = anchors.shape[0]
    weights = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    if m == 0:
        raise InvalidInputError("weber_point needs at least one anchor")
    if weights.shape != (m,) or np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise InvalidInputError("weights must be positive, finite, one per anchor")

    # collapse duplicate anchors; their weights add
    uniq, inverse = np.unique(anchors, axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    uw = np.bincount(inverse, weights=weights, minlength=len(uniq))
    if len(uniq) == 1:
        return WeberResult(uniq[0].copy(), 0.0, 0, True, [0.0])

    for k in range(len(uniq)):
        # strict with a rounding margin: equal-weight ties fall through to the midpoint
        if np.linalg.norm(_pull(uniq[k], uniq, uw, skip=k)) < uw[k] * (1.0 - 1e-9):
            f = weber_objective(uniq[k], uniq, uw)
            return WeberResult(uniq[k].copy(), f, 0, True, [f])

    y = uw @ uniq / uw.sum()
    f = weber_objective(y, uniq, uw)
    history = [f]
    for it in range(1, max_iters + 1):
        dist = np.linalg.norm(uniq - y, axis=1)
        hit = dist == 0
        inv = np.zeros_like(dist)
        inv[~hit] = uw[~hit] / dist[~hit]
        t = inv @ uniq / inv.sum()
        if hit.any():
            k = int(np.flatnonzero(hit)[0])
            r = np.linalg.norm(_pull(y, uniq, uw, skip=k))
            eta = uw[k]
            beta = min(1.0, eta / r) if r > 0 else 1.0
            y_new = (1.0 - beta) * t + beta * y
        else:
            y_new = t
        f_new = weber_objective(y_new, uniq, uw)
        if f_new > f:
            # round-off: keep the better iterate
            return WeberResult(y, f, it, True, history)
        history.append(f_new)
        done = f - f_new <= tol
        y, f = y_new, f_new
        if done:
            return WeberResult(y, f, it, True, history)
    return WeberResult(y, f, max_iters, False, history)


def attach_neighbors(new_exposure, graph: ProblemGraph, k: int = 5, w_cap=W_CAP):
    """The ``k`` training nodes with the largest inverse-exposure weight.

    Returns ``(node_id, weight)`` pairs, heaviest first, ties to the lower id.
    """
    n = graph.n_nodes
    if n == 0:
        raise InvalidInputError("empty training graph")
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must satisfy 1 <= k <= {n} (got {k})")
    w = np.array([kernel_weight("inverse_exposure", [new_exposure], [nd.exposure], w_cap=w_cap)
                  for nd in graph.nodes])
    order = np.lexsort((np.arange(n), -w))[:k]
    return [(int(i), float(w[i])) for i in order]


def infer_coefficients(new_exposure, graph: ProblemGraph, coefficients, k=5, tol=1e-8, max_iters=1000):
    pairs = attach_neighbors(new_exposure, graph, k)
    ids = [i for i, _ in pairs]
    w = np.array([wt for _, wt in pairs])
    res = weber_point(np.asarray(coefficients)[ids], w, tol=tol, max_iters=max_iters)
    return AttachmentResult(ids, list(w), res.point, res.converged)


def predict_response(inferred_x, new_covariates) -> float:
    x = np.asarray(inferred_x, dtype=float)
    c = np.asarray(new_covariates, dtype=float)
    if x.shape != c.shape:
        raise InvalidInputError(f"coefficients {x.shape} and covariates {c.shape} differ")
    return float(x @ c)


@dataclass
class Holdout:
    """Held-out nodes expressed on the training design scale.

    ``actual`` is NaN where the response is unknown (e.g. censored).
    """

    covariates: np.ndarray
    exposures: np.ndarray
    actual: np.ndarray
    ids: list = field(default_factory=list)

    def __len__(self):
        return len(self.exposures)


def predict_holdout(graph: ProblemGraph, coefficients, holdout: Holdout, k=5) -> np.ndarray:
    k = min(k, graph.n_nodes)
    out = np.empty(len(holdout))
    for t in range(len(holdout)):
        att = infer_coefficients(holdout.exposures[t], graph, coefficients, k)
        out[t] = predict_response(att.inferred_x, holdout.covariates[t])
    return out

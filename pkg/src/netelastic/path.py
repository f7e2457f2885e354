"""Warm-started regularization paths over a geometric lambda ladder, and
AIC-based model selection on held-out data."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .graph import ProblemGraph
from .inference import Holdout, predict_holdout
from .solver import Solution, SolverConfig, admm_fit

logger = logging.getLogger(__name__)

DEFAULT_ALPHA_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class PathConfig:
    gamma: float = 1.5
    lambda_init: float = 1e-3
    alpha_grid: tuple = (0.0,)
    consensus_tol: float = 1e-4
    cv_fraction: float = 0.2
    max_steps: int = 200
    zero_tol: float = 1e-6

    def __post_init__(self):
        if not self.gamma > 1:
            raise InvalidInputError("gamma must be > 1")
        if not self.lambda_init > 0:
            raise InvalidInputError("lambda_init must be > 0")
        if len(self.alpha_grid) == 0:
            raise InvalidInputError("alpha_grid must be non-empty")
        if any(not 0.0 <= a <= 1.0 for a in self.alpha_grid):
            raise InvalidInputError("alpha values must lie in [0, 1]")
        if not self.consensus_tol > 0:
            raise InvalidInputError("consensus_tol must be > 0")
        if not 0.0 < self.cv_fraction < 1.0:
            raise InvalidInputError("cv_fraction must lie in (0, 1)")


@dataclass
class PathEntry:
    lam: float
    alpha: float
    solution: Solution
    cv_score: Optional[float] = None
    k_nonzero: Optional[int] = None
    aic: Optional[float] = None
    n_eval: Optional[int] = None

    @property
    def coefficients(self):
        return self.solution.coefficients


@dataclass
class PathResult:
    entries: list = field(default_factory=list)
    selected: Optional[int] = None
    lambda_critical: dict = field(default_factory=dict)

    def for_alpha(self, alpha) -> list:
        return [e for e in self.entries if e.alpha == alpha]

    @property
    def best(self) -> Optional[PathEntry]:
        return None if self.selected is None else self.entries[self.selected]


def _fused(solution: Solution, tol) -> bool:
    # edge copies agree exactly once the prox fuses an edge, unlike x
    st = solution.state
    if st is None or len(st.z_ij) == 0:
        return True
    return bool(np.max(np.abs(st.z_ij - st.z_ji)) <= tol)


def regularization_path(graph: ProblemGraph, solver: SolverConfig = SolverConfig(),
                        path: PathConfig = PathConfig()) -> PathResult:
    """Fit ``lam = 0, lambda_init, gamma*lambda_init, ...`` for each alpha.

    Each fit is warm-started from the previous one. A ladder stops at the
    first lambda where the coefficients moved by at most ``consensus_tol``
    (max-norm) since the previous lambda and every edge's two consensus
    copies agree to within the same tolerance, or at the second consecutive
    fully fused lambda. That lambda is recorded as lambda-critical.
    """
    result = PathResult()
    for alpha in path.alpha_grid:
        prev = admm_fit(graph, solver.with_(lam=0.0, alpha=alpha))
        result.entries.append(PathEntry(0.0, alpha, prev))
        lam = path.lambda_init
        for step in range(path.max_steps):
            sol = admm_fit(graph, solver.with_(lam=lam, alpha=alpha), warm=prev)
            result.entries.append(PathEntry(lam, alpha, sol))
            change = float(np.max(np.abs(sol.coefficients - prev.coefficients)))
            logger.debug("alpha=%g lam=%.4g iters=%d change=%.3g", alpha, lam, sol.iterations, change)
            fused = _fused(sol, path.consensus_tol)
            # fused at two consecutive lambdas: both exact solutions are the pooled fit
            if fused and (change <= path.consensus_tol or _fused(prev, path.consensus_tol)):
                break
            prev = sol
            if step < path.max_steps - 1:
                lam = lam * path.gamma
        else:
            logger.warning("alpha=%g: no consensus after %d steps (lam=%.4g)", alpha, path.max_steps, lam)
        result.lambda_critical[alpha] = lam
    return result


def aic_score(n: int, cv_score: float, k_nonzero: int) -> float:
    """``n * ln(cv_score) + 2 * k_nonzero``."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if not cv_score > 0:
        raise InvalidInputError(f"cv_score must be > 0 (got {cv_score})")
    if k_nonzero < 0:
        raise InvalidInputError("k_nonzero must be >= 0")
    return n * math.log(cv_score) + 2 * k_nonzero


def count_nonzero(coefficients, zero_tol=1e-6) -> int:
    return int(np.sum(np.abs(np.asarray(coefficients)) > zero_tol))


def significant_features(coefficients, threshold=0.05) -> list[int]:
    """Columns whose coefficient norm across all nodes exceeds ``threshold``."""
    norms = np.linalg.norm(np.asarray(coefficients), axis=0)
    return [int(j) for j in np.flatnonzero(norms > threshold)]


def score_entries(result: PathResult, graph: ProblemGraph, holdout: Holdout,
                  n_attach=5, zero_tol=1e-6) -> None:
    """Fill ``cv_score``, ``k_nonzero`` and ``aic`` for every entry in place.

    The CV score is the mean squared prediction error over held-out nodes
    with a known response.
    """
    known = np.isfinite(holdout.actual)
    if not known.any():
        raise InvalidInputError("holdout has no known responses")
    for entry in result.entries:
        pred = predict_holdout(graph, entry.coefficients, holdout, k=n_attach)
        err = pred[known] - holdout.actual[known]
        entry.cv_score = float(np.mean(err**2))
        entry.n_eval = int(known.sum())
        entry.k_nonzero = count_nonzero(entry.coefficients, zero_tol)
        entry.aic = aic_score(entry.n_eval, entry.cv_score, entry.k_nonzero)


def select_model(result: PathResult, holdout: Optional[Holdout] = None,
                 graph: Optional[ProblemGraph] = None, n_attach=5, zero_tol=1e-6) -> PathEntry:
    """Return the minimum-AIC entry (first one on ties) and record its index.

    Entries are scored against ``holdout`` first when one is given; otherwise
    their existing ``aic`` values are used.
    """
    if not result.entries:
        raise InvalidInputError("empty regularization path")
    if holdout is not None:
        if graph is None:
            raise InvalidInputError("scoring a holdout needs the training graph")
        score_entries(result, graph, holdout, n_attach, zero_tol)
    if any(e.aic is None for e in result.entries):
        raise InvalidInputError("path entries are unscored")
    result.selected = int(np.argmin([e.aic for e in result.entries]))
    return result.entries[result.selected]

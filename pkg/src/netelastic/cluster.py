"""Consensus clusters of a fitted network and stage over-representation tests."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidInputError
from .graph import ProblemGraph

logger = logging.getLogger(__name__)

SIGNIFICANCE = 0.05


@dataclass
class ClusterAssignment:
    labels: np.ndarray  # 1-based, cluster 1 is the largest
    sizes: list = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)


@dataclass
class EnrichmentRow:
    cluster: int
    stage: int
    count: int
    p_value: float

    @property
    def significant(self) -> bool:
        return self.p_value < SIGNIFICANCE


def consensus_clusters(graph: ProblemGraph, coefficients, tol: float = 1e-4) -> ClusterAssignment:
    """Connected components of the subgraph of edges whose endpoint
    coefficients agree within ``tol`` in max-norm.

    ``coefficients`` may be an ``(n, p)`` array or a fitted ``Solution``.
    Labels run from 1 in order of decreasing size (ties: smallest member first).
    """
    x = getattr(coefficients, "coefficients", coefficients)
    x = np.asarray(x, dtype=float)
    n = graph.n_nodes
    if x.shape[0] != n:
        raise InvalidInputError(f"{x.shape[0]} coefficient rows for {n} nodes")
    if tol < 0:
        raise InvalidInputError("tol must be >= 0")
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in graph.edges:
        if np.max(np.abs(x[e.i] - x[e.j])) <= tol:
            ra, rb = find(e.i), find(e.j)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(n)])
    uniq, counts = np.unique(roots, return_counts=True)
    # roots are the smallest member of each component
    order = sorted(range(len(uniq)), key=lambda c: (-counts[c], uniq[c]))
    relabel = {uniq[c]: rank + 1 for rank, c in enumerate(order)}
    labels = np.array([relabel[r] for r in roots])
    return ClusterAssignment(labels, [int(counts[c]) for c in order])


def hypergeom_tail(m: int, N: int, M: int, n: int) -> float:
    """Exact ``P[X >= m]`` for X ~ Hypergeometric(population N, M successes, n draws)."""
    if not (0 <= M <= N and 0 <= n <= N):
        raise InvalidInputError(f"invalid hypergeometric parameters N={N}, M={M}, n={n}")
    lo = max(m, 0, n - (N - M))
    hi = min(n, M)
    if lo > hi:
        return 0.0
    total = sum(math.comb(M, x) * math.comb(N - M, n - x) for x in range(lo, hi + 1))
    return float(Fraction(total, math.comb(N, n)))


def stage_enrichment(assignment: ClusterAssignment, stages) -> list[EnrichmentRow]:
    """One-sided over-representation p-value for every (cluster, stage) cell.

    Nodes whose stage is missing (None or NaN) are left out of the population.
    """
    labels = np.asarray(assignment.labels)
    stages = list(stages)
    if len(stages) != len(labels):
        raise InvalidInputError(f"{len(stages)} stage labels for {len(labels)} nodes")
    known = [s is not None and not (isinstance(s, float) and math.isnan(s)) for s in stages]
    if not all(known):
        logger.warning("%d node(s) without stage left out of enrichment", known.count(False))
    lab = labels[np.array(known, dtype=bool)]
    st = np.array([int(s) for s, k in zip(stages, known) if k], dtype=int)
    N = len(st)
    stage_values = sorted(set(st.tolist()))
    rows = []
    for c in range(1, assignment.n_clusters + 1):
        members = st[lab == c]
        if len(members) == 0:
            logger.warning("cluster %d has no staged members; skipped", c)
            continue
        for s in stage_values:
            M = int(np.sum(st == s))
            count = int(np.sum(members == s))
            rows.append(EnrichmentRow(c, s, count, hypergeom_tail(count, N, M, len(members))))
    return rows


def adjusted_rand_index(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise InvalidInputError("label vectors differ in length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def pairs(v):
        return float(np.sum(v * (v - 1) // 2))

    index = pairs(table)
    row, col = pairs(table.sum(axis=1)), pairs(table.sum(axis=0))
    total = len(a) * (len(a) - 1) / 2
    expected = row * col / total if total else 0.0
    max_index = (row + col) / 2
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)

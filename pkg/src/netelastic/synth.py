"""Synthetic three-cluster benchmark with a block-structured link graph."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .graph import Edge, NodeData, ProblemGraph

logger = logging.getLogger(__name__)

# one row per block; feature k corresponds to column k (0-based)
TRUE_BLOCK_COEFFICIENTS = np.array([
    [0, 2, 3, 2, 0, 0, 0, 0, 0, 0],
    [0, 0, 4, -6, -5, 0, 0, 0, 0, 0],
    [0, 0, 0, -5, 6, 3, 0, 0, 0, 0],
], dtype=float)


@dataclass(frozen=True)
class SynthSpec:
    n: int = 100
    p: int = 10
    block_sizes: tuple = (33, 33, 34)
    noise_scale: float = 0.1
    intra_density: float = 0.95
    global_density: float = 0.01
    seed: int = 0
    # exposures of block b are drawn from U(b*gap, b*gap + width)
    exposure_gap: float = 100.0
    exposure_width: float = 50.0
    max_retries: int = 100

    def __post_init__(self):
        if sum(self.block_sizes) != self.n:
            raise InvalidInputError(f"block sizes {self.block_sizes} do not sum to n={self.n}")
        if len(self.block_sizes) > TRUE_BLOCK_COEFFICIENTS.shape[0]:
            raise InvalidInputError("at most three blocks are defined")
        if self.p < TRUE_BLOCK_COEFFICIENTS.shape[1]:
            raise InvalidInputError(f"p must be >= {TRUE_BLOCK_COEFFICIENTS.shape[1]}")
        for name in ("intra_density", "global_density"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1]")
        if self.noise_scale < 0:
            raise InvalidInputError("noise_scale must be >= 0")


@dataclass
class SynthInstance:
    nodes: list
    coefficients: np.ndarray
    labels: np.ndarray
    graph: ProblemGraph
    retries: list = field(default_factory=list)


def _streams(spec: SynthSpec):
    data, graph = np.random.SeedSequence(spec.seed).spawn(2)
    return np.random.default_rng(data), np.random.default_rng(graph)


def block_labels(spec: SynthSpec) -> np.ndarray:
    return np.repeat(np.arange(len(spec.block_sizes)), spec.block_sizes)


def generate_data(spec: SynthSpec = SynthSpec()):
    """Return ``(nodes, true_coefficients, block_labels)``.

    Every node holds one observation with features ~ U(-1, 1) and response
    ``x @ beta_block + noise_scale * N(0, 1)``.
    """
    rng, _ = _streams(spec)
    labels = block_labels(spec)
    beta = np.zeros((spec.n, spec.p))
    beta[:, : TRUE_BLOCK_COEFFICIENTS.shape[1]] = TRUE_BLOCK_COEFFICIENTS[labels]
    X = rng.uniform(-1.0, 1.0, size=(spec.n, spec.p))
    noise = rng.standard_normal(spec.n)
    y = np.einsum("ij,ij->i", X, beta) + spec.noise_scale * noise
    exposure = labels * spec.exposure_gap + rng.uniform(0.0, spec.exposure_width, size=spec.n)
    nodes = [NodeData(i, X[i : i + 1], y[i : i + 1], exposure[i]) for i in range(spec.n)]
    return nodes, beta, labels


def _is_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    if n <= 1:
        return True
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        a = stack.pop()
        for b in np.flatnonzero(adj[a] & ~seen):
            seen[b] = True
            stack.append(b)
    return bool(seen.all())


def _bernoulli_sym(rng, size, density):
    upper = np.triu(rng.random((size, size)) < density, k=1)
    return upper | upper.T


def block_adjacency(spec: SynthSpec = SynthSpec()):
    """Boolean symmetric adjacency and the list of per-block redraw counts.

    A sparse background is drawn first; each diagonal block is then
    overwritten by a dense draw, redrawn while it is internally disconnected
    (only possible when ``intra_density < 1``).
    """
    _, rng = _streams(spec)
    adj = _bernoulli_sym(rng, spec.n, spec.global_density)
    retries = []
    start = 0
    for b, size in enumerate(spec.block_sizes):
        block = _bernoulli_sym(rng, size, spec.intra_density)
        tries = 0
        while spec.intra_density > 0 and not _is_connected(block) and tries < spec.max_retries:
            tries += 1
            block = _bernoulli_sym(rng, size, spec.intra_density)
        if tries:
            logger.info("block %d redrawn %d time(s) to make it connected", b, tries)
        retries.append(tries)
        adj[start : start + size, start : start + size] = block
        start += size
    np.fill_diagonal(adj, False)
    return adj, retries


def generate_block_graph(spec: SynthSpec = SynthSpec(), nodes=None) -> ProblemGraph:
    if nodes is None:
        nodes, _, _ = generate_data(spec)
    adj, _ = block_adjacency(spec)
    ii, jj = np.nonzero(np.triu(adj, k=1))
    return ProblemGraph(list(nodes), [Edge(int(a), int(b), 1.0) for a, b in zip(ii, jj)])


def generate_instance(spec: SynthSpec = SynthSpec()) -> SynthInstance:
    nodes, beta, labels = generate_data(spec)
    adj, retries = block_adjacency(spec)
    ii, jj = np.nonzero(np.triu(adj, k=1))
    graph = ProblemGraph(nodes, [Edge(int(a), int(b), 1.0) for a, b in zip(ii, jj)])
    return SynthInstance(nodes, beta, labels, graph, retries)

"""Problem graphs: nodes carrying local regression data, weighted edges, and
similarity kernels used to wire them together."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateKernelError, InvalidInputError

KERNELS = ("inverse_exposure", "euclidean", "correlation", "diffusion")

W_CAP = 1e3
EPS_KERNEL = 1e-6


@dataclass
class NodeData:
    """Local data at one node: an ``(m, p)`` design block and its response."""

    node_id: int
    design: np.ndarray
    response: np.ndarray
    exposure: float = 0.0

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))
        self.response = np.atleast_1d(np.asarray(self.response, dtype=float))
        if self.design.ndim != 2:
            raise InvalidInputError(f"node {self.node_id}: design must be a matrix")
        if self.design.shape[0] != self.response.shape[0]:
            raise InvalidInputError(
                f"node {self.node_id}: design has {self.design.shape[0]} rows "
                f"but response has {self.response.shape[0]} entries"
            )
        if not (np.all(np.isfinite(self.design)) and np.all(np.isfinite(self.response))):
            raise InvalidInputError(f"node {self.node_id}: non-finite local data")
        self.exposure = float(self.exposure)
        if not np.isfinite(self.exposure) or self.exposure < 0:
            raise InvalidInputError(f"node {self.node_id}: exposure must be finite and >= 0")

    @property
    def n_features(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    weight: float = 1.0

    def __post_init__(self):
        if self.i == self.j:
            raise InvalidInputError(f"self-loop at node {self.i}")
        if not (np.isfinite(self.weight) and self.weight > 0):
            raise InvalidInputError(f"edge ({self.i}, {self.j}) weight must be positive and finite")
        if self.i > self.j:
            # canonical orientation: i < j
            a, b = self.j, self.i
            object.__setattr__(self, "i", a)
            object.__setattr__(self, "j", b)

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.i, self.j)


@dataclass
class ProblemGraph:
    """Undirected weighted graph over nodes ``0..n-1``.

    Node ``k`` must carry ``node_id == k``; ``subgraph`` re-indexes.
    """

    nodes: list[NodeData]
    edges: list[Edge] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.nodes)
        if n == 0:
            raise InvalidInputError("graph needs at least one node")
        p = self.nodes[0].n_features
        for k, node in enumerate(self.nodes):
            if node.node_id != k:
                raise InvalidInputError(f"node at position {k} has node_id {node.node_id}")
            if node.n_features != p:
                raise InvalidInputError(f"node {k} has {node.n_features} features, expected {p}")
        seen = set()
        for e in self.edges:
            if not (0 <= e.i < n and 0 <= e.j < n):
                raise InvalidInputError(f"edge {e.endpoints} references a missing node")
            if e.endpoints in seen:
                raise InvalidInputError(f"duplicate edge {e.endpoints}")
            seen.add(e.endpoints)
        self.adjacency: list[list[int]] = [[] for _ in range(n)]
        for e in self.edges:
            self.adjacency[e.i].append(e.j)
            self.adjacency[e.j].append(e.i)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_features(self) -> int:
        return self.nodes[0].n_features

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def edge_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(E, 2)`` endpoint array and ``(E,)`` weights."""
        if not self.edges:
            return np.zeros((0, 2), dtype=int), np.zeros(0)
        idx = np.array([e.endpoints for e in self.edges], dtype=int)
        w = np.array([e.weight for e in self.edges], dtype=float)
        return idx, w

    def components(self) -> np.ndarray:
        """Connected-component label per node (labels in order of first node)."""
        parent = list(range(self.n_nodes))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in self.edges:
            ra, rb = find(e.i), find(e.j)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = [find(a) for a in range(self.n_nodes)]
        relabel = {}
        return np.array([relabel.setdefault(r, len(relabel)) for r in roots])

    def is_connected(self) -> bool:
        return bool(self.components().max() == 0)

    def subgraph(self, keep: Sequence[int]) -> "ProblemGraph":
        """Induced subgraph on ``keep``, re-indexed in the given order."""
        keep = list(keep)
        pos = {old: new for new, old in enumerate(keep)}
        nodes = [
            NodeData(new, self.nodes[old].design, self.nodes[old].response, self.nodes[old].exposure)
            for new, old in enumerate(keep)
        ]
        edges = [
            Edge(pos[e.i], pos[e.j], e.weight)
            for e in self.edges
            if e.i in pos and e.j in pos
        ]
        return ProblemGraph(nodes, edges)


def _check_vectors(fi, fj):
    fi = np.atleast_1d(np.asarray(fi, dtype=float))
    fj = np.atleast_1d(np.asarray(fj, dtype=float))
    if fi.shape != fj.shape:
        raise InvalidInputError(f"feature vectors differ in shape: {fi.shape} vs {fj.shape}")
    if not (np.all(np.isfinite(fi)) and np.all(np.isfinite(fj))):
        raise InvalidInputError("non-finite kernel input")
    return fi, fj


def kernel_weight(kind, features_i, features_j, w_cap=W_CAP, eps=EPS_KERNEL) -> float:
    """Similarity weight between two nodes.

    ``inverse_exposure`` is ``1/|w_i - w_j|`` on scalar exposures, capped at
    ``w_cap``.  ``euclidean`` is ``1/(||f_i - f_j|| + eps)`` and
    ``correlation`` is ``(1 + pearson)/2`` floored at ``eps``.
    """
    fi, fj = _check_vectors(features_i, features_j)
    if kind == "inverse_exposure":
        if fi.size != 1:
            raise InvalidInputError("inverse_exposure expects scalar exposures")
        gap = abs(fi[0] - fj[0])
        if gap * w_cap <= 1.0:
            return float(w_cap)
        return 1.0 / gap
    if kind == "euclidean":
        return 1.0 / (float(np.linalg.norm(fi - fj)) + eps)
    if kind == "correlation":
        ci, cj = fi - fi.mean(), fj - fj.mean()
        ni, nj = np.linalg.norm(ci), np.linalg.norm(cj)
        if ni == 0 or nj == 0:
            raise DegenerateKernelError("correlation kernel on a constant vector")
        r = float(np.clip(ci @ cj / (ni * nj), -1.0, 1.0))
        return max((1.0 + r) / 2.0, eps)
    raise InvalidInputError(f"unknown kernel {kind!r}; choose from {KERNELS}")


def _pairwise_sq_dists(F):
    sq = np.sum(F**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * F @ F.T
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def median_bandwidth(features_all) -> float:
    F = np.asarray(features_all, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    d = np.sqrt(_pairwise_sq_dists(F))
    iu = np.triu_indices(F.shape[0], k=1)
    return float(np.median(d[iu])) if iu[0].size else 0.0


def diffusion_distances(features_all, t=1, bandwidth=None) -> np.ndarray:
    """All pairwise t-step diffusion distances.

    Gaussian affinities ``exp(-d^2 / (2 h^2))`` are row-normalised into a
    Markov matrix; its spectrum is taken through the symmetric conjugate
    ``D^{-1/2} K D^{-1/2}``.
    """
    F = np.asarray(features_all, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if not np.all(np.isfinite(F)):
        raise InvalidInputError("non-finite kernel input")
    if t < 1:
        raise InvalidInputError("diffusion step count t must be >= 1")
    d2 = _pairwise_sq_dists(F)
    if np.all(d2 == 0):
        raise DegenerateKernelError("all points identical; diffusion kernel is singular")
    if bandwidth is None:
        bandwidth = median_bandwidth(F)
    if not bandwidth > 0:
        raise InvalidInputError("diffusion bandwidth must be > 0")
    K = np.exp(-d2 / (2.0 * bandwidth**2))
    deg = K.sum(axis=1)
    s = 1.0 / np.sqrt(deg)
    evals, evecs = np.linalg.eigh(s[:, None] * K * s[None, :])
    # right eigenvectors of the Markov matrix, normalised w.r.t. the stationary law
    psi = s[:, None] * evecs * np.sqrt(deg.sum())
    order = np.argsort(evals)[::-1]
    evals, psi = evals[order], psi[:, order]
    coords = psi[:, 1:] * evals[1:] ** t
    dist = np.sqrt(_pairwise_sq_dists(coords))
    return dist


def diffusion_weight(features_all, i, j, t=1, bandwidth=None, eps=EPS_KERNEL) -> float:
    dist = diffusion_distances(features_all, t=t, bandwidth=bandwidth)
    return 1.0 / (float(dist[i, j]) + eps)


def node_features(nodes: Sequence[NodeData], kind: str) -> np.ndarray:
    """Default kernel features: exposure, or the mean design row."""
    if kind == "inverse_exposure":
        return np.array([[nd.exposure] for nd in nodes])
    return np.vstack([nd.design.mean(axis=0) for nd in nodes])


def weight_matrix(features, kind, w_cap=W_CAP, eps=EPS_KERNEL, t=1, bandwidth=None) -> np.ndarray:
    """Dense symmetric matrix of pairwise kernel weights (zero diagonal)."""
    F = np.asarray(features, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    n = F.shape[0]
    if kind == "diffusion":
        W = 1.0 / (diffusion_distances(F, t=t, bandwidth=bandwidth) + eps)
    else:
        W = np.zeros((n, n))
        for a in range(n):
            for b in range(a + 1, n):
                W[a, b] = W[b, a] = kernel_weight(kind, F[a], F[b], w_cap=w_cap, eps=eps)
    np.fill_diagonal(W, 0.0)
    return W


def build_knn_graph(nodes, kind="inverse_exposure", k=5, features=None, **kernel_kw) -> ProblemGraph:
    """Connect every node to its ``k`` highest-weight peers, symmetrised by union.

    Ties in weight go to the lower node index.
    """
    nodes = list(nodes)
    n = len(nodes)
    if n < 2:
        raise InvalidInputError("k-NN graph needs at least 2 nodes")
    if not 1 <= k < n:
        raise InvalidInputError(f"k must satisfy 1 <= k < n (got k={k}, n={n})")
    if features is None:
        features = node_features(nodes, kind)
    W = weight_matrix(features, kind, **kernel_kw)
    pairs = set()
    for a in range(n):
        others = np.array([b for b in range(n) if b != a])
        order = np.lexsort((others, -W[a, others]))
        for b in others[order[:k]]:
            pairs.add((min(a, b), max(a, b)))
    edges = [Edge(a, b, W[a, b]) for a, b in sorted(pairs)]
    return ProblemGraph(nodes, edges)

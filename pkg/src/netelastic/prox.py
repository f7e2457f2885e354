"""Proximal operators for the edge penalty ``c1*||d||_2 + c2*||d||_1``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class EdgeProxParams:
    rho: float
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise InvalidInputError("rho must be positive and finite")
        for name in ("c1", "c2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidInputError(f"{name} must be finite and >= 0")


def soft_threshold(v, t):
    """Elementwise ``sign(v) * max(|v| - t, 0)``.

    ``t`` may be a scalar or broadcast against ``v`` (one threshold per row
    when ``v`` is a stack of edge differences).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidInputError("threshold must be >= 0")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def group_shrink(v, t):
    """Block shrinkage ``max(1 - t/||v||, 0) * v`` along the last axis.

    Returns zero whenever ``||v|| <= t`` (including ``v = 0``).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidInputError("threshold must be >= 0")
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if t.ndim:
        t = t.reshape(t.shape + (1,))
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > t, 1.0 - t / np.where(norm > 0, norm, 1.0), 0.0)
    return scale * v


def difference_prox(v, rho, c1, c2):
    """Prox of the sparse-group penalty on an edge difference ``v = a - b``.

    Minimises ``c1||d||_2 + c2||d||_1 + (rho/4)||d - v||^2``: soft-threshold
    at ``2*c2/rho`` then group-shrink at ``2*c1/rho``.  Vectorised over rows
    of ``v`` when ``c1``/``c2`` are arrays.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    t2 = 2.0 * c2 / rho
    if t2.ndim:
        t2 = t2[:, None]
    return group_shrink(soft_threshold(v, t2), 2.0 * c1 / rho)


def edge_prox(a, b, params: EdgeProxParams):
    """Exact minimiser of
    ``c1||zi - zj||_2 + c2||zi - zj||_1 + (rho/2)(||zi - a||^2 + ||zj - b||^2)``.

    The sum ``zi + zj = a + b`` is unpenalised, so only the difference is
    shrunk.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError(f"edge_prox inputs differ in shape: {a.shape} vs {b.shape}")
    delta = difference_prox(a - b, params.rho, params.c1, params.c2)
    s = a + b
    return (s + delta) / 2.0, (s - delta) / 2.0


def edge_objective(zi, zj, a, b, params: EdgeProxParams) -> float:
    d = np.asarray(zi) - np.asarray(zj)
    return float(
        params.c1 * np.linalg.norm(d)
        + params.c2 * np.abs(d).sum()
        + params.rho / 2.0 * (np.sum((zi - a) ** 2) + np.sum((zj - b) ** 2))
    )

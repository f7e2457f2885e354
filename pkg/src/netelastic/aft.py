"""Accelerated failure time preprocessing.

Censored least squares is made consistent by weighting each ordered
observation with the jump of the Kaplan-Meier estimator at its time (Stute
weights), then centring and rescaling rows so an ordinary squared loss on the
transformed data equals the weighted loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateDataError, InvalidInputError


@dataclass
class SurvivalRecord:
    time: float
    event: int  # 1 = death observed, 0 = censored
    covariates: np.ndarray
    exposure: float = 0.0
    stage: Optional[int] = None
    patient_id: Optional[str] = None

    def __post_init__(self):
        self.time = float(self.time)
        if not (np.isfinite(self.time) and self.time > 0):
            raise InvalidInputError(f"survival time must be finite and > 0 (got {self.time})")
        if self.event not in (0, 1):
            raise InvalidInputError(f"event indicator must be 0 or 1 (got {self.event})")
        self.event = int(self.event)
        self.covariates = np.atleast_1d(np.asarray(self.covariates, dtype=float))


def sort_key(record: SurvivalRecord):
    # events before censored at tied times
    return (record.time, -record.event)


def sort_records(records: Sequence[SurvivalRecord]) -> list[SurvivalRecord]:
    return sorted(records, key=sort_key)


def _check_sorted(time, event):
    for i in range(1, len(time)):
        if time[i] < time[i - 1] or (time[i] == time[i - 1] and event[i] > event[i - 1]):
            raise InvalidInputError(
                f"records must be sorted by time with events first on ties (position {i})"
            )


def stute_weights(time, event) -> np.ndarray:
    """Kaplan-Meier jump weights for observations already in sorted order.

    ``w_i = d_i/(n-i+1) * prod_{j<i} ((n-j)/(n-j+1))**d_j`` with 1-based ``i``.
    The product is kept as a fraction so each weight is correctly rounded
    (uncensored data gives exactly ``1/n``).
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=int)
    if time.shape != event.shape or time.ndim != 1:
        raise InvalidInputError("time and event must be 1-D arrays of equal length")
    _check_sorted(time, event)
    n = len(time)
    w = np.zeros(n)
    survive = Fraction(1)
    for i in range(n):  # i is 0-based, so n - i == n - (i+1) + 1
        if event[i]:
            w[i] = float(survive / (n - i))
            survive *= Fraction(n - i - 1, n - i)
    return w


def km_weights(records: Sequence[SurvivalRecord]) -> np.ndarray:
    return stute_weights([r.time for r in records], [r.event for r in records])


def response_values(records, log_time=False) -> np.ndarray:
    t = np.array([r.time for r in records], dtype=float)
    return np.log(t) if log_time else t


def weighted_means(X, y, weights):
    """Weighted column means normalised by the total weight."""
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0:
        raise DegenerateDataError("all Kaplan-Meier weights are zero (no observed events)")
    return weights @ X / total, float(weights @ y / total)


def stute_transform(records, weights, log_time=False):
    """Return ``(X_star, Y_star)`` with rows ``sqrt(n w_i) * (v_i - weighted mean)``.

    Censored records (zero weight) become zero rows.
    """
    weights = np.asarray(weights, dtype=float)
    if len(records) != len(weights):
        raise InvalidInputError(f"{len(records)} records but {len(weights)} weights")
    X = np.vstack([r.covariates for r in records])
    y = response_values(records, log_time)
    x_bar, y_bar = weighted_means(X, y, weights)
    scale = np.sqrt(len(records) * weights)
    return scale[:, None] * (X - x_bar), scale * (y - y_bar)


def pearson_abs(X, y) -> np.ndarray:
    """Absolute Pearson correlation of each column with ``y``; constant columns give 0."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    denom = np.linalg.norm(xc, axis=0) * np.linalg.norm(yc)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(denom > 0, (yc @ xc) / np.where(denom > 0, denom, 1.0), 0.0)
    return np.abs(r)


def screen_top_genes(X, y, k: int) -> list[int]:
    """Indices of the ``k`` columns most correlated (in absolute value) with ``y``.

    Ties go to the lower index.
    """
    X = np.asarray(X, dtype=float)
    if not 0 <= k <= X.shape[1]:
        raise InvalidInputError(f"k={k} outside [0, {X.shape[1]}]")
    r = pearson_abs(X, y)
    order = np.lexsort((np.arange(len(r)), -r))
    return [int(c) for c in order[:k]]

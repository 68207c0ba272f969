"""Holm step-down adjustment for familywise error control."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdjustedPValues:
    raw: np.ndarray
    adjusted: np.ndarray
    order: np.ndarray  # ascending order of raw, stable


def _check_pvals(pvals):
    p = np.asarray(pvals, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("need at least one p-value")
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("p-values must be finite and lie in [0, 1]")
    return p


def holm_adjust(pvals):
    """Holm adjusted p-values.

    Sorted ascending, the ``i``-th adjusted value is the running maximum of
    ``min(1, (m - l + 1) * p_(l))`` over ``l <= i``. Ties keep input order.

    >>> holm_adjust([0.01, 0.04, 0.03]).adjusted.tolist()
    [0.03, 0.06, 0.06]
    """
    raw = _check_pvals(pvals)
    m = raw.size
    order = np.argsort(raw, kind="stable")
    scaled = np.minimum(1.0, (m - np.arange(m)) * raw[order])
    adjusted = np.empty(m)
    adjusted[order] = np.maximum.accumulate(scaled)
    return AdjustedPValues(raw, adjusted, order)


def bonferroni_adjust(pvals):
    raw = _check_pvals(pvals)
    return np.minimum(1.0, raw.size * raw)


def reject_at(adj, alpha=0.05):
    """Indices whose adjusted p-value is at most ``alpha``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return np.flatnonzero(adj.adjusted <= alpha).tolist()

"""Design matrix container and the input coercion used by every solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError

SCALINGS = ("raw", "unit_norm", "sqrt_n_norm")


@dataclass(frozen=True)
class DesignMatrix:
    """An ``n x p`` predictor matrix together with its column scaling mode.

    Use :meth:`build` to construct one from raw data; it applies the scaling
    and validates the result. No intercept column is ever added.
    """

    values: np.ndarray
    column_scaling: str = "raw"

    def __post_init__(self):
        X = np.ascontiguousarray(self.values, dtype=float)
        if X.ndim != 2:
            raise DimensionError(f"design must be 2-D, got shape {X.shape}")
        if X.shape[0] < 1:
            raise DimensionError("design must have at least one row")
        if not np.all(np.isfinite(X)):
            raise ValueError("design contains non-finite entries")
        if self.column_scaling not in SCALINGS:
            raise ValueError(f"unknown column scaling {self.column_scaling!r}")
        if self.column_scaling != "raw" and X.shape[1] > 0:
            target = 1.0 if self.column_scaling == "unit_norm" else np.sqrt(X.shape[0])
            norms = np.linalg.norm(X, axis=0)
            if np.any(np.abs(norms - target) > 1e-10 * max(target, 1.0)):
                raise ValueError(f"columns are not scaled to {self.column_scaling}")
        X.setflags(write=False)
        object.__setattr__(self, "values", X)

    @classmethod
    def build(cls, X, column_scaling="raw"):
        """Scale the columns of ``X`` according to ``column_scaling``.

        Columns of exactly zero norm cannot be normalized and are rejected.
        """
        X = np.array(X, dtype=float, copy=True)
        if X.ndim != 2:
            raise DimensionError(f"design must be 2-D, got shape {X.shape}")
        if column_scaling != "raw":
            if column_scaling not in SCALINGS:
                raise ValueError(f"unknown column scaling {column_scaling!r}")
            norms = np.linalg.norm(X, axis=0)
            if np.any(norms == 0.0):
                bad = np.flatnonzero(norms == 0.0).tolist()
                raise ValueError(f"zero-norm columns cannot be normalized: {bad}")
            target = 1.0 if column_scaling == "unit_norm" else np.sqrt(X.shape[0])
            X *= target / norms
        return cls(X, column_scaling)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    @property
    def column_norms(self):
        return np.linalg.norm(self.values, axis=0)

    def columns(self, S):
        return self.values[:, np.asarray(S, dtype=int)]


def as_array(X):
    """Return the float matrix behind ``X`` (a :class:`DesignMatrix` or array)."""
    if isinstance(X, DesignMatrix):
        return X.values
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"design must be 2-D, got shape {X.shape}")
    return X


def check_response(X, y):
    """Coerce ``y`` to a finite float vector whose length matches ``X``."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        y = y.ravel()
    if y.shape[0] != X.shape[0]:
        raise DimensionError(f"response has length {y.shape[0]}, design has {X.shape[0]} rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite entries")
    return y


def check_index_set(S, p):
    """Validate an index set against ``p`` columns; returns a sorted int array."""
    S = np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=int))
    if S.size and (S[0] < 0 or S[-1] >= p):
        raise IndexError(f"index set {S.tolist()} out of range for p={p}")
    return S


def penalty_scale(X):
    """Multiplier turning a per-observation penalty level into the unnormalized one.

    For columns of Euclidean norm ``sqrt(n)`` this equals ``n``, the usual
    conversion between ``(1/2n)||y - Xb||^2 + lam ||b||_1`` and the
    ``1/2 ||y - Xb||^2`` form used throughout the package.
    """
    X = as_array(X)
    n = X.shape[0]
    rms = np.sqrt(np.mean(np.sum(X * X, axis=0)))
    return np.sqrt(n) * rms

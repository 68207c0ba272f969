"""Covariance test along the lasso path and its two selection protocols."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import as_array, check_index_set, check_response
from .exceptions import IdentityMismatchError, PathRangeError
from .lasso import continue_solution, kkt_violation, solve_lasso_restricted

IDENTITY_RTOL = 1e-6


@dataclass(frozen=True)
class CovDrop:
    S: tuple
    lam: float
    value_objective_form: float
    value_inner_product_form: float
    sigma2: float

    @property
    def value(self):
        return self.value_objective_form


@dataclass(frozen=True)
class CovStep:
    k: int
    entered_variable: int
    event_index: int
    T: float
    p_value: float


@dataclass(frozen=True)
class CovSequence:
    entries: list
    sigma2: float
    truncated: bool = False

    @property
    def statistics(self):
        return np.array([e.T for e in self.entries])

    @property
    def p_values(self):
        return np.array([e.p_value for e in self.entries])


def exp_pvalue(T):
    """Upper tail of the unit exponential, negative statistics clamped to zero."""
    return float(min(1.0, np.exp(-max(float(T), 0.0))))


def _fit_terms(X, y, beta, lam):
    fitted = X @ beta
    r = y - fitted
    obj = float(r @ r) + lam * float(np.sum(np.abs(beta)))
    return obj, float(y @ fitted)


def _restricted_beta(X, S, y, lam, tol=None, start=None):
    p = X.shape[1]
    if lam > 0 and start is not None and len(S):
        # continue the known solution (zero outside S) down to lam on X_S
        b0, lam0 = start
        sub = continue_solution(X[:, S], y, np.asarray(b0)[S], lam0, lam)
        if sub is not None:
            beta = np.zeros(p)
            beta[S] = sub
            if kkt_violation(X[:, S], y, sub, lam) <= 1e-9 * max(lam, float(np.linalg.norm(y))):
                return beta
    if lam > 0:
        return solve_lasso_restricted(X, S, y, lam, tol=tol).beta
    beta = np.zeros(p)
    if len(S):
        sol, *_ = np.linalg.lstsq(X[:, S], y, rcond=None)
        beta[S] = sol
    return beta


def cov_drop(X, y, S, lam, sigma2, full_beta=None, tol=None, start=None):
    """Drop in penalized fit from restricting the lasso to the columns ``S``.

    Both ``[||y - X_S b_S||^2 + lam ||b_S||_1 - (same for the full fit)] / sigma2``
    and the equivalent ``(<y, X b> - <y, X_S b_S>) / sigma2`` are computed; they
    agree for any pair of exact lasso solutions.

    ``full_beta`` may supply the unrestricted solution at ``lam`` (for example
    read off a path); otherwise it is computed with :func:`solve_lasso`.
    ``lam = 0`` is allowed and means least squares. ``start = (beta0, lam0)``,
    an exact lasso solution at ``lam0 >= lam`` supported in ``S``, lets the
    restricted fit be obtained by homotopy continuation instead of
    coordinate descent.

    Raises
    ------
    IdentityMismatchError
        When the two forms differ by more than ``1e-6`` relative to the size
        of the terms being differenced, ``||y||^2 / sigma2``.
    """
    X = as_array(X)
    y = check_response(X, y)
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    S = check_index_set(S, X.shape[1])
    if full_beta is None:
        full_beta = _restricted_beta(X, np.arange(X.shape[1]), y, lam, tol)
    rest_beta = _restricted_beta(X, S, y, lam, tol, start)
    obj_full, ip_full = _fit_terms(X, y, full_beta, lam)
    obj_rest, ip_rest = _fit_terms(X, y, rest_beta, lam)
    t_obj = (obj_rest - obj_full) / sigma2
    t_ip = (ip_full - ip_rest) / sigma2
    if abs(t_obj - t_ip) > IDENTITY_RTOL * max(abs(t_obj), abs(t_ip), float(y @ y) / sigma2):
        raise IdentityMismatchError(
            f"covariance drop forms disagree: objective form {t_obj:.10g}, inner-product form {t_ip:.10g}"
        )
    return CovDrop(tuple(S.tolist()), float(lam), t_obj, t_ip, float(sigma2))


def cov_sequence(X, y, path, sigma2, steps=None, strict=False):
    """Covariance statistics ``T_k`` at the first ``steps`` entry events of ``path``.

    For the ``k``-th variable to enter (at event ``e``), ``S`` is the active set
    just before that event and the penalty is the next knot of the path (zero
    at the end of a completed path). Leave events are not tested. P-values use
    the unit exponential tail.

    If fewer than ``steps`` statistics are computable on a truncated path the
    computable prefix is returned with ``truncated=True``; with ``strict=True``
    a :class:`PathRangeError` listing the computable steps is raised instead.
    """
    X = as_array(X)
    y = check_response(X, y)
    entries = []
    truncated = False
    entry_events = path.entry_steps
    if steps is not None:
        entry_events = entry_events[:steps]
    for k, e in enumerate(entry_events, start=1):
        try:
            lam_next = path.lambda_after(e)
            full = path.beta_after(e)
        except PathRangeError:
            truncated = True
            break
        S = path.active_sets[e - 1] if e > 0 else ()
        start = None
        if lam_next > 0 and set(np.flatnonzero(path.betas[e]).tolist()) <= set(S):
            start = (path.betas[e], float(path.knots[e]))
        drop = cov_drop(X, y, S, lam_next, sigma2, full_beta=full, start=start)
        entries.append(CovStep(k, path.events[e].variable, e, drop.value, exp_pvalue(drop.value)))
    if steps is not None and len(entries) < steps:
        truncated = True
        if strict:
            raise PathRangeError(
                f"only {len(entries)} of {steps} covariance statistics are computable",
                available_steps=range(1, len(entries) + 1),
            )
    return CovSequence(entries, float(sigma2), truncated)


def select_cov_stop(seq, path=None, alpha=0.05):
    """Variables entering before the first step whose p-value is not below ``alpha``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    selected = set()
    for e in seq.entries:
        if e.p_value >= alpha:
            break
        selected.add(e.entered_variable)
    return sorted(selected)


def assign_cov_pvals(seq, path):
    """Map each variable in the final model to the p-value of its last entry.

    Variables that left the path and never came back get no p-value.
    """
    final = set(path.active_sets[-1]) if path.active_sets else set()
    by_event = {e.event_index: e.p_value for e in seq.entries}
    last_entry = {}
    for i, ev in enumerate(path.events):
        if ev.kind == "enter":
            last_entry[ev.variable] = i
    return {j: by_event[i] for j, i in sorted(last_entry.items()) if j in final and i in by_event}


__all__ = [
    "CovDrop",
    "CovSequence",
    "CovStep",
    "assign_cov_pvals",
    "cov_drop",
    "cov_sequence",
    "exp_pvalue",
    "select_cov_stop",
]

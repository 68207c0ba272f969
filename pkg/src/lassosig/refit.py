"""Least-squares refit drop statistic and its two reference distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .design import as_array, check_index_set, check_response
from .exceptions import IdentityMismatchError, SingularDesignError

IDENTITY_RTOL = 1e-8


@dataclass(frozen=True)
class RefitDrop:
    S: tuple
    S_tilde: tuple
    value: float
    sigma2: float
    value_inner_product_form: float = np.nan


@dataclass(frozen=True)
class RefitStep:
    k: int
    entered_variable: int
    event_index: int
    value: float  # nan when a refit was singular
    singular: bool = False


def ls_refit(X, S, y, rcond=1e-10):
    """Unpenalized least-squares coefficients on the columns ``S`` (sorted order).

    Raises :class:`SingularDesignError` if ``X_S`` is not of full column rank.
    """
    X = as_array(X)
    y = check_response(X, y)
    S = check_index_set(S, X.shape[1])
    if S.size == 0:
        return np.zeros(0)
    XS = X[:, S]
    if S.size > X.shape[0]:
        raise SingularDesignError(f"columns {S.tolist()} exceed the {X.shape[0]} rows", S)
    q, r = np.linalg.qr(XS)
    d = np.abs(np.diag(r))
    if d.min() <= rcond * d.max():
        raise SingularDesignError(f"columns {S.tolist()} are linearly dependent", S)
    return np.linalg.solve(r, q.T @ y)


def _rss_and_ip(X, S, y):
    b = ls_refit(X, S, y)
    fitted = X[:, S] @ b if len(S) else np.zeros_like(y)
    r = y - fitted
    return float(r @ r), float(y @ fitted)


def refit_drop(X, y, S, S_tilde, sigma2):
    """``(RSS_S - RSS_S_tilde) / sigma2`` for nested column sets ``S`` within ``S_tilde``."""
    X = as_array(X)
    y = check_response(X, y)
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    S = check_index_set(S, X.shape[1])
    St = check_index_set(S_tilde, X.shape[1])
    if not set(S.tolist()) <= set(St.tolist()):
        raise ValueError(f"S={S.tolist()} is not contained in S_tilde={St.tolist()}")
    rss_s, ip_s = _rss_and_ip(X, S, y)
    rss_t, ip_t = _rss_and_ip(X, St, y)
    v_rss = (rss_s - rss_t) / sigma2
    v_ip = (ip_t - ip_s) / sigma2
    if abs(v_rss - v_ip) > IDENTITY_RTOL * max(abs(v_rss), abs(v_ip), float(y @ y) / sigma2):
        raise IdentityMismatchError(f"refit drop forms disagree: {v_rss:.12g} vs {v_ip:.12g}")
    return RefitDrop(tuple(S.tolist()), tuple(St.tolist()), v_rss, float(sigma2), v_ip)


def refit_fixed_pvalue(stat):
    """Upper tail of chi-squared with one degree of freedom."""
    if stat < 0:
        raise ValueError("statistic must be nonnegative")
    return float(special.erfc(np.sqrt(stat / 2.0)))


def order_statistic_null_pvalue(stat, k, p):
    """P[k-th largest of ``p`` independent chi2(1) draws exceeds ``stat``].

    The k-th largest exceeds ``stat`` iff at least ``k`` draws do, so this is a
    binomial upper tail with success probability equal to the chi2(1) survival.
    """
    if not 1 <= k <= p:
        raise ValueError(f"need 1 <= k <= p, got k={k}, p={p}")
    if stat < 0:
        raise ValueError("statistic must be nonnegative")
    q = refit_fixed_pvalue(stat)
    return float(min(1.0, stats.binom.sf(k - 1, p, q)))


def refit_sequence(X, y, path, sigma2, steps=None):
    """Refit drops ``T(A_{k-1}, A_k)`` at the entry events of ``path``.

    Leave events are skipped, as for the covariance statistics. A singular
    refit marks its step ``singular=True`` (value ``nan``) and the sequence
    carries on.
    """
    X = as_array(X)
    y = check_response(X, y)
    out = []
    entry_events = path.entry_steps
    if steps is not None:
        entry_events = entry_events[:steps]
    for k, e in enumerate(entry_events, start=1):
        S = path.active_sets[e - 1] if e > 0 else ()
        St = path.active_sets[e]
        var = path.events[e].variable
        try:
            val = refit_drop(X, y, S, St, sigma2).value
            out.append(RefitStep(k, var, e, val))
        except SingularDesignError:
            out.append(RefitStep(k, var, e, float("nan"), singular=True))
    return out

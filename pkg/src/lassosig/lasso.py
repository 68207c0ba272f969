"""Lasso at a fixed penalty and the full piecewise-linear regularization path.

Objective throughout is ``1/2 ||y - X b||^2 + lam ||b||_1`` with no intercept.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._cd import cd_lasso, duality_gap
from .design import as_array, check_index_set, check_response
from .exceptions import ConvergenceError, DimensionError, LassoSigError, PathRangeError

TIE_RTOL = 1e-12
_SWEEP_CHUNK = 2000
_ROUNDING = 1e-9


@dataclass(frozen=True)
class LassoFit:
    """Certified lasso solution at one penalty level."""

    lam: float
    beta: np.ndarray
    active_set: tuple
    duality_gap: float
    n_sweeps: int = 0

    @property
    def lambda_(self):
        return self.lam


@dataclass(frozen=True)
class PathEvent:
    step: int
    variable: int
    kind: str  # "enter" or "leave"


@dataclass(frozen=True)
class LassoPath:
    """Knots, events and knot solutions of the lasso homotopy.

    ``knots[k]`` is the penalty at which ``events[k]`` happens and
    ``betas[k]`` the solution there; ``active_sets[k]`` is the support on the
    segment just below ``knots[k]``. When ``completed`` is true the path was
    followed down to ``end_lambda`` (zero unless the Gram matrix became
    singular) with solution ``end_beta``.
    """

    knots: np.ndarray
    events: list
    active_sets: list
    betas: np.ndarray
    end_lambda: float
    end_beta: np.ndarray
    completed: bool
    max_steps_reached: bool = False
    rank_deficient: bool = False
    p: int = field(default=0)

    @property
    def n_steps(self):
        return len(self.knots)

    @property
    def entry_steps(self):
        """Event indices (0-based) of the entry events, in path order."""
        return [i for i, ev in enumerate(self.events) if ev.kind == "enter"]

    @property
    def segments(self):
        """``(lam_hi, lam_lo, beta_hi, slope)`` per interval; beta = beta_hi + (lam_hi - lam) * slope."""
        lams = list(self.knots)
        betas = list(self.betas)
        if self.completed:
            lams.append(self.end_lambda)
            betas.append(self.end_beta)
        out = []
        for k in range(len(lams) - 1):
            hi, lo = lams[k], lams[k + 1]
            slope = (betas[k + 1] - betas[k]) / (hi - lo) if hi > lo else np.zeros(self.p)
            out.append((hi, lo, betas[k], slope))
        return out

    def lambda_after(self, i):
        """Penalty of the event following event ``i`` (or the end of a completed path)."""
        if i + 1 < len(self.knots):
            return float(self.knots[i + 1])
        if self.completed:
            return float(self.end_lambda)
        raise PathRangeError(
            f"path truncated after {len(self.knots)} events; no knot after event {i + 1}",
            available_steps=range(1, len(self.knots)),
        )

    def beta_after(self, i):
        if i + 1 < len(self.knots):
            return self.betas[i + 1]
        if self.completed:
            return self.end_beta
        raise PathRangeError(f"path truncated after {len(self.knots)} events")


def lambda_max(X, y):
    """Smallest penalty at which the lasso solution is identically zero."""
    X = as_array(X)
    y = check_response(X, y)
    if X.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(X.T @ y)))


def objective(X, y, beta, lam):
    """Value of ``1/2 ||y - X beta||^2 + lam ||beta||_1``."""
    X = as_array(X)
    y = check_response(X, y)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (X.shape[1],):
        raise DimensionError(f"beta has shape {beta.shape}, expected ({X.shape[1]},)")
    r = y - X @ beta
    return 0.5 * float(r @ r) + lam * float(np.sum(np.abs(beta)))


def kkt_violation(X, y, beta, lam):
    """Largest violation of the lasso stationarity conditions.

    Active coordinates must have correlation ``lam * sign(beta_j)``; inactive
    ones correlation at most ``lam`` in absolute value.
    """
    X = as_array(X)
    c = X.T @ (y - X @ beta)
    act = beta != 0
    viol = 0.0
    if np.any(act):
        viol = float(np.max(np.abs(c[act] - lam * np.sign(beta[act]))))
    if np.any(~act):
        viol = max(viol, float(np.max(np.abs(c[~act]) - lam)))
    return max(viol, 0.0)


def _polish_on(X, y, act, s, lam):
    if act.size == 0 or act.size > X.shape[0]:
        return None
    XA = X[:, act]
    try:
        cho = linalg.cho_factor(XA.T @ XA)
    except linalg.LinAlgError:
        return None
    bA = linalg.cho_solve(cho, XA.T @ y - lam * s)
    if np.any(np.sign(bA) != s):
        return None
    out = np.zeros(X.shape[1])
    out[act] = bA
    c = X.T @ (y - X @ out)
    inact = np.ones(X.shape[1], dtype=bool)
    inact[act] = False
    if np.any(np.abs(c[inact]) > lam * (1.0 + 1e-9)):
        return None
    return out


def _polish(X, y, beta, lam, gap=0.0):
    """Re-solve the equicorrelation system on the identified support and signs.

    Near a knot the iterate may carry a tiny coefficient on a variable whose
    exact value is zero, so the support pruned of entries small enough to be
    explained by the duality gap is tried as well.
    """
    mag = np.abs(beta) * np.sqrt(np.einsum("ij,ij->j", X, X))
    if not np.any(mag):
        return None
    tried = set()
    for cut in (0.0, 10.0 * np.sqrt(2.0 * max(gap, 0.0))):
        act = np.flatnonzero(mag > cut)
        key = act.tobytes()
        if key in tried:
            continue
        tried.add(key)
        out = _polish_on(X, y, act, np.sign(beta[act]), lam)
        if out is not None:
            return out
    return None


def solve_lasso(X, y, lam, tol=None, beta0=None, max_sweeps=100_000):
    """Minimize ``1/2 ||y - X b||^2 + lam ||b||_1`` by coordinate descent.

    Parameters
    ----------
    X : DesignMatrix or (n, p) array
    y : (n,) array
    lam : float
        Penalty level, must be positive.
    tol : float, optional
        Duality-gap target. Defaults to ``1e-10 * ||y||^2``; the default is
        relaxed to the rounding floor ``1e-9 * lambda_max * ||b||_1`` when
        even the exact homotopy solution cannot certify it (tiny ``lam`` on
        a nearly singular design).
    beta0 : (p,) array, optional
        Warm start.

    Returns
    -------
    LassoFit

    Raises
    ------
    ConvergenceError
        If the gap is still above ``tol`` after ``max_sweeps`` sweeps and the
        homotopy fallback does not reach it either.

    Notes
    -----
    Every few thousand sweeps the iterate is polished by solving the
    equicorrelation equations on its support and signs; the polished point is
    kept only if it passes the KKT check and does not enlarge the gap.
    """
    X = np.ascontiguousarray(as_array(X))
    y = np.ascontiguousarray(check_response(X, y))
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    n, p = X.shape
    yy = float(y @ y)
    relax = tol is None
    if relax:
        tol = 1e-10 * yy
    if p == 0 or yy == 0.0 or lam >= np.max(np.abs(X.T @ y)):
        return LassoFit(float(lam), np.zeros(p), (), 0.0, 0)
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    if beta.shape != (p,):
        raise DimensionError(f"warm start has shape {beta.shape}, expected ({p},)")
    sweeps = 0
    while True:
        chunk = min(_SWEEP_CHUNK, max_sweeps - sweeps)
        gap, done = cd_lasso(X, y, float(lam), beta, float(tol), int(chunk))
        sweeps += done
        polished = _polish(X, y, beta, lam, gap)
        if polished is not None:
            pgap = duality_gap(X, y, polished, y - X @ polished, float(lam))
            if pgap <= max(gap, 0.0) + 1e-13 * yy:
                beta, gap = polished, pgap
        if gap <= tol or sweeps >= max_sweeps:
            break
    if gap > tol:
        # ill-conditioned problems (|support| close to n) can stall coordinate
        # descent; the homotopy reaches the same point by exact linear algebra
        beta, gap = _homotopy_fallback(X, y, lam, gap, tol, relax)
    return LassoFit(float(lam), beta, tuple(np.flatnonzero(beta).tolist()), max(float(gap), 0.0), int(sweeps))


def _homotopy_fallback(X, y, lam, gap, tol, relax):
    try:
        path = compute_path(X, y)
        beta = coef_at(path, lam)
    except LassoSigError:
        beta = None
    if beta is not None:
        hgap = duality_gap(X, y, beta, y - X @ beta, float(lam))
        if hgap <= tol:
            return beta, hgap
        if relax:
            # for tiny lam the dual point loses precision: a correlation error
            # e costs about e * ||beta||_1 in the gap
            floor = _ROUNDING * float(np.max(np.abs(X.T @ y))) * float(np.sum(np.abs(beta)))
            if hgap <= floor and kkt_violation(X, y, beta, lam) <= _ROUNDING * float(np.max(np.abs(X.T @ y))):
                return beta, hgap
    raise ConvergenceError(f"coordinate descent stopped at duality gap {gap:.3e} > tol {tol:.3e}")


def continue_solution(X, y, beta, lam, lam_end, rcond=1e-12, max_events=None):
    """Carry an exact lasso solution at ``lam`` down to ``lam_end`` along the homotopy.

    Returns the solution at ``lam_end`` or ``None`` when an active Gram matrix
    is numerically singular or the event budget runs out. The endpoint is
    obtained from the equicorrelation equations, so no drift accumulates.
    """
    X = np.ascontiguousarray(as_array(X))
    y = check_response(X, y)
    n, p = X.shape
    beta = np.array(beta, dtype=float, copy=True)
    if not 0 < lam_end <= lam:
        raise ValueError("need 0 < lam_end <= lam")
    active = np.flatnonzero(beta).tolist()
    signs = np.sign(beta)
    if max_events is None:
        max_events = 8 * min(n, p) + 8
    just_dropped, dropped_sign = -1, 0.0
    for _ in range(max_events):
        c = X.T @ (y - X @ beta)
        if not active:
            top = float(np.max(np.abs(c))) if p else 0.0
            if top <= lam_end:
                return np.zeros(p)
            j = _first_max(np.abs(c))
            lam = min(lam, top)
            active, signs[j], just_dropped = [j], np.sign(c[j]), -1
            continue
        idx = np.array(active)
        XA = X[:, idx]
        G = XA.T @ XA
        try:
            cho = linalg.cho_factor(G)
        except linalg.LinAlgError:
            return None
        if np.min(np.diag(cho[0])) ** 2 < rcond * np.max(np.diag(G)):
            return None
        d = linalg.cho_solve(cho, signs[idx])
        a = X.T @ (XA @ d)
        gamma = np.full(p, np.inf)
        if len(active) < n:
            inact = np.ones(p, dtype=bool)
            inact[idx] = False
            if just_dropped >= 0:
                inact[just_dropped] = False
            ci, ai = c[inact], a[inact]
            with np.errstate(divide="ignore", invalid="ignore"):
                g1 = np.where(1.0 - ai > 0, np.maximum(lam - ci, 0.0) / (1.0 - ai), np.inf)
                g2 = np.where(1.0 + ai > 0, np.maximum(lam + ci, 0.0) / (1.0 + ai), np.inf)
            gamma[inact] = np.minimum(g1, g2)
            jd = just_dropped
            if jd >= 0:
                if dropped_sign > 0 and 1.0 + a[jd] > 0:
                    gamma[jd] = max(lam + c[jd], 0.0) / (1.0 + a[jd])
                elif dropped_sign < 0 and 1.0 - a[jd] > 0:
                    gamma[jd] = max(lam - c[jd], 0.0) / (1.0 - a[jd])
        with np.errstate(divide="ignore", invalid="ignore"):
            gd = -beta[idx] / d
        drop_gamma = np.where(gd > 0, gd, np.inf)
        g_enter, g_drop = float(np.min(gamma)), float(np.min(drop_gamma))
        g = min(g_enter, g_drop)
        if lam - g <= lam_end:
            beta[idx] = linalg.cho_solve(cho, XA.T @ y - lam_end * signs[idx])
            return beta
        lam -= g
        beta[idx] = linalg.cho_solve(cho, XA.T @ y - lam * signs[idx])
        if g_drop <= g_enter:
            j = int(idx[int(np.argmin(drop_gamma))])
            beta[j] = 0.0
            active.remove(j)
            just_dropped, dropped_sign = j, signs[j]
            signs[j] = 0.0
        else:
            j = int(np.argmin(gamma))
            active.append(j)
            signs[j] = np.sign(X[:, j] @ (y - X @ beta))
            just_dropped = -1
    return None


def solve_lasso_restricted(X, S, y, lam, tol=None):
    """Lasso using only the columns in ``S``; coefficients outside ``S`` are zero."""
    X = as_array(X)
    y = check_response(X, y)
    p = X.shape[1]
    S = check_index_set(S, p)
    if S.size == 0:
        return LassoFit(float(lam), np.zeros(p), (), 0.0, 0)
    sub = solve_lasso(X[:, S], y, lam, tol=tol)
    beta = np.zeros(p)
    beta[S] = sub.beta
    return LassoFit(float(lam), beta, tuple(np.flatnonzero(beta).tolist()), sub.duality_gap, sub.n_sweeps)


def _first_max(values):
    """Index of the maximum; ties within TIE_RTOL go to the lowest index."""
    top = np.max(values)
    return int(np.flatnonzero(values >= top * (1.0 - TIE_RTOL))[0])


def compute_path(X, y, max_steps=None, max_entries=None, rcond=1e-12):
    """Follow the lasso solution path with the LARS homotopy (lasso variant).

    Each step processes exactly one event: a variable entering the active set
    or an active coefficient hitting zero and leaving it. Simultaneous
    candidates are handled one per step, lowest column index first, so
    duplicate knot values can occur.

    Parameters
    ----------
    max_steps : int, optional
        Stop after this many events. Default ``8 * min(n, p) + 8``.
    max_entries : int, optional
        Stop as soon as this many *distinct* variables have entered.
    rcond : float
        Reciprocal condition number below which the active Gram matrix is
        declared singular; the path then terminates with ``rank_deficient``.
    """
    X = np.ascontiguousarray(as_array(X))
    y = check_response(X, y)
    n, p = X.shape
    if max_steps is None:
        max_steps = 8 * min(n, p) + 8
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")

    beta = np.zeros(p)
    c = X.T @ y if p else np.zeros(0)
    lam = float(np.max(np.abs(c))) if p else 0.0
    if p == 0 or lam == 0.0:
        return LassoPath(np.zeros(0), [], [], np.zeros((0, p)), 0.0, np.zeros(p), True, p=p)

    knots, events, active_sets, betas = [], [], [], []
    active = []
    signs = np.zeros(p)
    entered = set()
    event = ("enter", _first_max(np.abs(c)))
    completed = steps_hit = rank_def = False
    end_lambda, end_beta = lam, beta.copy()
    just_dropped = just_entered = -1
    dropped_sign = 0.0

    while True:
        kind, j = event
        if kind == "leave":
            beta[j] = 0.0
        knots.append(lam)
        betas.append(beta.copy())
        if kind == "enter":
            active.append(j)
            signs[j] = np.sign(c[j])
            entered.add(j)
            just_entered, just_dropped = j, -1
        else:
            active.remove(j)
            dropped_sign = signs[j]
            signs[j] = 0.0
            just_dropped, just_entered = j, -1
        events.append(PathEvent(len(knots), int(j), kind))
        active_sets.append(tuple(sorted(active)))

        if len(knots) >= max_steps:
            steps_hit = True
            break
        if max_entries is not None and len(entered) >= max_entries:
            break
        if not active:
            # everything dropped out: restart from the next entry
            c = X.T @ (y - X @ beta)
            cand = np.abs(c)
            cand[just_dropped] = -np.inf
            if not np.isfinite(np.max(cand)) or np.max(cand) <= 0:
                completed, end_lambda, end_beta = True, 0.0, beta.copy()
                break
            nxt = _first_max(cand)
            lam = float(cand[nxt])
            event = ("enter", nxt)
            continue

        idx = np.array(active)
        XA = X[:, idx]
        G = XA.T @ XA
        try:
            cho = linalg.cho_factor(G)
            diag = np.diag(cho[0])
            if np.min(diag) ** 2 < rcond * np.max(np.diag(G)):
                raise linalg.LinAlgError("ill-conditioned")
        except linalg.LinAlgError:
            rank_def = True
            break
        # re-solve at the knot with the updated set so that the state is an
        # exact solution for it; otherwise knot errors compound
        beta[idx] = linalg.cho_solve(cho, XA.T @ y - lam * signs[idx])
        if just_entered >= 0:
            beta[just_entered] = 0.0
        betas[-1] = beta.copy()
        d = linalg.cho_solve(cho, signs[idx])
        a = X.T @ (XA @ d)
        c = X.T @ (y - X @ beta)

        gamma = np.full(p, np.inf)
        if len(active) < n:
            inact = np.ones(p, dtype=bool)
            inact[idx] = False
            if just_dropped >= 0:
                inact[just_dropped] = False
            ci, ai = c[inact], a[inact]
            num1, den1 = lam - ci, 1.0 - ai
            num2, den2 = lam + ci, 1.0 + ai
            g1 = np.where(den1 > 0, np.maximum(num1, 0.0) / np.where(den1 > 0, den1, 1.0), np.inf)
            g2 = np.where(den2 > 0, np.maximum(num2, 0.0) / np.where(den2 > 0, den2, 1.0), np.inf)
            # treat candidates already at the boundary (ties) as zero step
            tie = np.abs(ci) >= lam * (1.0 - TIE_RTOL)
            gi = np.minimum(g1, g2)
            gi[tie] = 0.0
            gamma[inact] = gi
            if just_dropped >= 0:
                # only the opposite boundary can be reached again
                jd = just_dropped
                if dropped_sign > 0 and 1.0 + a[jd] > 0:
                    gamma[jd] = max(lam + c[jd], 0.0) / (1.0 + a[jd])
                elif dropped_sign < 0 and 1.0 - a[jd] > 0:
                    gamma[jd] = max(lam - c[jd], 0.0) / (1.0 - a[jd])
        drop_gamma = np.full(p, np.inf)
        bA = beta[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            gd = -bA / d
        ok = (bA != 0) & (gd > 0) & (idx != just_entered)
        drop_gamma[idx[ok]] = gd[ok]

        g_enter = float(np.min(gamma))
        g_drop = float(np.min(drop_gamma))
        g = min(g_enter, g_drop)
        if not np.isfinite(g) or g >= lam * (1.0 - 1e-9):
            beta[idx] = linalg.cho_solve(cho, XA.T @ y)
            completed, end_lambda, end_beta = True, 0.0, beta.copy()
            break
        lam = lam - g
        beta[idx] = linalg.cho_solve(cho, XA.T @ y - lam * signs[idx])
        if g_drop <= g_enter:
            jd = int(np.flatnonzero(drop_gamma <= g_drop * (1.0 + TIE_RTOL))[0])
            event = ("leave", jd)
        else:
            je = int(np.flatnonzero(gamma <= g_enter * (1.0 + TIE_RTOL))[0])
            event = ("enter", je)
            c = X.T @ (y - X @ beta)

    return LassoPath(
        knots=np.array(knots),
        events=events,
        active_sets=active_sets,
        betas=np.array(betas),
        end_lambda=float(end_lambda),
        end_beta=end_beta,
        completed=completed,
        max_steps_reached=steps_hit,
        rank_deficient=rank_def,
        p=p,
    )


def coef_at(path, lam):
    """Lasso coefficients at ``lam`` by linear interpolation between knots."""
    p = path.p
    if path.n_steps == 0 or lam >= path.knots[0]:
        return np.zeros(p)
    for hi, lo, b_hi, slope in path.segments:
        if lo <= lam <= hi:
            if hi == lo:
                continue
            return b_hi + (hi - lam) * slope
    if path.completed and lam >= path.end_lambda:
        return path.end_beta.copy()
    raise PathRangeError(
        f"lambda={lam:.6g} is below the last computed knot {path.knots[-1]:.6g} of a truncated path",
        available_steps=range(1, path.n_steps + 1),
    )

"""Desparsified (debiased) lasso with nodewise-lasso relaxed inverse.

Penalty levels are specified per observation (the ``(1/2n)`` loss convention)
and converted to the unnormalized objective with
:func:`lassosig.design.penalty_scale`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .design import as_array, check_response, penalty_scale
from .exceptions import ConfigError, DegenerateFitError, DimensionError
from .lasso import solve_lasso

SIGMA_SOURCES = ("auto", "known", "scaled_lasso", "ols_residual")
LAMBDA0_RULES = ("universal", "quantile")

# default nodewise level as a multiple of the universal level. Held-out error
# of the nodewise regressions on AR(1) designs is flat between about 0.38 and
# 0.5 (see _cd.nodewise_cv_errors); the low end keeps the debiasing bias small
NODEWISE_FACTOR = 0.38


@dataclass(frozen=True)
class NodewiseRow:
    j: int
    gamma: np.ndarray  # length p, gamma[j] == 0
    tau2: float
    lambda_j: float
    z: np.ndarray  # residual X_j - X_{-j} gamma

    @property
    def contrast(self):
        """Row ``C_j`` with 1 at ``j`` and ``-gamma`` elsewhere."""
        c = -self.gamma.copy()
        c[self.j] = 1.0
        return c


@dataclass(frozen=True)
class DebiasedFit:
    b_hat: np.ndarray
    se: np.ndarray
    p_values: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    sigma_eps_hat: float
    lambda_used: float
    beta_lasso: np.ndarray = field(repr=False, default=None)
    alpha: float = 0.05


@dataclass(frozen=True)
class DesparsConfig:
    """Tuning of :func:`despars_inference`.

    ``lambda_`` and ``lambda_nodewise`` override the default per-observation
    levels; ``sigma`` is required when ``sigma_source == "known"``.
    ``scaled_lasso_lambda0`` is ``"universal"``, ``"quantile"`` or a number
    (see :func:`scaled_lasso`).
    """

    alpha: float = 0.05
    sigma_source: str = "scaled_lasso"
    sigma: float | None = None
    kappa: float = 1.1
    lambda_: float | None = None
    lambda_nodewise: float | None = None
    scaled_lasso_lambda0: float | str = "universal"

    def __post_init__(self):
        if self.sigma_source not in SIGMA_SOURCES:
            raise ConfigError(f"sigma_source must be one of {SIGMA_SOURCES}, got {self.sigma_source!r}")
        if self.sigma_source == "known" and not (self.sigma and self.sigma > 0):
            raise ConfigError("sigma_source='known' needs a positive sigma")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if isinstance(self.scaled_lasso_lambda0, str):
            if self.scaled_lasso_lambda0 not in LAMBDA0_RULES:
                raise ConfigError(f"scaled_lasso_lambda0 must be a number or one of {LAMBDA0_RULES}")
        elif not self.scaled_lasso_lambda0 > 0:
            raise ConfigError("scaled_lasso_lambda0 must be positive")


def universal_level(n, p):
    return float(np.sqrt(2.0 * np.log(max(p, 2)) / n))


def quantile_level(n, p):
    """Quantile-based scaled-lasso level ``sqrt(2/n) L`` with ``L = -Phi^{-1}(k/p)``, ``k = L^4 + 2L^2``.

    The fixed point is found by damped iteration from ``L = 0.1``.
    """
    if p == 1:
        return float(np.sqrt(2.0 / n) * 0.5)
    L, old = 0.1, 0.0
    while abs(L - old) > 1e-3:
        k = L**4 + 2.0 * L**2
        old = L
        L = 0.5 * (-stats.norm.ppf(min(k / p, 0.99)) + old)
    return float(np.sqrt(2.0 / n) * L)


def scaled_lasso_level(n, p, lambda0="universal"):
    """Resolve a ``lambda0`` rule name (or number) to a per-observation level."""
    if lambda0 is None or lambda0 == "universal":
        return universal_level(n, p)
    if lambda0 == "quantile":
        return quantile_level(n, p)
    if isinstance(lambda0, str):
        raise ConfigError(f"unknown lambda0 rule {lambda0!r}; expected one of {LAMBDA0_RULES}")
    return float(lambda0)


def scaled_lasso(X, y, lambda0="universal", tol=1e-6, max_iter=100):
    """Joint estimate of the noise level and coefficients.

    Alternates ``beta <- lasso(lambda0 * sigma * scale)`` and
    ``sigma^2 <- ||y - X beta||^2 / n`` from ``sigma = ||y|| / sqrt(n)`` until
    the relative change in sigma drops below ``tol``.

    ``lambda0`` is a per-observation level or a rule: ``"universal"``
    (``sqrt(2 log p / n)``) or ``"quantile"`` (:func:`quantile_level`, smaller
    and less biased upward when the signal is dense).

    Returns ``(sigma_hat, beta)``.
    """
    X = as_array(X)
    y = check_response(X, y)
    n, p = X.shape
    lambda0 = scaled_lasso_level(n, p, lambda0)
    scale = penalty_scale(X)
    sigma = float(np.linalg.norm(y)) / np.sqrt(n)
    if sigma < 1e-8:
        raise DegenerateFitError("response is (numerically) zero; noise level undefined")
    beta = np.zeros(p)
    for _ in range(max_iter):
        beta = solve_lasso(X, y, lambda0 * sigma * scale, beta0=beta).beta
        r = y - X @ beta
        new = float(np.sqrt(r @ r / n))
        if new < 1e-8:
            raise DegenerateFitError("scaled-lasso noise estimate collapsed to zero")
        done = abs(new - sigma) / sigma < tol
        sigma = new
        if done:
            break
    return sigma, beta


def ols_sigma(X, y):
    """Residual standard deviation of the full least-squares fit, ``RSS / (n - p)``."""
    X = as_array(X)
    y = check_response(X, y)
    n, p = X.shape
    if n <= p:
        raise DimensionError(f"OLS noise estimate needs n > p, got n={n}, p={p}")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    s = float(np.sqrt(r @ r / (n - p)))
    if s < 1e-8:
        raise DegenerateFitError("OLS residual variance is zero")
    return s


def resolve_sigma_source(source, n, p):
    """``auto`` means the scaled lasso when ``p >= n`` and the OLS residual otherwise."""
    if source == "auto":
        return "scaled_lasso" if p >= n else "ols_residual"
    return source


def estimate_sigma(X, y, source="auto", sigma=None, lambda0="universal"):
    X = as_array(X)
    n, p = X.shape
    source = resolve_sigma_source(source, n, p)
    if source == "known":
        return float(sigma)
    if source == "scaled_lasso":
        return scaled_lasso(X, y, lambda0)[0]
    if source == "ols_residual":
        return ols_sigma(X, y)
    raise ConfigError(f"unknown sigma source {source!r}")


def nodewise_lasso(X, j, lambda_j):
    """Lasso regression of column ``j`` on the remaining columns at penalty ``lambda_j``.

    ``tau2 = (||z||^2 + lambda_j ||gamma||_1) / n`` with ``z`` the residual,
    which equals ``<z, X_j> / n`` at an exact solution.
    """
    X = as_array(X)
    n, p = X.shape
    if p < 2:
        raise DimensionError("nodewise regression needs at least two columns")
    others = np.r_[0:j, j + 1 : p]
    xj = X[:, j]
    fit = solve_lasso(X[:, others], xj, lambda_j)
    gamma = np.zeros(p)
    gamma[others] = fit.beta
    z = xj - X @ gamma
    tau2 = (float(z @ z) + lambda_j * float(np.sum(np.abs(gamma)))) / n
    return NodewiseRow(int(j), gamma, tau2, float(lambda_j), z)


def nodewise_rows(X, lambda_nodewise=None):
    """One :class:`NodewiseRow` per column, with a common per-observation level.

    The default level is ``NODEWISE_FACTOR`` times the universal level. The
    unnormalized penalty for column ``j`` is the level times ``||X_j||^2``
    (the natural scale of a regression whose response is ``X_j``), which is
    the same for every ``j`` once columns are normalized.
    """
    X = as_array(X)
    n, p = X.shape
    if lambda_nodewise is None:
        lambda_nodewise = NODEWISE_FACTOR * universal_level(n, p)
    sq = np.sum(X * X, axis=0)
    return [nodewise_lasso(X, j, lambda_nodewise * sq[j]) for j in range(p)]


def debias(X, y, beta_lasso, rows):
    """One-step correction ``b = beta + Theta X^T (y - X beta) / n``.

    With ``Theta_j = C_j / tau2_j`` this is ``beta_j + <z_j, r> / (n tau2_j)``.
    """
    X = as_array(X)
    y = check_response(X, y)
    n, p = X.shape
    if len(rows) != p or sorted(r.j for r in rows) != list(range(p)):
        raise ValueError(f"need exactly one nodewise row per coordinate (p={p}), got {len(rows)}")
    resid = y - X @ beta_lasso
    corr = X.T @ resid / n
    b = np.array(beta_lasso, dtype=float, copy=True)
    for row in rows:
        b[row.j] += row.contrast @ corr / row.tau2
    return b


def standard_errors(rows, sigma, n):
    """``sigma * sqrt(Omega_jj / n)`` with ``Omega = Theta Sigma_hat Theta^T``."""
    omega = np.array([float(r.z @ r.z) / n / r.tau2**2 for r in sorted(rows, key=lambda r: r.j)])
    return sigma * np.sqrt(omega / n)


def despars_inference(X, y, config=None):
    """Desparsified lasso estimates, standard errors, p-values and intervals."""
    cfg = config or DesparsConfig()
    X = as_array(X)
    y = check_response(X, y)
    n, p = X.shape
    sigma = estimate_sigma(X, y, cfg.sigma_source, cfg.sigma, cfg.scaled_lasso_lambda0)
    level = cfg.lambda_ if cfg.lambda_ is not None else cfg.kappa * sigma * universal_level(n, p)
    lam = level * penalty_scale(X)
    beta = solve_lasso(X, y, lam).beta
    rows = nodewise_rows(X, cfg.lambda_nodewise)
    b = debias(X, y, beta, rows)
    se = standard_errors(rows, sigma, n)
    pvals = np.minimum(1.0, 2.0 * stats.norm.sf(np.abs(b) / se))
    z = stats.norm.isf(cfg.alpha / 2.0)
    return DebiasedFit(b, se, pvals, b - z * se, b + z * se, float(sigma), float(lam), beta, cfg.alpha)

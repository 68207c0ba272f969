"""Monte-Carlo scenarios: AR(1) Gaussian designs, path-entry events, method comparison.

Every replicate draws from its own generator seeded by ``(seed, run)``, so
results do not depend on how replicates are scheduled across workers, and the
same design/noise draws are reused across coefficient sizes.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .covtest import assign_cov_pvals, cov_sequence, select_cov_stop
from .design import SCALINGS, DesignMatrix, as_array, check_index_set, penalty_scale
from .desparsified import DesparsConfig, despars_inference, estimate_sigma, resolve_sigma_source
from .exceptions import ConfigError, LassoSigError, SingularDesignError
from .lasso import coef_at, compute_path, solve_lasso
from .multitest import holm_adjust, reject_at

log = logging.getLogger(__name__)

METHODS = ("de-spars", "cov", "cov.pval")
ETA_TOL = 1e-10


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 100
    p: int = 80
    rho: float = 0.5
    k0: int = 10
    coef_size: float = 1.0
    sigma: float = 1.0
    runs: int = 500
    seed: int = 20140101
    column_scaling: str = "unit_norm"
    signs: str = "positive"  # or "random"

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ConfigError("n and p must be positive")
        if not -1 < self.rho < 1:
            raise ConfigError("rho must lie in (-1, 1)")
        if not 0 <= self.k0 <= self.p:
            raise ConfigError(f"k0={self.k0} must lie in [0, p={self.p}]")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.coef_size < 0 or self.sigma < 0:
            raise ConfigError("coef_size and sigma must be nonnegative")
        if self.column_scaling not in SCALINGS:
            raise ConfigError(f"column_scaling must be one of {SCALINGS}")
        if self.signs not in ("positive", "random"):
            raise ConfigError("signs must be 'positive' or 'random'")


@dataclass(frozen=True)
class Replicate:
    X_raw: np.ndarray
    X: DesignMatrix
    beta_star: np.ndarray
    A_star: tuple
    eps: np.ndarray
    y: np.ndarray


@dataclass
class ScenarioSummary:
    config: ScenarioConfig
    fwer_per_method: dict
    tp_per_method: dict
    runs_completed: int
    failures: int = 0
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class IrrepresentableReport:
    eta: float
    lambda_eps: float
    lambda_eta: float  # nan when eta >= 1
    k_hat_eta: int
    contained: bool | None  # support at lambda_eta within A0; None if undefined

    @property
    def lambda_eta_defined(self):
        return bool(np.isfinite(self.lambda_eta))


def replicate_rng(seed, run):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(run)]))


def ar1_matrix(n, p, rho, rng):
    """Rows i.i.d. N(0, Sigma), ``Sigma_ij = rho^|i-j|``, via the AR(1) recursion."""
    Z = rng.standard_normal((n, p))
    X = np.empty_like(Z)
    X[:, 0] = Z[:, 0]
    c = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + c * Z[:, j]
    return X


def gen_ar1_design(cfg, rng):
    return DesignMatrix.build(ar1_matrix(cfg.n, cfg.p, cfg.rho, rng), cfg.column_scaling)


def place_active(cfg, rng):
    """Uniformly random ``k0``-subset carrying coefficients of size ``coef_size``."""
    A = np.sort(rng.choice(cfg.p, size=cfg.k0, replace=False))
    beta = np.zeros(cfg.p)
    signs = rng.choice([-1.0, 1.0], size=cfg.k0) if cfg.signs == "random" else np.ones(cfg.k0)
    beta[A] = cfg.coef_size * signs
    return beta, tuple(A.tolist())


def gen_response(X, beta_star, sigma, rng):
    X = as_array(X)
    eps = sigma * rng.standard_normal(X.shape[0])
    return X @ beta_star + eps, eps


def draw_replicate(cfg, run):
    """Design, truth and response for replicate ``run``.

    The response is generated from the unscaled AR(1) draw, so ``coef_size``
    is measured against predictors with unit variance; the returned design is
    the column-scaled version used for fitting.
    """
    rng = replicate_rng(cfg.seed, run)
    X_raw = ar1_matrix(cfg.n, cfg.p, cfg.rho, rng)
    beta, A = place_active(cfg, rng)
    y, eps = gen_response(X_raw, beta, cfg.sigma, rng)
    return Replicate(X_raw, DesignMatrix.build(X_raw, cfg.column_scaling), beta, A, eps, y)


def _map_runs(func, args, jobs):
    """Evaluate ``func`` over ``args`` preserving order; ``jobs > 1`` uses processes."""
    args = list(args)
    if jobs is None or jobs <= 1 or len(args) <= 1:
        return [func(a) for a in args]
    chunk = max(1, len(args) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, args, chunksize=chunk))


# ---------------------------------------------------------------- event B


def first_entries(path, k):
    seen = []
    for ev in path.events:
        if ev.kind == "enter" and ev.variable not in seen:
            seen.append(ev.variable)
            if len(seen) == k:
                break
    return seen


def _event_b_run(args):
    cfg, run = args
    rep = draw_replicate(cfg, run)
    try:
        path = compute_path(rep.X, rep.y, max_entries=cfg.k0)
    except LassoSigError as exc:
        log.warning("run %d: path failed (%s)", run, exc)
        return run, False, True, True
    first = first_entries(path, cfg.k0)
    hit = len(first) == cfg.k0 and set(first) == set(rep.A_star)
    # B implies screening at the knot where the k0-th variable entered
    consistent = True
    if hit:
        consistent = set(rep.A_star) <= set(path.active_sets[-1])
    return run, hit, False, consistent


def prob_event_B(cfg, jobs=1):
    """Fraction of runs whose first ``k0`` distinct entering variables are exactly the true support.

    Returns ``(fraction, mc_standard_error, failures)``; failed paths count as misses.
    """
    out = _map_runs(_event_b_run, [(cfg, r) for r in range(cfg.runs)], jobs)
    hits = sum(1 for _, h, _, _ in out if h)
    fails = sum(1 for _, _, f, _ in out if f)
    if not all(c for *_, c in out):
        raise AssertionError("event B observed without screening at the k0-th entry")
    frac = hits / cfg.runs
    return frac, float(np.sqrt(frac * (1 - frac) / cfg.runs)), fails


# ---------------------------------------------------------------- tables


@dataclass(frozen=True)
class MethodSelections:
    run: int
    selections: dict  # method -> sorted tuple of indices
    sigma_despars: float
    sigma_cov: float
    failed: str | None = None


def select_all_methods(X, y, alpha=0.05, despars=None, cov_sigma_source="auto"):
    """Selections of the three compared procedures on one data set.

    De-spars estimates the noise level by the rule in ``despars``; the two
    covariance protocols use ``cov_sigma_source`` (the estimate is computed
    once when both rules resolve to the same source). Unassigned variables in
    the ``cov.pval`` protocol receive p-value 1 so that Holm runs over all
    ``p`` hypotheses.

    Returns ``(selections, sigma_despars, sigma_cov)``.
    """
    X = as_array(X)
    n, p = X.shape
    cfg = despars or DesparsConfig(alpha=alpha)
    src_d = resolve_sigma_source(cfg.sigma_source, n, p)
    src_c = resolve_sigma_source(cov_sigma_source, n, p)
    s_d = estimate_sigma(X, y, src_d, cfg.sigma, cfg.scaled_lasso_lambda0)
    s_c = s_d if src_c == src_d else estimate_sigma(X, y, src_c, None, cfg.scaled_lasso_lambda0)
    fit = despars_inference(X, y, replace(cfg, sigma_source="known", sigma=s_d, alpha=alpha))
    sel = {"de-spars": tuple(reject_at(holm_adjust(fit.p_values), alpha))}

    path = compute_path(X, y)
    seq = cov_sequence(X, y, path, s_c**2)
    sel["cov"] = tuple(select_cov_stop(seq, path, alpha))
    pv = np.ones(p)
    for j, pj in assign_cov_pvals(seq, path).items():
        pv[j] = pj
    sel["cov.pval"] = tuple(reject_at(holm_adjust(pv), alpha))
    return sel, s_d, s_c


def _table_run(args):
    cfg, alpha, dcfg, cov_src, run = args
    rep = draw_replicate(cfg, run)
    try:
        sel, s_d, s_c = select_all_methods(rep.X, rep.y, alpha, dcfg, cov_src)
    except (LassoSigError, np.linalg.LinAlgError) as exc:
        log.warning("run %d failed: %s", run, exc)
        return MethodSelections(run, {}, float("nan"), float("nan"), failed=str(exc))
    return MethodSelections(run, sel, s_d, s_c)


def run_table_comparison(cfg, alpha=0.05, despars=None, cov_sigma_source="auto", jobs=1):
    """FWER and mean true positives of de-spars, cov and cov.pval over ``cfg.runs`` replicates."""
    dcfg = despars or DesparsConfig(alpha=alpha)
    args = [(cfg, alpha, dcfg, cov_sigma_source, r) for r in range(cfg.runs)]
    results = _map_runs(_table_run, args, jobs)
    A_sets = {r: set(draw_truth(cfg, r)) for r in range(cfg.runs)}
    ok = [m for m in results if m.failed is None]
    fwer, tp = {}, {}
    for meth in METHODS:
        fp_any = [bool(set(m.selections[meth]) - A_sets[m.run]) for m in ok]
        tps = [len(set(m.selections[meth]) & A_sets[m.run]) for m in ok]
        fwer[meth] = float(np.mean(fp_any)) if ok else float("nan")
        tp[meth] = float(np.mean(tps)) if ok else float("nan")
    med = lambda v: float(np.median(v)) if v else float("nan")  # noqa: E731
    return ScenarioSummary(
        cfg,
        fwer,
        tp,
        len(ok),
        failures=len(results) - len(ok),
        extra={
            "median_sigma_despars": med([m.sigma_despars for m in ok]),
            "median_sigma_cov": med([m.sigma_cov for m in ok]),
        },
    )


def draw_truth(cfg, run):
    """True support of replicate ``run`` (recomputed from its seed)."""
    rng = replicate_rng(cfg.seed, run)
    rng.standard_normal((cfg.n, cfg.p))
    return place_active(cfg, rng)[1]


# ---------------------------------------------------------------- diagnostics


def irrepresentable_eta(X, A0):
    """``max_{j not in A0} || (X_A0^T X_A0)^{-1} X_A0^T X_j ||_1``.

    This equals the supremum of ``|X_j^T X_A0 (X_A0^T X_A0)^{-1} tau|`` over
    ``||tau||_inf <= 1``, which is attained at a sign vector.
    """
    X = as_array(X)
    p = X.shape[1]
    A0 = check_index_set(A0, p)
    rest = np.setdiff1d(np.arange(p), A0)
    if A0.size == 0 or rest.size == 0:
        return 0.0
    XA = X[:, A0]
    G = XA.T @ XA
    if np.linalg.matrix_rank(G) < A0.size:
        raise SingularDesignError(f"X_A0 is rank deficient for A0={A0.tolist()}", A0)
    W = np.linalg.solve(G, XA.T @ X[:, rest])
    return float(np.max(np.sum(np.abs(W), axis=0)))


def irrepresentable_eta_bruteforce(X, A0):
    """Vertex enumeration of the same supremum; exponential in ``|A0|``."""
    X = as_array(X)
    A0 = np.asarray(sorted(A0), dtype=int)
    rest = np.setdiff1d(np.arange(X.shape[1]), A0)
    if A0.size == 0 or rest.size == 0:
        return 0.0
    XA = X[:, A0]
    M = X[:, rest].T @ XA @ np.linalg.inv(XA.T @ XA)
    best = 0.0
    for tau in itertools.product((-1.0, 1.0), repeat=A0.size):
        best = max(best, float(np.max(np.abs(M @ np.array(tau)))))
    return best


def irrepresentable_report(X, A0, eps, path, y=None):
    """Noise level, containment penalty and the last path step above it.

    ``lambda_eta`` is undefined (nan) when ``eta >= 1`` up to ``ETA_TOL``.

    ``contained`` records whether the lasso support at ``lambda_eta`` lies in
    ``A0``. It is read off ``path`` when ``lambda_eta`` is within its range,
    otherwise recomputed from ``y`` if given, else left as ``None``.
    """
    X = as_array(X)
    eta = irrepresentable_eta(X, A0)
    lam_eps = float(np.max(np.abs(X.T @ np.asarray(eps, dtype=float))))
    # exact representability comes out as 1 - O(machine epsilon)
    if eta >= 1.0 - ETA_TOL:
        return IrrepresentableReport(eta, lam_eps, float("nan"), 0, None)
    lam_eta = lam_eps * (1.0 + eta) / (1.0 - eta)
    k_hat = int(np.sum(path.knots >= lam_eta))
    beta = None
    try:
        beta = coef_at(path, lam_eta)
    except LassoSigError:
        if y is not None and lam_eta > 0:
            beta = solve_lasso(X, y, lam_eta).beta
    contained = None
    if beta is not None:
        contained = set(np.flatnonzero(beta).tolist()) <= set(np.asarray(list(A0)).tolist())
    return IrrepresentableReport(eta, lam_eps, lam_eta, k_hat, contained)


def screening_rate(cfg, c=np.sqrt(2.0), jobs=1):
    """Fraction of runs whose lasso support at ``c * sigma * sqrt(log p / n)`` covers the truth.

    Returns ``(fraction, mc_standard_error)``.
    """
    out = _map_runs(_screen_run, [(cfg, c, r) for r in range(cfg.runs)], jobs)
    frac = float(np.mean(out))
    return frac, float(np.sqrt(frac * (1 - frac) / cfg.runs))


def _screen_run(args):
    cfg, c, run = args
    rep = draw_replicate(cfg, run)
    level = c * cfg.sigma * np.sqrt(np.log(cfg.p) / cfg.n)
    lam = level * penalty_scale(rep.X)
    if lam <= 0:
        return False
    beta = solve_lasso(rep.X, rep.y, lam).beta
    return set(rep.A_star) <= set(np.flatnonzero(beta).tolist())


def config_dict(cfg):
    return asdict(cfg)

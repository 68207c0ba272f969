"""Command-line interface.

Exit codes: 0 success, 2 unreadable or malformed input, 3 numerical failure,
4 invalid configuration.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, STUDIES, load_preset, load_study, preset_text
from .covtest import assign_cov_pvals, cov_sequence, select_cov_stop
from .desparsified import LAMBDA0_RULES, SIGMA_SOURCES, DesparsConfig, despars_inference, estimate_sigma
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DegenerateFitError,
    DimensionError,
    IdentityMismatchError,
    InputFormatError,
    PathRangeError,
    SingularDesignError,
)
from .lasso import compute_path
from .multitest import holm_adjust, reject_at
from .refit import order_statistic_null_pvalue, refit_fixed_pvalue, refit_sequence
from .simulation import METHODS, prob_event_B, run_table_comparison
from .textio import format_table, read_design, read_response

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_CONFIG = 0, 2, 3, 4
JOBS_ENV = "LASSOSIG_JOBS"

log = logging.getLogger("lassosig")


def _default_jobs():
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        jobs = int(raw)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise ConfigError(f"{JOBS_ENV} must be at least 1")
    return jobs


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _emit(text, out, manifest):
    """Write ``text`` to ``out`` (or stdout) and a JSON sidecar next to files.

    The sidecar holds everything that varies between otherwise identical runs
    (timestamps, argv, worker count), so result files stay byte-identical.
    """
    if out is None:
        sys.stdout.write(text)
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    side = out.with_name(out.name + ".manifest.json")
    side.write_text(json.dumps({**manifest, "end": _now()}, indent=2, sort_keys=True) + "\n")


def _manifest(args, argv):
    return {"tool": "lassosig", "version": __version__, "argv": list(argv), "start": _now(), "command": args.command}


def _load_xy(args):
    X = read_design(args.design)
    y = read_response(args.response, n=X.shape[0])
    return X, y


def _data_header(args, X, extra=()):
    return [
        f"tool: lassosig {__version__}",
        f"command: {args.command}",
        f"design: {Path(args.design).name} sha256:{_sha256(args.design)}",
        f"response: {Path(args.response).name} sha256:{_sha256(args.response)}",
        f"n: {X.shape[0]}",
        f"p: {X.shape[1]}",
        *extra,
    ]


def _sigma2(args, X, y):
    if args.sigma2 is not None:
        if not args.sigma2 > 0:
            raise ConfigError("--sigma2 must be positive")
        return float(args.sigma2), "given"
    s = estimate_sigma(X, y, args.sigma_source, lambda0=args.lambda0)
    return s * s, f"estimated ({args.sigma_source})"


LAMBDA0_HELP = "scaled-lasso level: universal, quantile or a number"


def _lambda0(text):
    if text in LAMBDA0_RULES:
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected one of {', '.join(LAMBDA0_RULES)} or a number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("lambda0 must be positive")
    return value


def _ints(values):
    return ",".join(str(int(v)) for v in values) or "-"


# ---------------------------------------------------------------- commands


def cmd_path(args, manifest):
    X, y = _load_xy(args)
    path = compute_path(X, y, max_steps=args.max_steps)
    rows = [
        (ev.step, ev.kind, ev.variable, path.knots[i], len(path.active_sets[i]))
        for i, ev in enumerate(path.events)
    ]
    head = _data_header(
        args,
        X,
        [
            f"max_steps: {args.max_steps if args.max_steps else 'default'}",
            f"completed: {int(path.completed)}",
            f"max_steps_reached: {int(path.max_steps_reached)}",
            f"rank_deficient: {int(path.rank_deficient)}",
        ],
    )
    _emit(format_table(["step", "kind", "variable", "lambda", "n_active"], rows, head), args.out, manifest)


def cmd_covtest(args, manifest):
    X, y = _load_xy(args)
    s2, how = _sigma2(args, X, y)
    path = compute_path(X, y)
    seq = cov_sequence(X, y, path, s2, steps=args.steps)
    p = X.shape[1]
    pv = np.ones(p)
    for j, pj in assign_cov_pvals(seq, path).items():
        pv[j] = pj
    holm = reject_at(holm_adjust(pv), args.alpha) if p else []
    rows = [(e.k, e.entered_variable, e.event_index + 1, e.T, e.p_value, "Exp(1)") for e in seq.entries]
    head = _data_header(
        args,
        X,
        [
            f"sigma2: {s2:.6g} ({how})",
            f"alpha: {args.alpha:g}",
            f"truncated: {int(seq.truncated)}",
            f"cov_selected: {_ints(select_cov_stop(seq, path, args.alpha))}",
            f"cov_pval_holm_selected: {_ints(holm)}",
        ],
    )
    cols = ["k", "variable", "path_step", "statistic", "p_value", "reference"]
    _emit(format_table(cols, rows, head), args.out, manifest)


def cmd_refit(args, manifest):
    X, y = _load_xy(args)
    s2, how = _sigma2(args, X, y)
    path = compute_path(X, y)
    seq = refit_sequence(X, y, path, s2, steps=args.steps)
    p = X.shape[1]
    rows = []
    for st in seq:
        if st.singular:
            rows.append((st.k, st.entered_variable, st.event_index + 1, float("nan"), float("nan"), args.null, 1))
            continue
        if args.null == "chi2":
            pval = refit_fixed_pvalue(max(st.value, 0.0))
            ref = "chi2(1)"
        else:
            pval = order_statistic_null_pvalue(max(st.value, 0.0), st.k, p)
            ref = f"order_stat(k={st.k},p={p})"
        rows.append((st.k, st.entered_variable, st.event_index + 1, st.value, pval, ref, 0))
    head = _data_header(args, X, [f"sigma2: {s2:.6g} ({how})", f"null: {args.null}"])
    cols = ["k", "variable", "path_step", "statistic", "p_value", "reference", "singular"]
    _emit(format_table(cols, rows, head), args.out, manifest)


def cmd_despars(args, manifest):
    X, y = _load_xy(args)
    cfg = DesparsConfig(
        alpha=args.alpha, sigma_source=args.sigma_source, sigma=args.sigma, scaled_lasso_lambda0=args.lambda0
    )
    fit = despars_inference(X, y, cfg)
    holm = holm_adjust(fit.p_values).adjusted
    rows = [
        (j, fit.b_hat[j], fit.se[j], fit.p_values[j], holm[j], fit.ci_low[j], fit.ci_high[j])
        for j in range(X.shape[1])
    ]
    head = _data_header(
        args,
        X,
        [
            f"alpha: {args.alpha:g}",
            f"sigma_source: {args.sigma_source}",
            f"sigma_hat: {fit.sigma_eps_hat:.6g}",
            f"lambda: {fit.lambda_used:.6g}",
            f"holm_rejected: {_ints(np.flatnonzero(holm <= args.alpha))}",
        ],
    )
    cols = ["variable", "estimate", "se", "p", "p_holm", "ci_low", "ci_high"]
    _emit(format_table(cols, rows, head), args.out, manifest)


def _study(args):
    if args.scenario and args.preset:
        raise ConfigError("give either --scenario or --preset, not both")
    if args.scenario:
        study = load_study(args.scenario)
    else:
        name = args.preset or args.which
        if name is None:
            raise ConfigError("one of --which, --preset or --scenario is required")
        study = load_preset(name)
    if args.which and study.which != args.which:
        raise ConfigError(f"--which {args.which} does not match the configuration ({study.which})")
    return study.with_overrides(runs=args.runs, seed=args.seed)


def _study_header(study):
    sc = study.scenario
    return [
        f"tool: lassosig {__version__}",
        f"study: {study.which}",
        f"config_name: {study.name}",
        f"config_digest: {study.digest()}",
        f"seed: {sc.seed}",
        f"runs: {sc.runs}",
        "config: " + json.dumps(study.to_dict(), sort_keys=True, separators=(",", ":")),
    ]


def cmd_simulate(args, manifest):
    study = _study(args)
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    manifest.update(jobs=jobs, config_digest=study.digest(), seed=study.scenario.seed)
    out_dir = Path(args.out_dir)
    head = _study_header(study)
    if study.which == "figure1":
        rows, curve = [], {}
        for cfg in study.scenarios():
            frac, se, fails = prob_event_B(cfg, jobs=jobs)
            log.info("k0=%d size=%g P[B]=%.3f", cfg.k0, cfg.coef_size, frac)
            rows.append((cfg.coef_size, cfg.k0, frac, se, cfg.runs, fails))
            curve[(cfg.coef_size, cfg.k0)] = frac
        summary = format_table(["coef_size", "k0", "p_event_b", "mc_se", "runs", "failures"], rows, head)
        plot_rows = [(b, *(curve[(b, k)] for k in study.k0_values)) for b in study.coef_sizes]
        plot = format_table(["coef_size", *(f"k0_{k}" for k in study.k0_values)], plot_rows, head)
        _emit(summary, out_dir / f"{study.which}_summary.tsv", manifest)
        _emit(plot, out_dir / f"{study.which}_plot.tsv", manifest)
        return
    rows = []
    for cfg in study.scenarios():
        res = run_table_comparison(cfg, study.alpha, study.despars, study.cov_sigma_source, jobs=jobs)
        for m in METHODS:
            rows.append((cfg.coef_size, m, res.fwer_per_method[m], res.tp_per_method[m], res.runs_completed, res.failures))
        log.info(
            "size=%g %s",
            cfg.coef_size,
            " ".join(f"{m}={res.fwer_per_method[m]:.3f}/{res.tp_per_method[m]:.3f}" for m in METHODS),
        )
    cols = ["coef_size", "method", "fwer", "tp", "runs_completed", "failures"]
    _emit(format_table(cols, rows, head), out_dir / f"{study.which}_summary.tsv", manifest)


def cmd_preset(args, manifest):
    sys.stdout.write(preset_text(args.name))


# ---------------------------------------------------------------- parser


def build_parser():
    ap = argparse.ArgumentParser(prog="lassosig", description="Lasso path significance tests and simulations.")
    ap.add_argument("--version", action="version", version=f"lassosig {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def data_cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("design", help="design file: 'n p' header then n rows of p reals")
        p.add_argument("response", help="response file: one real per line")
        p.add_argument("--out", help="output file (default stdout)")
        return p

    def sigma_opts(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--sigma2", type=float, help="known noise variance")
        g.add_argument("--estimate-sigma", action="store_true", help="estimate the noise variance (default)")
        p.add_argument("--sigma-source", default="auto", choices=[s for s in SIGMA_SOURCES if s != "known"])
        p.add_argument("--lambda0", type=_lambda0, default="universal", help=LAMBDA0_HELP)

    p = data_cmd("path", "lasso path knots and events")
    p.add_argument("--max-steps", type=int)
    p.set_defaults(func=cmd_path)

    p = data_cmd("covtest", "covariance test along the path")
    sigma_opts(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_covtest)

    p = data_cmd("refit", "least-squares refit drop along the path")
    sigma_opts(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--null", choices=("chi2", "order"), default="chi2", help="reference distribution")
    p.set_defaults(func=cmd_refit)

    p = data_cmd("despars", "desparsified lasso p-values and intervals")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--sigma-source", default="scaled_lasso", choices=SIGMA_SOURCES)
    p.add_argument("--sigma", type=float, help="noise standard deviation for --sigma-source known")
    p.add_argument("--lambda0", type=_lambda0, default="universal", help=LAMBDA0_HELP)
    p.set_defaults(func=cmd_despars)

    p = sub.add_parser("simulate", help="Monte-Carlo reproduction of the figure and tables")
    p.add_argument("--which", choices=STUDIES)
    p.add_argument("--scenario", help="TOML study configuration")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or 1)")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("preset", help="print a bundled study configuration")
    p.add_argument("name", choices=PRESETS)
    p.set_defaults(func=cmd_preset)
    return ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if getattr(args, "steps", None) is not None and args.steps < 1:
            raise ConfigError("--steps must be at least 1")
        if getattr(args, "alpha", None) is not None and not 0 < args.alpha < 1:
            raise ConfigError("--alpha must lie in (0, 1)")
        args.func(args, _manifest(args, argv))
    except (InputFormatError, DimensionError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"lassosig: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"lassosig: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        ConvergenceError,
        SingularDesignError,
        DegenerateFitError,
        IdentityMismatchError,
        PathRangeError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"lassosig: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK

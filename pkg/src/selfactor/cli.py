"""Command-line interface: ``selfactor <command> [options]``."""

import argparse
import logging
import sys

import numpy as np

from . import io
from .exceptions import DataError, ParameterError, SelfactorError
from .thresholding import RULE_KINDS

logger = logging.getLogger("selfactor")


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    out = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        lo, sep, hi = item.partition("-")
        out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return out


def _sigma(text):
    return "estimate" if text == "estimate" else float(text)


def _flag(text):
    if isinstance(text, bool):
        return text
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_solver(p):
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--n-starts", type=int, default=1)
    p.add_argument("--max-outer", type=int, default=500)
    p.add_argument("--max-inner", type=int, default=50)
    p.add_argument("--tol-obj", type=float, default=1e-10)
    p.add_argument("--tol-param", type=float, default=1e-8)
    p.add_argument("--k-inflation", type=float, default=0.0)
    p.add_argument("--init", default=None, choices=("rrr", "zero", "random"),
                   help="start for S (default rrr; zero with --augment, where the rrr fit interpolates)")


def _add_rule(p, default="hard"):
    p.add_argument("--rule", default=default, choices=sorted(set(RULE_KINDS) | {"hardridge"}))
    p.add_argument("--shape", type=float, default=None, help="SCAD a or MCP gamma")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="CSV file with a header row")
    common.add_argument("--responses", help="response columns: names, 1-based indices or ranges a-b")
    common.add_argument("--predictors", help="predictor columns (default: all non-response columns)")
    common.add_argument("--center", dest="center", action="store_true", default=True)
    common.add_argument("--no-center", dest="center", action="store_false")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out-dir", default="selfactor-out")
    common.add_argument("--config", help="flat key = value file; command-line flags win")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="selfactor", description="Selective reduced-rank regression and PCA")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("fit", parents=[common], help="selective or sparse reduced-rank regression")
    _add_solver(p)
    _add_rule(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--mode", default="selective", choices=("selective", "sparse"))
    p.add_argument("--augment", action="store_true", help="append case indicators to flag outlying rows")

    p = sub.add_parser("screen", parents=[common], help="row-budget screening, entry budget or hybrid")
    _add_solver(p)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--d-elem", type=int, default=None)
    p.add_argument("--progressive", action="store_true")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--no-squeeze", dest="squeeze", action="store_false", default=True)

    p = sub.add_parser("pca", parents=[common], help="selective, sparse or constrained PCA")
    _add_solver(p)
    _add_rule(p, default="soft")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--mode", default=None, choices=("selective", "sparse", "screened", "sparse_l0", "hybrid"))
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--d-elem", type=int, default=None)
    p.add_argument("--gram", action="store_true", help="--input holds a p x p Gram matrix")
    p.add_argument("--n-samples", type=int, default=None, help="rows behind a Gram input (for sigma_hat)")
    p.add_argument("--report-av", action="store_true")

    p = sub.add_parser("tune", parents=[common], help="grid search by pic or sfpic")
    _add_solver(p)
    _add_rule(p)
    p.add_argument("--mode", default="selective", choices=("selective", "sparse"))
    p.add_argument("--criterion", default="sfpic", choices=("pic", "sfpic"))
    p.add_argument("--sigma", type=_sigma, default=None, help="noise scale for pic, or 'estimate'")
    p.add_argument("--a1", type=float, default=None)
    p.add_argument("--a2", type=float, default=None)
    p.add_argument("--lambda-grid", type=_floats, default=None)
    p.add_argument("--rank-grid", type=_ints, default=None)

    p = sub.add_parser("factors", parents=[common], help="Type I or Type II factors from a fit")
    _add_solver(p)
    _add_rule(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--type", dest="factor_type", type=int, choices=(1, 2), default=2)

    p = sub.add_parser("forecast", parents=[common], help="rolling-window forecast evaluation")
    p.add_argument("--window", type=int, required=False, default=None)
    p.add_argument("--lags", type=int, default=1)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--presample", type=int, default=None)
    p.add_argument("--fitter", default="ar", help="comma-separated subset of ar, rrr, srrr")
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--rule", default="hard")

    p = sub.add_parser("oracle", parents=[common])
    p.add_argument("--kind", default="group", choices=("group", "entry"))
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--d-elem", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--eta", type=float, default=0.0)

    p = sub.add_parser("rates", parents=[common])
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--m-grid", type=_ints, default=[4, 8, 16, 32])
    p.add_argument("--J", type=int, default=6)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--snr", type=float, default=1.0)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--A", type=float, default=1.0)
    p.add_argument("--criterion", default=None, choices=("pic", "sfpic"))

    # keep the two research commands out of the public help
    sub._choices_actions = [a for a in sub._choices_actions if a.dest not in ("oracle", "rates")]
    return parser


def _apply_config(parser, argv):
    """Parse once for --config, then reparse with file values as defaults."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = io.read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {}
    for a in sub._actions:
        actions[a.dest] = a
        for opt in a.option_strings:
            actions[opt.lstrip("-").replace("-", "_")] = a
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or action.dest == "help":
            raise ParameterError(f"config key {key!r} is not an option of {args.command!r}")
        try:
            if action.nargs == 0:
                value = _flag(raw)
                # a key naming the negative form (no_center = true) stores the opposite
                defaults[action.dest] = value if action.const is True else not value
            else:
                defaults[action.dest] = action.type(raw) if action.type is not None else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ParameterError(f"config key {key!r}: {exc}") from exc
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _solver_config(args, seed):
    from .solver import SolverConfig

    return SolverConfig(
        K_inflation=args.k_inflation,
        max_inner=args.max_inner,
        max_outer=args.max_outer,
        tol_obj=args.tol_obj,
        tol_param=args.tol_param,
        S_init=args.init,
        n_starts=args.n_starts,
        seed=seed,
    )


def _rule(args):
    from .thresholding import make_rule

    eta = getattr(args, "eta", 0.0)
    kind = "hard-ridge" if args.rule in ("hardridge", "hard-ridge") else args.rule
    return make_rule(kind, eta=eta if kind == "hard-ridge" else None, shape=args.shape)


def _load(args, need_responses=True):
    if not args.input:
        raise DataError("--input is required")
    ds = io.load_csv(args.input, args.responses, args.predictors)
    if need_responses and not ds.response_columns:
        raise DataError("--responses is required for this command")
    if not ds.predictor_columns:
        raise DataError("the predictor selection is empty")
    if args.center:
        ds = io.center_columns(ds)
    return ds


def _fit_summary(res, names):
    return dict(
        support=[names[j] for j in res.support],
        support_index=res.support,
        rank=res.rank_achieved,
        objective=res.objective,
        iterations=list(res.iterations),
        converged=res.converged,
        K=res.K,
        start=res.start,
    )


def _fit_matrices(res, ds, pred_names=None):
    pred_names = pred_names or ds.predictor_names
    r = res.S.shape[1]
    comp = [f"c{k + 1}" for k in range(r)]
    return {
        "B": (res.B, ds.response_names),
        "S": (res.S, comp),
        "V": (res.V, comp),
        "trace": (np.asarray(res.objective_trace).reshape(-1, 1), ["objective"]),
    }


def cmd_fit(args, seed):
    from .factors import augment_design
    from .solver import ProblemSpec, fit

    ds = _load(args)
    X, names = ds.X, ds.predictor_names
    aug = None
    if args.augment:
        aug = augment_design(X)
        X = aug.X_bar
        names = names + [f"case{i + 1}" for i in range(ds.X.shape[0])]
    res = fit(ProblemSpec(X, ds.Y, rank=args.rank, lam=args.lam, rule=_rule(args), mode=args.mode),
              _solver_config(args, seed))
    summary = _fit_summary(res, names)
    if aug is not None:
        summary["outlier_rows"] = (aug.outlier_rows(res.support) + 1).tolist()
    emit_args(args, summary)
    return io.emit_result(args.out_dir, summary, _fit_matrices(res, ds, names))


def cmd_screen(args, seed):
    from .screening import ScreenSpec, fit_hybrid, fit_screened, fit_sparse_l0

    ds = _load(args)
    cfg = _solver_config(args, seed)
    if args.d is None and args.d_elem is None:
        raise ParameterError("screen needs --d, --d-elem or both")
    if args.d is not None and args.d_elem is not None:
        res = fit_hybrid(ds.X, ds.Y, args.d, args.d_elem, args.rank, args.eta, cfg, args.progressive, args.alpha)
        kind = "hybrid"
    elif args.d is not None:
        spec = ScreenSpec(d=args.d, rank=args.rank, eta=args.eta, alpha=args.alpha,
                          progressive=args.progressive, squeeze=args.squeeze)
        res = fit_screened(ds.X, ds.Y, spec, cfg)
        kind = "screened"
    else:
        res = fit_sparse_l0(ds.X, ds.Y, args.d_elem, args.rank, args.eta, cfg)
        kind = "sparse_l0"
    summary = _fit_summary(res, ds.predictor_names)
    summary.update(kind=kind, squeeze_events=[list(e) for e in res.squeeze_events])
    emit_args(args, summary)
    return io.emit_result(args.out_dir, summary, _fit_matrices(res, ds))


def cmd_pca(args, seed):
    from .pca import PcaSpec, fit_pca

    if not args.input:
        raise DataError("--input is required")
    ds = io.load_csv(args.input, None, args.predictors)
    if args.center and not args.gram:
        ds = io.center_columns(ds)
    data = ds.X
    mode = args.mode
    if mode is None:
        if args.d is not None and args.d_elem is not None:
            mode = "hybrid"
        elif args.d is not None:
            mode = "screened"
        elif args.d_elem is not None:
            mode = "sparse_l0"
        else:
            mode = "selective"
    spec = PcaSpec(rank=args.rank, lam=args.lam, rule=_rule(args), mode=mode, d=args.d, d_elem=args.d_elem,
                   eta=args.eta)
    res = fit_pca(data, spec, _solver_config(args, seed), gram=args.gram, n_samples=args.n_samples)
    names = ds.predictor_names
    summary = dict(
        mode=mode,
        support=[names[j] for j in res.support],
        support_index=res.support,
        entry_support=res.entry_support,
        objective=res.objective,
        iterations=res.iterations,
        converged=res.converged,
        degenerate=res.degenerate,
        sigma_hat=res.sigma_hat,
    )
    if args.report_av:
        summary["adjusted_variance"] = res.adjusted_variance
    emit_args(args, summary)
    comp = [f"c{k + 1}" for k in range(res.S.shape[1])]
    mats = {"S": (res.S, comp), "trace": (res.objective_trace.reshape(-1, 1), ["objective"])}
    return io.emit_result(args.out_dir, summary, mats)


def cmd_tune(args, seed):
    from .selection import CriterionConfig, tune

    ds = _load(args)
    crit = CriterionConfig(kind=args.criterion, sigma=args.sigma, A1=args.a1, A2=args.a2)
    best, rows = tune(ds.X, ds.Y, args.lambda_grid, args.rank_grid, crit, _solver_config(args, seed),
                      rule=_rule(args), mode=args.mode)
    summary = _fit_summary(best, ds.predictor_names)
    chosen = min((r for r in rows if r.feasible), key=lambda r: r.score)
    summary.update(criterion=args.criterion, lam=chosen.lam, grid_rank=chosen.rank, score=chosen.score,
                   n_cells=len(rows), n_feasible=sum(r.feasible for r in rows))
    emit_args(args, summary)
    return io.emit_result(args.out_dir, summary, _fit_matrices(best, ds),
                          tables={"scores": [r.as_dict() for r in rows]})


def cmd_factors(args, seed):
    from .factors import extract_type1, extract_type2
    from .solver import ProblemSpec, fit

    ds = _load(args)
    res = fit(ProblemSpec(ds.X, ds.Y, rank=args.rank, lam=args.lam, rule=_rule(args)), _solver_config(args, seed))
    fs = (extract_type1 if args.factor_type == 1 else extract_type2)(ds.X, res.B)
    names = ds.predictor_names
    summary = _fit_summary(res, names)
    summary.update(factor_type=fs.type, n_factors=fs.n_factors, selected=[names[j] for j in fs.selected_vars])
    emit_args(args, summary)
    comp = [f"f{k + 1}" for k in range(fs.n_factors)]
    mats = _fit_matrices(res, ds)
    mats.update(Z=(fs.Z, comp), loadings=(fs.loadings, comp))
    return io.emit_result(args.out_dir, summary, mats)


def cmd_forecast(args, seed):
    from .factors import ar_fitter, rolling_forecast, rrr_fitter, srrr_fitter
    from .solver import SolverConfig

    if not args.input:
        raise DataError("--input is required")
    ds = io.load_csv(args.input, args.responses, args.predictors if args.predictors else "")
    targets = list(ds.response_columns) or list(range(len(ds.column_names)))
    series_cols = targets + [j for j in ds.predictor_columns if j not in targets]
    Z = ds.values[:, series_cols]
    if args.window is None:
        raise ParameterError("--window is required")
    makers = {
        "ar": lambda: ar_fitter(per_series=len(series_cols) == len(targets)),
        "rrr": lambda: rrr_fitter(args.rank),
        "srrr": lambda: srrr_fitter(args.rank, lam=args.lam, rule=args.rule, config=SolverConfig(seed=seed)),
    }
    names = [ds.column_names[j] for j in targets]
    rows = []
    folds = None
    for method in [m.strip() for m in args.fitter.split(",") if m.strip()]:
        if method not in makers:
            raise ParameterError(f"unknown fitter {method!r}; choose from ar, rrr, srrr")
        out = rolling_forecast(Z, args.window, makers[method](), args.horizon, args.lags,
                               responses=list(range(len(targets))), presample=args.presample)
        folds = out.n_folds
        row = {"method": method}
        row.update({n: float(v) for n, v in zip(names, out.mse)})
        row.update(med=float(np.median(out.mse)), mean=float(np.mean(out.mse)))
        rows.append(row)
    summary = dict(n_folds=folds, methods=[r["method"] for r in rows])
    emit_args(args, summary)
    return io.emit_result(args.out_dir, summary, tables={"forecast": rows})


def cmd_oracle(args, seed):
    from .oracle import brute_force_entry, brute_force_group

    ds = _load(args)
    if args.kind == "group":
        sol = brute_force_group(ds.X, ds.Y, args.rank, d=args.d, lam=args.lam, eta=args.eta)
        support = [ds.predictor_names[j] for j in sol.support]
    else:
        if args.d_elem is None:
            raise ParameterError("the entry oracle needs --d-elem")
        sol = brute_force_entry(ds.X, ds.Y, args.d_elem, args.rank, args.eta, seed=seed)
        support = [[ds.predictor_names[j], k + 1] for j, k in sol.support]
    summary = dict(kind=args.kind, objective=sol.objective, support=support, enumerated=sol.enumerated_count)
    emit_args(args, summary)
    return io.emit_result(args.out_dir, summary, {"B": (sol.B, ds.response_names)})


def cmd_rates(args, seed):
    from .theory import GridCell, rate_experiment

    grid = [GridCell(args.n, args.p, m, args.J, args.r, args.sigma, args.snr) for m in args.m_grid]
    exp = rate_experiment(grid, seeds=range(seed, seed + args.seeds), A=args.A, criterion=args.criterion)
    summary = {}
    for est in ("selective", "group"):
        slope, intercept, r2 = exp.rate_fit(est)
        summary[est] = dict(slope=slope, intercept=intercept, r2=r2,
                            median_error=[exp.median_error(c, est) for c in exp.cells()])
    emit_args(args, summary)
    return io.emit_result(args.out_dir, summary, tables={"rates": exp.as_rows()})


COMMANDS = {
    "fit": cmd_fit,
    "screen": cmd_screen,
    "pca": cmd_pca,
    "tune": cmd_tune,
    "factors": cmd_factors,
    "forecast": cmd_forecast,
    "oracle": cmd_oracle,
    "rates": cmd_rates,
}


def emit_args(args, summary):
    skip = {"verbose", "config", "out_dir"}
    summary["config"] = {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SelfactorError as exc:
        print(f"selfactor: {exc}", file=sys.stderr)
        return exc.exit_code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    seed = args.seed
    if seed is None:
        seed = 0
        logger.info("no --seed given; using 0")
    args.seed = seed
    if getattr(args, "init", "") is None:
        args.init = "zero" if getattr(args, "augment", False) else "rrr"
    try:
        COMMANDS[args.command](args, seed)
    except SelfactorError as exc:
        print(f"selfactor: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"selfactor: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

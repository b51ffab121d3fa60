"""Command-line front end: fit, impute, regress, tune, and simulate.

Exit codes: 0 success, 2 parse/config/dimension error, 3 degenerate data,
4 solver did not converge (the model file is still written, flagged).
"""

import argparse
import os
import sys

import numpy as np

from . import modelio
from .em import conditional_mean_impute, fit_missglasso
from .exceptions import CsvFormatError, DegenerateData
from .incomplete import IncompleteMatrix
from .select import cross_validate, lambda_grid, make_folds, select_bic
from .simulate import parse_scenario, run_scenario
from .two_stage import RegressionData, fit_two_stage, predict

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_NOT_CONVERGED = 4


def _threads(args):
    value = args.threads
    if value is None:
        env = os.environ.get("MISSGLASSO_THREADS", "")
        value = int(env) if env.strip() else 1
    return -1 if value == 0 else value


def _read_data(path, no_header):
    values, names = modelio.read_matrix_csv(path, header=not no_header)
    return IncompleteMatrix(values), names


def _select_model(data, args):
    """Fit at a fixed penalty or tune over a grid; returns (model, report, lam)."""
    kwargs = dict(tol=args.tol, max_em=args.max_em)
    if getattr(args, "no_penalize_diag", False):
        kwargs["glasso_kwargs"] = {"penalize_diag": False}
    if args.lam is not None:
        model, report = fit_missglasso(data, args.lam, **kwargs)
        return model, report, args.lam
    grid = lambda_grid(data, count=args.grid_count, ratio=args.grid_ratio)
    if args.tune == "bic":
        path = select_bic(data, grid, **kwargs)
    else:
        path = cross_validate(data, grid, v=args.cv_folds, seed=args.seed, **kwargs)
    model, report = path.fits[path.best_index]
    return model, report, path.best_lambda


def cmd_fit(args):
    data, _ = _read_data(args.input, args.no_header)
    model, report, lam = _select_model(data, args)
    modelio.save_model(args.out, model, lam=lam, report=report)
    nnz = int(np.count_nonzero(np.triu(model.K)))
    print(f"fitted p={data.p} n={data.n} lambda={lam:g}")
    print(f"nnz(K)={nnz} em_iterations={report.em_iterations} "
          f"objective={report.objective_trace[-1]:.6f} converged={report.converged}")
    if not report.converged:
        print("warning: EM did not converge; model written anyway", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_impute(args):
    model, _ = modelio.load_model(args.model)
    values, names, raw = modelio.read_matrix_csv_raw(args.input,
                                                     header=not args.no_header)
    if values.shape[1] != model.p:
        print(f"error: model has p={model.p}, data has {values.shape[1]} columns",
              file=sys.stderr)
        return EXIT_PARSE
    data = IncompleteMatrix(values)
    completed = conditional_mean_impute(data, model)
    with open(args.out, "w", newline="\n") as fh:
        if names is not None:
            fh.write(",".join(names) + "\n")
        for i, row in enumerate(raw):
            cells = [cell if data.mask[i, j] else modelio.format_float(completed[i, j])
                     for j, cell in enumerate(row)]
            fh.write(",".join(cells) + "\n")
    return EXIT_OK


def _tune_lambda2(reg, x_model, args):
    """Pick the second-stage penalty by V-fold prediction error."""
    filled = reg.x.mean_imputed()
    yy = float(reg.y @ reg.y)
    lam_max = max(float(np.abs(filled.T @ reg.y).max()) * np.sqrt(reg.x.n / yy), 1e-8)
    grid = np.geomspace(lam_max, args.grid_ratio * lam_max, args.grid_count)
    folds = make_folds(reg.x.n, args.cv_folds, args.seed)
    errors = np.zeros(grid.shape[0])
    for fold in folds:
        keep = np.setdiff1d(np.arange(reg.x.n), fold, assume_unique=True)
        train = RegressionData(y=reg.y[keep], x=reg.x.subset(keep))
        held_x = reg.x.values[fold]
        for i, lam2 in enumerate(grid):
            model, _ = fit_two_stage(train, lam2=float(lam2),
                                     x_model=x_model, tol=args.tol,
                                     max_em=args.max_em)
            errors[i] += float(((reg.y[fold] - predict(model, held_x)) ** 2).sum())
    return float(grid[int(np.argmin(errors))])


def cmd_regress(args):
    y = modelio.read_vector_csv(args.y, header=not args.no_header)
    x_values, names = modelio.read_matrix_csv(args.x, header=not args.no_header)
    if y.shape[0] != x_values.shape[0]:
        print("error: response and design row counts differ", file=sys.stderr)
        return EXIT_PARSE
    x = IncompleteMatrix(x_values)

    centers = None
    if args.center:
        y_center = float(y.mean())
        x_centers = x.column_means()
        y = y - y_center
        x = IncompleteMatrix(x.values - x_centers, x.mask)
        centers = (y_center, x_centers)

    stage1_args = argparse.Namespace(
        lam=args.lambda1, tune=args.tune, grid_count=args.grid_count,
        grid_ratio=args.grid_ratio, cv_folds=args.cv_folds, seed=args.seed,
        tol=args.tol, max_em=args.max_em)
    x_model, _, lam1 = _select_model(x, stage1_args)

    reg = RegressionData(y=y, x=x)
    lam2 = args.lambda2 if args.lambda2 is not None else _tune_lambda2(reg, x_model, args)
    model, report = fit_two_stage(reg, lam1=lam1, lam2=lam2, x_model=x_model,
                                  tol=args.tol, max_em=args.max_em)

    modelio.save_regression_model(args.out, model, lam1=lam1, lam2=lam2,
                                  report=report, centers=centers)
    with open(args.coef_out, "w", newline="\n") as fh:
        fh.write("feature,coefficient\n")
        if centers is not None:
            intercept = centers[0] - model.beta @ centers[1]
            fh.write(f"(intercept),{modelio.format_float(intercept)}\n")
        for j, b in enumerate(model.beta):
            name = names[j] if names else f"x{j}"
            fh.write(f"{name},{modelio.format_float(b)}\n")
    nnz = int(np.count_nonzero(model.beta))
    print(f"two-stage fit: lambda1={lam1:g} lambda2={lam2:g} "
          f"nnz(beta)={nnz} sigma={model.sigma:.6f} converged={report.converged}")
    if not report.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_tune(args):
    data, _ = _read_data(args.input, args.no_header)
    grid = lambda_grid(data, count=args.grid_count, ratio=args.grid_ratio)
    kwargs = dict(tol=args.tol, max_em=args.max_em)
    if args.criterion == "bic":
        path = select_bic(data, grid, **kwargs)
    else:
        path = cross_validate(data, grid, v=args.cv_folds, seed=args.seed, **kwargs)
    print("lambda,score")
    for lam, score in zip(path.lambdas, path.scores):
        print(f"{lam:.6g},{score:.6f}")
    print(f"best lambda: {path.best_lambda:.6g} ({args.criterion})")
    if args.out:
        modelio.save_model(args.out, path.best_model, lam=path.best_lambda,
                           report=path.fits[path.best_index][1])
    return EXIT_OK


def cmd_simulate(args):
    with open(args.scenario) as fh:
        text = fh.read()
    config = parse_scenario(text)
    result = run_scenario(config, n_jobs=_threads(args))
    modelio.write_results_csv(result.rows, args.out, timing=args.timing)
    if config.heatmap_out:
        for pct, counts in sorted(result.zero_counts.items()):
            freq = np.asarray(counts, dtype=float) / config.runs
            modelio.write_heatmap_csv(f"{config.heatmap_out}.{pct:g}.csv", freq)
    print(result.summary_table())
    return EXIT_OK


def _add_common_fit_options(sub):
    sub.add_argument("--grid-count", type=int, default=30)
    sub.add_argument("--grid-ratio", type=float, default=0.01)
    sub.add_argument("--cv-folds", type=int, default=10)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--tol", type=float, default=1e-6)
    sub.add_argument("--max-em", type=int, default=200)
    sub.add_argument("--no-header", action="store_true",
                     help="input CSV has no header row")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="missglasso",
        description="Sparse Gaussian estimation and regression with missing data")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker count for simulations (0 = auto)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit mean and precision from a CSV")
    p_fit.add_argument("input")
    group = p_fit.add_mutually_exclusive_group(required=True)
    group.add_argument("--lambda", dest="lam", type=float)
    group.add_argument("--tune", choices=("bic", "cv"),
                       help="pick the penalty by BIC or cross-validation; "
                            "BIC tends to recover more true zeros at some "
                            "cost in Kullback-Leibler accuracy")
    p_fit.add_argument("--no-penalize-diag", action="store_true",
                       help="leave the precision diagonal unpenalized")
    p_fit.add_argument("--out", required=True)
    _add_common_fit_options(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_imp = sub.add_parser("impute", help="fill missing cells by conditional means")
    p_imp.add_argument("input")
    p_imp.add_argument("--model", required=True)
    p_imp.add_argument("--out", required=True)
    p_imp.add_argument("--no-header", action="store_true")
    p_imp.set_defaults(func=cmd_impute)

    p_reg = sub.add_parser("regress", help="two-stage sparse regression")
    p_reg.add_argument("y")
    p_reg.add_argument("x")
    p_reg.add_argument("--lambda1", type=float, default=None)
    p_reg.add_argument("--lambda2", type=float, default=None)
    p_reg.add_argument("--tune", choices=("bic", "cv"), default="cv",
                       help="stage-1 tuning when --lambda1 is not given")
    p_reg.add_argument("--center", action=argparse.BooleanOptionalAction,
                       default=True)
    p_reg.add_argument("--out", required=True)
    p_reg.add_argument("--coef-out", required=True)
    _add_common_fit_options(p_reg)
    p_reg.set_defaults(func=cmd_regress)

    p_tune = sub.add_parser("tune", help="score a penalty grid by BIC or CV")
    p_tune.add_argument("input")
    p_tune.add_argument("--criterion", choices=("bic", "cv"), default="cv")
    p_tune.add_argument("--out", default=None,
                        help="also write the best model here")
    _add_common_fit_options(p_tune)
    p_tune.set_defaults(func=cmd_tune)

    p_sim = sub.add_parser("simulate", help="run a scenario file")
    p_sim.add_argument("scenario")
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--timing", action="store_true",
                       help="include wall-clock times in the results CSV "
                            "(breaks byte-reproducibility)")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CsvFormatError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateData as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())

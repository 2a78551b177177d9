"""Command line interface: train/predict/eval plus the demo experiment recipes.

Exit codes: 0 success, 1 user or input error, 2 internal numerical error.
The environment variable MED_LOG={quiet,info,debug} controls verbosity on
stderr; all file outputs and printed numbers are deterministic for a fixed
seed (floats rendered with repr, which round-trips exactly).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .data import (
    CLASSIFICATION,
    REGRESSION,
    gen_sinc,
    gen_sparse_binary,
    load_csv,
    sinc,
)
from .expfam import GenerativeGaussianMed, save_generative
from .metrics import (
    coefficient_cdf,
    eps_insensitive_loss,
    least_squares_fit,
    rmse,
    roc_curve,
)
from .model import MedClassifier, MedRegressor, load_model, save_model
from .objective import (
    BoxViolationError,
    FeasibilityError,
    Hyperparams,
    SurrogateError,
)
from .optimizer import OptimizerConfig

logger = logging.getLogger(__name__)

_NUMERICAL_ERRORS = (
    SurrogateError,
    BoxViolationError,
    FeasibilityError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _setup_logging():
    level = {"quiet": logging.WARNING, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("MED_LOG", "quiet"))
    if level is None:
        print("warning: MED_LOG must be quiet, info, or debug; using quiet",
              file=sys.stderr)
        level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _add_fit_flags(p, regression):
    p.add_argument("--c", type=float, default=10.0,
                   help="margin penalty scale (default 10)")
    if regression:
        p.add_argument("--epsilon", type=float, default=0.2,
                       help="regression tube half-width (default 0.2)")
    p.add_argument("--p0", type=float, default=0.99999,
                   help="prior feature inclusion probability; near 1 turns "
                        "selection off (default 0.99999)")
    p.add_argument("--sigma", type=float, default=10.0,
                   help="bias prior scale for the soft bias mode (default 10)")
    p.add_argument("--variant", choices=("fs", "svm"), default="fs",
                   help="fs: per-feature switch selection terms; svm: plain "
                        "quadratic dual (default fs)")
    p.add_argument("--bias-mode", choices=("soft", "hard"), default="soft",
                   dest="bias_mode")
    p.add_argument("--degree", type=int, default=1,
                   help="componentwise polynomial expansion degree")
    p.add_argument("--standardize", action="store_true",
                   help="standardize expanded features before fitting")
    p.add_argument("--optimizer", choices=("axis_parallel", "bounded_qp"),
                   default="axis_parallel")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10_000, dest="max_iter")
    p.add_argument("--qp-inner-tol", type=float, default=1e-8,
                   dest="qp_inner_tol")
    p.add_argument("--qp-max-inner", type=int, default=300,
                   dest="qp_max_inner")
    p.add_argument("--seed", type=int, default=0)


def _validate_flags(args, regression):
    # surface bad hyperparameter values before touching any data
    Hyperparams(
        c=args.c,
        epsilon=getattr(args, "epsilon", 0.2),
        p0=args.p0,
        sigma=args.sigma,
        variant=args.variant,
        bias_mode=args.bias_mode,
    )
    OptimizerConfig(
        method=args.optimizer,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        qp_inner_tol=args.qp_inner_tol,
        qp_max_inner=args.qp_max_inner,
    )
    if args.degree < 1:
        raise ValueError("degree must be at least 1")


def _estimator(args, task):
    common = dict(
        c=args.c, p0=args.p0, sigma=args.sigma, variant=args.variant,
        bias_mode=args.bias_mode, degree=args.degree,
        standardize=args.standardize, optimizer=args.optimizer, tol=args.tol,
        max_iter=args.max_iter, qp_inner_tol=args.qp_inner_tol,
        qp_max_inner=args.qp_max_inner, random_state=args.seed,
    )
    if task == CLASSIFICATION:
        return MedClassifier(**common)
    return MedRegressor(epsilon=args.epsilon, **common)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_json(path, blob):
    with open(path, "w") as fh:
        json.dump(blob, fh, indent=1)
        fh.write("\n")


def _read_feature_csv(path):
    """Headed CSV with features only (no target column)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    X = []
    for r, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise ValueError(
                f"{path}: row {r} has {len(row)} cells, expected {len(header)}"
            )
        try:
            X.append([float(cell) for cell in row])
        except ValueError:
            raise ValueError(f"{path}: row {r} has a non-numeric cell") from None
    if not X:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(X, dtype=np.float64), header


def cmd_train(args):
    _validate_flags(args, args.task == REGRESSION)
    train = load_csv(args.data, args.target, args.task)
    est = _estimator(args, args.task)
    est.fit(train.examples, train.targets)
    save_model(est, args.out, feature_names=list(train.feature_names))
    print(f"objective {est.objective_value_!r}")
    print(f"iterations {est.n_iter_}")
    print(f"converged {str(est.converged_).lower()}")
    if est.variant == "fs":
        print(f"selected {int(est.selected_.sum())} of {est.coef_.size} "
              f"expanded features")
    print(f"wrote {args.out}")
    return 0


def cmd_predict(args):
    model = load_model(args.model)
    if args.target is not None:
        data = load_csv(args.data, args.target, model._task)
        X = data.examples
    else:
        X, _ = _read_feature_csv(args.data)
    if model._task == CLASSIFICATION:
        scores = model.decision_function(X)
        labels = np.where(scores >= 0.0, 1, -1)
        rows = [(repr(float(s)), str(int(l))) for s, l in zip(scores, labels)]
        _write_csv(args.out, "score,prediction", rows)
    else:
        preds = model.predict(X)
        _write_csv(args.out, "prediction", [(repr(float(p)),) for p in preds])
    print(f"wrote {args.out} ({X.shape[0]} rows)")
    return 0


def cmd_eval(args):
    model = load_model(args.model)
    data = load_csv(args.data, args.target, model._task)
    if model._task == CLASSIFICATION:
        if args.baseline is not None:
            raise ValueError("--baseline applies to regression models only")
        scores = model.decision_function(data.examples)
        preds = np.where(scores >= 0.0, 1.0, -1.0)
        err = float(np.mean(preds != data.targets))
        metrics = {
            "accuracy": 1.0 - err,
            "error_rate": err,
            "auc": roc_curve(data.targets, scores).auc,
        }
    else:
        preds = model.predict(data.examples)
        eps = getattr(model, "epsilon", 0.2)
        metrics = {
            "rmse": rmse(data.targets, preds),
            "med_eps_loss": eps_insensitive_loss(data.targets, preds, eps),
        }
        if args.baseline is not None:
            base = load_csv(args.baseline, args.target, REGRESSION)
            Ztr = model._transform_features(base.examples)
            coef, intercept = least_squares_fit(Ztr, base.targets)
            ls_pred = model._transform_features(data.examples) @ coef + intercept
            metrics["ls_rmse"] = rmse(data.targets, ls_pred)
            metrics["ls_eps_loss"] = eps_insensitive_loss(
                data.targets, ls_pred, eps
            )
    blob = dict(metrics)
    blob["config"] = {
        "model": args.model,
        "data": args.data,
        "target": str(args.target),
        "baseline": args.baseline,
    }
    for name, value in metrics.items():
        print(f"{name} {value!r}")
    if args.out:
        _write_json(args.out, blob)
        print(f"wrote {args.out}")
    return 0


def cmd_roc(args):
    model = load_model(args.model, expected_mode=CLASSIFICATION)
    data = load_csv(args.data, args.target, CLASSIFICATION)
    curve = roc_curve(data.targets, model.decision_function(data.examples))
    _write_csv(args.out, "fpr,tpr",
               [(repr(float(a)), repr(float(b))) for a, b in curve.points])
    print(f"auc {curve.auc!r}")
    print(f"wrote {args.out}")
    return 0


def cmd_cdf(args):
    model = load_model(args.model)
    points = coefficient_cdf(model.coef_, grid_size=args.grid)
    _write_csv(args.out, "x,fraction",
               [(repr(float(a)), repr(float(b))) for a, b in points])
    print(f"wrote {args.out}")
    return 0


def cmd_demo_sinc(args):
    os.makedirs(args.outdir, exist_ok=True)
    grid = np.linspace(-10.0, 10.0, args.grid_count)
    grid_true = sinc(grid)
    arms = {
        "clean": dict(noise=0.0, epsilon=0.01, c=100.0),
        "noisy": dict(noise=0.2, epsilon=0.2, c=10.0),
    }
    metrics = {}
    for name, arm in arms.items():
        train = gen_sinc(args.train_count, arm["noise"], args.seed)
        est = MedRegressor(
            c=arm["c"], epsilon=arm["epsilon"], p0=0.99999, sigma=10.0,
            variant="fs", bias_mode="soft", degree=8, standardize=True,
            optimizer="axis_parallel", tol=1e-8, random_state=args.seed,
        )
        est.fit(train.examples, train.targets)
        pred_train = est.predict(train.examples)
        pred_grid = est.predict(grid[:, None])
        train_rmse = rmse(train.targets, pred_train)
        grid_rmse = rmse(grid_true, pred_grid)
        metrics[f"{name}_train_rmse"] = train_rmse
        metrics[f"{name}_grid_rmse"] = grid_rmse
        rows = [
            (repr(float(x)), repr(float(t)), repr(float(p)))
            for x, t, p in zip(train.examples[:, 0], train.targets, pred_train)
        ]
        rows += [
            (repr(float(x)), repr(float(t)), repr(float(p)))
            for x, t, p in zip(grid, grid_true, pred_grid)
        ]
        _write_csv(os.path.join(args.outdir, f"sinc_{name}.csv"),
                   "x,y_true,y_pred", rows)
        save_model(est, os.path.join(args.outdir, f"sinc_{name}_model.json"),
                   feature_names=list(train.feature_names))
        print(f"{name} train rmse {train_rmse!r}")
        print(f"{name} grid rmse {grid_rmse!r}")
    blob = dict(metrics)
    blob["config"] = {
        "train_count": args.train_count,
        "grid_count": args.grid_count,
        "seed": args.seed,
        "degree": 8,
        "arms": arms,
    }
    _write_json(os.path.join(args.outdir, "metrics.json"), blob)
    return 0


def _dataset_to_csv(dataset, path, integer_cells=False):
    names = list(dataset.feature_names) + ["label"]
    rows = []
    for x, t in zip(dataset.examples, dataset.targets):
        cells = list(x) + [t]
        if integer_cells:
            rows.append(tuple(str(int(v)) for v in cells))
        else:
            rows.append(tuple(repr(float(v)) for v in cells))
    _write_csv(path, ",".join(names), rows)


def cmd_demo_sparse(args):
    os.makedirs(args.outdir, exist_ok=True)
    problem = gen_sparse_binary(
        train_count=args.train_count, test_count=args.test_count,
        n_features=args.n_features, n_informative=args.n_informative,
        seed=args.seed,
    )
    _dataset_to_csv(problem.train, os.path.join(args.outdir, "train.csv"),
                    integer_cells=True)
    _dataset_to_csv(problem.test, os.path.join(args.outdir, "test.csv"),
                    integer_cells=True)
    with open(os.path.join(args.outdir, "planted.json"), "w") as fh:
        json.dump(list(problem.informative), fh)
        fh.write("\n")
    arms = {"select": 1e-5, "plain": 0.99999}
    fits = {}
    for name, p0 in arms.items():
        est = MedClassifier(
            c=10.0, p0=p0, sigma=10.0, variant="fs", bias_mode="soft",
            degree=1, standardize=False, optimizer=args.optimizer, tol=1e-8,
            random_state=args.seed,
        )
        est.fit(problem.train.examples, problem.train.targets)
        fits[name] = est
        save_model(est, os.path.join(args.outdir, f"model_{name}.json"),
                   feature_names=list(problem.train.feature_names))
    top = max(float(np.max(np.abs(fits[n].coef_))) for n in fits)
    metrics = {}
    for name, est in fits.items():
        scores = est.decision_function(problem.test.examples)
        curve = roc_curve(problem.test.targets, scores)
        preds = np.where(scores >= 0.0, 1.0, -1.0)
        metrics[f"auc_{name}"] = curve.auc
        metrics[f"error_rate_{name}"] = float(
            np.mean(preds != problem.test.targets)
        )
        _write_csv(
            os.path.join(args.outdir, f"roc_{name}.csv"), "fpr,tpr",
            [(repr(float(a)), repr(float(b))) for a, b in curve.points],
        )
        cdf = coefficient_cdf(est.coef_, grid_size=args.grid, top=top)
        _write_csv(
            os.path.join(args.outdir, f"cdf_{name}.csv"), "x,fraction",
            [(repr(float(a)), repr(float(b))) for a, b in cdf],
        )
        print(f"auc p0={arms[name]!r} {curve.auc!r}")
    blob = dict(metrics)
    blob["config"] = {
        "train_count": args.train_count,
        "test_count": args.test_count,
        "n_features": args.n_features,
        "n_informative": args.n_informative,
        "seed": args.seed,
        "optimizer": args.optimizer,
        "p0_select": arms["select"],
        "p0_plain": arms["plain"],
        "cdf_grid_top": top,
    }
    _write_json(os.path.join(args.outdir, "metrics.json"), blob)
    return 0


def cmd_demo_generative(args):
    os.makedirs(args.outdir, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    mean = args.separation * np.ones(args.dim)

    def draw(count):
        xp = rng.standard_normal((count, args.dim)) + mean
        xn = rng.standard_normal((count, args.dim)) - mean
        X = np.vstack([xp, xn])
        y = np.concatenate([np.ones(count), -np.ones(count)])
        return X, y

    X_train, y_train = draw(args.count_per_class)
    X_test, y_test = draw(args.count_per_class)
    est = GenerativeGaussianMed(c=args.c, random_state=args.seed)
    est.fit(X_train, y_train)
    train_acc = float(np.mean(est.predict(X_train) == y_train))
    test_acc = float(np.mean(est.predict(X_test) == y_test))
    save_generative(est, os.path.join(args.outdir, "generative_model.json"))
    print(f"train accuracy {train_acc!r}")
    print(f"test accuracy {test_acc!r}")
    blob = {
        "train_accuracy": train_acc,
        "test_accuracy": test_acc,
        "config": {
            "count_per_class": args.count_per_class,
            "dim": args.dim,
            "separation": args.separation,
            "seed": args.seed,
            "c": args.c,
        },
    }
    _write_json(os.path.join(args.outdir, "metrics.json"), blob)
    return 0


def build_parser():
    parser = _Parser(prog="medfs",
                     description="Large-margin classification and regression "
                                 "with discriminative feature selection.")
    sub = parser.add_subparsers(dest="subcommand", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model from a CSV file")
    p.add_argument("--task", choices=(CLASSIFICATION, REGRESSION),
                   required=True)
    p.add_argument("--data", required=True, help="training CSV path")
    p.add_argument("--target", required=True,
                   help="target column name or 0-based index")
    p.add_argument("--out", required=True, help="model file to write")
    _add_fit_flags(p, regression=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a CSV file with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", default=None,
                   help="target column to drop, when the file has one")
    p.add_argument("--out", required=True, help="prediction CSV to write")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="evaluate a saved model on labeled data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", default=None, help="metrics JSON to write")
    p.add_argument("--baseline", default=None,
                   help="training CSV for a least-squares baseline "
                        "(regression only)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("roc", help="write the ROC curve of a classifier")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("cdf",
                       help="write the model's coefficient-magnitude CDF")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int, default=200)
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("demo-sinc",
                       help="regression demo on the sinc function "
                            "(degree-8 expansion, clean and noisy arms)")
    p.add_argument("--outdir", default=".")
    p.add_argument("--train-count", type=int, default=100, dest="train_count")
    p.add_argument("--grid-count", type=int, default=201, dest="grid_count")
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_demo_sinc)

    p = sub.add_parser("demo-sparse",
                       help="classification demo on planted sparse binary "
                            "data (selection on vs off)")
    p.add_argument("--outdir", default=".")
    p.add_argument("--train-count", type=int, default=500, dest="train_count")
    p.add_argument("--test-count", type=int, default=4724, dest="test_count")
    p.add_argument("--n-features", type=int, default=100, dest="n_features")
    p.add_argument("--n-informative", type=int, default=10,
                   dest="n_informative")
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--optimizer", choices=("axis_parallel", "bounded_qp"),
                   default="bounded_qp")
    p.set_defaults(func=cmd_demo_sparse)

    p = sub.add_parser("demo-generative",
                       help="two-gaussian generative classification demo")
    p.add_argument("--outdir", default=".")
    p.add_argument("--count-per-class", type=int, default=50,
                   dest="count_per_class")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--c", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_demo_generative)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging()
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError,
            NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipeline: ``synth``, ``fit``, ``predict``, ``eval``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import tables
from .evaluation import error_map_report, histogram_equalize
from .gp import FactorizationError, OptimizationError, OptimizerConfig, Predictions
from .kernel import DimensionError
from .pipeline import FittedPipeline, fit_pipeline
from .preprocessing import DegenerateDataError
from .synthdata import Box, RegionNoise, SyntheticSpec, generate
from .uncertainty import NoiseModel, NotPSDError

log = logging.getLogger("gperrprop")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
PRED_COLUMNS = ["mean", "predictive_var", "propagated_var", "combined_var"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _slab(text: str):
    try:
        axis, lo, hi = text.split(":")
        return int(axis), float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AXIS:LOW:HIGH, got {text!r}") from None


def _columns(text: str):
    try:
        return [int(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated column indices, got {text!r}") from None


def _unit_interval(text: str):
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError("must be in (0, 1]")
    return v


def slabs_to_box(slabs, dim: int, flag: str) -> Box:
    """Intersect AXIS:LOW:HIGH slabs into one axis-aligned box."""
    lo: list = [None] * dim
    hi: list = [None] * dim
    for axis, a, b in slabs:
        if not 0 <= axis < dim:
            raise UsageError(f"{flag} axis must be in 0..{dim - 1}, got {axis}")
        if a >= b:
            raise UsageError(f"{flag} needs LOW < HIGH")
        lo[axis] = a if lo[axis] is None else max(lo[axis], a)
        hi[axis] = b if hi[axis] is None else min(hi[axis], b)
    return Box(lo, hi)


# --- synth -----------------------------------------------------------------


def cmd_synth(args) -> int:
    if args.input_noise_std < 0 or args.output_noise_var < 0:
        raise UsageError("noise levels must be nonnegative")
    if args.low >= args.high:
        raise UsageError("--low must be below --high")
    noise = None
    if args.input_noise_std > 0:
        nm = NoiseModel.isotropic(args.input_noise_std**2)
        if args.noise_region is None:
            noise = nm
        else:
            noise = RegionNoise([(slabs_to_box(args.noise_region, args.dim, "--noise-region"), nm)])
    gap = slabs_to_box(args.gap_region, args.dim, "--gap-region") if args.gap_region else None
    try:
        spec = SyntheticSpec(
            n_train=args.n_train,
            n_test=args.n_test,
            dim=args.dim,
            latent=args.latent,
            output_noise_var=args.output_noise_var,
            input_noise=noise,
            seed=args.seed,
            domain_box=[(args.low, args.high)] * args.dim,
            train_gap=gap,
            test_margin=args.test_margin,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    data = generate(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables.write_xy(out / "train.csv", data.train.inputs, data.train.targets)
    tables.write_xy(out / "test.csv", data.test.inputs, data.test.targets)
    tables.write_xy(out / "truth.csv", data.clean_test_inputs, data.clean_test_targets)
    variances = np.diagonal(data.true_input_noise, axis1=1, axis2=2)
    tables.write_table(out / "noise.csv", tables.feature_names(args.dim), variances)
    log.info("wrote %d train / %d test rows to %s", data.train.n, data.test.n, out)
    return EXIT_OK


# --- fit -------------------------------------------------------------------


def cmd_fit(args) -> int:
    if (args.length_scale is None) != (args.noise_var is None):
        raise UsageError("--length-scale and --noise-var must be given together")
    if args.length_scale is not None and not (args.length_scale > 0 and args.noise_var >= 0):
        raise UsageError("--length-scale must be > 0 and --noise-var >= 0")
    X, y = tables.read_xy(args.train)
    config = OptimizerConfig(restarts=args.restarts, max_iter=args.max_iter, tol=args.tol, seed=args.seed)
    pipe = fit_pipeline(
        X,
        y,
        keep_columns=args.keep_columns,
        standardize_inputs=args.standardize_inputs,
        pca_var=args.pca_var,
        standardize_targets=not args.no_standardize_targets,
        length_scale=args.length_scale,
        noise_var=args.noise_var,
        optimizer=config,
        opt_subsample=args.opt_subsample,
    )
    tables.write_json(args.output, pipe.to_dict())
    log.info(
        "fitted N=%d length_scale=%.6g noise_var=%.6g", pipe.gp.n, pipe.gp.params.length_scale, pipe.gp.output_noise_var
    )
    return EXIT_OK


# --- predict ---------------------------------------------------------------


def load_model(path) -> FittedPipeline:
    d = tables.read_json(path)
    try:
        return FittedPipeline.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise tables.DataError(f"{path}: malformed model ({exc})") from exc


def _noise_from_args(args, n_points: int, n_features: int):
    given = [a for a in (args.noise_iso, args.noise_diag, args.noise_cov) if a is not None]
    if len(given) > 1:
        raise UsageError("give at most one of --noise-iso, --noise-diag, --noise-cov")
    if args.noise_iso is not None:
        if args.noise_iso < 0:
            raise UsageError("--noise-iso must be >= 0")
        return NoiseModel.isotropic(args.noise_iso)
    if args.noise_diag is not None:
        V, _ = tables.read_xy(args.noise_diag, require_y=False)
        if V.shape[1] != n_features:
            raise DimensionError(f"{args.noise_diag}: {V.shape[1]} columns, model has {n_features} features")
        if V.shape[0] == 1:
            return NoiseModel.diagonal(V[0])
        if V.shape[0] != n_points:
            raise DimensionError(f"{args.noise_diag}: need 1 or {n_points} rows, got {V.shape[0]}")
        if np.any(V < 0):
            raise tables.DataError(f"{args.noise_diag}: negative variance")
        return V
    if args.noise_cov is not None:
        S, _ = tables.read_xy(args.noise_cov, require_y=False)
        if S.shape != (n_features, n_features):
            raise DimensionError(f"{args.noise_cov}: need a {n_features}x{n_features} matrix, got {S.shape}")
        return NoiseModel.full(S)
    return None


def write_predictions(path, pr: Predictions) -> None:
    d = pr.mean_gradient.shape[1]
    header = PRED_COLUMNS + tables.feature_names(d, "grad")
    data = np.column_stack([pr.mean, pr.predictive_var, pr.propagated_var, pr.combined_var, pr.mean_gradient])
    tables.write_table(path, header, data)


def read_predictions(path) -> Predictions:
    header, data = tables.read_table(path)
    missing = [c for c in PRED_COLUMNS if c not in header]
    if missing:
        raise tables.DataError(f"{path}: missing columns {missing}")
    col = {h: data[:, i] for i, h in enumerate(header)}
    gcols = [i for i, h in enumerate(header) if h.startswith("grad")]
    return Predictions(
        mean=col["mean"],
        predictive_var=col["predictive_var"],
        mean_gradient=data[:, gcols] if gcols else None,
        propagated_var=col["propagated_var"],
        combined_var=col["combined_var"],
    )


def cmd_predict(args) -> int:
    pipe = load_model(args.model)
    X, _ = tables.read_xy(args.test, require_y=False)
    if X.shape[1] != pipe.n_features:
        raise DimensionError(f"{args.test}: {X.shape[1]} features, model expects {pipe.n_features}")
    noise = _noise_from_args(args, X.shape[0], pipe.n_features)
    write_predictions(args.output, pipe.predict(X, noise))
    log.info("wrote %d predictions to %s", X.shape[0], args.output)
    return EXIT_OK


# --- eval ------------------------------------------------------------------


def _fmt(v):
    return "n/a" if v is None else f"{v:.6g}"


def cmd_eval(args) -> int:
    pr = read_predictions(args.predictions)
    Xt, truth = tables.read_xy(args.truth)
    if len(pr) != truth.shape[0]:
        raise tables.DataError(f"row-count mismatch: {len(pr)} predictions vs {truth.shape[0]} truth rows")
    mask = None
    if args.region:
        mask = slabs_to_box(args.region, Xt.shape[1], "--region").contains(Xt)
        if mask.sum() < 2:
            raise tables.DataError("--region selects fewer than 2 points")
    report = error_map_report(pr, truth, mask=mask)
    tables.write_json(args.output, report.to_dict())
    if args.maps is not None:
        abserr = np.abs(pr.mean - truth)
        cols = [pr.predictive_var, pr.propagated_var, pr.combined_var, abserr]
        eq = np.column_stack([histogram_equalize(c) for c in cols])
        header = tables.feature_names(Xt.shape[1]) + [
            "predictive_var_eq",
            "propagated_var_eq",
            "combined_var_eq",
            "abs_error_eq",
        ]
        tables.write_table(args.maps, header, np.column_stack([Xt, eq]))
    width = max(len(k) for k in report.to_dict())
    for k, v in report.to_dict().items():
        print(f"{k:<{width}}  {_fmt(v) if k != 'n_points' else v}")
    return EXIT_OK


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gperrprop", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic train/test problem")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--n-train", type=int, default=5000)
    s.add_argument("--n-test", type=int, default=1000)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--latent", default="sinmix", choices=["sinmix", "linear", "constant"])
    s.add_argument("--output-noise-var", type=float, default=0.0)
    s.add_argument("--input-noise-std", type=float, default=0.0, help="isotropic std of test-input noise")
    s.add_argument(
        "--noise-region", type=_slab, action="append", metavar="AXIS:LOW:HIGH",
        help="restrict input noise to a box; repeat to intersect slabs",
    )
    s.add_argument(
        "--gap-region", type=_slab, action="append", metavar="AXIS:LOW:HIGH",
        help="box left without training points; repeat to intersect slabs",
    )
    s.add_argument("--low", type=float, default=-1.0)
    s.add_argument("--high", type=float, default=1.0)
    s.add_argument("--test-margin", type=float, default=0.0, help="keep test points this far inside the box")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("fit", help="fit a GP model to a training CSV")
    f.add_argument("train")
    f.add_argument("-o", "--output", default="model.json")
    f.add_argument("--pca-var", type=_unit_interval, help="PCA explained-variance target (e.g. 0.99)")
    f.add_argument("--standardize-inputs", action="store_true", help="scale features to unit variance before PCA")
    f.add_argument("--no-standardize-targets", action="store_true")
    f.add_argument("--keep-columns", type=_columns, help="comma-separated feature indices to keep")
    f.add_argument("--length-scale", type=float)
    f.add_argument("--noise-var", type=float, help="output noise variance (standardized target units)")
    f.add_argument("--restarts", type=int, default=5)
    f.add_argument("--max-iter", type=int, default=200)
    f.add_argument("--tol", type=float, default=1e-6)
    f.add_argument("--opt-subsample", type=int, default=1000, help="max rows used for hyperparameter search (0 = all)")
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_fit)

    q = sub.add_parser("predict", help="predict with propagated input-noise variance")
    q.add_argument("model")
    q.add_argument("test")
    q.add_argument("-o", "--output", default="predictions.csv")
    q.add_argument("--noise-iso", type=float, metavar="VAR", help="isotropic input-noise variance")
    q.add_argument("--noise-diag", metavar="CSV", help="diagonal variances: 1 row, or 1 row per test point")
    q.add_argument("--noise-cov", metavar="CSV", help="full DxD input-noise covariance")
    q.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="score predictions against clean targets")
    e.add_argument("predictions")
    e.add_argument("truth")
    e.add_argument("-o", "--output", default="report.json")
    e.add_argument("--maps", metavar="CSV", help="write histogram-equalized uncertainty/error columns")
    e.add_argument(
        "--region", type=_slab, action="append", metavar="AXIS:LOW:HIGH",
        help="restrict the report to a box of truth inputs; repeat to intersect slabs",
    )
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gperrprop {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FactorizationError, OptimizationError) as exc:
        print(f"gperrprop {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (tables.DataError, DimensionError, DegenerateDataError, NotPSDError, ValueError) as exc:
        print(f"gperrprop {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

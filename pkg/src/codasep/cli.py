"""Command-line workflow: preprocess, screen, bootstrap, enet, simulate.

Every run writes a manifest next to its outputs recording the resolved
flags, input file digests, tool version, wall time, worker count, and
seeds; re-running the same subcommand with the manifest's flags
reproduces the outputs bit-identically. All numeric text output uses 17
significant digits so values round-trip exactly.

Exit codes: 0 success, 1 validation error (bad flags or inputs), 2
runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .auc import VarianceMethod
from .bootstrap import BootstrapConfig, bootstrap_s
from .datamodel import (
    CountTable,
    CovariateMatrix,
    Dataset,
    Labels,
    read_count_table,
    read_metadata,
    write_count_table,
)
from .enet import EnetConfig, cv_select_lambda, fit_enet_logistic
from .errors import CodasepError, ValidationError
from .preprocess import clr_transform, filter_rare, impute_zeros
from .screening import ScreeningConfig, build_report, compute_auc_matrix
from .simdata import SimSpec, simulate

FLOAT_FMT = ".17g"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on bad flags, with usage text
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _fmt(value: float) -> str:
    return format(float(value), FLOAT_FMT)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, VarianceMethod):
        return obj.value
    return obj


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_matrix(path: Path, values: np.ndarray, row_ids, col_ids) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sample_id," + ",".join(col_ids) + "\n")
        for rid, row in zip(row_ids, values):
            fh.write(rid + "," + ",".join(_fmt(v) for v in row) + "\n")


def _sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(out_path: Path, command: str, args: argparse.Namespace,
                    inputs: list[str], workers: int, t0: float) -> None:
    flags = {
        k: v for k, v in sorted(vars(args).items())
        if k not in ("func", "command") and not k.startswith("_")
    }
    manifest = {
        "command": command,
        "flags": _jsonable(flags),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "version": __version__,
        "wall_time_s": time.time() - t0,
        "workers": workers,
        "seed": getattr(args, "seed", None),
    }
    _write_json(out_path, manifest)


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def _resolve_workers(args: argparse.Namespace) -> int:
    if args.workers is not None:
        workers = args.workers
    else:
        workers = int(os.environ.get("CODASEP_WORKERS", "1"))
    if workers < 1:
        raise ValidationError(f"workers must be >= 1, got {workers}")
    return workers


def _load_dataset(args: argparse.Namespace):
    """Shared ingestion: counts + metadata -> filtered, imputed Dataset."""
    table = read_count_table(args.counts, delimiter=args.delimiter)
    covariate_columns = [c for c in (args.covariates or "").split(",") if c]
    labels, covariates = read_metadata(
        args.metadata,
        label_column=args.label_column,
        covariate_columns=covariate_columns,
        sample_ids=table.sample_ids,
    )
    filtered, removed = filter_rare(table, min_nonzero=args.min_nonzero)
    composition = impute_zeros(filtered, prior_strength=args.prior_strength, seed=args.seed)
    ds = Dataset(composition=composition, labels=labels, covariates=covariates)
    return ds, filtered, removed


def _delimiter_arg(value: str) -> str:
    return "\t" if value == "\\t" else value


def _add_input_flags(sub: argparse.ArgumentParser, metadata: bool = True) -> None:
    sub.add_argument("--counts", required=True, help="count table (delimited text)")
    if metadata:
        sub.add_argument("--metadata", required=True, help="sample metadata (delimited text)")
        sub.add_argument("--label-column", required=True, help="metadata column with class labels")
        sub.add_argument(
            "--covariates",
            default="",
            help="comma-separated metadata columns used as covariates",
        )
    sub.add_argument("--delimiter", default=None, type=_delimiter_arg,
                     help="field delimiter, ',' or '\\t' (default: auto)")
    sub.add_argument("--min-nonzero", type=int, default=3,
                     help="keep features with at least this many non-zero counts")
    sub.add_argument("--prior-strength", type=float, default=0.5,
                     help="per-feature Dirichlet prior for zero imputation")


def _add_screen_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--variance", choices=["hanley", "delong"], default="hanley")
    sub.add_argument("--rho", type=float, default=0.2,
                     help="assumed correlation between AUCs of pairs sharing a feature")
    sub.add_argument("--rho-empirical-replicates", type=int, default=0, metavar="B",
                     help="estimate rho from B bootstrap replicates instead of --rho")
    sub.add_argument("--no-covariates", action="store_true",
                     help="ignore covariate columns during screening")
    sub.add_argument("--glm-max-iter", type=int, default=100)
    sub.add_argument("--glm-tol", type=float, default=1e-8)


def _screening_config(args: argparse.Namespace, workers: int) -> ScreeningConfig:
    return ScreeningConfig(
        rho_otu=args.rho,
        variance_method=VarianceMethod(args.variance),
        workers=workers,
        seed=args.seed,
        covariates_included=not args.no_covariates,
        max_iter=args.glm_max_iter,
        tol=args.glm_tol,
    )


def _cmd_preprocess(args: argparse.Namespace) -> int:
    t0 = time.time()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = read_count_table(args.counts, delimiter=args.delimiter)
    filtered, removed = filter_rare(table, min_nonzero=args.min_nonzero)
    composition = impute_zeros(filtered, prior_strength=args.prior_strength, seed=args.seed)
    clr = clr_transform(composition)

    _write_matrix(out_dir / "composition.csv", composition.values,
                  composition.sample_ids, composition.feature_ids)
    _write_matrix(out_dir / "clr.csv", clr.values,
                  composition.sample_ids, composition.feature_ids)
    _write_json(out_dir / "preprocess.json", {
        "removed_features": removed,
        "imputation_warnings": [
            {
                "sample_id": w.sample_id,
                "replacement": w.replacement,
                "smallest_nonzero": w.smallest_nonzero,
                "n_zero_cells": w.n_zero_cells,
            }
            for w in composition.imputation_warnings
        ],
        "n_samples": composition.n_samples,
        "n_features": composition.n_features,
    })
    _write_manifest(out_dir / "manifest.json", "preprocess", args,
                    [args.counts], workers=1, t0=t0)
    return 0


def _cmd_screen(args: argparse.Namespace) -> int:
    t0 = time.time()
    workers = _resolve_workers(args)
    ds, _, removed = _load_dataset(args)
    if args.rho_empirical_replicates > 0:
        from .bootstrap import BootstrapConfig, estimate_rho_empirical

        rho = estimate_rho_empirical(
            ds,
            _screening_config(args, workers=1),
            BootstrapConfig(
                replicates=args.rho_empirical_replicates,
                seed=args.seed if args.seed is not None else 0,
                workers=workers,
            ),
        )
        args.rho = min(1.0, max(0.0, rho))
    cfg = _screening_config(args, workers)
    matrix = compute_auc_matrix(ds, cfg)
    report = build_report(matrix, cfg)

    out = Path(args.out)
    payload = report.to_dict()
    payload["removed_features"] = removed
    _write_json(out, payload)
    if args.auc_matrix:
        _write_matrix(Path(args.auc_matrix), matrix.values,
                      matrix.feature_ids, matrix.feature_ids)
    inputs = [args.counts, args.metadata]
    _write_manifest(_manifest_path(out), "screen", args, inputs, workers, t0)
    return 0


def _cmd_bootstrap(args: argparse.Namespace) -> int:
    t0 = time.time()
    workers = _resolve_workers(args)
    ds, filtered, _ = _load_dataset(args)
    scfg = _screening_config(args, workers=1)

    if args.k == "auto":
        k_policy, fixed_k = "fixed", None
    elif args.k == "reselect":
        k_policy, fixed_k = "reselect", None
    else:
        try:
            k_policy, fixed_k = "fixed", int(args.k)
        except ValueError:
            raise ValidationError(f"--k must be 'auto', 'reselect', or an integer, got {args.k!r}")
    bcfg = BootstrapConfig(
        replicates=args.replicates,
        stratified=args.stratified,
        seed=args.seed,
        workers=workers,
        k_policy=k_policy,
        fixed_k=fixed_k,
        reimpute=args.reimpute,
    )
    result = bootstrap_s(ds, scfg, bcfg, counts=filtered, prior_strength=args.prior_strength)

    out = Path(args.out)
    _write_json(out, {
        "s_replicates": result.s_replicates,
        "var_s": result.var_s,
        "percentile_ci_95": list(result.percentile_ci_95),
        "k_star_distribution": {str(k): v for k, v in sorted(result.k_star_distribution.items())},
        "k_evaluated": result.k_evaluated,
        "seed": result.seed,
        "config": {
            "replicates": bcfg.replicates,
            "stratified": bcfg.stratified,
            "k_policy": bcfg.k_policy,
            "fixed_k": bcfg.fixed_k,
            "reimpute": bcfg.reimpute,
            "rho_otu": scfg.rho_otu,
            "variance_method": scfg.variance_method.value,
            "covariates_included": scfg.covariates_included,
        },
    })
    _write_manifest(_manifest_path(out), "bootstrap", args,
                    [args.counts, args.metadata], workers, t0)
    return 0


def _cmd_enet(args: argparse.Namespace) -> int:
    t0 = time.time()
    workers = _resolve_workers(args)
    ds, _, _ = _load_dataset(args)
    cfg = EnetConfig(
        alpha=args.alpha,
        n_lambda=args.nlambda,
        lambda_min_ratio=args.lambda_min_ratio,
        cv_folds=args.cv_folds,
        cv_seed=args.seed if args.seed is not None else 0,
    )
    fits = fit_enet_logistic(ds, cfg)
    feature_ids = ds.feature_ids
    payload = {
        "alpha": cfg.alpha,
        "lambdas": [f.lambda_ for f in fits],
        "fits": [
            {
                "lambda": f.lambda_,
                "deviance": f.deviance,
                "intercept": f.intercept,
                "converged": f.converged,
                "support": [
                    [feature_ids[a], feature_ids[b]] for a, b in f.nonzero_pairs
                ],
                "coefficients": [f.theta[p] for p in f.nonzero_pairs],
                "alpha_contrast": f.alpha_contrast,
            }
            for f in fits
        ],
    }
    if cfg.cv_folds >= 2:
        lambda_selected, cv = cv_select_lambda(fits, ds, cfg, workers=workers)
        payload["cv"] = {
            "lambda_selected": lambda_selected,
            "lambda_1se": cv.lambda_1se,
            "lambdas": list(cv.lambdas),
            "mean_deviance": list(cv.mean_deviance),
            "se_deviance": list(cv.se_deviance),
            "n_folds": cv.n_folds,
        }
    out = Path(args.out)
    _write_json(out, payload)
    _write_manifest(_manifest_path(out), "enet", args,
                    [args.counts, args.metadata], workers, t0)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    t0 = time.time()
    spec = SimSpec(
        n_per_class=tuple(int(v) for v in args.n_per_class.split(",")),
        m=args.m,
        signal_features=tuple(int(v) for v in args.signal.split(",") if v != ""),
        effect_size=args.effect_size,
        covariate_confounding=args.confounding,
        zero_rate=args.zero_rate,
        seed=args.seed,
        depth=args.depth,
    )
    table, labels, covariates, truth = simulate(spec)
    write_count_table(table, args.out_counts)
    _write_sim_metadata(Path(args.out_metadata), table, labels, covariates)
    manifest_out = _manifest_path(Path(args.out_counts))
    args_dict = argparse.Namespace(**{**vars(args), "truth": truth})
    _write_manifest(manifest_out, "simulate", args_dict, [], workers=1, t0=t0)
    return 0


def _write_sim_metadata(path: Path, table: CountTable, labels: Labels,
                        covariates: CovariateMatrix) -> None:
    header = ["sample_id", "group", *covariates.names]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i, sid in enumerate(table.sample_ids):
            row = [sid, labels.class_names[labels.y[i] - 1]]
            row.extend(_fmt(v) for v in covariates.values[i])
            fh.write(",".join(row) + "\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="codasep",
                     description="pairwise log-ratio screening for compositional count data")
    parser.add_argument("--version", action="version", version=f"codasep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_pre = sub.add_parser("preprocess", help="filter, impute zeros, and clr-transform")
    _add_input_flags(p_pre, metadata=False)
    p_pre.add_argument("--seed", type=int, default=None)
    p_pre.add_argument("--out-dir", required=True)
    p_pre.set_defaults(func=_cmd_preprocess)

    p_screen = sub.add_parser("screen", help="pairwise AUC screen and separability report")
    _add_input_flags(p_screen)
    _add_screen_flags(p_screen)
    p_screen.add_argument("--workers", type=int, default=None,
                          help="worker processes (default: CODASEP_WORKERS or 1)")
    p_screen.add_argument("--seed", type=int, default=None)
    p_screen.add_argument("--out", default="report.json")
    p_screen.add_argument("--auc-matrix", default=None,
                          help="also write the pairwise AUC matrix to this file")
    p_screen.set_defaults(func=_cmd_screen)

    p_boot = sub.add_parser("bootstrap", help="stratified bootstrap of the separability index")
    _add_input_flags(p_boot)
    _add_screen_flags(p_boot)
    p_boot.add_argument("--replicates", type=int, default=200)
    p_boot.add_argument("--stratified", dest="stratified", action="store_true", default=True)
    p_boot.add_argument("--no-stratified", dest="stratified", action="store_false")
    p_boot.add_argument("--seed", type=int, default=0)
    p_boot.add_argument("--k", default="auto",
                        help="'auto' (fix k at the original k*), 'reselect', or an integer")
    p_boot.add_argument("--reimpute", action="store_true",
                        help="re-run zero imputation on each resampled count table")
    p_boot.add_argument("--workers", type=int, default=None)
    p_boot.add_argument("--out", default="boot.json")
    p_boot.set_defaults(func=_cmd_bootstrap)

    p_enet = sub.add_parser("enet", help="elastic-net log-contrast model over all pairs")
    _add_input_flags(p_enet)
    p_enet.add_argument("--alpha", type=float, default=0.5)
    p_enet.add_argument("--nlambda", type=int, default=100)
    p_enet.add_argument("--lambda-min-ratio", type=float, default=1e-3)
    p_enet.add_argument("--cv-folds", type=int, default=0)
    p_enet.add_argument("--seed", type=int, default=0, help="cross-validation fold seed")
    p_enet.add_argument("--workers", type=int, default=None)
    p_enet.add_argument("--out", default="enet.json")
    p_enet.set_defaults(func=_cmd_enet)

    p_sim = sub.add_parser("simulate", help="generate synthetic counts with planted signals")
    p_sim.add_argument("--n-per-class", default="100,100",
                       help="comma-separated samples per class")
    p_sim.add_argument("--m", type=int, default=30)
    p_sim.add_argument("--signal", default="", help="comma-separated 0-based feature indices")
    p_sim.add_argument("--effect-size", type=float, default=1.0)
    p_sim.add_argument("--confounding", type=float, default=None)
    p_sim.add_argument("--zero-rate", type=float, default=0.0)
    p_sim.add_argument("--depth", type=int, default=10_000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out-counts", default="counts.csv")
    p_sim.add_argument("--out-metadata", default="metadata.csv")
    p_sim.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CodasepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Elastic-net penalized logistic regression on the pairwise log-ratio design.

Solves, per lambda on a descending path with warm starts,

    argmin_theta (1/n) logistic-loss(theta) + lam1 ||theta||_2^2 + lam2 ||theta||_1

with lam1 = lambda * (1 - alpha) / 2 and lam2 = lambda * alpha, via
coordinate descent on IRLS majorizations. The design never exists in
memory: columns are pairwise log-ratios built on demand and standardized
internally (unit variance); coefficients are reported on the original
scale. Mapping each fit back to per-feature log-contrast weights
(sum over pairs containing the feature, signed) yields coefficients that
sum to zero by construction.

Binary outcomes only; class 1 is modeled as the positive class.
"""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .datamodel import Dataset
from .errors import ValidationError

_CHUNK = 1024
_ALPHA_FLOOR = 1e-3  # lambda_max fallback when alpha = 0


@dataclass(frozen=True)
class EnetConfig:
    alpha: float = 0.5
    lambda_path: tuple[float, ...] | None = None
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-3
    max_iter: int = 100
    max_sweeps: int = 2000
    tol: float = 1e-7
    cv_folds: int = 0
    cv_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.lambda_path is not None:
            path = tuple(float(v) for v in self.lambda_path)
            if not path:
                raise ValidationError("lambda_path must be non-empty")
            if any(b >= a for a, b in zip(path, path[1:])):
                raise ValidationError("lambda_path must be strictly descending")
            if path[-1] < 0 or (len(path) > 1 and path[-2] <= 0):
                raise ValidationError("lambda_path values must be positive (a final 0 is allowed)")
            object.__setattr__(self, "lambda_path", path)
        if self.n_lambda < 1:
            raise ValidationError("n_lambda must be >= 1")
        if not 0.0 < self.lambda_min_ratio < 1.0:
            raise ValidationError("lambda_min_ratio must be in (0, 1)")


@dataclass(frozen=True)
class EnetFit:
    """One point of the regularization path, on the original predictor scale."""

    lambda_: float
    alpha: float
    intercept: float
    theta: dict[tuple[int, int], float]
    nonzero_pairs: tuple[tuple[int, int], ...]
    alpha_contrast: np.ndarray
    deviance: float
    converged: bool
    n_sweeps: int


@dataclass(frozen=True)
class CvResult:
    lambdas: tuple[float, ...]
    mean_deviance: tuple[float, ...]
    se_deviance: tuple[float, ...]
    lambda_min: float
    lambda_1se: float
    n_folds: int


def _pair_arrays(m: int) -> tuple[np.ndarray, np.ndarray]:
    pa, pb = zip(*itertools.combinations(range(m), 2))
    return np.asarray(pa, dtype=np.int64), np.asarray(pb, dtype=np.int64)


def _column_stats(logx: np.ndarray, pa: np.ndarray, pb: np.ndarray):
    q = pa.shape[0]
    mean = np.empty(q)
    scale = np.empty(q)
    for s in range(0, q, _CHUNK):
        e = min(s + _CHUNK, q)
        cols = logx[:, pa[s:e]] - logx[:, pb[s:e]]
        mean[s:e] = cols.mean(axis=0)
        scale[s:e] = cols.std(axis=0)
    return mean, scale


def _lambda_max(logx, pa, pb, mean, scale, y01, alpha) -> float:
    p_bar = float(y01.mean())
    resid = y01 - p_bar
    n = y01.shape[0]
    gmax = 0.0
    for s in range(0, pa.shape[0], _CHUNK):
        e = min(s + _CHUNK, pa.shape[0])
        cols = logx[:, pa[s:e]] - logx[:, pb[s:e]]
        cols -= mean[s:e]
        ok = scale[s:e] > 0
        g = np.zeros(e - s)
        if ok.any():
            g[ok] = np.abs(cols[:, ok].T @ resid) / (n * scale[s:e][ok])
        gmax = max(gmax, float(g.max(initial=0.0)))
    if alpha == 0.0:
        warnings.warn(
            "alpha=0 leaves lambda_max undefined; using the alpha=0.001 bound",
            stacklevel=3,
        )
    alpha_eff = max(alpha, _ALPHA_FLOOR)
    # tiny inflation so the KKT boundary comparison cannot flip on rounding
    return gmax / alpha_eff * (1.0 + 1e-9)


def _fit_path_arrays(
    logx: np.ndarray,
    y01: np.ndarray,
    cfg: EnetConfig,
    lambda_path: np.ndarray,
):
    """Warm-started path fits; returns per-lambda standardized solutions."""
    m = logx.shape[1]
    pa, pb = _pair_arrays(m)
    mean, scale = _column_stats(logx, pa, pb)
    theta = np.zeros(pa.shape[0])
    p_bar = float(y01.mean())
    intercept = float(np.log(p_bar / (1.0 - p_bar)))
    solutions = []
    for lam in lambda_path:
        lam1 = lam * (1.0 - cfg.alpha) / 2.0
        lam2 = lam * cfg.alpha
        intercept, n_sweeps, converged = kernels.enet_cd_logistic(
            logx,
            pa,
            pb,
            mean,
            scale,
            y01,
            lam1,
            lam2,
            theta,
            intercept,
            cfg.max_iter,
            cfg.max_sweeps,
            cfg.tol,
        )
        solutions.append((float(lam), theta.copy(), float(intercept), n_sweeps, converged))
    return pa, pb, mean, scale, solutions


def _eta_from_original(logx, pairs_theta: dict[tuple[int, int], float], intercept: float):
    eta = np.full(logx.shape[0], intercept)
    for (a, b), coef in pairs_theta.items():
        eta += coef * (logx[:, a] - logx[:, b])
    return eta


def _binomial_deviance(eta: np.ndarray, y01: np.ndarray) -> float:
    return float(-2.0 * (y01 @ eta - np.logaddexp(0.0, eta).sum()))


def _resolve_lambda_path(logx, y01, cfg: EnetConfig) -> np.ndarray:
    if cfg.lambda_path is not None:
        return np.asarray(cfg.lambda_path, dtype=np.float64)
    m = logx.shape[1]
    pa, pb = _pair_arrays(m)
    mean, scale = _column_stats(logx, pa, pb)
    lam_max = _lambda_max(logx, pa, pb, mean, scale, y01, cfg.alpha)
    if lam_max == 0.0:
        raise ValidationError("all pairwise log-ratio columns are constant")
    return np.geomspace(lam_max, lam_max * cfg.lambda_min_ratio, cfg.n_lambda)


def _binary_response(ds: Dataset) -> np.ndarray:
    if ds.labels.n_classes != 2:
        raise ValidationError(
            f"the penalized log-contrast model is binary-only, got C={ds.labels.n_classes}"
        )
    return np.ascontiguousarray(ds.labels.y == 1, dtype=np.float64)


def fit_enet_logistic(ds: Dataset, cfg: EnetConfig) -> list[EnetFit]:
    """Fit the elastic-net path over all pairwise log-ratios (C = 2 only)."""
    y01 = _binary_response(ds)
    logx = np.ascontiguousarray(np.log(ds.composition.values))
    lambda_path = _resolve_lambda_path(logx, y01, cfg)
    pa, pb, mean, scale, solutions = _fit_path_arrays(logx, y01, cfg, lambda_path)

    m = logx.shape[1]
    fits = []
    for lam, theta_std, intercept_std, n_sweeps, converged in solutions:
        nz = np.flatnonzero(theta_std)
        theta: dict[tuple[int, int], float] = {}
        contrast = np.zeros(m)
        intercept = intercept_std
        for j in nz:
            coef = float(theta_std[j] / scale[j])
            a, b = int(pa[j]), int(pb[j])
            theta[(a, b)] = coef
            contrast[a] += coef
            contrast[b] -= coef
            intercept -= theta_std[j] * mean[j] / scale[j]
        eta = _eta_from_original(logx, theta, intercept)
        fits.append(
            EnetFit(
                lambda_=lam,
                alpha=cfg.alpha,
                intercept=float(intercept),
                theta=theta,
                nonzero_pairs=tuple(sorted(theta)),
                alpha_contrast=contrast,
                deviance=_binomial_deviance(eta, y01),
                converged=bool(converged),
                n_sweeps=int(n_sweeps),
            )
        )
    return fits


def kkt_violations(ds: Dataset, fit: EnetFit) -> dict[str, float]:
    """Stationarity diagnostics at a fitted point, on the standardized scale.

    Returns the largest subgradient excess over lam2 among zero
    coefficients and the largest stationarity residual among non-zeros.
    """
    y01 = _binary_response(ds)
    logx = np.log(ds.composition.values)
    n, m = logx.shape
    pa, pb = _pair_arrays(m)
    mean, scale = _column_stats(logx, pa, pb)
    lam1 = fit.lambda_ * (1.0 - fit.alpha) / 2.0
    lam2 = fit.lambda_ * fit.alpha

    theta_std = np.zeros(pa.shape[0])
    pair_pos = {(int(a), int(b)): j for j, (a, b) in enumerate(zip(pa, pb))}
    for pair, coef in fit.theta.items():
        theta_std[pair_pos[pair]] = coef * scale[pair_pos[pair]]

    eta = _eta_from_original(logx, fit.theta, fit.intercept)
    with np.errstate(over="ignore"):
        p = 1.0 / (1.0 + np.exp(-eta))
    resid = p - y01

    zero_violation = 0.0
    nonzero_residual = 0.0
    for s in range(0, pa.shape[0], _CHUNK):
        e = min(s + _CHUNK, pa.shape[0])
        cols = logx[:, pa[s:e]] - logx[:, pb[s:e]]
        cols -= mean[s:e]
        ok = scale[s:e] > 0
        grad = np.zeros(e - s)
        if ok.any():
            grad[ok] = (cols[:, ok].T @ resid) / (n * scale[s:e][ok])
        grad += 2.0 * lam1 * theta_std[s:e]
        t = theta_std[s:e]
        zero = t == 0.0
        if zero.any():
            zero_violation = max(
                zero_violation, float(np.max(np.abs(grad[zero]) - lam2, initial=0.0))
            )
        if (~zero).any():
            res = np.abs(grad[~zero] + lam2 * np.sign(t[~zero]))
            nonzero_residual = max(nonzero_residual, float(res.max()))
    return {"zero_violation": zero_violation, "nonzero_residual": nonzero_residual}


def _stratified_folds(y01: np.ndarray, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    folds = np.empty(y01.shape[0], dtype=np.int64)
    for cls in (0.0, 1.0):
        members = np.flatnonzero(y01 == cls)
        members = rng.permutation(members)
        folds[members] = np.arange(members.shape[0]) % n_folds
    return folds


def _select_from_curve(lambdas, mean_dev, se_dev) -> tuple[float, float]:
    """Minimizing lambda plus the one-standard-error choice (largest lambda
    whose mean is within one SE of the minimum). Lambdas are descending."""
    imin = int(np.argmin(mean_dev))
    threshold = mean_dev[imin] + se_dev[imin]
    i1se = imin
    for i in range(len(lambdas)):
        if mean_dev[i] <= threshold:
            i1se = i
            break
    return float(lambdas[imin]), float(lambdas[i1se])


def _cv_fold_deviances(args) -> np.ndarray:
    """Per-sample validation deviance along the path for one fold."""
    logx, y01, cfg, lambda_path, train = args
    val = ~train
    pa, pb, mean, scale, solutions = _fit_path_arrays(
        np.ascontiguousarray(logx[train]), y01[train], cfg, lambda_path
    )
    logx_val = logx[val]
    y_val = y01[val]
    out = np.empty(lambda_path.shape[0])
    for l, (_lam, theta_std, intercept_std, _, _) in enumerate(solutions):
        nz = np.flatnonzero(theta_std)
        theta = {}
        intercept = intercept_std
        for j in nz:
            theta[(int(pa[j]), int(pb[j]))] = float(theta_std[j] / scale[j])
            intercept -= theta_std[j] * mean[j] / scale[j]
        eta = _eta_from_original(logx_val, theta, intercept)
        out[l] = _binomial_deviance(eta, y_val) / y_val.shape[0]
    return out


def cv_select_lambda(
    fits: list[EnetFit], ds: Dataset, cfg: EnetConfig, workers: int = 1
) -> tuple[float, CvResult]:
    """Stratified K-fold cross-validated deviance over the fitted path.

    Folds are independent pure tasks and run in parallel when
    ``workers > 1``; fold results are combined in fold order, so output
    does not depend on the worker count.
    """
    if cfg.cv_folds < 2:
        raise ValidationError("cv_folds must be >= 2 for cross-validation")
    y01 = _binary_response(ds)
    logx = np.ascontiguousarray(np.log(ds.composition.values))
    lambda_path = np.array([f.lambda_ for f in fits])

    folds = None
    for attempt in range(10):
        rng = np.random.default_rng([cfg.cv_seed, attempt])
        candidate = _stratified_folds(y01, cfg.cv_folds, rng)
        ok = True
        for f in range(cfg.cv_folds):
            train = candidate != f
            if train.sum() == 0 or (candidate == f).sum() == 0:
                ok = False
                break
            if np.unique(y01[train]).size < 2:
                ok = False
                break
        if ok:
            folds = candidate
            break
    if folds is None:
        raise ValidationError(
            "could not build folds with both classes in every training set; "
            "classes are too small for this many folds"
        )

    tasks = [(logx, y01, cfg, lambda_path, folds != f) for f in range(cfg.cv_folds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, cfg.cv_folds)) as pool:
            rows = list(pool.map(_cv_fold_deviances, tasks))
    else:
        rows = [_cv_fold_deviances(t) for t in tasks]
    per_fold = np.vstack(rows)

    mean_dev = per_fold.mean(axis=0)
    se_dev = per_fold.std(axis=0, ddof=1) / np.sqrt(cfg.cv_folds)
    lambda_min, lambda_1se = _select_from_curve(lambda_path, mean_dev, se_dev)
    result = CvResult(
        lambdas=tuple(float(v) for v in lambda_path),
        mean_deviance=tuple(float(v) for v in mean_dev),
        se_deviance=tuple(float(v) for v in se_dev),
        lambda_min=lambda_min,
        lambda_1se=lambda_1se,
        n_folds=cfg.cv_folds,
    )
    return lambda_min, result

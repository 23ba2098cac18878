"""Maximum-likelihood binary and multinomial logistic regression.

Fits the single-predictor-plus-covariates models used by the pairwise
screen. The last class (index C) is the baseline category. Predictors are
centered and scaled internally for Newton conditioning; coefficients are
reported on the original scale. Fits that hit quasi-complete separation
(any standardized |coefficient| above ``SEPARATION_THRESHOLD``) stop
early with ``separation_flag`` set; the fitted probabilities of the last
iterate are still valid for ranking.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .datamodel import CovariateMatrix, Labels
from .errors import ValidationError

SEPARATION_THRESHOLD = 30.0
GRADIENT_TOL = 1e-6
HESSIAN_RIDGE = 1e-8


@dataclass(frozen=True)
class GlmSpec:
    """Inputs for one multinomial fit: predictor, covariates, labels."""

    predictor: np.ndarray
    labels: Labels
    covariates: CovariateMatrix | None = None
    n_classes: int | None = None
    max_iter: int = 100
    tol: float = 1e-8

    def __post_init__(self) -> None:
        z = np.asarray(self.predictor, dtype=np.float64)
        if z.ndim != 1:
            raise ValidationError("predictor must be a vector")
        n = z.shape[0]
        if len(self.labels.y) != n:
            raise ValidationError("predictor and labels cover different sample counts")
        cov = self.covariates if self.covariates is not None else CovariateMatrix.empty(n)
        if cov.values.shape[0] != n:
            raise ValidationError("covariates and predictor cover different sample counts")
        n_classes = self.n_classes if self.n_classes is not None else self.labels.n_classes
        if n_classes != self.labels.n_classes:
            raise ValidationError("n_classes does not match the labels")
        object.__setattr__(self, "predictor", z)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "n_classes", n_classes)


@dataclass(frozen=True)
class GlmFit:
    """Fitted multinomial model.

    ``coefficients`` has one row per non-baseline class and columns
    (intercept, slope on the predictor, one per covariate), on the
    original predictor scale. ``fitted_probs`` is row-stochastic with
    class c in column c-1 and the baseline last.
    """

    coefficients: np.ndarray
    fitted_probs: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float
    separation_flag: bool
    hessian_jittered: bool = False


def _fit_arrays(
    z: np.ndarray,
    cov: np.ndarray,
    y_idx: np.ndarray,
    n_classes: int,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> GlmFit:
    """Array-level fit shared by the public API and the pairwise screen.

    ``y_idx`` holds 0-based class indices with the baseline last.
    """
    n = z.shape[0]
    raw = np.column_stack([z, cov]) if cov.size else z[:, None]
    means = raw.mean(axis=0)
    scales = raw.std(axis=0)
    keep = scales > 0.0
    x = np.empty((n, 1 + int(keep.sum())), dtype=np.float64)
    x[:, 0] = 1.0
    if keep.any():
        x[:, 1:] = (raw[:, keep] - means[keep]) / scales[keep]
    x = np.ascontiguousarray(x)

    beta_std, probs, ll, iters, converged, separation, jittered = kernels.multinomial_newton(
        x,
        np.ascontiguousarray(y_idx, dtype=np.int64),
        n_classes,
        max_iter,
        tol,
        GRADIENT_TOL,
        SEPARATION_THRESHOLD,
        HESSIAN_RIDGE,
    )
    beta_std = np.asarray(beta_std)

    k = n_classes - 1
    n_pred = raw.shape[1]
    coef = np.zeros((k, 1 + n_pred))
    kept_cols = np.flatnonzero(keep)
    coef[:, 0] = beta_std[:, 0]
    for slot, col in enumerate(kept_cols, start=1):
        b = beta_std[:, slot] / scales[col]
        coef[:, 1 + col] = b
        coef[:, 0] -= b * means[col]

    return GlmFit(
        coefficients=coef,
        fitted_probs=np.asarray(probs),
        converged=bool(converged),
        iterations=int(iters),
        log_likelihood=float(ll),
        separation_flag=bool(separation),
        hessian_jittered=bool(jittered),
    )


def fit_multinomial(spec: GlmSpec) -> GlmFit:
    """Fit the baseline-category multinomial logit by Newton-Raphson."""
    n = spec.predictor.shape[0]
    p = spec.covariates.n_covariates
    if n <= spec.n_classes * (2 + p):
        warnings.warn(
            f"n={n} is small for {spec.n_classes} classes and {p} covariates; "
            "estimates may be unstable",
            stacklevel=2,
        )
    return _fit_arrays(
        spec.predictor,
        spec.covariates.values,
        spec.labels.y - 1,
        spec.n_classes,
        max_iter=spec.max_iter,
        tol=spec.tol,
    )


def class_scores(fit: GlmFit) -> np.ndarray:
    """Predicted class probabilities, one column per class (baseline last)."""
    return fit.fitted_probs


def positive_scores(fit: GlmFit) -> np.ndarray:
    """Class-1 probability as the scalar score for binary problems."""
    if fit.fitted_probs.shape[1] != 2:
        raise ValidationError("positive_scores is defined for binary fits only")
    return fit.fitted_probs[:, 0]

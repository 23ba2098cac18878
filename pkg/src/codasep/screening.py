"""Pairwise log-ratio screening: AUC matrix, ranking, and separability index.

Every feature pair (j, j') gets a logistic (C = 2) or multinomial (C > 2)
fit of the labels on the pairwise log-ratio, optionally adjusted for
covariates; the fitted class probabilities are scored by AUC. The m x m
matrix of pairwise AUCs is reduced to per-feature column scores, a
ranking, and the separability index S_k (mean pairwise AUC among the
top-k features), maximized over k.

Pairs are independent tasks: the computation is data-parallel over the
C(m, 2) pairs with a fixed assembly order, so results are bit-identical
for any worker count.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .auc import (
    VarianceMethod,
    shared_class_covariances,
    var_handtill,
    var_hanley,
)
from .datamodel import Dataset
from .errors import ValidationError
from .glm import _fit_arrays

Z_95 = 1.96


@dataclass(frozen=True)
class ScreeningConfig:
    """Knobs for the pairwise screen.

    ``rho_otu`` is the assumed correlation between AUC estimates of
    feature pairs sharing a feature, used in the Var(S_k) covariance
    approximation (conservative default 0.2).
    """

    rho_otu: float = 0.2
    variance_method: VarianceMethod = VarianceMethod.HANLEY
    workers: int = 1
    seed: int | None = None
    covariates_included: bool = True
    max_iter: int = 100
    tol: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 <= self.rho_otu <= 1.0:
            raise ValidationError(f"rho_otu must be in [0, 1], got {self.rho_otu}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        object.__setattr__(self, "variance_method", VarianceMethod(self.variance_method))


@dataclass(frozen=True)
class PairFailure:
    feature_j: str
    feature_j_prime: str
    message: str


@dataclass(frozen=True)
class AucMatrix:
    """Symmetric pairwise AUC matrix with aligned variance estimates.

    The diagonal is NaN and never read.
    """

    values: np.ndarray
    variances: np.ndarray
    method: VarianceMethod
    feature_ids: tuple[str, ...]
    failures: tuple[PairFailure, ...] = ()

    @property
    def n_features(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SeparabilityReport:
    """Ranked features, the S_k curve, and the selected index with its CI."""

    ranking: tuple[str, ...]
    column_scores: np.ndarray  # aligned with feature_ids order
    feature_ids: tuple[str, ...]
    s_curve: np.ndarray  # S_2 .. S_m
    k_star: int
    s_at_k_star: float
    var_s: float
    ci_95: tuple[float, float]
    config: ScreeningConfig
    variance_method: VarianceMethod
    failures: tuple[PairFailure, ...] = ()

    def to_dict(self) -> dict:
        return {
            "ranking": list(self.ranking),
            "column_scores": [float(v) for v in self.column_scores],
            "feature_ids": list(self.feature_ids),
            "s_curve": [float(v) for v in self.s_curve],
            "k_star": int(self.k_star),
            "s": float(self.s_at_k_star),
            "var_s": float(self.var_s),
            "ci_95": [float(self.ci_95[0]), float(self.ci_95[1])],
            "config": {
                "rho_otu": self.config.rho_otu,
                "variance_method": self.variance_method.value,
                "workers": self.config.workers,
                "seed": self.config.seed,
                "covariates_included": self.config.covariates_included,
                "max_iter": self.config.max_iter,
                "tol": self.config.tol,
            },
            "failures": [
                {"pair": [f.feature_j, f.feature_j_prime], "message": f.message}
                for f in self.failures
            ],
        }


def _class_pair_context(y_idx: np.ndarray, n_classes: int) -> list[tuple]:
    """Per class-pair sample masks for the Hand-Till components."""
    out = []
    for c in range(1, n_classes + 1):
        for cp in range(c + 1, n_classes + 1):
            idx = np.flatnonzero((y_idx == c - 1) | (y_idx == cp - 1))
            sub = y_idx[idx]
            pos_c = np.ascontiguousarray(sub == c - 1, dtype=np.uint8)
            pos_cp = np.ascontiguousarray(sub == cp - 1, dtype=np.uint8)
            out.append(((c, cp), idx, pos_c, pos_cp, int(pos_c.sum()), int(pos_cp.sum())))
    return out


def _build_context(
    logx: np.ndarray,
    y_idx: np.ndarray,
    n_classes: int,
    cov: np.ndarray,
    cfg: ScreeningConfig,
) -> dict:
    m = logx.shape[1]
    pa, pb = zip(*itertools.combinations(range(m), 2))
    class_counts = np.bincount(y_idx, minlength=n_classes)
    ctx = {
        "logx": np.ascontiguousarray(logx),
        "y_idx": np.ascontiguousarray(y_idx, dtype=np.int64),
        "n_classes": n_classes,
        "cov": np.ascontiguousarray(cov),
        "pa": np.asarray(pa, dtype=np.int64),
        "pb": np.asarray(pb, dtype=np.int64),
        "method": cfg.variance_method,
        "rho": cfg.rho_otu,
        "max_iter": cfg.max_iter,
        "tol": cfg.tol,
        "class_counts": class_counts,
        "backend": kernels.get_backend(),
    }
    if n_classes == 2:
        ctx["pos_u8"] = np.ascontiguousarray(y_idx == 0, dtype=np.uint8)
    else:
        ctx["class_pairs"] = _class_pair_context(y_idx, n_classes)
    ctx["neutral"] = _neutral_stat(ctx)
    return ctx


def _multiclass_stat(ctx: dict, probs: np.ndarray) -> tuple[float, float]:
    rho = ctx["rho"]
    comps: dict[tuple[int, int], float] = {}
    variances: dict[tuple[int, int], float] = {}
    for (c, cp), idx, pos_c, pos_cp, n_c, n_cp in ctx["class_pairs"]:
        a_c = kernels.mannwhitney_auc(np.ascontiguousarray(probs[idx, c - 1]), pos_c)
        a_cp = kernels.mannwhitney_auc(np.ascontiguousarray(probs[idx, cp - 1]), pos_cp)
        comp = 0.5 * (a_c + a_cp)
        comps[(c, cp)] = comp
        variances[(c, cp)] = var_hanley(comp, n_c, n_cp)
    keys = sorted(comps)
    auc = sum(comps[k] for k in keys) / len(keys)
    covs = shared_class_covariances(variances, rho)
    return auc, var_handtill(variances, covs, ctx["n_classes"])


def _neutral_stat(ctx: dict) -> tuple[float, float]:
    """AUC and variance recorded for a pair whose fit failed: 0.5 and the
    configured estimator evaluated at 0.5 (Hanley-based for DeLong too,
    since DeLong has no closed form without scores)."""
    counts = ctx["class_counts"]
    if ctx["n_classes"] == 2:
        return 0.5, var_hanley(0.5, int(counts[0]), int(counts[1]))
    variances = {}
    for (c, cp), _idx, _pc, _pcp, n_c, n_cp in ctx["class_pairs"]:
        variances[(c, cp)] = var_hanley(0.5, n_c, n_cp)
    covs = shared_class_covariances(variances, ctx["rho"])
    return 0.5, var_handtill(variances, covs, ctx["n_classes"])


def _pair_stat(ctx: dict, a: int, b: int) -> tuple[float, float]:
    logx = ctx["logx"]
    z = logx[:, a] - logx[:, b]
    fit = _fit_arrays(
        z,
        ctx["cov"],
        ctx["y_idx"],
        ctx["n_classes"],
        max_iter=ctx["max_iter"],
        tol=ctx["tol"],
    )
    probs = fit.fitted_probs
    if ctx["n_classes"] == 2:
        scores = np.ascontiguousarray(probs[:, 0])
        if ctx["method"] == VarianceMethod.DELONG:
            return kernels.delong_auc_variance(scores, ctx["pos_u8"])
        auc = kernels.mannwhitney_auc(scores, ctx["pos_u8"])
        counts = ctx["class_counts"]
        return auc, var_hanley(auc, int(counts[0]), int(counts[1]))
    return _multiclass_stat(ctx, probs)


def _compute_chunk(ctx: dict, start: int, stop: int):
    pa, pb = ctx["pa"], ctx["pb"]
    aucs = np.empty(stop - start)
    variances = np.empty(stop - start)
    failures: list[tuple[int, str]] = []
    for t in range(start, stop):
        try:
            auc, var = _pair_stat(ctx, int(pa[t]), int(pb[t]))
        except Exception as exc:  # one bad pair must not abort the screen
            auc, var = ctx["neutral"]
            failures.append((t, f"{type(exc).__name__}: {exc}"))
        aucs[t - start] = auc
        variances[t - start] = var
    return start, aucs, variances, failures


_WORKER_CTX: dict = {}


def _init_worker(ctx: dict) -> None:
    kernels.set_backend(ctx["backend"])
    _WORKER_CTX.clear()
    _WORKER_CTX.update(ctx)


def _worker_chunk(bounds: tuple[int, int]):
    return _compute_chunk(_WORKER_CTX, bounds[0], bounds[1])


def _chunk_ranges(total: int, n_chunks: int) -> list[tuple[int, int]]:
    n_chunks = max(1, min(n_chunks, total))
    edges = np.linspace(0, total, n_chunks + 1, dtype=int)
    return [(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def _auc_matrix_arrays(
    logx: np.ndarray,
    y_idx: np.ndarray,
    n_classes: int,
    cov: np.ndarray,
    cfg: ScreeningConfig,
    workers: int = 1,
):
    """Fill the pairwise AUC and variance matrices; returns (values,
    variances, failures) with failures as (pair_position, message)."""
    m = logx.shape[1]
    ctx = _build_context(logx, y_idx, n_classes, cov, cfg)
    q = len(ctx["pa"])
    if workers == 1 or q < 32:
        chunks = [_compute_chunk(ctx, 0, q)]
    else:
        ranges = _chunk_ranges(q, workers * 4)
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(ctx,)
        ) as pool:
            chunks = list(pool.map(_worker_chunk, ranges))

    values = np.full((m, m), np.nan)
    variances = np.full((m, m), np.nan)
    failures: list[tuple[int, str]] = []
    pa, pb = ctx["pa"], ctx["pb"]
    for start, aucs, var_chunk, fail_chunk in chunks:
        for offset in range(aucs.shape[0]):
            a, b = pa[start + offset], pb[start + offset]
            values[a, b] = values[b, a] = aucs[offset]
            variances[a, b] = variances[b, a] = var_chunk[offset]
        failures.extend(fail_chunk)
    failures.sort(key=lambda f: f[0])
    return values, variances, failures


def compute_auc_matrix(ds: Dataset, cfg: ScreeningConfig) -> AucMatrix:
    """Fit all C(m, 2) pairwise log-ratio models and collect their AUCs.

    With C > 2 the per-pair variance is always the Hand-Till propagation
    with Hanley-based components, regardless of ``variance_method``.
    Pairs whose fit raises are neutralized at AUC 0.5 and logged.
    """
    comp = ds.composition
    n_classes = ds.labels.n_classes
    counts = ds.labels.class_counts
    if (
        n_classes == 2
        and cfg.variance_method == VarianceMethod.DELONG
        and counts.min() < 2
    ):
        raise ValidationError("DeLong variance needs at least 2 samples per class")
    cov = (
        ds.covariates.values
        if cfg.covariates_included and ds.covariates.n_covariates
        else np.zeros((ds.n_samples, 0))
    )
    logx = np.log(comp.values)
    values, variances, raw_failures = _auc_matrix_arrays(
        logx, ds.labels.y - 1, n_classes, cov, cfg, workers=cfg.workers
    )
    method = cfg.variance_method if n_classes == 2 else VarianceMethod.HANDTILL_PROPAGATED
    pairs = list(itertools.combinations(range(comp.n_features), 2))
    failures = tuple(
        PairFailure(
            feature_j=comp.feature_ids[pairs[t][0]],
            feature_j_prime=comp.feature_ids[pairs[t][1]],
            message=msg,
        )
        for t, msg in raw_failures
    )
    return AucMatrix(
        values=values,
        variances=variances,
        method=method,
        feature_ids=comp.feature_ids,
        failures=failures,
    )


def _id_rank(feature_ids: Sequence[str]) -> np.ndarray:
    order = sorted(range(len(feature_ids)), key=lambda i: feature_ids[i])
    rank = np.empty(len(feature_ids), dtype=np.int64)
    for r, i in enumerate(order):
        rank[i] = r
    return rank


def _rank_order(column_scores: np.ndarray, feature_ids: Sequence[str]) -> np.ndarray:
    # primary: score descending; tie-break: feature id ascending
    return np.lexsort((_id_rank(feature_ids), -column_scores))


def rank_features(matrix: AucMatrix) -> tuple[list[str], np.ndarray]:
    """Rank features by their AUC-matrix column sums (descending).

    Ties are broken by ascending feature-id string order. Returns the
    ranked feature ids and the column scores in original feature order.
    """
    column_scores = np.nansum(matrix.values, axis=1)
    order = _rank_order(column_scores, matrix.feature_ids)
    return [matrix.feature_ids[i] for i in order], column_scores


def _ranking_positions(matrix: AucMatrix, ranking: Sequence[str]) -> list[int]:
    pos = {fid: i for i, fid in enumerate(matrix.feature_ids)}
    if sorted(ranking) != sorted(matrix.feature_ids):
        raise ValidationError("ranking is not a permutation of the matrix feature ids")
    return [pos[fid] for fid in ranking]


def _s_curve_from_order(values: np.ndarray, order: Sequence[int]) -> np.ndarray:
    m = len(order)
    out = np.empty(m - 1)
    total = 0.0
    idx = np.asarray(order)
    for k in range(2, m + 1):
        total += float(values[idx[: k - 1], idx[k - 1]].sum())
        out[k - 2] = total * 2.0 / (k * (k - 1))
    return out


def separability_curve(matrix: AucMatrix, ranking: Sequence[str]) -> np.ndarray:
    """S_k for k = 2..m: mean pairwise AUC among the top-k ranked features."""
    return _s_curve_from_order(matrix.values, _ranking_positions(matrix, ranking))


def select_k(s_curve: np.ndarray) -> int:
    """Smallest k at which S_k attains its maximum (exact float ties)."""
    s_curve = np.asarray(s_curve)
    if s_curve.size == 0:
        raise ValidationError("empty separability curve")
    return int(np.argmax(s_curve)) + 2


def _var_s_from_order(variances: np.ndarray, order: Sequence[int], k: int, rho: float) -> float:
    idx = list(order[:k])
    sum_var = 0.0
    sqrt_by_feature = np.zeros(k)
    var_by_feature = np.zeros(k)
    for i in range(k):
        for j in range(i + 1, k):
            v = float(variances[idx[i], idx[j]])
            sum_var += v
            root = np.sqrt(v)
            sqrt_by_feature[i] += root
            sqrt_by_feature[j] += root
            var_by_feature[i] += v
            var_by_feature[j] += v
    # pairs of pairs sharing feature f contribute sqrt(v_p v_q); two pairs
    # can share at most one feature, so summing per feature counts each once.
    # A feature appearing in a single pair (k = 2) contributes nothing.
    sum_cov = 0.0
    if k > 2:
        sum_cov = 0.5 * float((sqrt_by_feature**2 - var_by_feature).sum())
    denom = k * (k - 1)
    return 4.0 / (denom * denom) * (sum_var + 2.0 * rho * sum_cov)


def var_s_k(matrix: AucMatrix, ranking: Sequence[str], k: int, rho_otu: float) -> float:
    """Analytic Var(S_k) with the shared-feature correlation approximation.

    Cov(AUC_p, AUC_q) is rho_otu * sqrt(Var_p Var_q) when the feature
    pairs p and q share a feature and 0 otherwise.
    """
    if k < 2 or k > matrix.n_features:
        raise ValidationError(f"k must be in [2, {matrix.n_features}], got {k}")
    order = _ranking_positions(matrix, ranking)
    return _var_s_from_order(matrix.variances, order, k, rho_otu)


def build_report(matrix: AucMatrix, cfg: ScreeningConfig) -> SeparabilityReport:
    """Assemble ranking, S_k curve, optimal k, Var(S_k), and the 95% CI."""
    ranking, column_scores = rank_features(matrix)
    s_curve = separability_curve(matrix, ranking)
    k_star = select_k(s_curve)
    s_star = float(s_curve[k_star - 2])
    var_s = var_s_k(matrix, ranking, k_star, cfg.rho_otu)
    half = Z_95 * float(np.sqrt(var_s))
    ci = (max(0.0, s_star - half), min(1.0, s_star + half))
    return SeparabilityReport(
        ranking=tuple(ranking),
        column_scores=column_scores,
        feature_ids=matrix.feature_ids,
        s_curve=s_curve,
        k_star=k_star,
        s_at_k_star=s_star,
        var_s=var_s,
        ci_95=ci,
        config=cfg,
        variance_method=matrix.method,
        failures=matrix.failures,
    )

"""Stratified non-parametric bootstrap of the separability index.

Each replicate resamples the n samples with replacement (independently
within each class when stratified, which preserves the class counts
exactly), recomputes the full pairwise AUC matrix, re-ranks, and
re-evaluates S_k. Replicate b draws its randomness from a generator
seeded by (seed, b), so results are bit-identical for any worker count.

Resampling acts on the imputed composition by default; ``reimpute=True``
resamples the filtered counts and re-runs the zero imputation per
replicate instead.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .datamodel import CountTable, Dataset
from .errors import CodasepError, ValidationError
from .preprocess import _impute_array
from .screening import (
    ScreeningConfig,
    _auc_matrix_arrays,
    _chunk_ranges,
    _id_rank,
    _s_curve_from_order,
)

K_POLICIES = ("fixed", "reselect")


@dataclass(frozen=True)
class BootstrapConfig:
    """Replicate count, stratification, seeding, and the k policy.

    ``k_policy="fixed"`` evaluates every replicate's curve at one k
    (``fixed_k``, defaulting to the original run's k*), isolating the
    variance of the index itself; ``"reselect"`` re-maximizes S_k per
    replicate.
    """

    replicates: int = 200
    stratified: bool = True
    seed: int = 0
    workers: int = 1
    k_policy: str = "fixed"
    fixed_k: int | None = None
    reimpute: bool = False

    def __post_init__(self) -> None:
        if self.replicates < 2:
            raise ValidationError("need at least 2 bootstrap replicates")
        if self.k_policy not in K_POLICIES:
            raise ValidationError(f"k_policy must be one of {K_POLICIES}")
        if self.fixed_k is not None and self.fixed_k < 2:
            raise ValidationError("fixed_k must be >= 2")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass(frozen=True)
class BootstrapResult:
    s_replicates: np.ndarray
    var_s: float
    percentile_ci_95: tuple[float, float]
    k_star_distribution: dict[int, int]
    seed: int
    k_evaluated: int | None


def _draw_indices(ctx: dict, rng: np.random.Generator) -> np.ndarray:
    if ctx["stratified"]:
        parts = []
        for members in ctx["class_indices"]:
            draws = rng.integers(0, len(members), size=len(members))
            parts.append(members[draws])
        return np.concatenate(parts)
    n = ctx["n"]
    y_idx = ctx["y_idx"]
    for _ in range(10):
        idx = rng.integers(0, n, size=n)
        if np.unique(y_idx[idx]).size == ctx["n_classes"]:
            return idx
    raise CodasepError(
        "a class vanished in 10 consecutive unstratified resamples; "
        "use stratified mode or larger classes"
    )


def _replicate(ctx: dict, b: int):
    rng = np.random.default_rng([ctx["seed"], b])
    idx = _draw_indices(ctx, rng)
    if ctx["reimpute"]:
        values = _impute_array(ctx["counts"][idx], ctx["prior_strength"])
        logx = np.log(values)
    else:
        logx = ctx["logx"][idx]
    y_idx = ctx["y_idx"][idx]
    cov = ctx["cov"][idx]
    vals, _, _ = _auc_matrix_arrays(
        logx, y_idx, ctx["n_classes"], cov, ctx["scfg"], workers=1
    )
    scores = np.nansum(vals, axis=1)
    order = np.lexsort((ctx["id_rank"], -scores))
    curve = _s_curve_from_order(vals, order)
    k_rep = int(np.argmax(curve)) + 2
    k_eval = ctx["k_eval"] if ctx["k_eval"] is not None else k_rep
    s = float(curve[k_eval - 2])
    if ctx["capture_matrix"]:
        iu = np.triu_indices(vals.shape[0], k=1)
        return s, k_rep, vals[iu]
    return s, k_rep, None


_WORKER_CTX: dict = {}


def _init_worker(ctx: dict) -> None:
    kernels.set_backend(ctx["backend"])
    _WORKER_CTX.clear()
    _WORKER_CTX.update(ctx)


def _worker_range(bounds: tuple[int, int]):
    return [_replicate(_WORKER_CTX, b) for b in range(bounds[0], bounds[1])]


def _run_replicates(ctx: dict, n_replicates: int, workers: int) -> list:
    if workers == 1 or n_replicates < 4:
        return [_replicate(ctx, b) for b in range(n_replicates)]
    ranges = _chunk_ranges(n_replicates, workers * 2)
    out: list = []
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(ctx,)
    ) as pool:
        for chunk in pool.map(_worker_range, ranges):
            out.extend(chunk)
    return out


def _build_context(
    ds: Dataset,
    scfg: ScreeningConfig,
    bcfg: BootstrapConfig,
    counts: CountTable | None,
    prior_strength: float,
    k_eval: int | None,
    capture_matrix: bool = False,
) -> dict:
    y_idx = ds.labels.y - 1
    n_classes = ds.labels.n_classes
    counts_by_class = ds.labels.class_counts
    if bcfg.stratified and counts_by_class.min() < 2:
        warnings.warn(
            "stratified bootstrap with a class of fewer than 2 samples; "
            "replicates will be degenerate",
            stacklevel=3,
        )
    cov = (
        ds.covariates.values
        if scfg.covariates_included and ds.covariates.n_covariates
        else np.zeros((ds.n_samples, 0))
    )
    ctx = {
        "logx": np.log(ds.composition.values),
        "y_idx": np.ascontiguousarray(y_idx, dtype=np.int64),
        "n_classes": n_classes,
        "cov": np.ascontiguousarray(cov),
        "scfg": scfg,
        "n": ds.n_samples,
        "seed": bcfg.seed,
        "stratified": bcfg.stratified,
        "class_indices": [np.flatnonzero(y_idx == c) for c in range(n_classes)],
        "reimpute": bcfg.reimpute,
        "prior_strength": prior_strength,
        "id_rank": _id_rank(ds.feature_ids),
        "k_eval": k_eval,
        "capture_matrix": capture_matrix,
        "backend": kernels.get_backend(),
    }
    if bcfg.reimpute:
        if counts is None:
            raise ValidationError("reimpute mode needs the filtered count table")
        if counts.counts.shape != ds.composition.values.shape:
            raise ValidationError("count table does not match the composition shape")
        ctx["counts"] = counts.counts.astype(np.float64)
    return ctx


def _original_k_star(ds: Dataset, scfg: ScreeningConfig, workers: int) -> int:
    logx = np.log(ds.composition.values)
    cov = (
        ds.covariates.values
        if scfg.covariates_included and ds.covariates.n_covariates
        else np.zeros((ds.n_samples, 0))
    )
    vals, _, _ = _auc_matrix_arrays(
        logx, ds.labels.y - 1, ds.labels.n_classes, cov, scfg, workers=workers
    )
    scores = np.nansum(vals, axis=1)
    order = np.lexsort((_id_rank(ds.feature_ids), -scores))
    return int(np.argmax(_s_curve_from_order(vals, order))) + 2


def bootstrap_s(
    ds: Dataset,
    scfg: ScreeningConfig,
    bcfg: BootstrapConfig,
    counts: CountTable | None = None,
    prior_strength: float = 0.5,
) -> BootstrapResult:
    """Bootstrap Var(S) and the 2.5/97.5 percentile interval."""
    k_eval: int | None = None
    if bcfg.k_policy == "fixed":
        k_eval = bcfg.fixed_k
        if k_eval is None:
            k_eval = _original_k_star(ds, scfg, bcfg.workers)
        if k_eval > ds.composition.n_features:
            raise ValidationError(
                f"fixed_k={k_eval} exceeds the {ds.composition.n_features} features"
            )
    ctx = _build_context(ds, scfg, bcfg, counts, prior_strength, k_eval)
    rows = _run_replicates(ctx, bcfg.replicates, bcfg.workers)
    s_replicates = np.array([row[0] for row in rows])
    k_values = [row[1] for row in rows]
    histogram = {int(k): int(c) for k, c in zip(*np.unique(k_values, return_counts=True))}
    lo, hi = np.percentile(s_replicates, [2.5, 97.5])
    return BootstrapResult(
        s_replicates=s_replicates,
        var_s=float(np.var(s_replicates, ddof=1)),
        percentile_ci_95=(float(lo), float(hi)),
        k_star_distribution=histogram,
        seed=bcfg.seed,
        k_evaluated=k_eval,
    )


def estimate_rho_empirical(
    ds: Dataset,
    scfg: ScreeningConfig,
    bcfg: BootstrapConfig,
    max_couples: int = 2000,
) -> float:
    """Estimate rho_OTU as the mean correlation, across bootstrap
    replicates, of AUC estimates over feature-pair couples sharing a
    feature."""
    m = ds.composition.n_features
    q = m * (m - 1) // 2
    if q * bcfg.replicates > 20_000_000:
        raise ValidationError(
            "empirical rho estimation would store too many AUC replicates; "
            "reduce m or the replicate count"
        )
    ctx = _build_context(ds, scfg, bcfg, None, 0.5, k_eval=2, capture_matrix=True)
    rows = _run_replicates(ctx, bcfg.replicates, bcfg.workers)
    values = np.stack([row[2] for row in rows])  # (B, q)

    iu_a, iu_b = np.triu_indices(m, k=1)
    by_feature: dict[int, list[int]] = {f: [] for f in range(m)}
    for t in range(q):
        by_feature[int(iu_a[t])].append(t)
        by_feature[int(iu_b[t])].append(t)
    couples: list[tuple[int, int]] = []
    for f in range(m):
        pairs = by_feature[f]
        for i in range(len(pairs)):
            for j in range(i + 1, len(pairs)):
                couples.append((pairs[i], pairs[j]))
    if len(couples) > max_couples:
        rng = np.random.default_rng([bcfg.seed, 0x5E1EC7])
        chosen = rng.choice(len(couples), size=max_couples, replace=False)
        couples = [couples[int(i)] for i in np.sort(chosen)]

    correlations = []
    for p, pq in couples:
        a = values[:, p]
        b = values[:, pq]
        if a.std() == 0.0 or b.std() == 0.0:
            continue
        correlations.append(float(np.corrcoef(a, b)[0, 1]))
    if not correlations:
        raise CodasepError("all AUC replicate series were constant; rho is undefined")
    return float(np.mean(correlations))

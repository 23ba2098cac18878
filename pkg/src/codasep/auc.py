"""Binary and multiclass AUC with Hanley, DeLong, and propagated variances.

Ties always receive half credit, both in the AUC itself and in the DeLong
placement components, so the binary AUC equals the Mann-Whitney statistic
and the two-class reduction of the multiclass AUC is exact even when
fitted probabilities tie.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from . import kernels
from .datamodel import Labels
from .errors import ValidationError

ClassPair = tuple[int, int]


class VarianceMethod(str, Enum):
    HANLEY = "hanley"
    DELONG = "delong"
    HANDTILL_PROPAGATED = "handtill_propagated"
    BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class AucEstimate:
    """An AUC value with its variance estimate and group sizes."""

    value: float
    variance: float
    method: VarianceMethod
    class_counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValidationError(f"AUC must be in [0, 1], got {self.value}")
        if self.variance < 0.0:
            raise ValidationError(f"variance must be >= 0, got {self.variance}")

    @property
    def n_pos(self) -> int:
        return self.class_counts[0]

    @property
    def n_neg(self) -> int:
        return self.class_counts[1]


def _check_binary_input(scores: np.ndarray, positive: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    if scores.ndim != 1 or positive.shape != scores.shape:
        raise ValidationError("scores and positive mask must be equal-length vectors")
    if not np.all(np.isfinite(scores)):
        raise ValidationError("scores must be finite")
    n1 = int(positive.sum())
    if n1 == 0 or n1 == scores.shape[0]:
        raise ValidationError("need at least one positive and one negative")
    return scores, positive


def binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """P(score+ > score-) with half credit for ties.

    Computed by the O(n log n) rank method, which matches brute-force
    pair counting exactly (rank sums are half-integers, so the
    arithmetic is exact).
    """
    scores, positive = _check_binary_input(scores, positive)
    return kernels.mannwhitney_auc(scores, np.ascontiguousarray(positive, dtype=np.uint8))


def var_delong(scores: np.ndarray, positive: np.ndarray) -> float:
    """DeLong (1988) U-statistic variance of the binary AUC."""
    scores, positive = _check_binary_input(scores, positive)
    n1 = int(positive.sum())
    n0 = scores.shape[0] - n1
    if n1 < 2 or n0 < 2:
        raise ValidationError(
            f"DeLong variance needs >= 2 samples per group, got {n1} and {n0}"
        )
    _, var = kernels.delong_auc_variance(
        scores, np.ascontiguousarray(positive, dtype=np.uint8)
    )
    return var


def var_hanley(auc: float, n_pos: int, n_neg: int) -> float:
    """Hanley-McNeil (1982) closed-form approximation to Var(AUC)."""
    if not 0.0 <= auc <= 1.0:
        raise ValidationError(f"AUC must be in [0, 1], got {auc}")
    if n_pos < 1 or n_neg < 1:
        raise ValidationError("group sizes must be >= 1")
    q1 = auc / (2.0 - auc)
    q2 = 2.0 * auc * auc / (1.0 + auc)
    var = (
        auc * (1.0 - auc)
        + (n_pos - 1) * (q1 - auc * auc)
        + (n_neg - 1) * (q2 - auc * auc)
    ) / (n_pos * n_neg)
    if var < 0.0:
        if var <= -1e-15:
            raise ValidationError(f"Hanley variance came out negative: {var}")
        var = 0.0
    return var


def estimate_binary(
    scores: np.ndarray, positive: np.ndarray, method: VarianceMethod = VarianceMethod.HANLEY
) -> AucEstimate:
    """Binary AUC plus its variance under the chosen estimator."""
    scores, positive = _check_binary_input(scores, positive)
    n1 = int(positive.sum())
    n0 = scores.shape[0] - n1
    pos_u8 = np.ascontiguousarray(positive, dtype=np.uint8)
    if method == VarianceMethod.DELONG:
        if n1 < 2 or n0 < 2:
            raise ValidationError(
                f"DeLong variance needs >= 2 samples per group, got {n1} and {n0}"
            )
        value, var = kernels.delong_auc_variance(scores, pos_u8)
    elif method == VarianceMethod.HANLEY:
        value = kernels.mannwhitney_auc(scores, pos_u8)
        var = var_hanley(value, n1, n0)
    else:
        raise ValidationError(f"unsupported binary variance method {method}")
    return AucEstimate(value=value, variance=var, method=method, class_counts=(n1, n0))


def _check_probs(probs: np.ndarray, labels: Labels) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape != (len(labels.y), labels.n_classes):
        raise ValidationError("probs must be an n x C matrix matching the labels")
    if np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-8:
        raise ValidationError("probs rows must sum to 1")
    return probs


def hand_till_components(probs: np.ndarray, labels: Labels) -> dict[ClassPair, float]:
    """Per class-pair AUCs A(c, c') = [A(c|c') + A(c'|c)] / 2.

    A(c|c') is the binary AUC of the column-c probabilities restricted to
    samples of classes c and c', with class c as positive.
    """
    probs = _check_probs(probs, labels)
    y = labels.y
    components: dict[ClassPair, float] = {}
    for c in range(1, labels.n_classes + 1):
        for cp in range(c + 1, labels.n_classes + 1):
            mask = (y == c) | (y == cp)
            sub_y = y[mask]
            a_c = binary_auc(probs[mask, c - 1], sub_y == c)
            a_cp = binary_auc(probs[mask, cp - 1], sub_y == cp)
            components[(c, cp)] = 0.5 * (a_c + a_cp)
    return components


def hand_till_auc(probs: np.ndarray, labels: Labels) -> float:
    """Hand-Till generalized AUC: mean of the class-pair components.

    For C = 2 this reduces exactly to ``binary_auc`` on the class-1
    probability.
    """
    components = hand_till_components(probs, labels)
    keys = sorted(components)
    return sum(components[k] for k in keys) / len(keys)


def var_handtill(
    binary_variances: Mapping[ClassPair, float],
    pair_covariances: Mapping[tuple[ClassPair, ClassPair], float],
    n_classes: int,
) -> float:
    """Variance of the Hand-Till AUC propagated from its binary components.

    Var = (4 / [C(C-1)]^2) * (sum of variances + 2 * sum of covariances),
    where covariances are looked up per unordered pair of class pairs and
    default to 0 when absent (pairs sharing no class).
    """
    pairs = [(c, cp) for c in range(1, n_classes + 1) for cp in range(c + 1, n_classes + 1)]
    for pair in pairs:
        if pair not in binary_variances:
            raise ValidationError(f"missing variance for class pair {pair}")
    sum_var = sum(binary_variances[p] for p in pairs)
    sum_cov = 0.0
    for i, p in enumerate(pairs):
        for q in pairs[i + 1 :]:
            cov = pair_covariances.get((p, q))
            if cov is None:
                cov = pair_covariances.get((q, p), 0.0)
            sum_cov += cov
    denom = n_classes * (n_classes - 1)
    return 4.0 / (denom * denom) * (sum_var + 2.0 * sum_cov)


def shared_class_covariances(
    variances: Mapping[ClassPair, float], rho: float
) -> dict[tuple[ClassPair, ClassPair], float]:
    """rho * sqrt(v_p * v_q) for class pairs sharing a class, 0 otherwise."""
    pairs = sorted(variances)
    out: dict[tuple[ClassPair, ClassPair], float] = {}
    for i, p in enumerate(pairs):
        for q in pairs[i + 1 :]:
            if set(p) & set(q):
                out[(p, q)] = rho * float(np.sqrt(variances[p] * variances[q]))
    return out

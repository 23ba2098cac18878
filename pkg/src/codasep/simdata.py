"""Seeded logistic-normal-multinomial generator with planted signals.

Per sample, log-abundances are Gaussian around a base profile; planted
signal features are shifted by ``effect_size`` for non-first classes,
with alternating sign across the signal list so that log-ratios among
planted features separate the classes too. Rows pass through a softmax
to a composition, multinomial sampling at the configured depth, and
random zeroing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import CountTable, CovariateMatrix, Labels
from .errors import ValidationError


@dataclass(frozen=True)
class SimSpec:
    n_per_class: tuple[int, ...]
    m: int
    signal_features: tuple[int, ...] = ()
    effect_size: float = 1.0
    covariate_confounding: float | None = None
    base_concentration: tuple[float, ...] | float = 1.0
    zero_rate: float = 0.0
    seed: int = 0
    depth: int = 10_000

    def __post_init__(self) -> None:
        n_per_class = tuple(int(v) for v in self.n_per_class)
        if len(n_per_class) < 2 or any(v < 1 for v in n_per_class):
            raise ValidationError("need at least 2 classes with >= 1 sample each")
        if self.m < 2:
            raise ValidationError("need at least 2 features")
        signal = tuple(int(v) for v in self.signal_features)
        if len(set(signal)) != len(signal) or any(not 0 <= s < self.m for s in signal):
            raise ValidationError("signal_features must be distinct indices below m")
        if not np.isfinite(self.effect_size):
            raise ValidationError("effect_size must be finite")
        if not 0.0 <= self.zero_rate < 1.0:
            raise ValidationError("zero_rate must be in [0, 1)")
        if self.depth < 1:
            raise ValidationError("depth must be >= 1")
        if self.covariate_confounding is not None and not signal:
            raise ValidationError("confounding needs at least one signal feature")
        base = self.base_concentration
        if np.isscalar(base):
            if base <= 0:
                raise ValidationError("base_concentration must be positive")
        else:
            base = tuple(float(v) for v in base)
            if len(base) != self.m or any(v <= 0 for v in base):
                raise ValidationError("base_concentration must be m positive values")
            object.__setattr__(self, "base_concentration", base)
        object.__setattr__(self, "n_per_class", n_per_class)
        object.__setattr__(self, "signal_features", signal)


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    return p


def simulate(spec: SimSpec) -> tuple[CountTable, Labels, CovariateMatrix, list[str]]:
    """Generate (counts, labels, covariates, planted feature ids)."""
    rng = np.random.default_rng(spec.seed)
    n_classes = len(spec.n_per_class)
    n = sum(spec.n_per_class)
    m = spec.m
    y = np.repeat(np.arange(1, n_classes + 1), spec.n_per_class)

    base = np.asarray(
        spec.base_concentration
        if not np.isscalar(spec.base_concentration)
        else np.full(m, float(spec.base_concentration))
    )
    mu = np.log(base / base.mean())
    log_abundance = mu[None, :] + rng.normal(0.0, 1.0, size=(n, m))

    signal = np.array(spec.signal_features, dtype=np.int64)
    if signal.size:
        signs = np.where(np.arange(signal.size) % 2 == 0, 1.0, -1.0)
        for c in range(2, n_classes + 1):
            rows = y == c
            shift = spec.effect_size * (c - 1) / (n_classes - 1)
            log_abundance[np.ix_(rows, signal)] += shift * signs[None, :]

    if spec.covariate_confounding is not None:
        strength = float(spec.covariate_confounding)
        u = rng.normal(0.0, 1.0, size=n) + strength * (y != 1)
        log_abundance[:, signal[0]] += strength * u
        covariates = CovariateMatrix(values=u[:, None], names=("confounder",))
    else:
        covariates = CovariateMatrix.empty(n)

    proportions = _softmax_rows(log_abundance)
    counts = np.empty((n, m), dtype=np.int64)
    for i in range(n):
        counts[i] = rng.multinomial(spec.depth, proportions[i])
    if spec.zero_rate > 0.0:
        counts[rng.random(size=(n, m)) < spec.zero_rate] = 0

    width = len(str(m))
    feature_ids = tuple(f"F{j + 1:0{width}d}" for j in range(m))
    sample_ids = tuple(f"S{i + 1:0{len(str(n))}d}" for i in range(n))
    class_names = tuple(f"g{c:02d}" for c in range(1, n_classes + 1))

    table = CountTable(counts=counts, sample_ids=sample_ids, feature_ids=feature_ids)
    labels = Labels(y=y, n_classes=n_classes, class_names=class_names)
    truth = [feature_ids[j] for j in spec.signal_features]
    return table, labels, covariates, truth

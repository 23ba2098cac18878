"""Rare-feature filtering, zero imputation, clr, and pairwise log-ratios.

The imputation is the Bayesian-multiplicative replacement with a uniform
per-feature Dirichlet prior: for sample i with count total N_i and prior
strength a per feature, each zero cell becomes ``N_i * a / (N_i + m*a)``
and every non-zero cell is scaled by the common factor
``1 - z_i * a / (N_i + m*a)`` (z_i = number of zeros in the row), so the
row total N_i is preserved and ratios among non-zero components are
unchanged. Replacement uses the posterior mean deterministically; the
``seed`` argument is accepted for forward compatibility with sampled
variants and is currently unused.

All log-ratios use the natural logarithm.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .datamodel import CountTable, _freeze
from .errors import MemoryBudgetError, ValidationError

#: Above this many pairwise columns the design is generated lazily.
DEFAULT_DENSE_COLUMN_CAP = 10_000


@dataclass(frozen=True)
class ImputationWarning:
    """Replacement value not clearly below the smallest non-zero count in a row."""

    sample_id: str
    replacement: float
    smallest_nonzero: float
    n_zero_cells: int


@dataclass(frozen=True)
class Composition:
    """Strictly positive real abundances; row totals preserved from the counts."""

    values: np.ndarray
    sample_ids: tuple[str, ...]
    feature_ids: tuple[str, ...]
    row_totals: np.ndarray
    imputation_warnings: tuple[ImputationWarning, ...] = ()

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError("composition must be a 2-D matrix")
        if values.size and values.min() <= 0:
            raise ValidationError("composition must be strictly positive")
        totals = np.asarray(self.row_totals, dtype=np.float64)
        if totals.shape != (values.shape[0],):
            raise ValidationError("row_totals must have one entry per sample")
        if not np.allclose(values.sum(axis=1), totals, rtol=1e-9, atol=0.0):
            raise ValidationError("composition rows do not sum to the recorded totals")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "row_totals", _freeze(totals))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ClrMatrix:
    """Centered log-ratio coordinates; each row sums to zero."""

    values: np.ndarray
    sample_ids: tuple[str, ...] = ()
    feature_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        m = values.shape[1]
        if values.size and np.max(np.abs(values.sum(axis=1))) > 1e-10 * m:
            raise ValidationError("clr rows must sum to zero")
        object.__setattr__(self, "values", _freeze(values))


@dataclass(frozen=True, order=True)
class PairIndex:
    """Unordered feature pair stored as 0-based indices with j < j_prime."""

    j: int
    j_prime: int

    def __post_init__(self) -> None:
        if not 0 <= self.j < self.j_prime:
            raise ValidationError(f"invalid pair ({self.j}, {self.j_prime})")


def all_pairs(m: int) -> list[PairIndex]:
    """All feature pairs in (j, j') lexicographic order, j < j'."""
    return [PairIndex(a, b) for a, b in itertools.combinations(range(m), 2)]


def filter_rare(table: CountTable, min_nonzero: int = 3) -> tuple[CountTable, list[str]]:
    """Drop features observed (non-zero) in fewer than ``min_nonzero`` samples.

    Returns the filtered table (original column order preserved) and the
    ids of the removed features.
    """
    if min_nonzero < 1:
        raise ValidationError("min_nonzero must be >= 1")
    nonzero = np.count_nonzero(table.counts, axis=0)
    keep = nonzero >= min_nonzero
    removed = [fid for fid, k in zip(table.feature_ids, keep) if not k]
    if keep.sum() < 2:
        raise ValidationError(
            f"only {int(keep.sum())} features survive the rare-feature filter; need >= 2"
        )
    if not removed:
        return table, []
    filtered = CountTable(
        counts=table.counts[:, keep],
        sample_ids=table.sample_ids,
        feature_ids=tuple(fid for fid, k in zip(table.feature_ids, keep) if k),
    )
    return filtered, removed


def _impute_array(counts: np.ndarray, prior_strength: float) -> np.ndarray:
    """Multiplicative zero replacement on a raw (n, m) count array."""
    counts = np.asarray(counts, dtype=np.float64)
    totals = counts.sum(axis=1)
    prior_total = counts.shape[1] * prior_strength
    zero_mask = counts == 0
    n_zero = zero_mask.sum(axis=1)
    replacement = totals * prior_strength / (totals + prior_total)
    factor = 1.0 - n_zero * prior_strength / (totals + prior_total)
    values = counts * factor[:, None]
    values[zero_mask] = np.broadcast_to(replacement[:, None], counts.shape)[zero_mask]
    return values


def impute_zeros(
    table: CountTable, prior_strength: float = 0.5, seed: int | None = None
) -> Composition:
    """Replace zero counts by their Bayesian-multiplicative posterior means."""
    if prior_strength <= 0:
        raise ValidationError("prior_strength must be positive")
    counts = table.counts.astype(np.float64)
    totals = counts.sum(axis=1)
    if np.any(totals <= 0):
        i = int(np.argmax(totals <= 0))
        raise ValidationError(f"sample {table.sample_ids[i]!r} has zero total count")

    zero_mask = counts == 0
    n_zero = zero_mask.sum(axis=1)
    prior_total = table.n_features * prior_strength
    replacement = totals * prior_strength / (totals + prior_total)
    values = _impute_array(counts, prior_strength)

    warnings: list[ImputationWarning] = []
    for i in np.flatnonzero(n_zero):
        smallest = counts[i][~zero_mask[i]].min()
        if replacement[i] >= smallest:
            warnings.append(
                ImputationWarning(
                    sample_id=table.sample_ids[i],
                    replacement=float(replacement[i]),
                    smallest_nonzero=float(smallest),
                    n_zero_cells=int(n_zero[i]),
                )
            )
    return Composition(
        values=values,
        sample_ids=table.sample_ids,
        feature_ids=table.feature_ids,
        row_totals=totals,
        imputation_warnings=tuple(warnings),
    )


def clr_transform(comp: Composition) -> ClrMatrix:
    """Row-wise centered log-ratio transform via log-domain mean subtraction."""
    logv = np.log(comp.values)
    values = logv - logv.mean(axis=1, keepdims=True)
    return ClrMatrix(values=values, sample_ids=comp.sample_ids, feature_ids=comp.feature_ids)


def pairwise_logratio(comp: Composition, pair: PairIndex) -> np.ndarray:
    """Per-sample log(x_j / x_j') for one feature pair."""
    if pair.j_prime >= comp.n_features:
        raise ValidationError(f"pair {pair} out of range for m={comp.n_features}")
    return np.log(comp.values[:, pair.j]) - np.log(comp.values[:, pair.j_prime])


class LogRatioDesign:
    """Lazy n x m(m-1)/2 matrix of all pairwise log-ratios.

    Columns are ordered by (j, j') lexicographic with j < j'; column (j, j')
    holds log(x_j) - log(x_j') per sample. Columns are generated on demand
    so the full matrix never has to exist in memory.
    """

    def __init__(self, comp: Composition):
        self._log = np.log(comp.values)
        self.pairs = all_pairs(comp.n_features)
        self.shape = (comp.n_samples, len(self.pairs))
        self.feature_ids = comp.feature_ids

    def column(self, idx: int) -> np.ndarray:
        pair = self.pairs[idx]
        return self._log[:, pair.j] - self._log[:, pair.j_prime]

    def iter_columns(self) -> Iterator[np.ndarray]:
        for idx in range(self.shape[1]):
            yield self.column(idx)

    def toarray(self, max_dense_columns: int | None = None) -> np.ndarray:
        if max_dense_columns is not None and self.shape[1] > max_dense_columns:
            raise MemoryBudgetError(
                f"dense design would have {self.shape[1]} columns, cap is {max_dense_columns}"
            )
        out = np.empty(self.shape)
        for idx in range(self.shape[1]):
            out[:, idx] = self.column(idx)
        return out


def logratio_design(
    comp: Composition,
    lazy: bool | None = None,
    max_dense_columns: int = DEFAULT_DENSE_COLUMN_CAP,
) -> np.ndarray | LogRatioDesign:
    """Matrix of all pairwise log-ratios, dense or lazy.

    With ``lazy=None`` the design is materialized when it has at most
    ``max_dense_columns`` columns and returned as a ``LogRatioDesign``
    otherwise. ``lazy=False`` forces materialization and refuses (raises
    ``MemoryBudgetError``) above the cap.
    """
    design = LogRatioDesign(comp)
    if lazy is True:
        return design
    if lazy is False:
        return design.toarray(max_dense_columns)
    if design.shape[1] > max_dense_columns:
        return design
    return design.toarray()

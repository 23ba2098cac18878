"""Core data types and ingestion of count tables and sample metadata.

Input files are UTF-8 delimited text (comma or tab). A count table has a
header row ``sample_id,<feature_1>,...,<feature_m>`` and one row per
sample; a metadata table has a header ``sample_id,<col>,...`` and is
joined to the count table by sample id.

All types are immutable after construction (backing arrays are marked
read-only) and safe to share across threads and processes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataFormatError, ValidationError

_DELIMITERS = (",", "\t")
# Categorical covariates beyond this many levels are almost certainly a
# mis-specified column (e.g. an id), not a covariate.
_MAX_CATEGORICAL_LEVELS = 32


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _check_unique(ids: Sequence[str], kind: str) -> None:
    seen: set[str] = set()
    for x in ids:
        if x in seen:
            raise ValidationError(f"duplicate {kind} id {x!r}")
        seen.add(x)


@dataclass(frozen=True)
class CountTable:
    """Non-negative integer counts, samples in rows and features in columns."""

    counts: np.ndarray
    sample_ids: tuple[str, ...]
    feature_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise ValidationError("counts must be a 2-D matrix")
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.all(counts == np.floor(counts)):
                raise ValidationError("counts must be integral")
            counts = counts.astype(np.int64)
        else:
            counts = counts.astype(np.int64, copy=False)
        if counts.size and counts.min() < 0:
            i, j = np.argwhere(counts < 0)[0]
            raise ValidationError(
                f"negative count at sample {self.sample_ids[i]!r}, "
                f"feature {self.feature_ids[j]!r}"
            )
        n, m = counts.shape
        if n < 2 or m < 2:
            raise ValidationError(f"need at least 2 samples and 2 features, got {n}x{m}")
        if len(self.sample_ids) != n or len(self.feature_ids) != m:
            raise ValidationError("id lists do not match counts shape")
        _check_unique(self.sample_ids, "sample")
        _check_unique(self.feature_ids, "feature")
        object.__setattr__(self, "counts", _freeze(counts))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))

    @property
    def n_samples(self) -> int:
        return self.counts.shape[0]

    @property
    def n_features(self) -> int:
        return self.counts.shape[1]


@dataclass(frozen=True)
class Labels:
    """Class labels as indices 1..C plus the class names they encode.

    Class index order is lexicographic on the raw label strings; the last
    class (index C) acts as the multinomial baseline downstream.
    """

    y: np.ndarray
    n_classes: int
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=np.int64)
        if y.ndim != 1:
            raise ValidationError("labels must be a vector")
        if self.n_classes < 2:
            raise ValidationError("need at least 2 classes")
        if len(self.class_names) != self.n_classes:
            raise ValidationError("class_names length must equal n_classes")
        present = np.unique(y)
        expected = np.arange(1, self.n_classes + 1)
        if not np.array_equal(present, expected):
            raise ValidationError(
                f"labels must cover classes 1..{self.n_classes}, found {present.tolist()}"
            )
        object.__setattr__(self, "y", _freeze(y))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes + 1)[1:]

    @classmethod
    def from_strings(cls, raw: Sequence[str]) -> "Labels":
        names = sorted(set(raw))
        if len(names) < 2:
            raise ValidationError("label column has a single distinct value")
        index = {name: i + 1 for i, name in enumerate(names)}
        y = np.array([index[v] for v in raw], dtype=np.int64)
        return cls(y=y, n_classes=len(names), class_names=tuple(names))


@dataclass(frozen=True)
class CovariateMatrix:
    """Numeric covariates aligned with the sample order; may be empty (p=0)."""

    values: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError("covariates must be a 2-D matrix")
        if values.shape[1] != len(self.names):
            raise ValidationError("covariate names do not match column count")
        if values.size and not np.all(np.isfinite(values)):
            raise ValidationError("covariates must be finite")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "names", tuple(self.names))

    @classmethod
    def empty(cls, n: int) -> "CovariateMatrix":
        return cls(values=np.zeros((n, 0)), names=())

    @property
    def n_covariates(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Imputed composition, class labels, and covariates with consistent n."""

    composition: "Composition"  # noqa: F821 - defined in codasep.preprocess
    labels: Labels
    covariates: CovariateMatrix

    def __post_init__(self) -> None:
        n = self.composition.values.shape[0]
        if len(self.labels.y) != n:
            raise ValidationError(
                f"labels cover {len(self.labels.y)} samples, composition has {n}"
            )
        if self.covariates.values.shape[0] != n:
            raise ValidationError(
                f"covariates cover {self.covariates.values.shape[0]} samples, "
                f"composition has {n}"
            )

    @property
    def n_samples(self) -> int:
        return self.composition.values.shape[0]

    @property
    def feature_ids(self) -> tuple[str, ...]:
        return self.composition.feature_ids


def _sniff_delimiter(header: str, delimiter: str | None) -> str:
    if delimiter is not None:
        if delimiter not in _DELIMITERS:
            raise ValidationError(f"unsupported delimiter {delimiter!r}; use ',' or tab")
        return delimiter
    return "\t" if "\t" in header else ","


def _read_rows(path: str | Path, delimiter: str | None) -> tuple[list[str], list[list[str]], str]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.strip():
            raise DataFormatError(f"{path}: empty file")
        delim = _sniff_delimiter(first, delimiter)
        header = next(csv.reader([first], delimiter=delim))
        rows = [row for row in csv.reader(fh, delimiter=delim) if row]
    return [h.strip() for h in header], rows, delim


def read_count_table(path: str | Path, delimiter: str | None = None) -> CountTable:
    """Read a delimited count table (header of feature ids, one row per sample).

    The delimiter is auto-detected between comma and tab unless given.
    Cells must parse as non-negative integers; offending cells are
    reported by sample and feature id.
    """
    header, rows, _ = _read_rows(path, delimiter)
    if len(header) < 2:
        raise DataFormatError(f"{path}: header must list at least one feature")
    feature_ids = header[1:]
    sample_ids: list[str] = []
    counts = np.zeros((len(rows), len(feature_ids)), dtype=np.int64)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataFormatError(
                f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}"
            )
        sample_ids.append(row[0].strip())
        for c, cell in enumerate(row[1:]):
            text = cell.strip()
            try:
                value = int(text)
            except ValueError:
                raise DataFormatError(
                    f"{path}: cell at sample {row[0].strip()!r}, feature "
                    f"{feature_ids[c]!r} is not an integer: {text!r}"
                ) from None
            if value < 0:
                raise DataFormatError(
                    f"{path}: negative count at sample {row[0].strip()!r}, "
                    f"feature {feature_ids[c]!r}: {text}"
                )
            counts[r, c] = value
    return CountTable(counts=counts, sample_ids=tuple(sample_ids), feature_ids=tuple(feature_ids))


def write_count_table(table: CountTable, path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["sample_id", *table.feature_ids])
        for i, sid in enumerate(table.sample_ids):
            writer.writerow([sid, *table.counts[i].tolist()])


def _is_numeric_column(values: list[str]) -> bool:
    for v in values:
        try:
            float(v)
        except ValueError:
            return False
    return True


def read_metadata(
    path: str | Path,
    label_column: str,
    covariate_columns: Sequence[str] = (),
    sample_ids: Sequence[str] = (),
    delimiter: str | None = None,
) -> tuple[Labels, CovariateMatrix]:
    """Read sample metadata and align it to the count-table sample order.

    ``sample_ids`` gives the join order (normally ``table.sample_ids``).
    Labels are re-indexed 1..C in lexicographic order of the distinct raw
    values. Covariate columns that parse numerically are taken as-is;
    otherwise they are one-hot encoded with the lexicographically first
    level dropped as reference (columns named ``<col>=<level>``).
    """
    if not sample_ids:
        raise ValidationError("sample_ids from the count table are required for the join")
    header, rows, _ = _read_rows(path, delimiter)
    columns = {name: i for i, name in enumerate(header)}
    if label_column not in columns:
        raise ValidationError(f"{path}: no column named {label_column!r}")
    for col in covariate_columns:
        if col not in columns:
            raise ValidationError(f"{path}: no covariate column named {col!r}")

    by_id: dict[str, list[str]] = {}
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataFormatError(
                f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}"
            )
        sid = row[0].strip()
        if sid in by_id:
            raise DataFormatError(f"{path}: duplicate sample id {sid!r}")
        by_id[sid] = [c.strip() for c in row]

    ordered: list[list[str]] = []
    for sid in sample_ids:
        if sid not in by_id:
            raise ValidationError(f"{path}: sample id {sid!r} missing from metadata")
        ordered.append(by_id[sid])

    labels = Labels.from_strings([row[columns[label_column]] for row in ordered])

    blocks: list[np.ndarray] = []
    names: list[str] = []
    for col in covariate_columns:
        raw = [row[columns[col]] for row in ordered]
        if any(v == "" for v in raw):
            sid = sample_ids[raw.index("")]
            raise ValidationError(f"{path}: empty value in column {col!r} for sample {sid!r}")
        if _is_numeric_column(raw):
            values = np.array([float(v) for v in raw])
            if not np.all(np.isfinite(values)):
                raise ValidationError(f"{path}: non-finite value in covariate {col!r}")
            blocks.append(values[:, None])
            names.append(col)
        else:
            levels = sorted(set(raw))
            if len(levels) > _MAX_CATEGORICAL_LEVELS:
                raise ValidationError(
                    f"{path}: covariate {col!r} has {len(levels)} levels; "
                    "not a usable categorical covariate"
                )
            for level in levels[1:]:  # first level is the reference
                blocks.append(np.array([1.0 if v == level else 0.0 for v in raw])[:, None])
                names.append(f"{col}={level}")
    if blocks:
        covariates = CovariateMatrix(values=np.hstack(blocks), names=tuple(names))
    else:
        covariates = CovariateMatrix.empty(len(ordered))
    return labels, covariates

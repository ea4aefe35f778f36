"""Numeric tabular datasets, CSV ingestion and row-index views."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptyFile,
    IndexOutOfBounds,
    LengthMismatch,
    MissingTarget,
    NonFiniteValue,
    ParseError,
    ValidationError,
)


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable numeric table: an ``n x p`` feature matrix and a target vector.

    Columns keep their header order. All values are float64 and finite.
    """

    features: np.ndarray
    feature_names: tuple
    target: np.ndarray
    target_name: str = "y"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.target, dtype=np.float64).reshape(-1)
        names = tuple(str(s) for s in self.feature_names)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError("dataset needs at least one row and one feature")
        if X.shape[0] != y.shape[0]:
            raise LengthMismatch(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
        if len(names) != X.shape[1]:
            raise LengthMismatch(f"{len(names)} names for {X.shape[1]} feature columns")
        if len(set(names)) != len(names):
            raise ValidationError("feature names must be unique")
        if self.target_name in names:
            raise ValidationError(f"target name {self.target_name!r} clashes with a feature name")
        for arr, offset in ((X, 0), (y.reshape(-1, 1), X.shape[1])):
            bad = np.argwhere(~np.isfinite(arr))
            if len(bad):
                r, c = bad[0]
                raise NonFiniteValue(int(r), int(c) + offset, "non-finite value")
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "target", _readonly(y))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def feature_index(self, name_or_index) -> int:
        """Resolve a feature name (or pass through a valid integer index)."""
        if isinstance(name_or_index, (int, np.integer)):
            j = int(name_or_index)
            if not 0 <= j < self.p:
                raise IndexOutOfBounds(f"feature index {j} outside 0..{self.p - 1}")
            return j
        try:
            return self.feature_names.index(str(name_or_index))
        except ValueError:
            raise ValidationError(f"unknown feature {name_or_index!r}") from None

    def to_csv(self, path) -> None:
        """Write the dataset as CSV; floats use shortest round-trip ``repr``."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.feature_names) + [self.target_name])
            for row, t in zip(self.features, self.target):
                w.writerow([repr(float(v)) for v in row] + [repr(float(t))])


@dataclass(frozen=True, eq=False)
class IndexView:
    """Lazy row selection of a :class:`Dataset`. Duplicate indices are kept."""

    base: Dataset
    indices: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.indices)

    @property
    def X(self) -> np.ndarray:
        return self.base.features[self.indices]

    @property
    def y(self) -> np.ndarray:
        return self.base.target[self.indices]

    def materialize(self) -> Dataset:
        if len(self.indices) == 0:
            raise ValidationError("cannot materialize an empty view")
        return Dataset(self.X, self.base.feature_names, self.y, self.base.target_name)


def view(dataset: Dataset, indices: Sequence[int]) -> IndexView:
    """Select rows of ``dataset`` in the given order (duplicates allowed)."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= dataset.n):
        bad = idx[(idx < 0) | (idx >= dataset.n)][0]
        raise IndexOutOfBounds(f"row index {int(bad)} outside 0..{dataset.n - 1}")
    idx.setflags(write=False)
    return IndexView(dataset, idx)


def full_view(dataset: Dataset) -> IndexView:
    return view(dataset, np.arange(dataset.n))


def load_csv(path, target_name: str, delimiter: str | None = None) -> Dataset:
    """Load a delimited numeric table with a header row.

    Parameters
    ----------
    path
        CSV file (UTF-8, ``.`` decimal separator).
    target_name
        Header of the target column; it is removed from the features.
    delimiter
        Cell separator. ``None`` uses ``;`` when the header contains
        semicolons but no commas, else ``,``.

    Raises
    ------
    EmptyFile, MissingTarget, ParseError, NonFiniteValue
        Cell errors carry 0-based data-row and column positions.
    """
    with open(Path(path), newline="", encoding="utf-8") as fh:
        text = fh.read()
    if delimiter is None:
        first = text.split("\n", 1)[0]
        delimiter = ";" if ";" in first and "," not in first else ","
    rows = list(csv.reader(io.StringIO(text), delimiter=delimiter))
    rows = [r for r in rows if r]
    if not rows:
        raise EmptyFile(f"{path}: no header row")
    header = [h.strip().strip('"') for h in rows[0]]
    if target_name not in header:
        raise MissingTarget(f"target column {target_name!r} not in header {header}")
    body = rows[1:]
    if not body:
        raise EmptyFile(f"{path}: header but no data rows")
    values = np.empty((len(body), len(header)), dtype=np.float64)
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise ParseError(i, min(len(row), len(header)), f"expected {len(header)} cells, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(i, j, f"cannot parse {cell!r} as a number") from None
            if not math.isfinite(v):
                raise NonFiniteValue(i, j, f"non-finite value {cell!r}")
            values[i, j] = v
    t = header.index(target_name)
    keep = [j for j in range(len(header)) if j != t]
    if not keep:
        raise ValidationError("no feature columns besides the target")
    return Dataset(values[:, keep], [header[j] for j in keep], values[:, t], target_name)

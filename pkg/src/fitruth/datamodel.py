"""Dataset, instance and per-feature distribution metadata.

Tabular data is read from delimiter-separated text with a mandatory header.
Column kinds come from a small ``name = kind`` schema file::

    variance = continuous
    smoker   = binary
    grade    = ordinal 1 2 3
    class    = label

Statistics are population statistics (divide by N).
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .errors import ContractError, ParseError, SchemaError


class FeatureKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary_onehot"
    ORDINAL = "ordinal"


@dataclass(frozen=True)
class FeatureMeta:
    name: str
    kind: FeatureKind
    mean: float
    std_dev: float
    observed_min: float
    observed_max: float
    levels: tuple[float, ...] = ()

    def __post_init__(self):
        if self.std_dev < 0:
            raise ContractError(f"negative std_dev for feature {self.name!r}")
        if self.kind is FeatureKind.ORDINAL:
            if not self.levels:
                raise SchemaError(f"ordinal feature {self.name!r} needs at least one level")
            if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
                raise SchemaError(f"ordinal levels of {self.name!r} must be strictly increasing")

    def with_std(self, std_dev: float) -> "FeatureMeta":
        """Copy with a substituted spread (used for neighbourhood statistics)."""
        return FeatureMeta(self.name, self.kind, self.mean, float(std_dev),
                           self.observed_min, self.observed_max, self.levels)


@dataclass(frozen=True)
class ColumnSpec:
    kind: FeatureKind | None  # None marks the label column
    levels: tuple[float, ...] = ()


def _column_stats(name: str, spec: ColumnSpec, column: np.ndarray) -> FeatureMeta:
    n = column.shape[0]
    # two-pass: mean first, then centred sum of squares
    mean = math.fsum(column.tolist()) / n
    var = math.fsum(((column - mean) ** 2).tolist()) / n
    return FeatureMeta(
        name=name,
        kind=spec.kind,
        mean=mean,
        std_dev=math.sqrt(var),
        observed_min=float(column.min()),
        observed_max=float(column.max()),
        levels=spec.levels,
    )


@dataclass(frozen=True)
class Dataset:
    features: tuple[FeatureMeta, ...]
    rows: np.ndarray
    labels: np.ndarray | None = None
    label_name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] < 1:
            raise ContractError("dataset needs at least one row")
        if self.rows.shape[1] != len(self.features):
            raise ContractError("row width does not match the number of features")
        if self.labels is not None and self.labels.shape[0] != self.rows.shape[0]:
            raise ContractError("label count does not match row count")

    @classmethod
    def from_arrays(
        cls,
        rows,
        names: Sequence[str] | None = None,
        kinds: Sequence[FeatureKind | str] | None = None,
        labels=None,
        levels: dict[str, Sequence[float]] | None = None,
        label_name: str | None = "label",
    ) -> "Dataset":
        rows = np.array(rows, dtype=float, ndmin=2)
        n_features = rows.shape[1]
        names = list(names) if names is not None else [f"f{j + 1}" for j in range(n_features)]
        kinds = [FeatureKind(k) for k in kinds] if kinds is not None else [FeatureKind.CONTINUOUS] * n_features
        levels = levels or {}
        if len(names) != n_features or len(kinds) != n_features:
            raise ContractError("names/kinds length does not match the number of columns")
        specs = [ColumnSpec(k, tuple(float(v) for v in levels.get(nm, ()))) for nm, k in zip(names, kinds)]
        for nm, spec, col in zip(names, specs, rows.T):
            _check_domain(nm, spec, col)
        rows.setflags(write=False)
        metas = tuple(_column_stats(nm, spec, col) for nm, spec, col in zip(names, specs, rows.T))
        if labels is not None:
            labels = np.asarray(labels, dtype=int)
            labels.setflags(write=False)
        return cls(metas, rows, labels, label_name if labels is not None else None)

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def means(self) -> np.ndarray:
        return np.array([f.mean for f in self.features])

    @property
    def stds(self) -> np.ndarray:
        return np.array([f.std_dev for f in self.features])

    def instance(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n_rows:
            raise IndexError(f"instance index {i} out of range [0, {self.n_rows})")
        return self.rows[i].copy()

    def subset(self, idx) -> "Dataset":
        """Rows selected by ``idx`` with statistics recomputed."""
        return Dataset.from_arrays(
            self.rows[idx],
            self.feature_names,
            [f.kind for f in self.features],
            None if self.labels is None else self.labels[idx],
            {f.name: f.levels for f in self.features if f.levels},
            self.label_name or "label",
        )


def as_instance(values, n_features: int) -> np.ndarray:
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.shape[0] != n_features:
        raise ContractError(f"instance has {x.shape[0]} values, expected {n_features}")
    return x


def feature_stats(ds: Dataset, j: int) -> FeatureMeta:
    if not 0 <= j < ds.n_features:
        raise IndexError(f"feature index {j} out of range [0, {ds.n_features})")
    return ds.features[j]


def _check_domain(name: str, spec: ColumnSpec, col: np.ndarray, row_offset: int = 0):
    if not np.all(np.isfinite(col)):
        bad = int(np.flatnonzero(~np.isfinite(col))[0])
        raise ParseError("non-finite value", row=bad + row_offset, column=name)
    if spec.kind is FeatureKind.BINARY:
        bad = np.flatnonzero((col != 0) & (col != 1))
        if bad.size:
            raise ParseError("binary feature takes values outside {0, 1}", row=int(bad[0]) + row_offset, column=name)
    elif spec.kind is FeatureKind.ORDINAL:
        bad = np.flatnonzero(~np.isin(col, spec.levels))
        if bad.size:
            raise ParseError("ordinal value not among declared levels", row=int(bad[0]) + row_offset, column=name)


def parse_kind(text: str) -> ColumnSpec:
    """Parse one schema value: ``continuous``, ``binary``, ``ordinal 1 2 3`` or ``label``."""
    parts = text.replace(",", " ").replace("(", " ").replace(")", " ").split()
    if not parts:
        raise SchemaError("empty kind specification")
    head = parts[0].lower()
    if head == "label":
        return ColumnSpec(None)
    if head == "continuous":
        return ColumnSpec(FeatureKind.CONTINUOUS)
    if head in ("binary", "binary_onehot", "onehot"):
        return ColumnSpec(FeatureKind.BINARY)
    if head == "ordinal":
        try:
            levels = tuple(float(p) for p in parts[1:])
        except ValueError as exc:
            raise SchemaError(f"bad ordinal level in {text!r}") from exc
        if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
            raise SchemaError(f"ordinal levels must be non-empty and strictly increasing: {text!r}")
        return ColumnSpec(FeatureKind.ORDINAL, levels)
    raise SchemaError(f"unknown column kind {parts[0]!r}")


def parse_schema(text: str) -> dict[str, ColumnSpec]:
    parser = configparser.ConfigParser(delimiters=("=",), interpolation=None)
    parser.optionxform = str  # keep column-name case
    try:
        parser.read_string("[schema]\n" + text)
    except configparser.Error as exc:
        raise SchemaError(f"unreadable schema: {exc}") from exc
    schema = {name: parse_kind(value) for name, value in parser["schema"].items()}
    if sum(spec.kind is None for spec in schema.values()) > 1:
        raise SchemaError("at most one label column may be declared")
    return schema


def load_schema(path: str | Path) -> dict[str, ColumnSpec]:
    return parse_schema(Path(path).read_text(encoding="utf-8"))


def load_dataset(source: TextIO | str | Path, schema: dict[str, ColumnSpec] | str | Path,
                 delimiter: str = ",") -> Dataset:
    if isinstance(schema, (str, Path)):
        schema = load_schema(schema)
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return load_dataset(fh, schema, delimiter)

    reader = csv.reader(source, delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("missing header row", row=0) from None
    unknown = [h for h in header if h not in schema]
    if unknown:
        raise SchemaError(f"columns missing from schema: {unknown}")
    missing = [name for name in schema if name not in header]
    if missing:
        raise SchemaError(f"schema names columns absent from data: {missing}")

    values = []
    for lineno, record in enumerate(reader, start=1):
        if not record or all(not c.strip() for c in record):
            continue
        if len(record) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(record)}", row=lineno)
        row = []
        for name, cell in zip(header, record):
            cell = cell.strip()
            if not cell:
                raise ParseError("missing value", row=lineno, column=name)
            try:
                row.append(float(cell))
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", row=lineno, column=name) from None
        values.append(row)
    if not values:
        raise ParseError("no data rows")

    table = np.array(values, dtype=float)
    feature_cols = [i for i, h in enumerate(header) if schema[h].kind is not None]
    label_cols = [i for i, h in enumerate(header) if schema[h].kind is None]
    names = [header[i] for i in feature_cols]
    for i in feature_cols:
        _check_domain(header[i], schema[header[i]], table[:, i], row_offset=1)
    labels = None
    label_name = None
    if label_cols:
        raw = table[:, label_cols[0]]
        if np.any(raw != np.round(raw)):
            bad = int(np.flatnonzero(raw != np.round(raw))[0])
            raise ParseError("label is not a class index", row=bad + 1, column=header[label_cols[0]])
        labels = raw.astype(int)
        label_name = header[label_cols[0]]
    return Dataset.from_arrays(
        table[:, feature_cols],
        names,
        [schema[n].kind for n in names],
        labels,
        {n: schema[n].levels for n in names if schema[n].levels},
        label_name or "label",
    )


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dump_dataset(ds: Dataset, sink: TextIO | None = None, delimiter: str = ",") -> str:
    """Canonical re-emission; 17 significant digits so a reload is bit-exact."""
    out = sink if sink is not None else io.StringIO()
    writer = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    header = ds.feature_names + ([ds.label_name or "label"] if ds.labels is not None else [])
    writer.writerow(header)
    for i, row in enumerate(ds.rows):
        cells = [_fmt(v) for v in row]
        if ds.labels is not None:
            cells.append(str(int(ds.labels[i])))
        writer.writerow(cells)
    return out.getvalue() if sink is None else ""


def dump_schema(ds: Dataset) -> str:
    lines = []
    for f in ds.features:
        if f.kind is FeatureKind.ORDINAL:
            lines.append(f"{f.name} = ordinal " + " ".join(_fmt(v) for v in f.levels))
        elif f.kind is FeatureKind.BINARY:
            lines.append(f"{f.name} = binary")
        else:
            lines.append(f"{f.name} = continuous")
    if ds.labels is not None:
        lines.append(f"{ds.label_name or 'label'} = label")
    return "\n".join(lines) + "\n"


"""Tabular well data with per-variable role tags.

A :class:`Dataset` is an immutable ``n x d`` float matrix plus an ordered list
of :class:`VariableMeta`. CSV files carry the numbers; a sidecar JSON file maps
each column name to ``{"role": ..., "unit": ...}``.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class Role(str, enum.Enum):
    GEOLOGICAL = "Geological"
    ENGINEERING = "Engineering"
    TREATMENT = "Treatment"
    OUTPUT = "Output"

    @classmethod
    def parse(cls, text: str) -> "Role":
        if isinstance(text, cls):
            return text
        for r in cls:
            if r.value.lower() == str(text).strip().lower():
                return r
        raise ValueError(f"unknown role {text!r}")


class DatasetError(Exception):
    pass


class MissingFile(DatasetError, FileNotFoundError):
    pass


class HeaderMetaMismatch(DatasetError):
    def __init__(self, missing_meta: Sequence[str], missing_columns: Sequence[str]):
        self.missing_meta = list(missing_meta)
        self.missing_columns = list(missing_columns)
        super().__init__(
            f"columns without metadata: {self.missing_meta}; "
            f"metadata without columns: {self.missing_columns}"
        )


class NonNumericCell(DatasetError):
    def __init__(self, row: int, column: str, text: str = ""):
        self.row = row
        self.column = column
        super().__init__(f"non-numeric cell {text!r} at row {row}, column {column!r}")


class EmptyTable(DatasetError):
    pass


class TooFewRows(DatasetError):
    pass


class DegenerateColumnWarning(UserWarning):
    pass


@dataclass(frozen=True)
class VariableMeta:
    name: str
    role: Role
    unit: str = ""

    def to_json(self) -> dict:
        return {"role": self.role.value, "unit": self.unit}


@dataclass(frozen=True, eq=False)
class Dataset:
    columns: tuple[VariableMeta, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim != 2:
            raise DatasetError("values must be a 2-d matrix")
        cols = tuple(self.columns)
        if vals.shape[1] != len(cols):
            raise DatasetError(f"{vals.shape[1]} value columns but {len(cols)} metadata entries")
        if vals.shape[0] < 1 or vals.shape[1] < 1:
            raise EmptyTable("dataset needs at least one row and one column")
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise DatasetError("duplicate column names")
        if not np.isfinite(vals).all():
            raise DatasetError("non-finite entries in dataset")
        vals.flags.writeable = False
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.index(c) for c in names]
        return self.values[:, idx].reshape(self.n, len(idx))

    def meta(self, name: str) -> VariableMeta:
        return self.columns[self.index(name)]

    def names_with_role(self, *roles: Role) -> list[str]:
        return [c.name for c in self.columns if c.role in roles]

    def output_name(self) -> str:
        outs = self.names_with_role(Role.OUTPUT)
        if len(outs) != 1:
            raise DatasetError(f"expected exactly one Output variable, found {outs}")
        return outs[0]

    def subset_rows(self, rows: Iterable[int]) -> "Dataset":
        return Dataset(self.columns, self.values[np.asarray(list(rows), dtype=int)])

    def subset_columns(self, names: Sequence[str]) -> "Dataset":
        return Dataset(tuple(self.meta(c) for c in names), self.matrix(names))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.columns == other.columns and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Dataset(n={self.n}, d={self.d}, columns={self.names})"


# ----------------------------------------------------------------------------
# metadata files
# ----------------------------------------------------------------------------


def parse_meta(raw: Mapping[str, Mapping | str]) -> dict[str, VariableMeta]:
    """Build metadata from ``{name: {"role": ..., "unit": ...}}`` or ``{name: role}``."""
    out = {}
    for name, entry in raw.items():
        if name == "format_version":
            continue
        if isinstance(entry, str):
            out[name] = VariableMeta(name, Role.parse(entry))
        else:
            out[name] = VariableMeta(name, Role.parse(entry["role"]), str(entry.get("unit", "")))
    return out


def load_meta(path) -> dict[str, VariableMeta]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"metadata file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_meta(json.load(fh))


def dump_meta(columns: Iterable[VariableMeta], path) -> None:
    doc = {"format_version": 1}
    doc.update({c.name: c.to_json() for c in columns})
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# ----------------------------------------------------------------------------
# CSV
# ----------------------------------------------------------------------------

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


def load_csv(path, meta, missing: str = "reject") -> Dataset:
    """Read a headered CSV file into a :class:`Dataset`.

    Parameters
    ----------
    path : path-like
        UTF-8, comma separated, first row is the header.
    meta : mapping or path-like
        Role metadata, either already parsed or a sidecar JSON path.
    missing : {"reject", "mean"}
        Empty cells raise :class:`NonNumericCell` under ``"reject"``; under
        ``"mean"`` they are filled with the column mean of the present values.
    """
    if missing not in ("reject", "mean"):
        raise ValueError("missing must be 'reject' or 'mean'")
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"CSV file not found: {path}")
    if not isinstance(meta, Mapping):
        meta = load_meta(meta)
    elif meta and not isinstance(next(iter(meta.values())), VariableMeta):
        meta = parse_meta(meta)

    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyTable(f"{path} has no header")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise EmptyTable(f"{path} has no data rows")

    missing_meta = [h for h in header if h not in meta]
    missing_cols = [m for m in meta if m not in header]
    if missing_meta or missing_cols:
        raise HeaderMetaMismatch(missing_meta, missing_cols)

    d = len(header)
    values = np.empty((len(body), d))
    holes = []
    for i, row in enumerate(body, start=1):
        if len(row) != d:
            raise DatasetError(f"row {i} has {len(row)} cells, expected {d}")
        for j, cell in enumerate(row):
            text = cell.strip()
            if text.lower() in _MISSING_TOKENS:
                if missing == "reject":
                    raise NonNumericCell(i, header[j], text)
                values[i - 1, j] = np.nan
                holes.append((i - 1, j))
                continue
            try:
                v = float(text)
            except ValueError:
                raise NonNumericCell(i, header[j], text) from None
            if not math.isfinite(v):
                raise NonNumericCell(i, header[j], text)
            values[i - 1, j] = v
    if holes:
        means = np.nanmean(values, axis=0)
        for i, j in holes:
            if not np.isfinite(means[j]):
                raise NonNumericCell(i + 1, header[j], "")
            values[i, j] = means[j]
    return Dataset(tuple(meta[h] for h in header), values)


def write_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ds.names)
        for row in ds.values:
            w.writerow([repr(float(v)) for v in row])


# ----------------------------------------------------------------------------
# transforms
# ----------------------------------------------------------------------------


def standardize(ds: Dataset, keep: Iterable[str] = ()) -> Dataset:
    """Z-score every column (sample standard deviation, ``ddof=1``).

    Columns named in ``keep`` are copied unchanged. Constant columns become
    all zeros and raise a :class:`DegenerateColumnWarning` instead of failing.
    """
    keep = set(keep)
    unknown = keep - set(ds.names)
    if unknown:
        raise DatasetError(f"unknown columns {sorted(unknown)}")
    x = ds.values
    out = np.zeros_like(x)
    if ds.n < 2:
        warnings.warn("a single row cannot be standardized", DegenerateColumnWarning, stacklevel=2)
        return Dataset(ds.columns, out)
    mu = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    for j, name in enumerate(ds.names):
        if name in keep:
            out[:, j] = x[:, j]
            continue
        if sd[j] <= 1e-12 * max(1.0, abs(mu[j])):
            warnings.warn(f"column {name!r} is constant", DegenerateColumnWarning, stacklevel=2)
            continue
        out[:, j] = (x[:, j] - mu[j]) / sd[j]
    return Dataset(ds.columns, out)


def split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded train/test row partition.

    The test part holds ``round(n * test_fraction)`` rows clamped to
    ``[1, n - 1]``. Rows keep their original relative order in both parts.
    """
    train_rows, test_rows = split_indices(ds.n, test_fraction, seed)
    return ds.subset_rows(train_rows), ds.subset_rows(test_rows)


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Row indices of the partition :func:`split` would produce."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    if n < 2:
        raise TooFewRows("need at least two rows to split")
    n_test = min(max(int(math.floor(n * test_fraction + 0.5)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])

"""Data model and file formats for features, attribute tables and splits.

Class ids are dense integers ``0..K-1`` given by the row order of the
attribute table. Feature values are held in float64 whatever the on-disk
width.

On-disk formats
---------------
feature CSV
    header ``id,label,f0,...,f{p-1}``, one sample per row.
attribute CSV
    header ``class,a0,...,a{d-1}``, one class per row (continuous and binary
    forms live in separate files).
binary matrix
    ``b"IBSC"``, version byte ``0x01``, uint32 LE rows, uint32 LE cols, then
    row-major float32 LE values. A binary *dataset* is a binary matrix whose
    first column holds the class id.
split file
    two lines ``seen: 0,1,...`` and ``unseen: 5,6,...``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyClassError, ParseError, ValidationError

MAGIC = b"IBSC"
VERSION = 1
_HEADER = struct.Struct("<4sBII")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    ids: np.ndarray = None

    def __post_init__(self):
        features = _frozen(self.features, np.float64)
        labels = _frozen(self.labels, np.int64)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ValidationError(f"features must be a non-empty n x p matrix, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValidationError(f"expected {features.shape[0]} labels, got {labels.shape[0]}")
        if not np.all(np.isfinite(features)):
            raise ValidationError("features contain non-finite values")
        n_classes = len(self.class_names)
        bad = (labels < 0) | (labels >= n_classes)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise ValidationError(f"row {row}: unknown class id {labels[row]} (declared classes: {n_classes})")
        ids = np.arange(features.shape[0]) if self.ids is None else self.ids
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))
        object.__setattr__(self, "ids", _frozen(ids, np.int64))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def indices_of(self, class_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == class_id)

    def subset(self, classes) -> np.ndarray:
        """Row indices of samples whose label is in ``classes``."""
        return np.flatnonzero(np.isin(self.labels, sorted(classes)))


@dataclass(frozen=True)
class AttributeTable:
    continuous: np.ndarray
    binary: np.ndarray
    class_names: tuple[str, ...] = None

    def __post_init__(self):
        cont = _frozen(self.continuous, np.float64)
        binary = _frozen(self.binary, np.float64)
        if cont.ndim != 2 or cont.shape[0] < 1 or cont.shape[1] < 1:
            raise ValidationError(f"attribute table must be a non-empty K x d matrix, got {cont.shape}")
        if cont.shape != binary.shape:
            raise ValidationError(f"continuous shape {cont.shape} != binary shape {binary.shape}")
        if not np.all(np.isfinite(cont)):
            raise ValidationError("continuous attributes contain non-finite values")
        off = ~np.isin(binary, (0.0, 1.0))
        if off.any():
            k, n = np.argwhere(off)[0]
            raise ValidationError(f"binary attribute [{k},{n}] = {binary[k, n]} is not 0 or 1")
        names = self.class_names
        if names is None:
            names = tuple(str(i) for i in range(cont.shape[0]))
        if len(names) != cont.shape[0]:
            raise ValidationError(f"{len(names)} class names for {cont.shape[0]} classes")
        object.__setattr__(self, "continuous", cont)
        object.__setattr__(self, "binary", _frozen(binary, np.int8))
        object.__setattr__(self, "class_names", tuple(str(c) for c in names))

    @property
    def K(self) -> int:
        return self.continuous.shape[0]

    @property
    def d(self) -> int:
        return self.continuous.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    seen: frozenset = field(default_factory=frozenset)
    unseen: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        seen = frozenset(int(c) for c in self.seen)
        unseen = frozenset(int(c) for c in self.unseen)
        if seen & unseen:
            raise ValidationError(f"classes both seen and unseen: {sorted(seen & unseen)}")
        if len(seen) < 2:
            raise ValidationError("need at least 2 seen classes")
        if len(unseen) < 1:
            raise ValidationError("need at least 1 unseen class")
        object.__setattr__(self, "seen", seen)
        object.__setattr__(self, "unseen", unseen)

    @property
    def seen_sorted(self) -> list[int]:
        return sorted(self.seen)

    @property
    def unseen_sorted(self) -> list[int]:
        return sorted(self.unseen)

    def check(self, dataset: Dataset = None, n_classes: int = None) -> None:
        """Raise ValidationError if the split does not fit the data."""
        if n_classes is not None:
            out = sorted(c for c in self.seen | self.unseen if not 0 <= c < n_classes)
            if out:
                raise ValidationError(f"split references undeclared classes {out}")
        if dataset is not None:
            missing = sorted(set(np.unique(dataset.labels).tolist()) - (self.seen | self.unseen))
            if missing:
                raise ValidationError(f"classes {missing} appear in samples but not in the split")


# --- binary matrix ---------------------------------------------------------

def write_matrix_binary(matrix, path) -> None:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValidationError("binary matrix format stores 2-D arrays only")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(m.astype("<f4").tobytes(order="C"))


def read_matrix_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 4 * rows * cols
    if len(raw) != expected:
        raise ParseError(f"{path}: expected {expected} bytes for {rows}x{cols}, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size, count=rows * cols)
    return values.astype(np.float64).reshape(rows, cols)


# --- CSV helpers -----------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _read_csv(path, first_cols: list[str], prefix: str, trailing: tuple = ()):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        lead = len(first_cols)
        if header[:lead] != first_cols:
            raise ParseError(f"{path}: header must start with {','.join(first_cols)}")
        tail = len(trailing)
        if tail and tuple(header[-tail:]) != tuple(trailing):
            raise ParseError(f"{path}: header must end with {','.join(trailing)}")
        width = len(header) - lead - tail
        if width < 1:
            raise ParseError(f"{path}: header declares no value columns")
        expected = [f"{prefix}{j}" for j in range(width)]
        if header[lead : lead + width] != expected:
            raise ParseError(f"{path}: value columns must be named {prefix}0..{prefix}{width - 1}")
        keys, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                values.append([float(v) for v in row[lead:]])
            except ValueError as exc:
                raise ParseError(f"{path}: row {lineno}: {exc}") from None
            keys.append(row[:lead])
    if not values:
        raise ParseError(f"{path}: no data rows")
    values = np.array(values, dtype=np.float64)
    if tail:
        return keys, values[:, :width], values[:, width:]
    return keys, values


def _parse_int(text: str, path, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{path}: {what} {text!r} is not an integer") from None


# --- datasets --------------------------------------------------------------

def load_dataset(path, format: str = "csv", class_names=None) -> Dataset:
    """Load a feature file.

    ``class_names`` declares the valid classes (normally those of the attribute
    table); without it every id up to the largest label is accepted.
    """
    return _load_dataset(path, format, class_names)[0]


def load_scored_dataset(path, class_names=None, column: str = "screen_score"):
    """Load a feature CSV that carries one trailing score column."""
    ds, extra = _load_dataset(path, "csv", class_names, trailing=(column,))
    return ds, extra[:, 0]


def _load_dataset(path, format, class_names, trailing=()):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"features file not found: {path}")
    extra = None
    if format == "csv":
        parsed = _read_csv(path, ["id", "label"], "f", trailing)
        keys, features = parsed[0], parsed[1]
        if trailing:
            extra = parsed[2]
        ids = [_parse_int(k[0], path, "id") for k in keys]
        labels = [_parse_int(k[1], path, "label") for k in keys]
    elif format == "binary":
        m = read_matrix_binary(path)
        if m.shape[1] < 2:
            raise ParseError(f"{path}: binary dataset needs a label column and at least one feature")
        labels = m[:, 0]
        if np.any(labels != np.round(labels)):
            raise ParseError(f"{path}: non-integer label in column 0")
        labels = labels.astype(np.int64)
        features = m[:, 1:]
        ids = None
    else:
        raise ValidationError(f"unknown dataset format {format!r}")
    if class_names is None:
        top = max(int(np.max(labels)), 0)
        class_names = [str(i) for i in range(top + 1)]
    return Dataset(features=features, labels=labels, class_names=class_names, ids=ids), extra


def write_dataset(dataset: Dataset, path, format: str = "csv", extra_columns: dict = None) -> None:
    """Write a dataset; ``extra_columns`` (CSV only) appends named columns."""
    if format == "binary":
        write_matrix_binary(np.column_stack([dataset.labels, dataset.features]), path)
        return
    if format != "csv":
        raise ValidationError(f"unknown dataset format {format!r}")
    extra_columns = extra_columns or {}
    header = ["id", "label"] + [f"f{j}" for j in range(dataset.p)] + list(extra_columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in range(dataset.n):
            row = [int(dataset.ids[r]), int(dataset.labels[r])]
            row += [_fmt(v) for v in dataset.features[r]]
            row += [_fmt(col[r]) for col in extra_columns.values()]
            w.writerow(row)


# --- attributes ------------------------------------------------------------

def _load_attribute_csv(path):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"attribute file not found: {path}")
    keys, values = _read_csv(path, ["class"], "a")
    return [k[0] for k in keys], values


def load_attribute_table(continuous_path, binary_path) -> AttributeTable:
    names_c, cont = _load_attribute_csv(continuous_path)
    names_b, binary = _load_attribute_csv(binary_path)
    if cont.shape != binary.shape:
        raise ValidationError(f"continuous attributes have shape {cont.shape}, binary {binary.shape}")
    if names_c != names_b:
        raise ValidationError("continuous and binary attribute files list different classes")
    return AttributeTable(continuous=cont, binary=binary, class_names=names_c)


def write_attribute_table(attrs: AttributeTable, continuous_path, binary_path) -> None:
    for path, m in ((continuous_path, attrs.continuous), (binary_path, attrs.binary)):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["class"] + [f"a{j}" for j in range(attrs.d)])
            for name, row in zip(attrs.class_names, m):
                if m.dtype.kind == "f":
                    w.writerow([name] + [_fmt(v) for v in row])
                else:
                    w.writerow([name] + [int(v) for v in row])


# --- splits ----------------------------------------------------------------

def load_split(path) -> SplitSpec:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"split file not found: {path}")
    parts = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep or key not in ("seen", "unseen"):
            raise ParseError(f"{path}: line {lineno}: expected 'seen:' or 'unseen:'")
        parts[key] = [_parse_int(t.strip(), path, "class id") for t in rest.split(",") if t.strip()]
    if set(parts) != {"seen", "unseen"}:
        raise ParseError(f"{path}: needs both 'seen:' and 'unseen:' lines")
    return SplitSpec(seen=parts["seen"], unseen=parts["unseen"])


def write_split(split: SplitSpec, path) -> None:
    Path(path).write_text(
        "seen: " + ",".join(map(str, split.seen_sorted)) + "\n"
        "unseen: " + ",".join(map(str, split.unseen_sorted)) + "\n"
    )


def class_centroids(dataset: Dataset, classes) -> dict[int, np.ndarray]:
    """Arithmetic mean of each requested class's feature rows."""
    out = {}
    for c in sorted(classes):
        rows = dataset.features[dataset.labels == c]
        if rows.shape[0] == 0:
            raise EmptyClassError(f"class {c} has no samples")
        out[c] = rows.mean(axis=0)
    return out


__all__ = [
    "AttributeTable",
    "Dataset",
    "SplitSpec",
    "class_centroids",
    "load_attribute_table",
    "load_dataset",
    "load_scored_dataset",
    "load_split",
    "read_matrix_binary",
    "write_attribute_table",
    "write_dataset",
    "write_matrix_binary",
    "write_split",
]

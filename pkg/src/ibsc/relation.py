"""Attribute-to-feature relation matrix and environment dimensions."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import AttributeTable, Dataset, SplitSpec, read_matrix_binary, write_matrix_binary
from .errors import DimensionError, ParseError, ValidationError
from .sparse_linear import (
    DEFAULT_LAMBDA,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    CalibratedModel,
    SparseLinearModel,
    calibrate_probability,
    nonzero_mask,
    train_l1_linear,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RelationMatrix:
    """Binary ``d x p`` matrix; ``R[i, j] == 1`` when feature j is relevant to attribute i."""

    R: np.ndarray
    degenerate_rows: frozenset = frozenset()

    def __post_init__(self):
        R = np.array(self.R, dtype=np.int8, copy=True)
        if R.ndim != 2:
            raise DimensionError(f"relation matrix must be 2-D, got shape {R.shape}")
        if not np.all((R == 0) | (R == 1)):
            raise ValidationError("relation matrix entries must be 0 or 1")
        degenerate = frozenset(int(i) for i in self.degenerate_rows)
        if any(R[i].any() for i in degenerate):
            raise ValidationError("degenerate rows must be all-zero")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "degenerate_rows", degenerate)

    def __eq__(self, other):
        if not isinstance(other, RelationMatrix):
            return NotImplemented
        return np.array_equal(self.R, other.R) and self.degenerate_rows == other.degenerate_rows

    __hash__ = None

    @property
    def d(self) -> int:
        return self.R.shape[0]

    @property
    def p(self) -> int:
        return self.R.shape[1]

    def relevant_dims(self, attr_index: int) -> np.ndarray:
        return np.flatnonzero(self.R[attr_index])


def attribute_labels(dataset: Dataset, attrs: AttributeTable, split: SplitSpec, attr_index: int,
                     rows=None) -> np.ndarray:
    """Per-sample 0/1 labels: the binary attribute of each sample's class.

    ``rows`` restricts to those sample indices (default: all seen-class samples).
    """
    if not 0 <= attr_index < attrs.d:
        raise ValidationError(f"attribute index {attr_index} out of range [0, {attrs.d})")
    if rows is None:
        rows = dataset.subset(split.seen)
    return attrs.binary[dataset.labels[rows], attr_index].astype(np.int64)


def _fit_one(X, y, lam, seed, tol, max_iter):
    model = train_l1_linear(X, y, lam=lam, tol=tol, max_iter=max_iter, seed=seed, standardize=True)
    return model, calibrate_probability(model, X, y)


def fit_relation(
    dataset: Dataset,
    attrs: AttributeTable,
    split: SplitSpec,
    lam: float = DEFAULT_LAMBDA,
    seed: int = 0,
    threads: int = 1,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[RelationMatrix, dict[int, CalibratedModel]]:
    """Train one sparse classifier per attribute on the seen-class samples.

    Returns the relation matrix and the calibrated per-attribute models
    (degenerate attributes have no model).
    """
    if attrs.d < 1:
        raise ValidationError("attribute table has no attributes")
    rows = dataset.subset(split.seen)
    if rows.size == 0:
        raise ValidationError("no seen-class samples available")
    X = dataset.features[rows]
    labels = {i: attribute_labels(dataset, attrs, split, i, rows) for i in range(attrs.d)}
    degenerate = {i for i, y in labels.items() if np.unique(y).size < 2}
    todo = [i for i in range(attrs.d) if i not in degenerate]

    def job(i):
        return i, _fit_one(X, labels[i], lam, seed + i, tol, max_iter)

    if threads > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(job, todo))
    else:
        results = dict(map(job, todo))

    R = np.zeros((attrs.d, dataset.p), dtype=np.int8)
    models = {}
    for i in todo:
        base, calibrated = results[i]
        R[i] = base.support
        models[i] = calibrated
    if degenerate:
        log.info("attributes constant over seen classes: %s", sorted(degenerate))
    return RelationMatrix(R=R, degenerate_rows=frozenset(degenerate)), models


def build_relation_matrix(dataset, attrs, split, lam=DEFAULT_LAMBDA, seed=0, threads=1) -> RelationMatrix:
    return fit_relation(dataset, attrs, split, lam=lam, seed=seed, threads=threads)[0]


def environment_dims(rel: RelationMatrix) -> np.ndarray:
    """Feature indices relevant to no attribute (all-zero columns of R)."""
    return np.flatnonzero(~rel.R.any(axis=0))


def relation_f1(learned: RelationMatrix, truth: RelationMatrix) -> np.ndarray:
    """Row-wise F1 of a learned relation against a reference one."""
    L = learned.R.astype(bool)
    T = truth.R.astype(bool)
    tp = (L & T).sum(axis=1)
    denom = L.sum(axis=1) + T.sum(axis=1)
    return np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1), 1.0)


# --- persistence -----------------------------------------------------------

def save_relation(rel: RelationMatrix, matrix_path, degenerate_path) -> None:
    write_matrix_binary(rel.R, matrix_path)
    Path(degenerate_path).write_text("".join(f"{i}\n" for i in sorted(rel.degenerate_rows)))


def load_relation(matrix_path, degenerate_path) -> RelationMatrix:
    R = read_matrix_binary(matrix_path)
    text = Path(degenerate_path).read_text() if Path(degenerate_path).exists() else ""
    try:
        degenerate = {int(line) for line in text.split()}
    except ValueError:
        raise ParseError(f"{degenerate_path}: expected one integer per line") from None
    return RelationMatrix(R=R, degenerate_rows=degenerate)


def _arr(a):
    return None if a is None else [float(v) for v in a]


def save_models(models: dict[int, CalibratedModel], path) -> None:
    doc = {}
    for i, m in sorted(models.items()):
        b = m.base
        doc[str(i)] = {
            "weights": _arr(b.weights),
            "bias": b.bias,
            "lambda": b.lam,
            "mean": _arr(b.mean),
            "scale": _arr(b.scale),
            "slope": m.slope,
            "intercept": m.intercept,
        }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_models(path) -> dict[int, CalibratedModel]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    out = {}
    for key, m in doc.items():
        w = np.array(m["weights"], dtype=np.float64)
        w.setflags(write=False)
        base = SparseLinearModel(
            weights=w,
            bias=float(m["bias"]),
            lam=float(m["lambda"]),
            nonzero_count=int(nonzero_mask(w).sum()),
            mean=None if m["mean"] is None else np.array(m["mean"]),
            scale=None if m["scale"] is None else np.array(m["scale"]),
        )
        out[int(key)] = CalibratedModel(base=base, slope=float(m["slope"]), intercept=float(m["intercept"]))
    return out

"""Unseen-class classifiers, top-1 accuracy and the strategy comparison.

Strategies:

``M1``
    primary-source samples relabeled as the unseen class, unchanged.
``M2``
    M1 with ``r`` random dims per sample redrawn uniformly from the seen-data
    range, ``r`` being the number of dims splicing would replace.
``M3``
    M1 with exactly the dims splicing would replace redrawn the same way.
``IBSC`` / ``IBSC_S``
    spliced samples before / after screening.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .config import PipelineConfig
from .construction import (
    ConstructedSample,
    PairwiseStats,
    SourcePlan,
    build_source_plan,
    construct_all,
    pairwise_stats,
    replaced_dims,
    samples_as_matrix,
)
from .data import AttributeTable, Dataset, SplitSpec, class_centroids
from .errors import EmptyClassError, ValidationError
from .relation import RelationMatrix, fit_relation
from .screening import screen_all
from .sparse_linear import standardize_params

log = logging.getLogger(__name__)

STRATEGIES = ("M1", "M2", "M3", "IBSC", "IBSC_S")
RANDOMIZED = -2  # provenance marker for dims a baseline overwrote with noise


@dataclass(frozen=True)
class NearestCentroidClassifier:
    classes: np.ndarray
    centroids: np.ndarray

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        diff = X[:, None, :] - self.centroids[None, :, :]
        d2 = np.sum(diff * diff, axis=-1)
        return self.classes[np.argmin(d2, axis=1)]


@dataclass(frozen=True)
class LinearOVRClassifier:
    classes: np.ndarray
    weights: np.ndarray  # (n_classes, p)
    biases: np.ndarray
    mean: np.ndarray
    scale: np.ndarray

    def decision_function(self, X) -> np.ndarray:
        Z = (np.atleast_2d(np.asarray(X, dtype=np.float64)) - self.mean) / self.scale
        return Z @ self.weights.T + self.biases

    def predict(self, X) -> np.ndarray:
        if self.classes.size == 1:
            return np.repeat(self.classes, np.atleast_2d(X).shape[0])
        return self.classes[np.argmax(self.decision_function(X), axis=1)]


def _fit_l2_squared_hinge(Z, y_pm, lam):
    n, p = Z.shape

    def fun(theta):
        w, b = theta[:p], theta[p]
        r = 1.0 - y_pm * (Z @ w + b)
        act = np.maximum(r, 0.0)
        f = np.mean(act * act) + lam * np.dot(w, w)
        coef = -(2.0 / n) * y_pm * act
        grad = np.empty(p + 1)
        grad[:p] = Z.T @ coef + 2.0 * lam * w
        grad[p] = coef.sum()
        return f, grad

    res = minimize(fun, np.zeros(p + 1), jac=True, method="L-BFGS-B",
                   options={"maxiter": 2000, "gtol": 1e-9, "ftol": 1e-15})
    return res.x[:p], res.x[p]


def train_unseen_classifier(X, y, kind: str = "linear_ovr", lam: float = 0.01, classes=None):
    """Fit the final classifier on labeled (constructed) samples.

    ``classes`` lists the classes that must be represented; a class without
    training samples is an error.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    present = np.unique(y)
    if classes is None:
        classes = present
    classes = np.array(sorted(set(int(c) for c in classes)), dtype=np.int64)
    missing = sorted(set(classes.tolist()) - set(present.tolist()))
    if missing or X.shape[0] == 0:
        raise EmptyClassError(f"no training samples for classes {missing or classes.tolist()}")
    if kind == "nearest_centroid":
        C = np.array([X[y == c].mean(axis=0) for c in classes])
        return NearestCentroidClassifier(classes, C)
    if kind != "linear_ovr":
        raise ValidationError(f"unknown classifier kind {kind!r}")
    mean, scale = standardize_params(X)
    Z = (X - mean) / scale
    W = np.zeros((classes.size, X.shape[1]))
    b = np.zeros(classes.size)
    if classes.size > 1:
        for i, c in enumerate(classes):
            W[i], b[i] = _fit_l2_squared_hinge(Z, np.where(y == c, 1.0, -1.0), lam)
    return LinearOVRClassifier(classes, W, b, mean, scale)


def top1_accuracy(classifier, X, y) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    if y.size == 0:
        raise ValidationError("empty test set")
    return float(np.mean(classifier.predict(X) == y))


def per_class_accuracy(classifier, X, y) -> dict[int, float]:
    pred = classifier.predict(X)
    return {int(c): float(np.mean(pred[y == c] == c)) for c in np.unique(y)}


# --- baselines -------------------------------------------------------------

def baseline_construct(
    dataset: Dataset,
    attrs: AttributeTable,
    rel: RelationMatrix,
    plan: SourcePlan,
    mode: str,
    seed: int,
) -> list[ConstructedSample]:
    """Baseline training sets for every unseen class in the plan.

    Redrawn values come from the per-dim min..max of the seen-class samples.
    """
    if mode not in ("M1", "M2", "M3"):
        raise ValidationError(f"unknown baseline mode {mode!r}")
    rng = np.random.default_rng(seed)
    unseen = sorted(plan.sources)
    seen = {s for ranked in plan.ranking.values() for s in ranked}
    seen_rows = dataset.subset(seen)
    lo = dataset.features[seen_rows].min(axis=0)
    hi = dataset.features[seen_rows].max(axis=0)
    out = []
    for u in unseen:
        dims = replaced_dims(attrs, rel, plan, u) if mode != "M1" else None
        for b in dataset.indices_of(plan.primary(u)):
            feature = np.array(dataset.features[b])
            provenance = np.full(dataset.p, -1, dtype=np.int64)
            if mode == "M2" and dims.size:
                chosen = np.sort(rng.choice(dataset.p, size=dims.size, replace=False))
            elif mode == "M3":
                chosen = dims
            else:
                chosen = np.empty(0, dtype=np.int64)
            if chosen.size:
                feature[chosen] = rng.uniform(lo[chosen], hi[chosen])
                provenance[chosen] = RANDOMIZED
            feature.setflags(write=False)
            provenance.setflags(write=False)
            out.append(ConstructedSample(feature, u, int(b), provenance))
    return out


# --- full comparison -------------------------------------------------------

@dataclass
class PipelineArtifacts:
    relation: RelationMatrix
    models: dict
    stats: PairwiseStats
    plan: SourcePlan
    constructed: list
    screened: list
    scored: list


def build_artifacts(dataset, attrs, split, cfg: PipelineConfig, seed: int) -> PipelineArtifacts:
    """Relation, source plan, constructed and screened samples for one run."""
    split.check(dataset, attrs.K)
    if dataset.p < 1:
        raise ValidationError("dataset has no features")
    rel, models = fit_relation(dataset, attrs, split, lam=cfg.lam, seed=seed, threads=cfg.worker_count())
    stats = pairwise_stats(attrs)
    plan = build_source_plan(attrs, stats, split, k=cfg.k, auto_k=cfg.auto_k, k_max=cfg.k_max)
    constructed = construct_all(dataset, attrs, rel, plan, models, split, m=cfg.shortlist)
    centroids = class_centroids(dataset, split.seen)
    screened, scored = screen_all(constructed, attrs, split, centroids, cfg.keep_fraction)
    return PipelineArtifacts(rel, models, stats, plan, constructed, screened, scored)


@dataclass
class EvalReport:
    strategies: dict
    config: dict
    seed: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {name: self.strategies[name] for name in STRATEGIES if name in self.strategies}
        doc["config"] = self.config
        doc["seed"] = self.seed
        doc.update(self.extra)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def top1(self, strategy: str) -> float:
        return self.strategies[strategy]["top1"]


def evaluate_samples(samples, test_X, test_y, unseen, kind, lam) -> dict:
    X, y = samples_as_matrix(samples)
    clf = train_unseen_classifier(X, y, kind=kind, lam=lam, classes=unseen)
    return {
        "top1": top1_accuracy(clf, test_X, test_y),
        "per_class": {str(c): v for c, v in per_class_accuracy(clf, test_X, test_y).items()},
        "n_train": int(len(samples)),
    }


def unseen_test_set(dataset: Dataset, split: SplitSpec):
    rows = dataset.subset(split.unseen)
    if rows.size == 0:
        raise ValidationError("no real samples of unseen classes to test on")
    return dataset.features[rows], dataset.labels[rows]


def compare_strategies(dataset, attrs, split, config: PipelineConfig, seed: int,
                       artifacts: PipelineArtifacts | None = None) -> EvalReport:
    """Run M1, M2, M3, IBSC and IBSC_S under one seed and one classifier."""
    if artifacts is None:
        artifacts = build_artifacts(dataset, attrs, split, config, seed)
    test_X, test_y = unseen_test_set(dataset, split)
    unseen = split.unseen_sorted
    sets = {}
    for idx, mode in enumerate(("M1", "M2", "M3")):
        sets[mode] = baseline_construct(dataset, attrs, artifacts.relation, artifacts.plan, mode, seed + idx)
    sets["IBSC"] = artifacts.constructed
    sets["IBSC_S"] = artifacts.screened
    results = {
        name: evaluate_samples(sets[name], test_X, test_y, unseen, config.classifier, config.classifier_lambda)
        for name in STRATEGIES
    }
    for name in STRATEGIES:
        log.info("%-7s top1=%.4f", name, results[name]["top1"])
    return EvalReport(results, config.echo() | {"seed": seed}, seed)

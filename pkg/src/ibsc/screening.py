"""Dissimilarity-representation screening of constructed samples.

A class (or a single sample) is described by its squared distances to the
seen classes, divided by a space-specific scale ``theta2`` and l1-normalized.
Because the normalization divides by the sum, ``theta2`` cancels; the
normalized vector is computed straight from the squared distances so the
scale cannot perturb it even in the last bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import AttributeTable, SplitSpec
from .errors import DegenerateError, ValidationError

DEFAULT_KEEP_FRACTION = 0.5


@dataclass(frozen=True)
class DissimilarityVector:
    values: np.ndarray
    space: str
    raw: np.ndarray | None = None
    theta2: float | None = None


def l1_normalize(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    if np.any(raw < 0):
        raise ValidationError("dissimilarities must be non-negative")
    total = raw.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise DegenerateError("dissimilarity vector is all zero; cannot normalize")
    return raw / total


def _pair_sq_sum(C) -> float:
    diff = C[:, None, :] - C[None, :, :]
    sq = np.sum(diff * diff, axis=-1)
    return float(np.sum(sq[np.triu_indices(C.shape[0], k=1)]))


def _sq_dists(x, C):
    diff = C - x
    return np.sum(diff * diff, axis=-1)


def attribute_theta2(attrs: AttributeTable) -> float:
    """Sum of squared l2 attribute distances over all unordered class pairs."""
    return _pair_sq_sum(attrs.continuous)


def dissimilarity_attribute(attrs: AttributeTable, split: SplitSpec, u: int,
                            theta2: float | None = None) -> DissimilarityVector:
    """Normalized squared attribute distances from class ``u`` to each seen class (ascending ids)."""
    if len(split.seen) < 2:
        raise ValidationError("need at least two seen classes")
    if theta2 is None:
        theta2 = attribute_theta2(attrs)
    if not theta2 > 0:
        raise DegenerateError("all class attribute vectors coincide (theta^2 = 0)")
    sq = _sq_dists(attrs.continuous[u], attrs.continuous[split.seen_sorted])
    return DissimilarityVector(l1_normalize(sq), "attribute", sq / theta2, theta2)


def _centroid_matrix(centroids) -> np.ndarray:
    return np.array([centroids[c] for c in sorted(centroids)])


def dissimilarity_feature(sample, centroids: dict, theta2: float | None = None) -> DissimilarityVector:
    """Normalized squared distances from one sample to each seen-class centroid."""
    C = _centroid_matrix(centroids)
    if theta2 is None:
        theta2 = _pair_sq_sum(C)
    if not theta2 > 0:
        raise DegenerateError("seen-class centroids coincide (theta^2 = 0)")
    sq = _sq_dists(np.asarray(sample, dtype=np.float64), C)
    return DissimilarityVector(l1_normalize(sq), "feature", sq / theta2, theta2)


def feature_dissimilarities(X, centroids: dict) -> np.ndarray:
    """Row-wise :func:`dissimilarity_feature` values for a batch of samples."""
    C = _centroid_matrix(centroids)
    if not _pair_sq_sum(C) > 0:
        raise DegenerateError("seen-class centroids coincide (theta^2 = 0)")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    diff = X[:, None, :] - C[None, :, :]
    return l1_normalize(np.sum(diff * diff, axis=-1))


def keep_count(n: int, keep_fraction: float) -> int:
    if not 0 < keep_fraction <= 1:
        raise ValidationError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    # the epsilon stops 0.1 * 30 = 3.0000000000000004 from rounding up to 4
    return max(1, min(n, math.ceil(keep_fraction * n - 1e-9)))


def score_samples(constructed, D_a: DissimilarityVector, centroids: dict) -> list:
    """Return the samples with ``screen_score = ||D_f - D_a||_1`` filled in."""
    if not constructed:
        return []
    X = np.array([s.feature for s in constructed])
    D_f = feature_dissimilarities(X, centroids)
    scores = np.abs(D_f - D_a.values).sum(axis=1)
    return [s.with_score(v) for s, v in zip(constructed, scores)]


def _select(scored, keep_fraction):
    n_keep = keep_count(len(scored), keep_fraction)
    order = sorted(range(len(scored)), key=lambda i: (scored[i].screen_score, scored[i].base_sample, i))
    return [scored[i] for i in order[:n_keep]]


def screen_samples(constructed, D_a: DissimilarityVector, centroids: dict,
                   keep_fraction: float = DEFAULT_KEEP_FRACTION) -> list:
    """Keep the best-scoring ``ceil(keep_fraction * n)`` samples, best first.

    Ties go to the smaller base-sample index.
    """
    if not constructed:
        raise ValidationError("no constructed samples to screen")
    return _select(score_samples(constructed, D_a, centroids), keep_fraction)


def screen_all(constructed, attrs: AttributeTable, split: SplitSpec, centroids: dict,
               keep_fraction: float = DEFAULT_KEEP_FRACTION) -> tuple[list, list]:
    """Screen each unseen class separately.

    Returns ``(kept, scored)``: the survivors grouped by ascending class, and
    every sample with its score, grouped the same way.
    """
    keep_count(1, keep_fraction)
    by_class: dict[int, list] = {}
    for s in constructed:
        by_class.setdefault(s.target_class, []).append(s)
    theta2 = attribute_theta2(attrs)
    kept, scored = [], []
    for u in sorted(by_class):
        D_a = dissimilarity_attribute(attrs, split, u, theta2)
        group = score_samples(by_class[u], D_a, centroids)
        scored.extend(group)
        kept.extend(_select(group, keep_fraction))
    return kept, scored

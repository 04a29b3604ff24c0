"""L1-regularized linear SVC trained by exact cyclic coordinate descent, plus
Platt-style probability calibration.

The training objective, with labels mapped to ``y in {-1, +1}``, is::

    F(w, b) = (1/n) * sum_i max(0, 1 - y_i (w.x_i + b))**2 + lam * ||w||_1

The bias is unpenalized. Restricted to one coordinate the smooth part is a
convex piecewise quadratic whose derivative is piecewise linear and
non-decreasing, so every coordinate step is solved exactly by locating the
root of ``derivative + lam * sign`` among the sorted hinge breakpoints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DegenerateLabelsError, DimensionError, NumericError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.05
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 1000
NONZERO_RELATIVE = 1e-6
DUPLICATE_TOL = 1e-9
MIN_SLOPE = 1e-8


@dataclass(frozen=True)
class SparseLinearModel:
    """Trained sparse linear classifier.

    ``weights`` act on standardized inputs when ``mean``/``scale`` are set;
    :func:`decision_value` applies the stored transform.
    """

    weights: np.ndarray
    bias: float
    lam: float
    nonzero_count: int
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    n_iter: int = 0
    converged: bool = True
    objective_trace: tuple = field(default=(), repr=False)

    @property
    def p(self) -> int:
        return self.weights.shape[0]

    @property
    def support(self) -> np.ndarray:
        return nonzero_mask(self.weights)


@dataclass(frozen=True)
class CalibratedModel:
    base: SparseLinearModel
    slope: float
    intercept: float


def nonzero_mask(weights) -> np.ndarray:
    """A weight counts as nonzero iff it exceeds 1e-6 of the largest magnitude."""
    a = np.abs(np.asarray(weights, dtype=np.float64))
    top = a.max(initial=0.0)
    if top == 0.0:
        return np.zeros(a.shape, dtype=bool)
    return (a > NONZERO_RELATIVE * top) & (a > 0)


def _binary_labels(y) -> np.ndarray:
    y = np.asarray(y)
    values = np.unique(y)
    if not np.all(np.isin(values, (0, 1))):
        raise ValidationError(f"labels must be 0/1, got values {values.tolist()}")
    if values.size < 2:
        raise DegenerateLabelsError(f"labels contain a single class ({values.tolist()})")
    return np.where(y == 1, 1.0, -1.0)


def standardize_params(X) -> tuple[np.ndarray, np.ndarray]:
    """Column means and scales; constant columns get scale 1 so they map to 0."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return mean, scale


def objective(X, y_pm, w, b, lam) -> float:
    r = np.maximum(0.0, 1.0 - y_pm * (X @ w + b))
    return float(np.mean(r * r) + lam * np.abs(w).sum())


def _duplicate_groups(X, tol):
    """Map every column to a representative column it equals up to sign.

    Returns (representatives, group index per column, sign per column).
    """
    n, p = X.shape
    reps: list[int] = []
    group = np.empty(p, dtype=np.int64)
    sign = np.ones(p)
    for j in range(p):
        col = X[:, j]
        if reps:
            R = X[:, reps]
            lim = tol * max(1.0, float(np.abs(col).max()))
            same = np.flatnonzero(np.abs(R - col[:, None]).max(axis=0) <= lim)
            if same.size:
                group[j] = same[0]
                continue
            flipped = np.flatnonzero(np.abs(R + col[:, None]).max(axis=0) <= lim)
            if flipped.size and np.any(col != 0):
                group[j] = flipped[0]
                sign[j] = -1.0
                continue
        group[j] = len(reps)
        reps.append(j)
    return np.array(reps, dtype=np.int64), group, sign


def _solve_derivative(s, a, n, target):
    """Root t of h(t) = target, where h(t) = -(2/n) sum_{s_i - a_i t > 0} a_i (s_i - a_i t).

    h is continuous, piecewise linear and non-decreasing in t.
    """
    keep = a != 0
    s, a = s[keep], a[keep]
    bp = s / a
    order = np.argsort(bp, kind="stable")
    bp, s, a = bp[order], s[order], a[order]
    m = bp.size
    pos = a > 0
    as_ = a * s
    aa = a * a
    # active set on interval k = (bp[k-1], bp[k]): positives with index >= k,
    # negatives with index < k
    pos_as = np.where(pos, as_, 0.0)
    pos_aa = np.where(pos, aa, 0.0)
    neg_as = np.where(pos, 0.0, as_)
    neg_aa = np.where(pos, 0.0, aa)
    suf_as = np.concatenate([np.cumsum(pos_as[::-1])[::-1], [0.0]])
    suf_aa = np.concatenate([np.cumsum(pos_aa[::-1])[::-1], [0.0]])
    pre_as = np.concatenate([[0.0], np.cumsum(neg_as)])
    pre_aa = np.concatenate([[0.0], np.cumsum(neg_aa)])
    SA = suf_as + pre_as
    SQ = suf_aa + pre_aa
    h_at_bp = np.maximum.accumulate(-(2.0 / n) * (SA[:m] - bp * SQ[:m]))
    k = int(np.searchsorted(h_at_bp, target, side="left")) if m else 0
    if SQ[k] > 0:
        t = (SA[k] + 0.5 * n * target) / SQ[k]
        lo = bp[k - 1] if k > 0 else -np.inf
        hi = bp[k] if k < m else np.inf
        return float(min(max(t, lo), hi))
    # h is flat here; every point of the interval is a root
    if k < m:
        return float(bp[k])
    return float(bp[m - 1]) if m else 0.0


def _coordinate_step(s, a, n, lam):
    """Exact minimizer over t of (1/n) sum max(0, s - a t)^2 + lam |t|."""
    active = s > 0
    h0 = -(2.0 / n) * float(np.dot(a[active], s[active]))
    if abs(h0) <= lam:
        return 0.0
    if h0 < -lam:
        return max(_solve_derivative(s, a, n, -lam), 0.0)
    return min(_solve_derivative(s, a, n, lam), 0.0)


def _max_violation(X, y_pm, r, w, lam, n):
    act = np.maximum(r, 0.0)
    coef = y_pm * act
    g = -(2.0 / n) * (X.T @ coef)
    gb = -(2.0 / n) * coef.sum()
    viol = np.where(
        w != 0,
        np.abs(g + lam * np.sign(w)),
        np.maximum(np.abs(g) - lam, 0.0),
    )
    return max(float(viol.max(initial=0.0)), abs(gb))


def _coordinate_descent(X, y_pm, lam, tol, max_iter, rng):
    n, p = X.shape
    w = np.zeros(p)
    ya = y_pm[:, None] * X  # a_ij = y_i x_ij
    # start from the best bias for w = 0
    b = _solve_derivative(1.0 + y_pm * 0.0, y_pm, n, 0.0)
    r = 1.0 - y_pm * b
    trace = [float(np.mean(np.maximum(r, 0.0) ** 2))]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        for j in rng.permutation(p):
            a = ya[:, j]
            wj = w[j]
            s = r + a * wj if wj != 0.0 else r
            t = _coordinate_step(s, a, n, lam)
            if t != wj:
                r = s - a * t
                w[j] = t
        s = r + y_pm * b
        b = _solve_derivative(s, y_pm, n, 0.0)
        r = s - y_pm * b
        rp = np.maximum(r, 0.0)
        trace.append(float(np.mean(rp * rp) + lam * np.abs(w).sum()))
        if _max_violation(X, y_pm, r, w, lam, n) <= tol:
            converged = True
            break
    return w, b, it, converged, trace


def train_l1_linear(
    X,
    y,
    lam: float = DEFAULT_LAMBDA,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
    standardize: bool = False,
    merge_duplicates: bool = True,
) -> SparseLinearModel:
    """Train an L1-penalized squared-hinge linear classifier.

    ``y`` holds 0/1 labels. With ``standardize`` the columns are z-scored and
    the transform is stored on the model.

    Columns that coincide (up to sign) are solved as one column and the weight
    split evenly among them. The objective only sees the group sum, so this is
    still an exact minimizer; it is the one that does not arbitrarily favour a
    single copy of a repeated feature.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"X must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NumericError("X contains non-finite values")
    if lam <= 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    if max_iter < 1:
        raise ValidationError("max_iter must be >= 1")
    y_pm = _binary_labels(y)
    if y_pm.shape[0] != X.shape[0]:
        raise DimensionError(f"{X.shape[0]} rows but {y_pm.shape[0]} labels")
    mean = scale = None
    if standardize:
        mean, scale = standardize_params(X)
        X = (X - mean) / scale
    rng = np.random.default_rng(seed)

    if merge_duplicates:
        reps, group, sign = _duplicate_groups(X, DUPLICATE_TOL)
        Xr = X[:, reps]
    else:
        Xr = X
    w_r, b, n_iter, converged, trace = _coordinate_descent(Xr, y_pm, lam, tol, max_iter, rng)
    if merge_duplicates:
        counts = np.bincount(group, minlength=reps.size)
        w = sign * w_r[group] / counts[group]
    else:
        w = w_r
    if not converged:
        log.warning("coordinate descent stopped at max_iter=%d before reaching tol=%g", max_iter, tol)
    w.setflags(write=False)
    return SparseLinearModel(
        weights=w,
        bias=float(b),
        lam=float(lam),
        nonzero_count=int(nonzero_mask(w).sum()),
        mean=mean,
        scale=scale,
        n_iter=n_iter,
        converged=converged,
        objective_trace=tuple(trace),
    )


def _transform(model: SparseLinearModel, X):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.p:
        raise DimensionError(f"expected {model.p} features, got {X.shape[-1]}")
    if model.mean is not None:
        X = (X - model.mean) / model.scale
    return X


def decision_value(model: SparseLinearModel, x) -> float:
    x = _transform(model, x)
    if x.ndim != 1:
        raise DimensionError("decision_value takes a single vector; use decision_values for batches")
    return float(np.dot(model.weights, x) + model.bias)


def decision_values(model: SparseLinearModel, X) -> np.ndarray:
    return _transform(model, np.atleast_2d(X)) @ model.weights + model.bias


def _platt_fit(f, y01, max_iter=100, min_step=1e-10, sigma=1e-12):
    # Newton with backtracking on the smoothed-target likelihood
    # (Lin, Lin & Weng's variant of Platt's procedure).
    n_pos = float(np.sum(y01 == 1))
    n_neg = float(y01.size - n_pos)
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(y01 == 1, hi, lo)

    def nll(A, B):
        z = A * f + B
        # -log p and -log(1-p) for p = 1/(1+exp(z)), stable in both tails
        return float(np.sum(t * np.logaddexp(0.0, z) + (1.0 - t) * np.logaddexp(0.0, -z)))

    A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    fval = nll(A, B)
    for _ in range(max_iter):
        p = expit(-(A * f + B))
        q = 1.0 - p
        d1 = t - p  # dNLL/dz
        d2 = p * q
        gA, gB = float(np.dot(f, d1)), float(d1.sum())
        if abs(gA) < 1e-9 and abs(gB) < 1e-9:
            break
        h11 = float(np.dot(f * f, d2)) + sigma
        h22 = float(d2.sum()) + sigma
        h21 = float(np.dot(f, d2))
        det = h11 * h22 - h21 * h21
        dA = -(h22 * gA - h21 * gB) / det
        dB = -(-h21 * gA + h11 * gB) / det
        gd = gA * dA + gB * dB
        step = 1.0
        while step >= min_step:
            nA, nB = A + step * dA, B + step * dB
            nf = nll(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step *= 0.5
        else:
            break
    return A, B, nll, t


def calibrate_probability(model: SparseLinearModel, X, y) -> CalibratedModel:
    """Fit p(y=1 | f) = 1 / (1 + exp(slope * f + intercept)) on decision values.

    The slope is kept strictly negative so the probability rises with the
    decision value.
    """
    y01 = np.asarray(y)
    _binary_labels(y01)
    f = decision_values(model, X)
    A, B, nll, t = _platt_fit(f, y01)
    if not A < -MIN_SLOPE:
        A = -MIN_SLOPE
        # refit the intercept alone with the slope pinned
        for _ in range(100):
            p = expit(-(A * f + B))
            g = float((t - p).sum())
            h = float((p * (1.0 - p)).sum()) + 1e-12
            B -= g / h
            if abs(g) < 1e-12:
                break
    return CalibratedModel(base=model, slope=float(A), intercept=float(B))


def probability_positive(model: CalibratedModel, f) -> np.ndarray:
    return expit(-(model.slope * np.asarray(f, dtype=np.float64) + model.intercept))


def predict_attribute_probability(model: CalibratedModel, x, target_value: int) -> float:
    """P(attribute == target_value | x)."""
    if target_value not in (0, 1):
        raise ValidationError(f"target_value must be 0 or 1, got {target_value}")
    p1 = float(probability_positive(model, decision_value(model.base, x)))
    return p1 if target_value == 1 else 1.0 - p1


def attribute_probabilities(model: CalibratedModel, X, target_value: int) -> np.ndarray:
    """Vectorized :func:`predict_attribute_probability` over the rows of X."""
    if target_value not in (0, 1):
        raise ValidationError(f"target_value must be 0 or 1, got {target_value}")
    p1 = probability_positive(model, decision_values(model.base, X))
    return p1 if target_value == 1 else 1.0 - p1

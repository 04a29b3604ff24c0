"""Independent reference implementations used as test oracles."""

import itertools
import math

import numpy as np


def hinge_objective(X, y_pm, W, b, lam):
    """Penalized squared-hinge objective at many (w, b) points at once.

    ``W`` is (G, p) and ``b`` is (G,).
    """
    margins = 1.0 - y_pm[:, None] * (X @ W.T + b[None, :])
    loss = np.mean(np.maximum(margins, 0.0) ** 2, axis=0)
    return loss + lam * np.abs(W).sum(axis=1)


def grid_minimum(X, y_pm, lam, points=25, rounds=80, shrink=0.75):
    """Coarse-to-fine dense grid search over (w, b) for p <= 2.

    The starting box comes from F(0, 0) = 1: any minimizer has
    lam * ||w||_1 <= 1, and a bias beyond ||w||_1 * max|x| + 1 cannot help.
    """
    p = X.shape[1]
    wmax = 1.0 / lam
    bmax = wmax * np.abs(X).max() + 1.0
    center = np.zeros(p + 1)
    half = np.array([wmax] * p + [bmax])
    best = math.inf
    for _ in range(rounds):
        axes = [np.linspace(c - h, c + h, points) for c, h in zip(center, half)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p + 1)
        vals = hinge_objective(X, y_pm, grid[:, :p], grid[:, p], lam)
        i = int(np.argmin(vals))
        if vals[i] <= best:
            best = float(vals[i])
            center = grid[i]
        half = half * shrink
    return best, center


def brute_force_assignment(cost):
    """Minimum-cost injective row -> column map by enumeration; cost summed with fsum."""
    rows, cols = cost.shape
    best, best_perm = math.inf, None
    for perm in itertools.permutations(range(cols), rows):
        total = math.fsum(cost[r, c] for r, c in enumerate(perm))
        if total < best:
            best, best_perm = total, perm
    return best, best_perm


def random_hinge_problem(rng, p=None, n=None):
    p = p or int(rng.integers(1, 3))
    n = n or int(rng.integers(6, 41))
    while True:
        X = rng.normal(size=(n, p))
        w_true = rng.normal(size=p)
        y01 = (X @ w_true + 0.7 * rng.normal(size=n) > 0).astype(int)
        if 0 < y01.sum() < n:
            return X, y01

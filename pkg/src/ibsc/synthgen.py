"""Synthetic datasets with a known attribute-to-feature block structure.

Feature layout: attribute ``i`` owns the block of columns ``[i*g, (i+1)*g)``;
the last ``e`` columns are environment dimensions tied to no attribute. A
class centre concatenates, for each attribute, the template of the value the
class takes (about +1 for value 1, about -1 for value 0) followed by a
class-specific standard-normal environment vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import AttributeTable, Dataset, SplitSpec
from .errors import ConfigError
from .relation import RelationMatrix

TEMPLATE_JITTER = 0.1
MAX_REDRAWS = 1000


@dataclass(frozen=True)
class SynthConfig:
    K_s: int = 20
    K_u: int = 5
    d: int = 12
    g: int = 8
    e: int = 32
    n_c: int = 30
    sigma_noise: float = 0.3
    attr_noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.K_s < 2:
            raise ConfigError("K_s must be >= 2")
        if self.K_u < 1:
            raise ConfigError("K_u must be >= 1")
        for name in ("d", "g", "n_c"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.e < 0:
            raise ConfigError("e must be >= 0")
        if self.sigma_noise < 0 or self.attr_noise < 0:
            raise ConfigError("noise scales must be non-negative")
        if 2 ** self.d < self.K_s + self.K_u:
            raise ConfigError(f"d={self.d} cannot give {self.K_s + self.K_u} distinct attribute rows")

    @property
    def K(self) -> int:
        return self.K_s + self.K_u

    @property
    def p(self) -> int:
        return self.d * self.g + self.e


def _draw_binary(cfg: SynthConfig, rng) -> np.ndarray:
    for _ in range(MAX_REDRAWS):
        B = rng.integers(0, 2, size=(cfg.K, cfg.d))
        if np.unique(B, axis=0).shape[0] < cfg.K:
            continue
        seen, unseen = B[: cfg.K_s], B[cfg.K_s :]
        # every unseen attribute value must occur among the seen classes
        covered = all(np.any(seen[:, n] == row[n]) for row in unseen for n in range(cfg.d))
        if covered:
            return B
    raise ConfigError(f"no valid attribute draw after {MAX_REDRAWS} attempts")


def generate(cfg: SynthConfig):
    """Return ``(dataset, attrs, split, ground_truth)``.

    The last ``K_u`` class ids are the unseen ones.
    """
    rng = np.random.default_rng(cfg.seed)
    B = _draw_binary(cfg, rng)
    templates = np.empty((cfg.d, 2, cfg.g))
    templates[:, 0, :] = -1.0
    templates[:, 1, :] = 1.0
    templates += TEMPLATE_JITTER * rng.standard_normal(templates.shape)
    env = rng.standard_normal((cfg.K, cfg.e))

    centers = np.empty((cfg.K, cfg.p))
    for c in range(cfg.K):
        blocks = [templates[i, B[c, i]] for i in range(cfg.d)]
        centers[c] = np.concatenate(blocks + [env[c]])

    labels = np.repeat(np.arange(cfg.K), cfg.n_c)
    features = centers[labels]
    if cfg.sigma_noise > 0:
        features = features + cfg.sigma_noise * rng.standard_normal(features.shape)

    jitter = rng.uniform(-cfg.attr_noise, cfg.attr_noise, size=B.shape) if cfg.attr_noise > 0 else 0.0
    continuous = np.clip(B + jitter, 0.0, 1.0)

    names = [f"class{c}" for c in range(cfg.K)]
    attrs = AttributeTable(continuous=continuous, binary=B, class_names=names)
    dataset = Dataset(features=features, labels=labels, class_names=names)
    split = SplitSpec(seen=range(cfg.K_s), unseen=range(cfg.K_s, cfg.K))

    R = np.zeros((cfg.d, cfg.p), dtype=np.int8)
    for i in range(cfg.d):
        R[i, i * cfg.g : (i + 1) * cfg.g] = 1
    truth = RelationMatrix(R=R, degenerate_rows=frozenset())
    return dataset, attrs, split, truth


def class_centers(cfg: SynthConfig) -> np.ndarray:
    """Noise-free class centres for ``cfg`` (same draws as :func:`generate`)."""
    zero = SynthConfig(**{**cfg.__dict__, "sigma_noise": 0.0, "n_c": 1})
    dataset, _, _, _ = generate(zero)
    return np.array(dataset.features)

import numpy as np
import pytest

from ibsc.config import PipelineConfig
from ibsc.data import AttributeTable, Dataset, SplitSpec
from ibsc.evaluation import build_artifacts
from ibsc.synthgen import SynthConfig, generate

SMALL = dict(K_s=8, K_u=3, d=6, g=4, e=8, n_c=12)


def make_attrs(continuous, binary=None):
    continuous = np.asarray(continuous, dtype=float)
    if binary is None:
        binary = (continuous >= 0.5).astype(np.int8)
    return AttributeTable(continuous=continuous, binary=np.asarray(binary))


def make_dataset(features, labels, K=None):
    labels = np.asarray(labels)
    K = K if K is not None else int(labels.max()) + 1
    return Dataset(features=np.asarray(features, dtype=float), labels=labels,
                   class_names=[str(i) for i in range(K)])


@pytest.fixture(scope="session")
def small_synth():
    cfg = SynthConfig(**SMALL, sigma_noise=0.3, seed=3)
    return cfg, generate(cfg)


@pytest.fixture(scope="session")
def small_run(small_synth):
    cfg, (ds, attrs, split, truth) = small_synth
    art = build_artifacts(ds, attrs, split, PipelineConfig(threads=1, k=3), seed=3)
    return ds, attrs, split, truth, art

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ibsc.data import SplitSpec
from ibsc.errors import ValidationError
from ibsc.relation import (
    RelationMatrix,
    attribute_labels,
    build_relation_matrix,
    environment_dims,
    fit_relation,
    load_models,
    load_relation,
    relation_f1,
    save_models,
    save_relation,
)
from ibsc.sparse_linear import attribute_probabilities
from ibsc.synthgen import SynthConfig, generate

from conftest import SMALL, make_attrs, make_dataset


def _tiny():
    attrs = make_attrs([[1, 0], [0, 1], [1, 1]], [[1, 0], [0, 1], [1, 1]])
    ds = make_dataset([[1.0, 0.0], [1.1, 0.2], [0.0, 1.0], [0.1, 0.9], [1.0, 1.0]], [0, 0, 1, 1, 2], K=3)
    return ds, attrs, SplitSpec(seen={0, 1}, unseen={2})


def test_attribute_label_examples():
    ds, attrs, split = _tiny()
    rows = ds.indices_of(0)
    assert attribute_labels(ds, attrs, split, 0, rows).tolist() == [1, 1]
    assert attribute_labels(ds, attrs, split, 1, rows).tolist() == [0, 0]
    with pytest.raises(ValidationError):
        attribute_labels(ds, attrs, split, attrs.d)


def test_default_rows_are_seen_samples_only():
    ds, attrs, split = _tiny()
    assert attribute_labels(ds, attrs, split, 0).tolist() == [1, 1, 0, 0]


@pytest.mark.parametrize("R, env", [
    ([[1, 0, 0], [0, 1, 0]], [2]),
    ([[0, 0, 0], [0, 0, 0]], [0, 1, 2]),
    ([[1, 1, 1], [1, 1, 1]], []),
])
def test_environment_dim_examples(R, env):
    assert environment_dims(RelationMatrix(np.array(R))).tolist() == env


@settings(max_examples=50, deadline=None)
@given(arrays(np.int8, st.tuples(st.integers(1, 6), st.integers(1, 12)), elements=st.integers(0, 1)))
def test_environment_and_support_partition(R):
    rel = RelationMatrix(R)
    env = set(environment_dims(rel).tolist())
    support = set().union(*(set(rel.relevant_dims(i).tolist()) for i in range(rel.d)))
    assert env | support == set(range(rel.p))
    assert not env & support


def test_relation_rejects_non_binary():
    with pytest.raises(ValidationError):
        RelationMatrix(np.array([[0, 2]]))


def test_zero_noise_recovers_blocks_exactly():
    cfg = SynthConfig(**SMALL, sigma_noise=0.0, seed=0)
    ds, attrs, split, truth = generate(cfg)
    rel = build_relation_matrix(ds, attrs, split)
    np.testing.assert_array_equal(rel.R, truth.R)
    assert np.all(relation_f1(rel, truth) == 1.0)


def test_constant_attribute_is_degenerate():
    cfg = SynthConfig(**SMALL, sigma_noise=0.1, seed=1)
    ds, attrs, split, _ = generate(cfg)
    binary = np.array(attrs.binary)
    binary[split.seen_sorted, 2] = 1
    forced = make_attrs(attrs.continuous, binary)
    rel, models = fit_relation(ds, forced, split)
    assert 2 in rel.degenerate_rows
    assert not rel.R[2].any()
    assert 2 not in models
    expected = {i for i in range(forced.d) if np.unique(binary[split.seen_sorted, i]).size < 2}
    assert rel.degenerate_rows == expected


def test_huge_lambda_gives_empty_relation(small_synth):
    _, (ds, attrs, split, _) = small_synth
    rel = build_relation_matrix(ds, attrs, split, lam=1e6)
    assert not rel.R.any()


def test_deterministic_and_thread_independent(small_synth):
    _, (ds, attrs, split, _) = small_synth
    a, ma = fit_relation(ds, attrs, split, seed=5, threads=1)
    b, mb = fit_relation(ds, attrs, split, seed=5, threads=4)
    assert a.R.tobytes() == b.R.tobytes()
    for i in ma:
        assert ma[i].base.weights.tobytes() == mb[i].base.weights.tobytes()
        assert ma[i].slope == mb[i].slope and ma[i].intercept == mb[i].intercept


def test_f1_examples():
    truth = RelationMatrix(np.array([[1, 1, 0, 0], [0, 0, 0, 0]]))
    learned = RelationMatrix(np.array([[1, 0, 1, 0], [0, 0, 0, 0]]))
    np.testing.assert_allclose(relation_f1(learned, truth), [0.5, 1.0])


def test_persistence_roundtrip(tmp_path, small_synth):
    _, (ds, attrs, split, _) = small_synth
    rel, models = fit_relation(ds, attrs, split)
    save_relation(rel, tmp_path / "R.bin", tmp_path / "deg.txt")
    save_models(models, tmp_path / "m.json")
    back = load_relation(tmp_path / "R.bin", tmp_path / "deg.txt")
    assert back == rel
    loaded = load_models(tmp_path / "m.json")
    X = ds.features[:5]
    for i in models:
        assert attribute_probabilities(loaded[i], X, 1).tobytes() == attribute_probabilities(models[i], X, 1).tobytes()

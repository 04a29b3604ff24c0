import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ibsc import data
from ibsc.data import AttributeTable, SplitSpec
from ibsc.errors import EmptyClassError, ParseError, ValidationError

from conftest import make_dataset


def test_three_row_csv(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("id,label,f0,f1,f2,f3\n0,0,1,2,3,4\n1,1,5,6,7,8\n2,0,0,0,0,0.5\n")
    ds = data.load_dataset(path)
    assert (ds.n, ds.p) == (3, 4)
    assert ds.labels.tolist() == [0, 1, 0]
    assert ds.features[2, 3] == 0.5


def test_binary_header_example(tmp_path):
    path = tmp_path / "m.bin"
    path.write_bytes(b"IBSC" + bytes([1]) + (2).to_bytes(4, "little") + (2).to_bytes(4, "little")
                     + np.array([0, 0, 1, 1], dtype="<f4").tobytes())
    np.testing.assert_array_equal(data.read_matrix_binary(path), [[0, 0], [1, 1]])


def test_short_row_names_the_row(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("id,label,f0,f1\n0,0,1,2\n1,0,3\n")
    with pytest.raises(ParseError, match="row 3"):
        data.load_dataset(path)


@pytest.mark.parametrize("payload", [b"XXXX", b"IBSC\x02" + bytes(8)])
def test_binary_bad_header(tmp_path, payload):
    path = tmp_path / "m.bin"
    path.write_bytes(payload)
    with pytest.raises(ParseError):
        data.read_matrix_binary(path)


def test_binary_truncated_payload(tmp_path):
    path = tmp_path / "m.bin"
    data.write_matrix_binary(np.ones((3, 2)), path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(ParseError):
        data.read_matrix_binary(path)


def test_attribute_table_files(tmp_path):
    cont, binary = tmp_path / "c.csv", tmp_path / "b.csv"
    cont.write_text("class,a0,a1\ncat,0.9,0.1\ndog,0.2,0.8\nfox,0.6,0.6\n")
    binary.write_text("class,a0,a1\ncat,1,0\ndog,0,1\nfox,1,1\n")
    table = data.load_attribute_table(cont, binary)
    assert (table.K, table.d) == (3, 2)
    assert list(table.class_names) == ["cat", "dog", "fox"]


def test_attribute_binary_must_be_01(tmp_path):
    cont, binary = tmp_path / "c.csv", tmp_path / "b.csv"
    cont.write_text("class,a0\nx,0.1\ny,0.2\n")
    binary.write_text("class,a0\nx,0.5\ny,1\n")
    with pytest.raises(ValidationError):
        data.load_attribute_table(cont, binary)


def test_attribute_shape_mismatch(tmp_path):
    cont, binary = tmp_path / "c.csv", tmp_path / "b.csv"
    cont.write_text("class,a0\nx,0.1\ny,0.2\nz,0.3\n")
    binary.write_text("class,a0\nx,0\ny,1\n")
    with pytest.raises(ValidationError, match="shape"):
        data.load_attribute_table(cont, binary)


def test_dataset_rejects_unknown_label():
    with pytest.raises(ValidationError):
        make_dataset([[0.0], [1.0]], [0, 5], K=2)


def test_dataset_rejects_nan():
    with pytest.raises(ValidationError):
        make_dataset([[np.nan], [1.0]], [0, 1])


def test_split_validation():
    with pytest.raises(ValidationError):
        SplitSpec(seen={0, 1}, unseen={1})
    with pytest.raises(ValidationError):
        SplitSpec(seen={0}, unseen={1})
    with pytest.raises(ValidationError):
        SplitSpec(seen={0, 1}, unseen=set())


def test_split_roundtrip(tmp_path):
    split = SplitSpec(seen={3, 0, 1}, unseen={4, 2})
    data.write_split(split, tmp_path / "s.txt")
    assert data.load_split(tmp_path / "s.txt") == split


def test_centroid_examples():
    ds = make_dataset([[0, 0], [2, 4], [7, 7]], [0, 0, 1])
    c = data.class_centroids(ds, {0, 1})
    np.testing.assert_array_equal(c[0], [1, 2])
    np.testing.assert_array_equal(c[1], [7, 7])
    with pytest.raises(EmptyClassError):
        data.class_centroids(make_dataset([[0.0]], [0], K=3), {2})


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 5)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)),
       st.integers(0, 2**31 - 1))
def test_centroids_match_brute_force(X, seed):
    labels = np.random.default_rng(seed).integers(0, 3, size=X.shape[0])
    labels[0] = 0
    ds = make_dataset(X, labels, K=3)
    present = set(np.unique(labels).tolist())
    got = data.class_centroids(ds, present)
    for c in present:
        rows = [X[i] for i in range(X.shape[0]) if labels[i] == c]
        expect = [sum(r[j] for r in rows) / len(rows) for j in range(X.shape[1])]
        np.testing.assert_allclose(got[c], expect, rtol=1e-12, atol=1e-12 * (1 + np.abs(X).max()))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 6)),
              elements=st.floats(-1e9, 1e9, allow_nan=False, width=32)))
def test_binary_roundtrip_bit_exact(tmp_path_factory, X):
    path = tmp_path_factory.mktemp("bin") / "m.bin"
    data.write_matrix_binary(X, path)
    back = data.read_matrix_binary(path)
    assert back.tobytes() == X.tobytes()


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 6)),
              elements=st.floats(-1e9, 1e9, allow_nan=False)))
def test_csv_roundtrip(tmp_path_factory, X):
    path = tmp_path_factory.mktemp("csv") / "f.csv"
    labels = np.arange(X.shape[0]) % 2
    ds = make_dataset(X, labels, K=2)
    data.write_dataset(ds, path)
    back = data.load_dataset(path, class_names=ds.class_names)
    np.testing.assert_allclose(back.features, X, rtol=1e-9, atol=1e-9)
    np.testing.assert_array_equal(back.labels, labels)


def test_binary_dataset_roundtrip(tmp_path):
    ds = make_dataset([[0.5, 1.25], [3.0, -2.0], [1.0, 0.0]], [1, 0, 1])
    data.write_dataset(ds, tmp_path / "d.bin", format="binary")
    back = data.load_dataset(tmp_path / "d.bin", format="binary", class_names=ds.class_names)
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_attribute_table_roundtrip(tmp_path):
    table = AttributeTable(continuous=np.array([[0.1, 0.9], [0.7, 0.3]]), binary=np.array([[0, 1], [1, 0]]),
                           class_names=["a", "b"])
    data.write_attribute_table(table, tmp_path / "c.csv", tmp_path / "b.csv")
    back = data.load_attribute_table(tmp_path / "c.csv", tmp_path / "b.csv")
    np.testing.assert_array_equal(back.continuous, table.continuous)
    np.testing.assert_array_equal(back.binary, table.binary)


def test_arrays_are_read_only():
    ds = make_dataset([[1.0, 2.0]], [0])
    with pytest.raises(ValueError):
        ds.features[0, 0] = 5

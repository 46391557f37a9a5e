import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hqsl import dataio


def logistic_accuracy(x, y, steps=2000, lr=0.5):
    """Plain gradient-descent logistic regression, scored on its training data."""
    xb = np.c_[(x - x.mean(0)) / x.std(0), np.ones(len(x))]
    w = np.zeros(xb.shape[1])
    for _ in range(steps):
        p = 1 / (1 + np.exp(-xb @ w))
        w -= lr * xb.T @ (p - y) / len(y)
    return np.mean((xb @ w > 0) == y)


# --- CSV -------------------------------------------------------------------


def test_csv_fixture(fixtures):
    ds = dataio.load_csv(fixtures / "features7.csv")
    assert ds.features.shape == (1000, 7) and ds.class_count == 2


def test_csv_header_and_columns(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b,y\n1,2,0\n3,4,1\n5,6,1\n")
    ds = dataio.load_csv(p)
    np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4], [5, 6]])
    np.testing.assert_array_equal(ds.labels, [0, 1, 1])
    ds = dataio.load_csv(p, feature_columns=[1], label_column=0)
    assert ds.features.shape == (3, 1)


def test_csv_string_labels(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b,kind\n1,2,dga\n3,4,benign\n")
    np.testing.assert_array_equal(dataio.load_csv(p).labels, [1, 0])


def test_csv_malformed_row_reports_line(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b,y\n1,2,0\n3,4\n")
    with pytest.raises(ValueError, match=":3:"):
        dataio.load_csv(p)
    p.write_text("1,2,0\n1,x,1\n")
    with pytest.raises(ValueError, match=":2:"):
        dataio.load_csv(p)


def test_csv_missing_label_column(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1,2,0\n")
    with pytest.raises(ValueError, match="label column"):
        dataio.load_csv(p, label_column=5)


# --- IDX -------------------------------------------------------------------


def test_idx_fixture(fixtures):
    ds = dataio.load_idx(fixtures / "tiny-images.idx", fixtures / "tiny-labels.idx")
    assert ds.features.shape == (10, 1, 28, 28)
    assert ds.features[0, 0, 0, 0] == 1.0
    assert ds.features.min() >= 0 and ds.features.max() <= 1


def test_idx_round_trip(tmp_path):
    imgs = np.random.default_rng(0).integers(0, 256, (4, 28, 28), dtype=np.uint8)
    dataio.write_idx(tmp_path / "i", tmp_path / "l", imgs, [1, 0, 3, 2])
    ds = dataio.load_idx(tmp_path / "i", tmp_path / "l")
    np.testing.assert_allclose(ds.features[:, 0] * 255, imgs)
    assert ds.labels.tolist() == [1, 0, 3, 2]


def test_idx_errors(tmp_path, fixtures):
    raw = (fixtures / "tiny-images.idx").read_bytes()
    (tmp_path / "trunc").write_bytes(raw[:-5])
    with pytest.raises(ValueError):
        dataio.load_idx(tmp_path / "trunc", fixtures / "tiny-labels.idx")
    with pytest.raises(ValueError, match="magic"):
        dataio.load_idx(fixtures / "tiny-labels.idx", fixtures / "tiny-labels.idx")
    imgs = np.zeros((3, 28, 28), np.uint8)
    dataio.write_idx(tmp_path / "i", tmp_path / "l", imgs, [0, 1, 0])
    dataio.write_idx(tmp_path / "i2", tmp_path / "l2", imgs[:2], [0, 1])
    with pytest.raises(ValueError):
        dataio.load_idx(tmp_path / "i", tmp_path / "l2")


# --- scaling ---------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, (12, 3), elements=st.floats(-1e3, 1e3)))
def test_minmax_idempotent(x):
    once = dataio.minmax(x)
    np.testing.assert_allclose(dataio.minmax(once), once, atol=1e-12)
    assert once.min() >= 0 and once.max() <= 1 + 1e-12


def test_standardize():
    x = np.random.default_rng(0).normal(5, 3, (100, 4))
    s = dataio.standardize(x)
    np.testing.assert_allclose(s.mean(0), 0, atol=1e-12)
    np.testing.assert_allclose(s.std(0), 1, atol=1e-12)


# --- PCA -------------------------------------------------------------------


def test_jacobi_matches_eigh():
    rng = np.random.default_rng(1)
    for n in (2, 5, 12, 30):
        a = rng.normal(size=(n, n))
        a = a + a.T
        vals, vecs = dataio.jacobi_eigh(a)
        np.testing.assert_allclose(vals, np.linalg.eigh(a)[0][::-1], atol=1e-10)
        np.testing.assert_allclose(a @ vecs, vecs * vals, atol=1e-10)


def test_jacobi_rejects_asymmetric():
    with pytest.raises(ValueError):
        dataio.jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_pca_properties():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(300, 30)) @ rng.normal(size=(30, 30))
    model = dataio.fit_pca(x, 7)
    g = model.components
    np.testing.assert_allclose(g.T @ g, np.eye(7), atol=1e-10)
    assert np.all(np.diff(model.explained_variance) <= 0)
    proj = model.transform(x)
    cov = np.cov(proj, rowvar=False)
    np.testing.assert_allclose(cov - np.diag(np.diag(cov)), 0, atol=1e-8)
    np.testing.assert_allclose(np.diag(cov), model.explained_variance, rtol=1e-10)


def test_pca_on_axis_aligned_data_reproduces_input():
    rng = np.random.default_rng(3)
    scales = np.array([7, 6, 5, 4, 3, 2, 1.0])
    x = rng.normal(size=(2000, 7))
    q, _ = np.linalg.qr(x - x.mean(0))  # exactly uncorrelated, zero-mean columns
    x = q * scales
    proj = dataio.pca_reduce(dataio.Dataset(x, np.zeros(2000), 1)).features
    # same axes up to sign
    np.testing.assert_allclose(np.abs(proj), np.abs(x - x.mean(0)), atol=1e-8)


def test_pca_rank_deficient_warns():
    x = np.random.default_rng(4).normal(size=(50, 3)) @ np.random.default_rng(5).normal(size=(3, 10))
    with pytest.warns(UserWarning):
        model = dataio.fit_pca(x, 7)
    assert model.components.shape[1] == 3


def test_pca_preconditions():
    with pytest.raises(ValueError):
        dataio.fit_pca(np.zeros((10, 5)), 7)
    with pytest.raises(ValueError):
        dataio.fit_pca(np.zeros((1, 10)), 7)


# --- folds -----------------------------------------------------------------


def test_kfold_balanced():
    y = np.array([0] * 50 + [1] * 50)
    for fold in dataio.stratified_kfold(y, 5, 0):
        assert np.bincount(y[fold]).tolist() == [10, 10]


def test_kfold_seeds():
    y = np.arange(100) % 2
    a = dataio.stratified_kfold(y, 5, 0)
    b = dataio.stratified_kfold(y, 5, 1)
    assert any(not np.array_equal(f, g) for f, g in zip(a, b))
    assert all(np.bincount(y[f]).tolist() == [10, 10] for f in b)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=15, max_size=80), st.integers(2, 5))
def test_kfold_partition_and_stratification(labels, k):
    y = np.array(labels)
    if np.bincount(y).min(initial=0) < k or len(np.unique(y)) < 3 and np.bincount(y)[np.unique(y)].min() < k:
        return
    if any(np.sum(y == c) < k for c in np.unique(y)):
        return
    folds = dataio.stratified_kfold(y, k, 0)
    assert sorted(np.concatenate(folds).tolist()) == list(range(len(y)))
    for c in np.unique(y):
        counts = [np.sum(y[f] == c) for f in folds]
        assert max(counts) - min(counts) <= 1
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_kfold_errors():
    with pytest.raises(ValueError):
        dataio.stratified_kfold(np.arange(10) % 2, 1)
    with pytest.raises(ValueError):
        dataio.stratified_kfold(np.array([0, 0, 0, 0, 0, 1]), 2)


def test_train_test_split_is_four_to_one():
    ds = dataio.make_blobs(1000, seed=0)
    train, test = dataio.train_test_split(ds)
    assert len(train) == 800 and len(test) == 200
    assert np.bincount(test.labels).tolist() == [100, 100]


# --- synthetic -------------------------------------------------------------


def test_blobs_linearly_separable():
    ds = dataio.make_synthetic("blobs", 1000, seed=0, dims=7, classes=2, separation=4.0)
    assert logistic_accuracy(ds.features, ds.labels) >= 0.99


@pytest.mark.parametrize("kind,kw", [("blobs", {"classes": 3}), ("moons", {}), ("shapes", {"classes": 4})])
def test_synthetic_balanced_and_seeded(kind, kw):
    a = dataio.make_synthetic(kind, 101, seed=3, **kw)
    b = dataio.make_synthetic(kind, 101, seed=3, **kw)
    counts = np.bincount(a.labels)
    assert counts.max() - counts.min() <= 1
    np.testing.assert_array_equal(a.features, b.features)


def test_shapes_are_images():
    ds = dataio.make_shapes(20, classes=5, seed=0)
    assert ds.features.shape == (20, 1, 28, 28)
    assert ds.features.min() == 0 and ds.features.max() <= 1
    assert np.all(ds.features.reshape(20, -1).max(axis=1) > 0)


def test_dataset_validation():
    with pytest.raises(ValueError):
        dataio.Dataset(np.zeros((3, 2)), [0, 1], 2)
    with pytest.raises(ValueError):
        dataio.Dataset(np.zeros((2, 2)), [0, 2], 2)
    with pytest.raises(ValueError):
        dataio.make_synthetic("spirals", 10)

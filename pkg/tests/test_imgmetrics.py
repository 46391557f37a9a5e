import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hqsl import imgmetrics as im
from hqsl.imgmetrics import MaskedPair


def pair(a, b):
    return MaskedPair(np.asarray(a, float), np.asarray(b, float))


def test_mask_union_support():
    p = im.mask_pair([0, 0.5], [0, 0])
    assert p.a.tolist() == [0.5] and p.b.tolist() == [0.0]
    assert len(im.mask_pair(np.zeros((3, 3)), np.zeros((3, 3)))) == 0
    full = np.arange(1, 10.0).reshape(3, 3)
    p = im.mask_pair(full, full)
    assert len(p) == 9


def test_mask_shape_mismatch():
    with pytest.raises(ValueError):
        im.mask_pair(np.zeros(3), np.zeros(4))


def test_cosine_distance_values():
    assert im.cosine_distance(pair([1, 0], [0, 1])) == pytest.approx(1.0)
    assert im.cosine_distance(pair([2, 3], [2, 3])) == pytest.approx(0.0, abs=1e-15)
    assert im.cosine_distance(pair([1, 0], [-1, 0])) == pytest.approx(2.0)
    assert np.isnan(im.cosine_distance(pair([1, 2], [0, 0])))


def test_mse_values():
    assert im.mse(pair([1, 2], [1, 2])) == 0
    assert im.mse(pair([1, 1], [0, 0])) == 1
    assert im.mse(pair([2, 0], [0, 0])) == 2


def test_dssim_values():
    assert im.dssim(pair([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])) == pytest.approx(0.0, abs=1e-15)
    assert im.dssim(pair([0.0, 1.0, 0.0, 1.0], [1.0, 0.0, 1.0, 0.0])) == 0.5
    c1 = 0.01**2
    ssim = (2 * 0.5 * 0.8 + c1) / (0.25 + 0.64 + c1)  # zero variances: structure term is 1
    assert im.dssim(pair([0.5] * 4, [0.8] * 4)) == pytest.approx((1 - ssim) / 2, abs=1e-15)


def test_lsd_values():
    b = np.array([0.1, 0.2, 0.3])
    assert im.lsd(pair(b, b)) == 0
    assert im.lsd(pair(10 * b, b)) == pytest.approx(1.0)
    v = im.lsd(pair([0.5, 0.2], [0.0, 0.2]))
    assert np.isfinite(v) and v == pytest.approx(np.sqrt((np.log10(0.5 / 1e-8) ** 2) / 2))


@pytest.mark.parametrize("fn", [im.mse, im.dssim, im.lsd])
def test_empty_pair_errors(fn):
    with pytest.raises(ValueError):
        fn(pair([], []))


images = hnp.arrays(np.float64, (6, 6), elements=st.floats(0, 1))


@settings(max_examples=200, deadline=None)
@given(images, images)
def test_symmetry_and_ranges(a, b):
    p, q = im.mask_pair(a, b), im.mask_pair(b, a)
    if len(p) == 0:
        return
    for fn in (im.mse, im.dssim, im.lsd):
        assert fn(p) == pytest.approx(fn(q), abs=1e-12)
    c1, c2 = im.cosine_distance(p), im.cosine_distance(q)
    assert (np.isnan(c1) and np.isnan(c2)) or c1 == pytest.approx(c2, abs=1e-12)
    assert np.isnan(c1) or 0 <= c1 <= 2
    assert 0 <= im.dssim(p) <= 0.5 and im.mse(p) >= 0 and im.lsd(p) >= 0


def test_ranges_on_1000_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a = rng.random((8, 8)) * (rng.random((8, 8)) < 0.5)
        b = rng.normal(size=(8, 8))
        p = im.mask_pair(a, b)
        assert 0 <= im.cosine_distance(p) <= 2
        assert 0 <= im.dssim(p) <= 0.5
        assert im.mse(p) >= 0 and im.lsd(p) >= 0


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(np.float64, (5, 5), elements=st.floats(1e-3, 1)))
def test_zero_on_identity(a):
    p = im.mask_pair(a, a)
    for fn in im.METRICS.values():
        assert abs(fn(p)) <= 1e-12


def test_batch_metrics_skips_undefined():
    x = np.zeros((2, 1, 4, 4))
    x[0, 0, 1, 1] = 1.0
    r = np.zeros_like(x)
    r[0, 0, 1, 1] = 1.0
    out = im.batch_metrics(x, r)  # second pair is empty and skipped
    assert out["mse"] == 0 and out["cosine"] == pytest.approx(0.0, abs=1e-15)

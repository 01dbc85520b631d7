import numpy as np
import pytest

from slide.errors import DimensionMismatch, ZeroView
from slide.preprocess import (
    MultiViewData,
    RawViews,
    center_and_scale,
    concatenate,
    load_views,
    read_view_csv,
)


def test_hand_worked_single_column():
    # [[1],[3]] centers to [[-1],[1]], norm sqrt(2)
    raw = RawViews.from_arrays([np.array([[1.0], [3.0]])])
    data = center_and_scale(raw)
    np.testing.assert_allclose(data.views[0], [[-1 / np.sqrt(2)], [1 / np.sqrt(2)]])
    np.testing.assert_allclose(data.column_means[0], [2.0])
    np.testing.assert_allclose(data.frobenius_scales[0], np.sqrt(2))
    # brute-force oracle for the same numbers
    x = np.array([[1.0], [3.0]])
    c = x - x.mean(axis=0)
    np.testing.assert_allclose(data.views[0], c / np.linalg.norm(c))


def test_already_standardized_view_unchanged():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((10, 4))
    x -= x.mean(axis=0)
    x /= np.linalg.norm(x)
    data = center_and_scale(RawViews.from_arrays([x]))
    np.testing.assert_allclose(data.views[0], x, atol=1e-14)
    np.testing.assert_allclose(data.frobenius_scales[0], 1.0)
    np.testing.assert_allclose(data.column_means[0], np.zeros(4), atol=1e-16)


def test_constant_view_is_error():
    x = np.ones((5, 3)) * 7.0
    with pytest.raises(ZeroView):
        center_and_scale(RawViews.from_arrays([x]))


def test_row_count_mismatch_is_error():
    with pytest.raises(DimensionMismatch):
        RawViews.from_arrays([np.zeros((4, 2)), np.zeros((5, 2))])


def test_round_trip_reconstruction():
    rng = np.random.default_rng(1)
    views = [rng.uniform(5, 10, size=(12, 3)), rng.standard_normal((12, 7)) * 40]
    data = center_and_scale(RawViews.from_arrays(views))
    for orig, rebuilt in zip(views, data.unscale()):
        np.testing.assert_allclose(rebuilt, orig, rtol=1e-10)


def test_standardization_invariants():
    rng = np.random.default_rng(2)
    views = [rng.uniform(size=(30, k)) for k in (2, 9, 5)]
    data = center_and_scale(RawViews.from_arrays(views))
    for v in data.views:
        assert np.max(np.abs(v.sum(axis=0))) <= 1e-10 * 30
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-12


def test_concatenate_single_view_identity():
    rng = np.random.default_rng(3)
    data = center_and_scale(RawViews.from_arrays([rng.standard_normal((6, 4))]))
    np.testing.assert_array_equal(concatenate(data), data.views[0])


def test_concatenate_blocks_and_order():
    rng = np.random.default_rng(4)
    a, b = rng.standard_normal((8, 2)), rng.standard_normal((8, 3))
    data = center_and_scale(RawViews.from_arrays([a, b]))
    x = concatenate(data)
    assert x.shape == (8, 5)
    np.testing.assert_array_equal(x[:, :2], data.views[0])
    np.testing.assert_array_equal(x[:, 2:], data.views[1])
    blocks = data.column_blocks()
    assert blocks == [slice(0, 2), slice(2, 5)]


def test_csv_reading_with_and_without_header(tmp_path):
    f1 = tmp_path / "a.csv"
    f1.write_text("x,y\n1.0,2.0\n3.5,4.5\n")
    f2 = tmp_path / "b.csv"
    f2.write_text("1.0,2.0\n3.5,4.5\n")
    np.testing.assert_array_equal(read_view_csv(f1), read_view_csv(f2))
    raw = load_views([f1, f2])
    assert raw.view_names == ("a", "b")
    assert raw.n == 2 and raw.p == (2, 2)


def test_csv_ragged_row_is_error(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("1,2\n3\n")
    with pytest.raises(DimensionMismatch):
        read_view_csv(f)


def test_multiviewdata_validates_invariants():
    with pytest.raises(DimensionMismatch):
        MultiViewData(
            views=(np.ones((4, 2)),),
            column_means=(np.zeros(2),),
            frobenius_scales=(1.0,),
            view_names=("v",),
        )

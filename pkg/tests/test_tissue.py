import warnings

import numpy as np
import pytest

from relaxcrb import PhysicalPlausibilityWarning, TissueParams, TissueRange


def test_tissue_rejects_nonpositive_and_nonfinite():
    for bad in [(0, 1000, 80), (3000, -1, 80), (3000, 1000, float("nan")), (3000, float("inf"), 80)]:
        with pytest.raises(ValueError):
            TissueParams(*bad)


def test_t2_above_t1_warns_but_constructs():
    with pytest.warns(PhysicalPlausibilityWarning):
        t = TissueParams(3000, 100, 200)
    assert t.t2 == 200


def test_default_range_grid_shapes():
    r = TissueRange()
    t1, t2 = r.grid(joint=True)
    assert t1.shape == t2.shape == (21 * 11,)
    assert t1[0] == 1000 and t1[-1] == 2000 and t2.min() == 60 and t2.max() == 110
    t1, t2 = r.grid(joint=False)
    assert t1.shape == (21,)
    np.testing.assert_array_equal(t2, 85.0)


def test_grid_t1_varies_slowest():
    t1, t2 = TissueRange(grid_t1=3, grid_t2=2).grid(True)
    np.testing.assert_array_equal(t1, [1000, 1000, 1500, 1500, 2000, 2000])
    np.testing.assert_array_equal(t2, [60, 110, 60, 110, 60, 110])


def test_degenerate_range_is_single_point():
    r = TissueRange(1500, 1500, 80, 80)
    pts = r.points(True)
    assert pts == [TissueParams(3000, 1500, 80)]


def test_range_validation():
    with pytest.raises(ValueError):
        TissueRange(t2_min=120, t2_max=110)
    with pytest.raises(ValueError):
        TissueRange(t1_min=2000, t1_max=1000)
    with pytest.raises(ValueError):
        TissueRange(grid_t1=1)


def test_points_do_not_warn_for_t2_above_t1():
    r = TissueRange(t1_min=50, t1_max=60, t2_min=70, t2_max=80, grid_t1=2, grid_t2=2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert len(r.points(True)) == 4

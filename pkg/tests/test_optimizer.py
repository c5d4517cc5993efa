from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaxcrb import (
    BRAIN_PROTOCOLS,
    DesignSpec,
    NoFeasiblePoint,
    TissueRange,
    efficiency_map,
    optimize_protocol,
    range_map,
    worst_case_efficiency,
)

RANGE = TissueRange()


def test_rho_one_is_minimum_t1_efficiency():
    p = BRAIN_PROTOCOLS["SEIR"]
    m = range_map(p, RANGE, 100.0)
    wc = worst_case_efficiency(p, RANGE, 1.0)
    assert wc.value == pytest.approx(m.gamma_t1.min(), rel=1e-15)
    assert not wc.degenerate


def test_weighted_combination_for_joint_family():
    p = BRAIN_PROTOCOLS["DESPOT"]
    m = range_map(p, RANGE, 100.0)
    wc = worst_case_efficiency(p, RANGE, 0.3)
    lam = 0.3 * m.gamma_t1 + 0.7 * m.gamma_t2
    assert wc.value == pytest.approx(lam.min(), rel=1e-15)
    # The inner minimum is a lower bound at every grid point.
    assert np.all(wc.value <= lam + 1e-12)


def test_t1_only_family_ignores_rho():
    p = BRAIN_PROTOCOLS["LL"]
    assert worst_case_efficiency(p, RANGE, 0.2).value == worst_case_efficiency(p, RANGE, 1.0).value


def test_single_point_range():
    p = BRAIN_PROTOCOLS["FIR1"]
    r = TissueRange(1500.0, 1500.0, 85.0, 85.0)
    m = efficiency_map(p, [1500.0], [85.0], 100.0)
    assert worst_case_efficiency(p, r).value == pytest.approx(m.gamma_t1[0])


def test_cir_grid_minimum_matches_dense_oracle():
    p = BRAIN_PROTOCOLS["CIR"]
    dense = efficiency_map(p, np.linspace(1000.0, 2000.0, 201), np.full(201, 85.0), 100.0)
    assert worst_case_efficiency(p, RANGE).value == pytest.approx(dense.gamma_t1.min(), rel=0.005)


def test_design_spec_validation():
    with pytest.raises(ValueError):
        DesignSpec("MP2RAGE")
    with pytest.raises(ValueError):
        DesignSpec("SEIR", rho=1.5)
    with pytest.raises(ValueError):
        DesignSpec("CIR", multistart=0)
    assert DesignSpec("sr", rho=0.3).effective_rho == 1.0
    assert DesignSpec("DESPOT").effective_rho == 0.5
    assert DesignSpec("CIR", n_acq=5).n_acq == (5,)


def test_unknown_design_variable_rejected():
    with pytest.raises(ValueError):
        optimize_protocol(DesignSpec("SR", bounds={"w": (1.0, 2.0)}, multistart=1), RANGE)


def _small(family, **kw):
    kw.setdefault("multistart", 3)
    kw.setdefault("max_evals", 150)
    return DesignSpec(family, **kw)


def test_result_is_self_consistent():
    spec = _small("FIR2", n_acq=6)
    res = optimize_protocol(spec, RANGE)
    assert res.lambda_min == worst_case_efficiency(res.protocol, RANGE, spec.effective_rho).value
    assert res.gamma_avg_t1 == pytest.approx(range_map(res.protocol, RANGE, 100.0).averages()["gamma_t1"])
    assert res.gamma_avg_t2 is None


def test_restarts_are_nested_and_monotone():
    few = optimize_protocol(_small("SR", n_acq=6, multistart=2), RANGE)
    more = optimize_protocol(_small("SR", n_acq=6, multistart=5), RANGE)
    assert more.trace[:2] == few.trace
    assert all(b >= a for a, b in zip(more.trace, more.trace[1:]))
    assert more.lambda_min >= few.lambda_min


def test_count_search_takes_best_over_counts():
    one = optimize_protocol(_small("CIR", n_acq=(4,), bounds={"w": (10000.0, 10000.0)}), RANGE)
    both = optimize_protocol(_small("CIR", n_acq=(3, 4), bounds={"w": (10000.0, 10000.0)}), RANGE)
    assert both.lambda_min >= one.lambda_min
    assert len(both.trace) == 6


def test_pinned_variable_is_respected():
    res = optimize_protocol(_small("CIR", n_acq=4, bounds={"w": (12345.0, 12345.0)}), RANGE)
    assert res.protocol.w == 12345.0


@settings(max_examples=8, deadline=None)
@given(
    family=st.sampled_from(["CIR", "SR", "FIR1", "FIR2", "LL"]),
    step_hi=st.floats(50.0, 3000.0),
    start_hi=st.floats(0.0, 2000.0),
)
def test_returned_protocol_respects_bounds(family, step_hi, start_hi):
    start = "t_start" if family == "LL" else "ti_start"
    step = "t_step" if family == "LL" else "ti_step"
    lo_start = 1.0 if family == "LL" else 0.0
    bounds = {start: (lo_start, max(start_hi, lo_start)), step: (1.0, step_hi)}
    res = optimize_protocol(_small(family, n_acq=4, multistart=2, max_evals=60, bounds=bounds), RANGE)
    times = np.array(res.protocol.t if family == "LL" else res.protocol.ti)
    assert bounds[start][0] - 1e-9 <= times[0] <= bounds[start][1] + 1e-9
    steps = np.diff(times)
    assert np.all(steps >= 1.0 - 1e-9) and np.all(steps <= step_hi + 1e-6)
    if family == "FIR2":
        assert times[-1] < res.protocol.tr
    if family == "CIR":
        assert res.protocol.w >= 5 * RANGE.t1_max


def test_too_few_acquisitions_is_infeasible():
    with pytest.raises(NoFeasiblePoint):
        optimize_protocol(_small("SR", n_acq=1), TissueRange(1500.0, 1500.0, 85.0, 85.0))


def test_nonpositive_timing_box_is_infeasible():
    spec = _small("FIR1", n_acq=4, bounds={"ti_start": (0.0, 0.0), "ti_step": (0.0, 0.0), "w": (0.0, 0.0)})
    with pytest.raises(NoFeasiblePoint):
        optimize_protocol(spec, RANGE)


def test_despot_redundancy_warning():
    spec = DesignSpec("DESPOT", fixed={"n_spgr": 2, "tr_spgr": 3.4}, multistart=4, rho=0.5)
    res = optimize_protocol(spec, RANGE)
    assert abs(res.protocol.alpha_spgr[0] - res.protocol.alpha_spgr[1]) < 0.5
    assert any("redundant" in w for w in res.warnings)


def test_published_protocols_are_feasible_starting_points():
    for name, p in BRAIN_PROTOCOLS.items():
        rho = 0.5 if p.joint else 1.0
        wc = worst_case_efficiency(p, RANGE, rho)
        assert wc.value > 0 and not wc.degenerate, name

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from relaxcrb import (
    BRAIN_PROTOCOLS,
    SR,
    CollinearVectors,
    NoiseModel,
    SingularInformation,
    TissueParams,
    TissueRange,
    crb_geometric,
    crb_matrix,
    efficiency_map,
    equivalent_snr,
    evaluate_point,
    fisher_information,
    jacobian,
    pcrb,
    range_map,
    tnr_efficiency,
    weighting_vector,
)
from relaxcrb.estimation import geometric_factors
from relaxcrb.sequences import WeightingVector

from conftest import GRID_5X5

MID = TissueParams(3000.0, 1500.0, 85.0)


def _matrix_route(protocol, tissue, snr):
    sigma = NoiseModel.from_snr(tissue.m0, snr).sigma
    return crb_matrix(fisher_information(jacobian(protocol, tissue), sigma))


@pytest.mark.parametrize("tissue", GRID_5X5, ids=lambda t: f"{t.t1:g}-{t.t2:g}")
def test_geometric_route_equals_matrix_route(protocol, tissue):
    geo = crb_geometric(weighting_vector(protocol, tissue), 100.0)
    mat = _matrix_route(protocol, tissue, 100.0)
    assert geo.crb_t1 == pytest.approx(mat[1], rel=1e-9)
    if protocol.joint:
        assert geo.crb_t2 == pytest.approx(mat[2], rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    vecs=arrays(np.float64, (3, 6), elements=st.floats(-1.0, 1.0)),
    snr=st.floats(1.0, 1e4),
)
def test_geometric_route_on_arbitrary_vectors(vecs, snr):
    h, d1, d2 = vecs
    J = np.stack([h, d1, d2], axis=-1)
    # Keep away from (near-)dependent triples where either route is ill-posed.
    assume(np.linalg.cond(J) < 1e4)
    w = WeightingVector(h, d1, d2)
    geo = crb_geometric(w, snr)
    inv = np.linalg.inv(J.T @ J) / snr**2
    assert geo.crb_t1 == pytest.approx(inv[1, 1], rel=1e-8)
    assert geo.crb_t2 == pytest.approx(inv[2, 2], rel=1e-8)
    assert 0.0 < geo.orth_t1 <= 1.0 + 1e-12
    assert 0.0 < geo.orth_t2 <= 1.0 + 1e-12


def test_t1_only_orthogonality_is_sine_of_angle():
    w = weighting_vector(BRAIN_PROTOCOLS["CIR"], MID)
    rep = crb_geometric(w, 100.0)
    assert rep.orth_t1 == pytest.approx(math.sin(rep.phi1), rel=1e-12)
    assert rep.sens_t1 == pytest.approx(np.linalg.norm(w.dh_dt1))


def test_orthogonal_vectors_have_unit_orthogonality():
    g = geometric_factors(np.array([1.0, 0, 0]), np.array([0, 2.0, 0]), np.array([0, 0, 3.0]))
    assert g["orth_t1"] == pytest.approx(1.0)
    assert g["orth_t2"] == pytest.approx(1.0)
    assert g["sens_t2"] == pytest.approx(3.0)


def test_collinear_vectors_rejected():
    h = np.array([1.0, 2.0, 3.0])
    with pytest.raises(CollinearVectors):
        crb_geometric(WeightingVector(h, 2 * h), 100.0)
    with pytest.raises(CollinearVectors):
        crb_geometric(WeightingVector(h, np.zeros(3)), 100.0)
    with pytest.raises(CollinearVectors):
        d1 = np.array([1.0, 0, 0])
        crb_geometric(WeightingVector(h, d1, h + d1), 100.0)


def test_singular_information_rejected():
    J = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(SingularInformation):
        crb_matrix(fisher_information(J, 1.0))


def test_fisher_information_is_score_covariance():
    # E[score score^T] with score = J^T n / sigma^2 for Gaussian noise.
    rng = np.random.default_rng(7)
    for name in ["CIR", "DESPOT"]:
        J = jacobian(BRAIN_PROTOCOLS[name], MID)
        sigma = 30.0
        n = rng.standard_normal((1_000_000, J.shape[0])) * sigma
        score = n @ J / sigma**2
        emp = score.T @ score / len(score)
        fim = fisher_information(J, sigma).matrix
        np.testing.assert_allclose(np.diag(emp), np.diag(fim), rtol=0.01)


def test_crb_scales_with_inverse_snr_squared():
    a = evaluate_point(BRAIN_PROTOCOLS["SEIR"], MID, 50.0)
    b = evaluate_point(BRAIN_PROTOCOLS["SEIR"], MID, 100.0)
    assert a.crb_t1 / b.crb_t1 == pytest.approx(4.0)
    assert a.crb_t2 / b.crb_t2 == pytest.approx(4.0)


@settings(max_examples=30, deadline=None)
@given(m0=st.floats(1.0, 1e5), family=st.sampled_from(list(BRAIN_PROTOCOLS)))
def test_relative_bound_invariant_to_m0_at_fixed_snr(m0, family):
    p = BRAIN_PROTOCOLS[family]
    ref = _matrix_route(p, MID, 100.0)
    other = _matrix_route(p, TissueParams(m0, MID.t1, MID.t2), 100.0)
    assert other[1] == pytest.approx(ref[1], rel=1e-8)
    assert other[0] / m0**2 == pytest.approx(ref[0] / MID.m0**2, rel=1e-8)


def test_efficiency_definition_example():
    # Efficiency 17 at T1 = 1500 ms in 10 s gives a precision of about 27.9 ms (1.86 %).
    t_seq = 54500.0
    crb = (1500.0 / (17.0 * math.sqrt(t_seq / 1000.0))) ** 2
    assert tnr_efficiency(1500.0, crb, t_seq) == pytest.approx(17.0)
    precision = 1500.0 / (17.0 * math.sqrt(10.0))
    assert precision == pytest.approx(27.9, abs=0.05)
    assert 100 * precision / 1500.0 == pytest.approx(1.86, abs=0.005)


def test_equivalent_snr_and_pcrb():
    assert equivalent_snr(100.0, 10000.0, 10000.0) == pytest.approx(100.0)
    assert equivalent_snr(100.0, 10000.0, 2500.0) == pytest.approx(200.0)
    assert pcrb(225.0, 1500.0) == pytest.approx(1.0)
    for bad in [(100.0, 0.0, 10.0), (100.0, 10.0, 0.0)]:
        with pytest.raises(ValueError):
            equivalent_snr(*bad)
    with pytest.raises(ValueError):
        tnr_efficiency(1500.0, 0.0, 100.0)


def test_evaluate_point_fields():
    rep = evaluate_point(BRAIN_PROTOCOLS["DESPOT"], MID, 100.0)
    assert rep.t_seq == pytest.approx(13.6)
    assert rep.gamma_t1 == pytest.approx(tnr_efficiency(MID.t1, rep.crb_t1, 13.6))
    assert rep.crb_m0 > 0 and rep.phi3 is not None


def test_efficiency_map_matches_pointwise_evaluation(protocol):
    m = range_map(protocol, TissueRange(grid_t1=3, grid_t2=2), 100.0)
    for i in range(m.t1.size):
        rep = evaluate_point(protocol, TissueParams(3000.0, m.t1[i], m.t2[i]), 100.0)
        assert m.gamma_t1[i] == pytest.approx(rep.gamma_t1, rel=1e-12)
        assert m.orth_t1[i] == pytest.approx(rep.orth_t1, rel=1e-12)
        if protocol.joint:
            assert m.gamma_t2[i] == pytest.approx(rep.gamma_t2, rel=1e-12)
    assert not m.degenerate.any()


def test_efficiency_map_marks_degenerate_points():
    # SR with a single informative acquisition repeated at TI=0 carries no T1 information.
    p = SR(ti=(0.0, 1e-300))
    m = efficiency_map(p, [1500.0], [85.0], 100.0)
    assert m.degenerate.all()
    assert np.isinf(m.crb_t1).all()


def test_orthogonality_bounds_over_range(protocol):
    m = range_map(protocol, TissueRange(), 100.0)
    assert np.all((m.orth_t1 > 0) & (m.orth_t1 <= 1.0))
    if m.joint:
        assert np.all((m.orth_t2 > 0) & (m.orth_t2 <= 1.0))

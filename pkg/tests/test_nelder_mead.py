from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from relaxcrb.nelder_mead import initial_simplex, nelder_mead_batch, nelder_mead_minimize


def rosen(x):
    return 100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2


def test_quadratic():
    res = nelder_mead_minimize(lambda x: (x[0] - 3.0) ** 2, [0.0], xatol=1e-10, fatol=1e-14)
    assert res.converged
    assert res.x[0] == pytest.approx(3.0, abs=1e-6)


def test_rosenbrock_matches_scipy_trajectory():
    ours = nelder_mead_minimize(rosen, [-1.2, 1.0], xatol=1e-8, fatol=1e-8)
    ref = minimize(rosen, [-1.2, 1.0], method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-8})
    np.testing.assert_allclose(ours.x, [1.0, 1.0], atol=1e-4)
    # Same algorithm and default simplex as the reference implementation.
    assert ours.nfev == ref.nfev
    np.testing.assert_allclose(ours.x, ref.x, rtol=1e-12)


def test_constant_objective_stays_at_start():
    res = nelder_mead_minimize(lambda x: 5.0, [2.0, -1.0])
    assert res.converged
    np.testing.assert_allclose(res.x, [2.0, -1.0], atol=0.2)
    assert res.fun == 5.0


def test_budget_exhaustion_returns_best_so_far():
    res = nelder_mead_minimize(rosen, [-1.2, 1.0], maxfev=20)
    assert not res.converged
    assert res.fun < rosen([-1.2, 1.0])
    assert res.nfev <= 20 + 2  # a shrink may overrun the budget by k evaluations


def test_nonfinite_start_rejected():
    with pytest.raises(ValueError):
        nelder_mead_minimize(lambda x: float("nan"), [1.0])


def test_nonfinite_values_treated_as_infinite():
    f = lambda x: np.inf if x[0] < 0 else (x[0] - 1.0) ** 2
    res = nelder_mead_minimize(f, [0.5], xatol=1e-10, fatol=1e-14)
    assert res.x[0] == pytest.approx(1.0, abs=1e-6)


def test_custom_simplex():
    sim = np.array([[0.5, 0.5], [0.6, 0.5], [0.5, 0.6]])
    res = nelder_mead_minimize(lambda x: np.sum((x - 0.25) ** 2), sim[0], simplex=sim,
                               xatol=1e-10, fatol=1e-14)
    np.testing.assert_allclose(res.x, [0.25, 0.25], atol=1e-8)


def test_initial_simplex_scipy_convention():
    sim = initial_simplex(np.array([2.0, 0.0]))
    np.testing.assert_allclose(sim[0], [[2.0, 0.0], [2.1, 0.0], [2.0, 0.00025]])


@settings(max_examples=25, deadline=None)
@given(
    centers=st.lists(
        st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.5, 5)), min_size=1, max_size=6
    )
)
def test_batch_rows_are_independent(centers):
    """Each batch row follows exactly the trajectory it would follow alone."""
    c = np.array(centers)

    def fun(x, rows):
        return np.sum(c[rows, 2:3] * (x - c[rows, :2]) ** 2, axis=-1) + np.abs(x[:, 0]) * 0.1

    x0 = np.ones((len(c), 2))
    batch = nelder_mead_batch(fun, x0, xatol=1e-9, fatol=1e-12)
    for i in range(len(c)):
        single = nelder_mead_batch(
            lambda x, rows: fun(x, np.full(len(x), i)), x0[i : i + 1], xatol=1e-9, fatol=1e-12
        )
        np.testing.assert_array_equal(batch.x[i], single.x[0])
        assert batch.nfev[i] == single.nfev[0]


@settings(max_examples=25, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_coupled_quadratics_reach_analytic_minimum(a, b):
    f = lambda x: (x[0] - a) ** 2 + 3.0 * (x[1] - b) ** 2 + x[0] * x[1] * 0.5
    # Stationary point of f: solve the 2 x 2 linear system of its gradient.
    exact = np.linalg.solve([[2.0, 0.5], [0.5, 6.0]], [2.0 * a, 6.0 * b])
    ours = nelder_mead_minimize(f, [1.0, 1.0], xatol=1e-9, fatol=1e-14)
    ref = minimize(f, [1.0, 1.0], method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-14})
    assert ours.converged
    np.testing.assert_allclose(ours.x, exact, atol=1e-7)
    np.testing.assert_allclose(ours.x, ref.x, atol=1e-7)

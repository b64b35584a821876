import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import minimize_q, simplex_sort
from scaledfb.metric import DiagonalMetric
from scaledfb.prox import (NonnegIndicator, NonnegL1, NonnegOrthant, SimplexIndicator,
                           WholeSpace, project_simplex, scaled_projection, scaled_prox)

vec = arrays(float, st.integers(1, 40), elements=st.floats(-50, 50))


def test_nonneg_indicator_is_a_clamp():
    out = scaled_prox(NonnegIndicator(), [1.0, -2.0, 3.0], np.zeros(3), 0.7, np.ones(3))
    assert out.tolist() == [1.0, 0.0, 3.0]


def test_nonneg_l1_by_hand():
    out = scaled_prox(NonnegL1(0.5), [1.2, -3.0, 0.3], np.zeros(3), 1.0, np.ones(3))
    np.testing.assert_allclose(out, [0.7, 0.0, 0.0], atol=1e-15)
    oracle = minimize_q("nonneg_plus_l1", [1.2, -3.0, 0.3], np.zeros(3), 1.0, np.ones(3), 0.5)
    np.testing.assert_allclose(out, oracle, atol=1e-8)


def test_simplex_prox_by_hand():
    out = scaled_prox(SimplexIndicator(), [2.0, 0.0], np.zeros(2), 1.0, np.ones(2))
    np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("y, expect", [([0.5, 0.5], [0.5, 0.5]), ([0.6, 0.6], [0.5, 0.5]),
                                       ([2.0, 0.0], [1.0, 0.0])])
def test_simplex_projection_examples(y, expect):
    np.testing.assert_allclose(project_simplex(y), expect, atol=1e-15)


@given(vec)
def test_simplex_projection_matches_sort_oracle(y):
    x = project_simplex(y)
    np.testing.assert_allclose(x, simplex_sort(y), atol=1e-10)
    assert np.all(x >= 0) and abs(x.sum() - 1.0) < 1e-12


@given(vec)
def test_simplex_projection_is_idempotent(y):
    x = project_simplex(y)
    np.testing.assert_allclose(project_simplex(x), x, atol=1e-12)


@given(st.integers(0, 2**31 - 1), st.sampled_from(["nonneg_indicator", "nonneg_plus_l1",
                                                    "simplex_indicator"]))
def test_scaled_prox_matches_numerical_minimizer(seed, kind):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    y = rng.normal(size=n)
    grad = rng.normal(size=n)
    alpha = float(rng.uniform(0.1, 2.0))
    d = rng.uniform(0.2, 5.0, n)
    rho = 0.3
    g = {"nonneg_indicator": NonnegIndicator(), "nonneg_plus_l1": NonnegL1(rho),
         "simplex_indicator": SimplexIndicator()}[kind]
    got = scaled_prox(g, y, grad, alpha, DiagonalMetric(d))
    want = minimize_q(kind, y, grad, alpha, d, rho)
    np.testing.assert_allclose(got, want, atol=1e-6)


@given(st.integers(0, 2**31 - 1))
def test_weighted_simplex_prox_is_feasible_and_optimal(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 30))
    u = rng.normal(scale=10, size=n)
    d = rng.uniform(1e-3, 1e3, n)
    x = SimplexIndicator().prox(u, 1.0, d)
    assert np.all(x >= 0) and abs(x.sum() - 1.0) < 1e-12
    # KKT: d_i (x_i - u_i) + lam = 0 on the support, >= 0 off it
    lam = -d * (x - u)
    on = x > 0
    if on.any():
        ref = np.median(lam[on])
        np.testing.assert_allclose(lam[on], ref, atol=1e-8 * (1 + abs(ref)) * d.max())
        assert np.all(lam[~on] <= ref + 1e-8 * (1 + abs(ref)) * d.max())


def test_prox_input_checks():
    with pytest.raises(ValueError):
        scaled_prox(NonnegIndicator(), [1.0], [0.0], 0.0, [1.0])
    with pytest.raises(ValueError):
        scaled_prox(NonnegIndicator(), [1.0], [0.0], 1.0, [0.0])
    with pytest.raises(ValueError):
        scaled_prox(NonnegIndicator(), [1.0, 2.0], [0.0, 0.0], 1.0, [1.0, 1.0, 1.0])


def test_nonsmooth_values_and_membership():
    assert NonnegL1(2.0).value([1.0, 0.5]) == 3.0
    assert NonnegL1(2.0).value([-1.0]) == np.inf
    assert NonnegIndicator().contains([0.0, 1.0])
    assert not SimplexIndicator().contains([0.5, 0.6])
    assert SimplexIndicator().contains([0.25, 0.75])


def test_feasible_set_projections():
    x = np.array([-1.0, 2.0])
    D = DiagonalMetric(np.array([3.0, 7.0]))
    assert scaled_projection(NonnegOrthant(), x, D).tolist() == [0.0, 2.0]
    assert scaled_projection(WholeSpace(), x, D).tolist() == [-1.0, 2.0]
    with pytest.raises(NotImplementedError):
        scaled_projection(SimplexIndicator(), x, D)


@given(st.integers(0, 2**31 - 1))
def test_orthant_projection_is_nonexpansive_in_d_norm(seed):
    rng = np.random.default_rng(seed)
    x, z = rng.normal(size=(2, 10))
    d = rng.uniform(0.1, 10, 10)
    P = NonnegOrthant()
    diff = P.project(x) - P.project(z)
    assert np.sum(d * diff ** 2) <= np.sum(d * (x - z) ** 2) + 1e-12

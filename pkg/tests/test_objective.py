import numpy as np
import pytest

import oracles
from sqrkit.basis import QuantileGrid
from sqrkit.errors import InvalidProblem, ShapeError
from sqrkit.fit import fit_sqr
from sqrkit.objective import (
    SqrFit,
    SqrProblem,
    check_loss,
    fidelity_sum,
    objective,
    penalty_term,
    subgradient,
)


def test_check_loss_examples():
    assert check_loss(0.5, 2.0) == 1.0
    assert check_loss(0.25, -4.0) == 3.0
    assert check_loss(0.9, 0.0) == 0.0
    r = np.linspace(-3, 3, 13)
    assert np.all(check_loss(0.3, r) >= 0)


def test_objective_at_zero(make_problem):
    prob = make_problem(0, c=0.01)
    expect = sum(check_loss(t, prob.y).sum() for t in prob.taus)
    assert objective(prob, np.zeros(prob.p * prob.K)) == pytest.approx(expect, rel=1e-14)


def test_penalty_recomputed_elementwise(make_problem):
    prob = make_problem(1, c=0.05)
    theta = np.random.default_rng(1).normal(size=prob.p * prob.K)
    Theta = theta.reshape(prob.p, prob.K)
    expect = 0.0
    for l in range(prob.L):
        for j in range(prob.p):
            expect += prob.c_ell[l] * abs(Theta[j] @ prob.basis.Phi_dd[l])
    assert penalty_term(prob, theta) == pytest.approx(expect, rel=1e-12)
    np.testing.assert_array_equal(prob.c_ell, prob.n * prob.c * prob.grid.weights)


def test_single_level_matches_qr(engel):
    income, food = engel
    X = np.column_stack([np.ones_like(income), income])
    prob = SqrProblem.create(X, food, [0.5])
    fun, beta = oracles.quantile_regression(X, food, 0.5)
    # basis is the identity on one level, so theta = beta
    assert objective(prob, beta) == pytest.approx(fun, rel=1e-9)


def test_qr_lower_bound(make_problem):
    prob = make_problem(2)
    lower = sum(oracles.quantile_regression(prob.X, prob.y, t)[0] for t in prob.taus)
    rng = np.random.default_rng(2)
    for _ in range(5):
        assert objective(prob, rng.normal(size=prob.p * prob.K)) >= lower - 1e-9


def test_subgradient_all_positive_residuals(make_problem):
    prob = make_problem(3)
    theta = np.zeros(prob.p * prob.K)
    theta[: prob.K] = prob.y.min() - 10.0  # intercept far below every y
    g = subgradient(prob, theta)
    expect = -sum(t * np.kron(prob.X.sum(axis=0), prob.basis.Phi[l]) for l, t in enumerate(prob.taus))
    np.testing.assert_allclose(g, expect, rtol=1e-12)


def test_subgradient_finite_differences(make_problem):
    prob = make_problem(4, c=0.02)
    theta = np.random.default_rng(4).normal(size=prob.p * prob.K)
    g = subgradient(prob, theta)
    h = 1e-7
    fd = np.array([
        (objective(prob, theta + h * e) - objective(prob, theta - h * e)) / (2 * h)
        for e in np.eye(theta.size)
    ])
    assert np.abs(fd - g).max() <= 1e-5 * np.abs(g).max()


def test_local_optimality_probe(make_problem):
    prob = make_problem(5, c=0.01)
    fit = fit_sqr(prob)
    rng = np.random.default_rng(5)
    for _ in range(20):
        d = rng.normal(size=fit.theta.size)
        # optimum is only resolved to the IP gap tolerance
        assert objective(prob, fit.theta + 1e-6 * d) >= fit.objective_value - 1e-7 * (1 + fit.objective_value)


def test_convexity_probe(make_problem):
    prob = make_problem(6, c=0.03)
    rng = np.random.default_rng(6)
    for _ in range(20):
        t1, t2 = rng.normal(size=(2, prob.p * prob.K))
        a = rng.uniform()
        lhs = objective(prob, a * t1 + (1 - a) * t2)
        assert lhs <= a * objective(prob, t1) + (1 - a) * objective(prob, t2) + 1e-9


def test_fit_invariants(make_problem):
    prob = make_problem(7, c=0.01)
    fit = fit_sqr(prob)
    np.testing.assert_allclose(fit.beta, prob.basis.Phi @ fit.theta.reshape(prob.p, prob.K).T, atol=1e-12)
    assert fit.objective_value == pytest.approx(objective(prob, fit.theta), rel=1e-9)
    assert fit.fidelity_term() == pytest.approx(fidelity_sum(prob, fit.theta), rel=1e-9)
    assert fit.residuals.shape == (prob.L, prob.n)
    again = SqrFit.from_theta(prob, fit.theta)
    np.testing.assert_array_equal(again.beta, fit.beta)


def test_monotone_in_c(make_problem):
    prob = make_problem(8)
    pens, fids = [], []
    for c in (0.0, 1e-4, 1e-3, 1e-2, 1e-1):
        fit = fit_sqr(prob.with_c(c))
        pens.append(float(np.abs(prob.coef_dd(fit.theta)).sum()))
        fids.append(fidelity_sum(prob, fit.theta))
    assert all(b <= a + 1e-6 * (1 + a) for a, b in zip(pens, pens[1:]))
    assert all(b >= a - 1e-6 * (1 + a) for a, b in zip(fids, fids[1:]))


def test_problem_validation():
    grid = QuantileGrid([0.25, 0.5, 0.75])
    X = np.ones((5, 1))
    with pytest.raises(ShapeError):
        SqrProblem.create(X, np.ones(4), grid)
    with pytest.raises(InvalidProblem):
        SqrProblem.create(X, np.array([1, 2, np.nan, 4, 5]), grid)
    with pytest.raises(InvalidProblem):
        SqrProblem.create(X, np.ones(5), grid, c=-1.0)
    prob = SqrProblem.create(X, np.arange(5.0), grid, nknots=2)
    with pytest.raises(ShapeError):
        objective(prob, np.zeros(3))
    with pytest.raises(ShapeError):
        subgradient(prob, np.zeros(5))

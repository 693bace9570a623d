"""The SQR optimization instance, its objective and a subgradient.

Coefficients are stored as a flat vector ``theta`` of length ``p*K`` laid out
coordinate-major, i.e. ``theta.reshape(p, K)[j]`` are the spline coefficients
of ``beta_j``. Then ``beta(tau_l) = Theta @ phi(tau_l)``, which is the
Kronecker product ``(I_p kron phi(tau_l)^T) theta`` without forming it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .basis import QuantileGrid, SplineBasis, build_basis
from .errors import InvalidProblem, ShapeError


def check_loss(tau, r):
    """Quantile check loss ``rho_tau(r) = r * (tau - I(r < 0))``."""
    r = np.asarray(r, dtype=float)
    return r * (tau - (r < 0))


@dataclass(frozen=True)
class SqrProblem:
    X: np.ndarray
    y: np.ndarray
    grid: QuantileGrid
    basis: SplineBasis
    c: float = 0.0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise InvalidProblem("design matrix must be a nonempty 2-D array")
        if X.shape[0] != y.size:
            raise ShapeError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidProblem("X and y must be finite")
        if self.basis.L != self.grid.L:
            raise ShapeError("basis was evaluated on a grid of different length")
        c = float(self.c)
        if not np.isfinite(c) or c < 0:
            raise InvalidProblem(f"smoothing parameter must be finite and >= 0, got {c}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "c", c)

    @classmethod
    def create(cls, X, y, grid, c=0.0, nknots=None, basis=None):
        if not isinstance(grid, QuantileGrid):
            grid = QuantileGrid(grid)
        if basis is None:
            basis = build_basis(grid, nknots)
        return cls(X=X, y=y, grid=grid, basis=basis, c=c)

    def with_c(self, c):
        return replace(self, c=c)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def K(self):
        return self.basis.K

    @property
    def L(self):
        return self.grid.L

    @property
    def taus(self):
        return self.grid.levels

    @property
    def c_ell(self):
        return self.n * self.c * self.grid.weights

    def coef(self, theta):
        """``beta(tau_l)`` for every level as an L x p array."""
        return self.basis.Phi @ self._Theta(theta).T

    def coef_dd(self, theta):
        return self.basis.Phi_dd @ self._Theta(theta).T

    def residuals(self, theta):
        """Residual matrix of shape (n, L)."""
        return self.y[:, None] - self.X @ self.coef(theta).T

    def _Theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.p * self.K,):
            raise ShapeError(f"theta must have length p*K = {self.p * self.K}, got shape {theta.shape}")
        return theta.reshape(self.p, self.K)


@dataclass
class SqrFit:
    """A solved SQR instance.

    ``residuals`` is L x n (row l holds ``y - X beta(tau_l)``).
    """

    problem: SqrProblem
    theta: np.ndarray
    beta: np.ndarray
    residuals: np.ndarray
    objective_value: float
    solver_info: dict = field(default_factory=dict)
    fidelity: np.ndarray = None
    complexity: np.ndarray = None

    @classmethod
    def from_theta(cls, problem, theta, solver_info=None, complexity_tol=None):
        from .select import fidelity_complexity

        theta = np.asarray(theta, dtype=float)
        beta = problem.coef(theta)
        fit = cls(
            problem=problem,
            theta=theta,
            beta=beta,
            residuals=(problem.y[:, None] - problem.X @ beta.T).T,
            objective_value=objective(problem, theta),
            solver_info=dict(solver_info or {}),
        )
        fit.fidelity, fit.complexity = fidelity_complexity(problem, fit, tol=complexity_tol)
        return fit

    @property
    def taus(self):
        return self.problem.taus

    def penalty(self):
        return penalty_term(self.problem, self.theta)

    def fidelity_term(self):
        return self.objective_value - self.penalty()


def fidelity_sum(prob, theta):
    R = prob.residuals(theta)
    return float(check_loss(prob.taus[None, :], R).sum())


def penalty_term(prob, theta):
    Bdd = prob.coef_dd(theta)
    return float(np.abs(Bdd).sum(axis=1) @ prob.c_ell)


def objective(prob, theta):
    """Check-loss sum over all levels plus the weighted L1 curvature penalty."""
    return fidelity_sum(prob, theta) + penalty_term(prob, theta)


def subgradient(prob, theta):
    """Subgradient of :func:`objective`, taking the derivative of both
    ``rho_tau`` and ``|.|`` to be zero at exactly zero."""
    Theta = prob._Theta(theta)
    B = prob.basis.Phi @ Theta.T
    R = prob.y[:, None] - prob.X @ B.T
    psi = prob.taus[None, :] - (R < 0)
    psi[R == 0] = 0.0
    g = -(prob.X.T @ psi) @ prob.basis.Phi
    Bdd = prob.basis.Phi_dd @ Theta.T
    g += (np.sign(Bdd) * prob.c_ell[:, None]).T @ prob.basis.Phi_dd
    return g.ravel()

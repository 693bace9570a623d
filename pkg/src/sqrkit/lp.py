"""Box-dual / free-primal linear program for SQR.

Dual:    max b'zeta   s.t. D'zeta = a,  0 <= zeta <= 1
Primal:  min a'theta + 1'z   s.t. D theta + z - w = b,  z, w >= 0

``D`` stacks the L residual blocks ``X Phi(tau_l)`` (n rows each) followed by
the L penalty blocks ``2 c_l Phi_dd(tau_l)`` (p rows each). It is never formed
densely outside :meth:`CanonicalLp.dense_D`; products go through the
Kronecker factors.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidProblem, NotConverged, ShapeError


@dataclass(frozen=True)
class CanonicalLp:
    X: np.ndarray
    y: np.ndarray
    Phi: np.ndarray
    Phi_dd: np.ndarray
    taus: np.ndarray
    c_ell: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def dims(self):
        n, p = self.X.shape
        L, K = self.Phi.shape
        return n, p, K, L

    @property
    def n_rows(self):
        n, p, K, L = self.dims
        return n * L + p * L

    @property
    def n_cols(self):
        n, p, K, L = self.dims
        return p * K

    @property
    def n_decision_vars(self):
        """Variable count of the original nonnegative LP, 2pK + 2nL + 2pL."""
        n, p, K, L = self.dims
        return 2 * p * K + 2 * n * L + 2 * p * L

    @property
    def offset(self):
        """Constant dropped when passing to the canonical pair.

        ``objective(theta) == primal_value(theta) - offset`` and at the
        optimum ``objective == b'zeta - offset``.
        """
        return float(np.sum(1.0 - self.taus) * self.y.sum())

    def D_dot(self, theta):
        n, p, K, L = self.dims
        Theta = np.asarray(theta, dtype=float).reshape(p, K)
        fitted = self.X @ (self.Phi @ Theta.T).T            # n x L
        pen = 2.0 * self.c_ell[:, None] * (self.Phi_dd @ Theta.T)  # L x p
        return np.concatenate([fitted.T.ravel(), pen.ravel()])

    def DT_dot(self, zeta):
        n, p, K, L = self.dims
        zeta = np.asarray(zeta, dtype=float)
        if zeta.shape != (self.n_rows,):
            raise ShapeError(f"zeta must have length {self.n_rows}")
        Zr = zeta[: n * L].reshape(L, n)
        Zp = zeta[n * L :].reshape(L, p)
        out = (self.X.T @ Zr.T) @ self.Phi
        out += (2.0 * self.c_ell[:, None] * Zp).T @ self.Phi_dd
        return out.ravel()

    def abs_DT_dot(self, zeta):
        """``|D|' |zeta|``: the magnitude of the terms summed by :meth:`DT_dot`."""
        n, p, K, L = self.dims
        zeta = np.abs(np.asarray(zeta, dtype=float))
        Zr = zeta[: n * L].reshape(L, n)
        Zp = zeta[n * L :].reshape(L, p)
        out = (np.abs(self.X).T @ Zr.T) @ np.abs(self.Phi)
        out += (2.0 * np.abs(self.c_ell)[:, None] * Zp).T @ np.abs(self.Phi_dd)
        return out.ravel()

    def relative_infeasibility(self, zeta):
        """``max_j |D'zeta - a|_j / (1 + (|D|'|zeta|)_j)``.

        Penalty rows grow with ``c``, so the absolute residual carries roundoff
        proportional to them; this is the residual relative to that scale.
        """
        res = np.abs(self.DT_dot(zeta) - self.a)
        return float(np.max(res / (1.0 + self.abs_DT_dot(zeta)), initial=0.0))

    @cached_property
    def _gram_factors(self):
        n, p, K, L = self.dims
        XX = (self.X[:, :, None] * self.X[:, None, :]).reshape(n, p * p)
        PP = (self.Phi[:, :, None] * self.Phi[:, None, :]).reshape(L, K * K)
        PPdd = (self.Phi_dd[:, :, None] * self.Phi_dd[:, None, :]).reshape(L, K * K)
        return XX, PP, PPdd

    def normal_matrix(self, q):
        """``D' diag(q) D`` as a dense pK x pK array."""
        n, p, K, L = self.dims
        XX, PP, PPdd = self._gram_factors
        Qr = q[: n * L].reshape(L, n)
        Qp = q[n * L :].reshape(L, p)
        # per-level weighted Gram matrices X' diag(q_l) X, flattened
        M = Qr @ XX
        N = (M.T @ PP).reshape(p, p, K, K).transpose(0, 2, 1, 3).copy()
        P = ((4.0 * self.c_ell[:, None] ** 2 * Qp).T @ PPdd).reshape(p, K, K)
        idx = np.arange(p)
        N[idx, :, idx, :] += P
        return N.reshape(p * K, p * K)

    def row_norms(self):
        """Euclidean norm of every row of D, in row order."""
        n, p, K, L = self.dims
        data = np.outer(np.linalg.norm(self.Phi, axis=1), np.linalg.norm(self.X, axis=1))  # L x n
        pen = 2.0 * self.c_ell * np.linalg.norm(self.Phi_dd, axis=1)  # L
        return np.concatenate([data.ravel(), np.repeat(pen, p)])

    def dense_D(self):
        """Materialized D; cached, since the solver's fallback path reuses it."""
        return self._dense

    @cached_property
    def _dense(self):
        n, p, K, L = self.dims
        blocks = [np.kron(self.X, self.Phi[l][None, :]) for l in range(L)]
        blocks += [2.0 * self.c_ell[l] * np.kron(np.eye(p), self.Phi_dd[l][None, :]) for l in range(L)]
        return np.vstack(blocks)

    def split(self, theta):
        """Nonnegative residual split ``z = (b - D theta)+``, ``w = (D theta - b)+``."""
        r = self.b - self.D_dot(theta)
        return np.maximum(r, 0.0), np.maximum(-r, 0.0)

    def primal_value(self, theta):
        z, _ = self.split(theta)
        return float(self.a @ theta + z.sum())

    def dual_value(self, zeta):
        return float(self.b @ zeta)

    def initial_zeta(self):
        n, p, K, L = self.dims
        return np.concatenate([np.repeat(1.0 - self.taus, n), np.full(p * L, 0.5)])

    def dump_csv(self, directory):
        """Write ``D.csv``, ``a.csv`` and ``b.csv`` (dense, full precision)."""
        os.makedirs(directory, exist_ok=True)
        D = self.dense_D()
        with open(os.path.join(directory, "D.csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"col{j}" for j in range(D.shape[1])])
            for row in D:
                wr.writerow([repr(float(v)) for v in row])
        for name, vec in (("a", self.a), ("b", self.b)):
            with open(os.path.join(directory, f"{name}.csv"), "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow([name])
                for v in vec:
                    wr.writerow([repr(float(v))])


def assemble(prob):
    """Build the canonical LP pair for an :class:`~sqrkit.objective.SqrProblem`."""
    if prob.L == 0 or prob.n == 0:
        raise InvalidProblem("empty grid or design")
    X, y = prob.X, prob.y
    Phi, Phi_dd = prob.basis.Phi, prob.basis.Phi_dd
    taus, c_ell = prob.taus, prob.c_ell
    n, p = X.shape
    L = taus.size
    colsum = X.sum(axis=0)  # X' 1_n
    # a = sum_l (1 - tau_l) Phi_l' X' 1_n + c_l Phi_dd_l' 1_p
    a = np.outer(colsum, (1.0 - taus) @ Phi) + np.outer(np.ones(p), c_ell @ Phi_dd)
    b = np.concatenate([np.tile(y, L), np.zeros(p * L)])
    for arr in (a, b):
        arr.setflags(write=False)
    return CanonicalLp(X=X, y=y, Phi=Phi, Phi_dd=Phi_dd, taus=taus, c_ell=c_ell, a=a.ravel(), b=b)


def polish_vertex(lp, theta):
    """Snap an interior-point solution to the nearest basic solution.

    The ``pK`` rows closest to active (residual relative to row norm) that are
    linearly independent define a vertex ``D_B theta = b_B``. It replaces
    ``theta`` only if the primal objective does not get worse, so the result
    is never less optimal; on a unique vertex optimum it is exact.
    """
    theta = np.asarray(theta, dtype=float)
    norms = lp.row_norms()
    rows = np.flatnonzero(norms > 0)
    resid = np.abs(lp.b[rows] - lp.D_dot(theta)[rows]) / norms[rows]
    D = lp.dense_D()
    basis, chosen = [], []
    for i in rows[np.argsort(resid, kind="stable")]:
        v = D[i] / norms[i]
        for u in basis:
            v = v - (u @ v) * u
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
            chosen.append(i)
            if len(chosen) == lp.n_cols:
                break
    if len(chosen) < lp.n_cols:
        return theta
    try:
        vertex = np.linalg.solve(D[chosen], lp.b[chosen])
    except np.linalg.LinAlgError:
        return theta
    before = lp.primal_value(theta)
    if lp.primal_value(vertex) <= before + 1e-13 * (1.0 + abs(before)):
        return vertex
    return theta


def recover_theta(lp, result):
    """Coefficient vector from a solver result; refuses unconverged output."""
    if not getattr(result, "converged", False):
        raise NotConverged(f"solver stopped with status {getattr(result, 'status', '?')!r}")
    theta = np.asarray(result.theta, dtype=float)
    if theta.shape != (lp.n_cols,):
        raise ShapeError("solver output does not match the LP dimensions")
    return theta

"""High-level fitting entry points tying problem, LP and solvers together."""

from __future__ import annotations

import numpy as np

from .basis import QuantileGrid, identity_basis
from .errors import MaxIterExceeded
from .ip import IpConfig, solve_ip
from .lp import assemble, polish_vertex, recover_theta
from .objective import SqrFit, SqrProblem


def fit_sqr(prob, method="ip", ip_cfg=None, grad_cfg=None, theta0=None, complexity_tol=None,
            strict=True):
    """Solve ``prob`` and package the result as an :class:`SqrFit`.

    ``method`` is ``"ip"`` (exact LP) or one of ``"bfgs"``, ``"adam"``,
    ``"grad"``. With ``strict`` an interior-point run that hits its
    iteration limit raises :class:`MaxIterExceeded`, carrying the result.
    """
    method = method.lower()
    if method == "ip":
        lp = assemble(prob)
        res = solve_ip(lp, ip_cfg)
        info = {
            "method": "ip",
            "iterations": res.iterations,
            "gap": res.gap,
            "converged": res.converged,
            "status": res.status,
        }
        if not res.converged:
            fit = SqrFit.from_theta(prob, res.theta, info, complexity_tol)
            fit.solver_info["zeta"] = res.zeta
            if strict:
                raise MaxIterExceeded(f"interior point stopped after {res.iterations} iterations", fit)
            return fit
        theta = polish_vertex(lp, recover_theta(lp, res))
        fit = SqrFit.from_theta(prob, theta, info, complexity_tol)
        fit.solver_info["zeta"] = res.zeta
        return fit

    from .grad import SOLVERS, GradConfig

    algo = method.upper()
    if algo not in SOLVERS:
        raise ValueError(f"unknown method {method!r}")
    cfg = grad_cfg or GradConfig(algorithm=algo)
    theta, trace = SOLVERS[algo](prob, theta0, cfg)
    info = {"method": method, "iterations": trace.iterations, "status": trace.status,
            "final_step": trace.steps[-1] if trace.steps else None, "trace": trace}
    return SqrFit.from_theta(prob, theta, info, complexity_tol)


def fit_qr(X, y, grid, ip_cfg=None):
    """Independent quantile regressions at every grid level; returns L x p.

    All levels are solved as one LP with the identity basis and no penalty,
    which separates into the per-level problems.
    """
    if not isinstance(grid, QuantileGrid):
        grid = QuantileGrid(grid)
    prob = SqrProblem(X=X, y=y, grid=grid, basis=identity_basis(grid), c=0.0)
    fit = fit_sqr(prob, "ip", ip_cfg=ip_cfg)
    return fit.beta


def qr_warm_start(prob, beta_qr=None, ip_cfg=None):
    """Least-squares projection of per-level QR estimates onto the basis."""
    if beta_qr is None:
        beta_qr = fit_qr(prob.X, prob.y, prob.grid, ip_cfg)
    coef, *_ = np.linalg.lstsq(prob.basis.Phi, beta_qr, rcond=None)  # K x p
    return np.ascontiguousarray(coef.T).ravel()

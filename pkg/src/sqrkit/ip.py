"""Frisch-Newton primal-dual interior point solver for the SQR canonical pair.

The bounded-variable problem solved is

    min -b'zeta  s.t.  D'zeta = a,  0 <= zeta <= 1

with the free multiplier ``-theta`` on the equality constraint. Steps follow
Mehrotra's predictor-corrector scheme; the dual iterate starts at the feasible
point ``[(1 - tau_l) 1_n ..., 0.5 1_pL]`` so ``D'zeta = a`` holds throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import SingularNormalEquations

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IpConfig:
    max_iter: int = 50
    gap_tol: float = 1e-7
    small: float = 1e-10
    step_factor: float = 0.99995
    verbose: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.gap_tol > 0 or not self.small > 0:
            raise ValueError("gap_tol and small must be positive")


@dataclass
class IpState:
    """Iterate of the primal-dual pair.

    ``z``/``w`` are the nonnegative primal slacks of ``D theta + z - w = b``;
    at the optimum ``(1 - zeta) z = 0`` and ``zeta w = 0``.
    """

    zeta: np.ndarray
    theta: np.ndarray
    z: np.ndarray = None
    w: np.ndarray = None
    iteration: int = 0
    gap: float = np.inf


@dataclass
class KktReport:
    primal_infeasibility: float
    dual_infeasibility: float
    complementarity: float
    gap: float
    scale: float
    primal_relative: float = 0.0   # see CanonicalLp.relative_infeasibility

    def scaled(self):
        return {
            "primal_infeasibility": self.primal_infeasibility / self.scale,
            "primal_relative": self.primal_relative,
            "dual_infeasibility": self.dual_infeasibility / self.scale,
            "complementarity": self.complementarity / self.scale,
            "gap": self.gap / self.scale,
        }


@dataclass
class IpResult:
    theta: np.ndarray
    zeta: np.ndarray
    z: np.ndarray
    w: np.ndarray
    iterations: int
    gap: float
    converged: bool
    status: str
    gap_history: list = field(default_factory=list)
    initial_kkt: KktReport = None


def kkt_report(lp, state):
    """Residuals of the optimality conditions at ``state``.

    If the state carries no slacks, ``z``/``w`` are taken as the exact split
    of ``b - D theta``. ``gap`` is ``a'theta + 1'z - b'zeta``.
    """
    theta, zeta = np.asarray(state.theta, float), np.asarray(state.zeta, float)
    if state.z is None or state.w is None:
        z, w = lp.split(theta)
    else:
        z, w = state.z, state.w
    at = float(lp.a @ theta)
    primal = float(np.max(np.abs(lp.DT_dot(zeta) - lp.a), initial=0.0))
    dual = float(np.max(np.abs(lp.D_dot(theta) + z - w - lp.b), initial=0.0))
    comp = float(np.sum((1.0 - zeta) * z) + np.sum(zeta * w))
    gap = at + float(z.sum()) - float(lp.b @ zeta)
    return KktReport(primal, dual, comp, gap, 1.0 + abs(at), lp.relative_infeasibility(zeta))


def _bound(v, dv):
    # largest alpha with v + alpha dv >= 0, for v > 0
    neg = dv < 0
    if not neg.any():
        return 1e20
    return float((-v[neg] / dv[neg]).min())


class _Scaled:
    """``D`` with every nonzero row scaled to unit norm: ``diag(1/sigma) D``.

    The penalty rows carry the factor ``2 c_l`` and can be many decades larger
    than the data rows; working with ``zeta~ = sigma zeta`` in the box
    ``[0, sigma]`` solves the same LP with a well-scaled Newton system.
    """

    def __init__(self, lp):
        self.lp = lp
        norms = lp.row_norms()
        self.sigma = np.where(norms > 0, norms, 1.0)

    def D_dot(self, v):
        return self.lp.D_dot(v) / self.sigma

    def DT_dot(self, x):
        return self.lp.DT_dot(x / self.sigma)

    def normal_matrix(self, q):
        return self.lp.normal_matrix(q / self.sigma**2)

    def dense_D(self):
        return self.lp.dense_D() / self.sigma[:, None]


def _normal_solver(op, q, strict):
    """Solver for ``(D' diag(q) D) v = rhs`` on the scaled operator ``op``.

    The matrix is equilibrated and Cholesky-factored. Iterates near the
    solution spread ``q`` over many decades; when the factorization fails or
    leaves a poor residual, the solve switches to a QR factorization of
    ``sqrt(q) D``, which does not square the condition number. ``strict``
    (the unweighted start) treats any failure as structural rank deficiency.
    Each solve is followed by iterative refinement.
    """
    N = op.normal_matrix(q)
    d = np.sqrt(np.diag(N))
    if not np.all(np.isfinite(d)) or d.min() <= 0.0:
        raise SingularNormalEquations("normal equations have an empty column; design or penalty is degenerate")
    try:
        cf = linalg.cho_factor(N / d[:, None] / d[None, :], check_finite=False)
        if strict and np.diag(cf[0]).min() ** 2 <= 1e-13:
            cf = None
    except linalg.LinAlgError:
        cf = None
    if cf is None and strict:
        raise SingularNormalEquations(
            "normal equations D' Q D are numerically singular; "
            "the design is rank deficient or the penalty is degenerate"
        )

    def refine(base, rhs):
        v = base(rhs)
        res = rhs - N @ v
        for _ in range(2):
            cand = v + base(res)
            cres = rhs - N @ cand
            if not np.linalg.norm(cres) < np.linalg.norm(res):
                break
            v, res = cand, cres
        return v

    def chol(rhs):
        return linalg.cho_solve(cf, rhs / d, check_finite=False) / d

    def qr_base():
        R = linalg.qr(np.sqrt(q)[:, None] * op.dense_D(), mode="r", check_finite=False)[0][: N.shape[0]]
        diag = np.abs(np.diag(R))
        if diag.min() <= 1e-15 * diag.max():
            # keep a usable direction on a numerically rank-deficient step
            R = linalg.qr(np.vstack([R, 1e-10 * diag.max() * np.eye(R.shape[1])]), mode="r",
                          check_finite=False)[0][: R.shape[1]]

        def base(rhs):
            t = linalg.solve_triangular(R, rhs, trans="T", check_finite=False)
            return linalg.solve_triangular(R, t, check_finite=False)

        return base

    state = {"base": chol if cf is not None else None}

    def solve(rhs):
        if state["base"] is chol:
            v = refine(chol, rhs)
            if strict or np.linalg.norm(rhs - N @ v) <= 1e-9 * np.linalg.norm(rhs):
                return v
            state["base"] = None
        if state["base"] is None:
            state["base"] = qr_base()
        return refine(state["base"], rhs)

    return solve


def solve_ip(lp, cfg=None, callback=None):
    """Solve the canonical pair; returns an :class:`IpResult`.

    Internally the rows of ``D`` are scaled to unit norm (see :class:`_Scaled`);
    the returned ``zeta``, ``z`` and ``w`` are in the original scaling. On
    hitting ``max_iter`` the last iterate is returned with ``converged=False``
    and ``status='max_iter'``. ``callback``, if given, receives an
    :class:`IpState` after every iteration.
    """
    cfg = cfg or IpConfig()
    beta = cfg.step_factor
    op = _Scaled(lp)
    sig = op.sigma
    a = lp.a
    c = -lp.b / sig
    N_rows = lp.n_rows

    # x is the scaled dual zeta~ in [0, u]; s = u - x
    u = sig
    zeta0 = np.clip(lp.initial_zeta(), cfg.small, 1.0 - cfg.small)
    x = zeta0 * sig
    s = (1.0 - zeta0) * sig
    # multiplier start: least squares fit of the scaled rows
    solve = _normal_solver(op, np.ones(N_rows), strict=True)
    yv = solve(op.DT_dot(sig * c))
    r = c - op.D_dot(yv)
    r = r + 0.001 * (r == 0)
    z = np.where(r > 0, r, 0.0)
    w = z - r

    def gap_of(x, yv, w):
        return float(c @ x - yv @ a + w @ u)

    def state_of(x, yv, z, w):
        return IpState(zeta=x / sig, theta=-yv, z=w * sig, w=z * sig)

    init = kkt_report(lp, state_of(x, yv, z, w))

    def done(x, yv, gap):
        return (abs(gap) <= cfg.gap_tol * (1.0 + abs(float(a @ yv)))
                and lp.relative_infeasibility(x / sig) <= cfg.gap_tol)

    gap = gap_of(x, yv, w)
    history = [gap]
    it = 0
    converged = done(x, yv, gap)
    while not converged and it < cfg.max_iter:
        it += 1
        q = 1.0 / (z / x + w / s)
        # equals z - w in exact arithmetic; this form also removes dual drift
        r = c - op.D_dot(yv)
        solve = _normal_solver(op, q, strict=False)
        # restores D'zeta = a lost to rounding
        feas = a - op.DT_dot(x)
        # affine step
        dy = solve(op.DT_dot(q * r) + feas)
        dx = q * (op.D_dot(dy) - r)
        ds = -dx
        dz = -z * (dx / x + 1.0)
        dw = -w * (ds / s + 1.0)
        fp = min(beta * min(_bound(x, dx), _bound(s, ds)), 1.0)
        fd = min(beta * min(_bound(w, dw), _bound(z, dz)), 1.0)
        if min(fp, fd) < 1.0:
            # centering + second-order correction
            mu = float(z @ x + w @ s)
            g = float((z + fd * dz) @ (x + fp * dx) + (w + fd * dw) @ (s + fp * ds))
            mu = mu * (g / mu) ** 3 / (2.0 * N_rows)
            xinv = 1.0 / x
            sinv = 1.0 / s
            dxdz = dx * dz
            dsdw = ds * dw
            # x dz + z dx = mu - x z - dx_aff dz_aff, and likewise for (s, w)
            t = mu * (xinv - sinv) - r - xinv * dxdz + sinv * dsdw
            dy = solve(feas - op.DT_dot(q * t))
            dx = q * (op.D_dot(dy) + t)
            ds = -dx
            dz = xinv * (mu - z * dx - dxdz) - z
            dw = sinv * (mu - w * ds - dsdw) - w
            fp = min(beta * min(_bound(x, dx), _bound(s, ds)), 1.0)
            fd = min(beta * min(_bound(w, dw), _bound(z, dz)), 1.0)
        x = x + fp * dx
        # updated in place: u - x cancels when x is close to a large bound
        s = s - fp * dx
        yv = yv + fd * dy
        w = w + fd * dw
        z = z + fd * dz
        gap = gap_of(x, yv, w)
        history.append(gap)
        if callback is not None:
            st = state_of(x, yv, z, w)
            st.iteration, st.gap = it, gap
            callback(st)
        if cfg.verbose:
            log.info("ip iter=%d gap=%.6e fp=%.4f fd=%.4f", it, gap, fp, fd)
        converged = done(x, yv, gap)

    final = state_of(x, yv, z, w)
    return IpResult(
        theta=final.theta,
        zeta=final.zeta,
        z=final.z,
        w=final.w,
        iterations=it,
        gap=gap,
        converged=bool(converged),
        status="converged" if converged else "max_iter",
        gap_history=history,
        initial_kkt=init,
    )

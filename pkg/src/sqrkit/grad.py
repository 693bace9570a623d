"""Approximate SQR solvers that work on theta directly: BFGS, ADAM and GRAD.

GRAD is ADAM whose step size is revised by a short backtracking search every
few iterations once a warm-up phase is over. All three only need the
objective and a subgradient, so memory stays O((pK)^2) at most.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .objective import objective, subgradient

ALGORITHMS = ("BFGS", "ADAM", "GRAD")
LS_OPTIONS = ("i", "ii", "iii", "iv")


@dataclass(frozen=True)
class GradConfig:
    algorithm: str = "BFGS"
    max_iter: int = 100
    step0: float = 0.4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    warmup: int = 70
    ls_every: int = 20
    ls_trials: int = 5
    discount: float = 0.2
    ls_option: str = "i"
    armijo_c: float = 1e-4
    reltol: float = 1.4901161193847656e-08

    def __post_init__(self):
        if self.algorithm.upper() not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        object.__setattr__(self, "algorithm", self.algorithm.upper())
        if self.ls_option not in LS_OPTIONS:
            raise ValueError(f"ls_option must be one of {LS_OPTIONS}")
        if not 0 < self.discount < 1:
            raise ValueError("discount must be in (0, 1)")
        if self.ls_trials < 1 or self.ls_every < 1 or self.warmup < 0:
            raise ValueError("ls_trials and ls_every must be >= 1, warmup >= 0")
        if not self.step0 > 0 or self.max_iter < 0:
            raise ValueError("step0 must be positive and max_iter nonnegative")


@dataclass
class GradTrace:
    objective: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    line_searches: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    status: str = "max_iter"
    iterations: int = 0

    def record(self, k, theta, f, step, checkpoints):
        self.objective.append(f)
        self.steps.append(step)
        self.iterations = k
        if checkpoints is not None and k in checkpoints:
            self.snapshots[k] = theta.copy()

    def fill_snapshots(self, theta, checkpoints):
        # an early stop freezes the iterate for all later checkpoints
        for k in checkpoints or ():
            if k not in self.snapshots and k >= self.iterations:
                self.snapshots[k] = theta.copy()


def bfgs(f, grad, x0, max_iter=100, discount=0.2, armijo_c=1e-4, reltol=1.4901161193847656e-08,
         checkpoints=None):
    """Variable-metric minimizer with backtracking, after R's ``vmmin``.

    The inverse-Hessian approximation starts at the identity, is reset when
    the search direction is not a descent direction or the curvature
    ``s'y`` is not positive, and is refreshed every ``2 n`` updates.
    """
    x = np.array(x0, dtype=float)
    n = x.size
    trace = GradTrace()
    fmin = f(x)
    g = grad(x)
    trace.record(0, x, fmin, 0.0, checkpoints)
    if max_iter <= 0:
        trace.fill_snapshots(x, checkpoints)
        return x, trace
    B = np.eye(n)
    it = 1
    gradcount = 1
    ilast = gradcount
    reltest = 10.0
    failed = False
    while True:
        if ilast == gradcount:
            B = np.eye(n)
        X = x.copy()
        c = g.copy()
        t = -B @ g
        gradproj = float(t @ g)
        if gradproj < 0.0:
            steplength = 1.0
            accpoint = False
            ftry = fmin
            while True:
                xt = X + steplength * t
                count = int(np.sum(reltest + X == reltest + xt))
                if count < n:
                    ftry = f(xt)
                    accpoint = np.isfinite(ftry) and ftry <= fmin + gradproj * steplength * armijo_c
                    if not accpoint:
                        steplength *= discount
                if count == n or accpoint:
                    break
            if accpoint:
                x = xt
                enough = abs(ftry - fmin) > reltol * (abs(fmin) + reltol)
                if not enough:
                    count = n
                fmin = ftry
            failed = not accpoint
            if count < n:
                g = grad(x)
                gradcount += 1
                trace.record(it, x, fmin, steplength, checkpoints)
                it += 1
                svec = steplength * t
                yvec = g - c
                D1 = float(svec @ yvec)
                if D1 > 0:
                    By = B @ yvec
                    D2 = 1.0 + float(By @ yvec) / D1
                    B = B + (D2 * np.outer(svec, svec) - np.outer(By, svec) - np.outer(svec, By)) / D1
                else:
                    ilast = gradcount
            else:
                if ilast < gradcount:
                    count = 0
                    ilast = gradcount
        else:
            count = 0
            if ilast == gradcount:
                count = n
            else:
                ilast = gradcount
        if it > max_iter:
            trace.status = "max_iter"
            break
        if gradcount - ilast > 2 * n:
            ilast = gradcount
        if count == n and ilast == gradcount:
            trace.status = "line_search_failed" if failed else "converged"
            break
    trace.fill_snapshots(x, checkpoints)
    return x, trace


def limited_line_search(f, x, fx, g, d, s0, trials, discount, option, armijo_c=1e-4, log=None):
    """Short backtracking search over ``trials`` step sizes.

    Trial sizes start at ``min(1, s0 * discount**-(trials // 2))`` and shrink
    by ``discount``; the first one meeting the sufficient-decrease condition
    is returned. Otherwise options i/iv return ``s0`` and ii/iii return
    ``s0 * discount``. Returns ``(step, accepted, tried)``.
    """
    slope = float(g @ d)
    s = min(1.0, s0 * discount ** (-(trials // 2)))
    tried = []
    accepted = False
    for _ in range(trials):
        tried.append(s)
        if slope < 0:
            ft = f(x + s * d)
            if np.isfinite(ft) and ft <= fx + armijo_c * s * slope:
                accepted = True
                break
        s *= discount
    if accepted:
        step = tried[-1]
    elif option in ("i", "iv"):
        step = s0
    else:
        step = s0 * discount
    if log is not None:
        log.append({"accepted": accepted, "step": step, "trials": tried})
    return step, accepted, tried


def adam(f, grad, x0, cfg, checkpoints=None, line_search=False):
    """ADAM with bias-corrected moments; with ``line_search`` this is GRAD."""
    x = np.array(x0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    step = cfg.step0
    trace = GradTrace()
    trace.record(0, x, f(x), 0.0, checkpoints)
    for k in range(1, cfg.max_iter + 1):
        g = grad(x)
        if not np.any(g):
            trace.status = "zero_gradient"
            break
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** k)
        vhat = v / (1 - b2 ** k)
        d = -mhat / (np.sqrt(vhat) + eps)
        if line_search and k > cfg.warmup and (k - cfg.warmup - 1) % cfg.ls_every == 0:
            s0 = cfg.step0 if cfg.ls_option in ("i", "ii") else step
            step, _, _ = limited_line_search(
                f, x, f(x), g, d, s0, cfg.ls_trials, cfg.discount, cfg.ls_option,
                cfg.armijo_c, log=trace.line_searches,
            )
            trace.line_searches[-1]["iteration"] = k
        x = x + step * d
        trace.record(k, x, f(x), step, checkpoints)
    trace.fill_snapshots(x, checkpoints)
    return x, trace


def _wrap(prob):
    return (lambda th: objective(prob, th)), (lambda th: subgradient(prob, th))


def solve_bfgs(prob, theta0=None, cfg=None, checkpoints=None):
    cfg = cfg or GradConfig(algorithm="BFGS")
    if theta0 is None:
        from .fit import qr_warm_start

        theta0 = qr_warm_start(prob)
    f, g = _wrap(prob)
    return bfgs(f, g, theta0, max_iter=cfg.max_iter, discount=cfg.discount, armijo_c=cfg.armijo_c,
                reltol=cfg.reltol, checkpoints=checkpoints)


def solve_adam(prob, theta0=None, cfg=None, checkpoints=None):
    cfg = cfg or GradConfig(algorithm="ADAM")
    if theta0 is None:
        from .fit import qr_warm_start

        theta0 = qr_warm_start(prob)
    f, g = _wrap(prob)
    return adam(f, g, theta0, cfg, checkpoints=checkpoints)


def solve_grad(prob, theta0=None, cfg=None, checkpoints=None):
    cfg = cfg or GradConfig(algorithm="GRAD")
    if theta0 is None:
        from .fit import qr_warm_start

        theta0 = qr_warm_start(prob)
    f, g = _wrap(prob)
    return adam(f, g, theta0, cfg, checkpoints=checkpoints, line_search=True)


SOLVERS = {"BFGS": solve_bfgs, "ADAM": solve_adam, "GRAD": solve_grad}


def approximation_error(beta, beta_ref):
    """Total mean absolute deviation: sum over coefficients of the grid
    average of ``|beta - beta_ref|``."""
    beta = np.asarray(beta, dtype=float)
    beta_ref = np.asarray(beta_ref, dtype=float)
    return float(np.abs(beta - beta_ref).mean(axis=0).sum())

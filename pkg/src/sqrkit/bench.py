"""Desk-scale benchmark harnesses: QAR coefficient error and gradient-solver
approximation error against the exact LP solution."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .basis import QuantileGrid
from .fit import fit_qr, qr_warm_start
from .grad import SOLVERS, GradConfig, approximation_error
from .io import load_engel
from .objective import SqrProblem
from .qar import QarSpec, lagged_design, mae, simulate_qar, truth_on_grid
from .select import DEFAULT_SPAR_GRID, select_spar

CHECKPOINTS = (0, 50, 100, 150, 200, 300, 400, 500, 1000)
QAR_METHODS = ("QR", "SQR-AIC", "SQR-BIC")


def default_grid():
    return QuantileGrid.from_range(0.05, 0.95, 0.01)


# -- QAR mean absolute error --------------------------------------------------

@dataclass
class QarRun:
    run: int
    per: dict      # method -> per-coefficient MAE (a0, a1)
    total: dict    # method -> total MAE
    spar: dict     # criterion -> chosen spar


def qar_run(run, n=200, seed=0, grid=None, spar_grid=DEFAULT_SPAR_GRID, spec=None):
    """One replication; the series seed is derived from ``(seed, run)``."""
    grid = grid or default_grid()
    base = spec or QarSpec(n=n)
    spec = QarSpec(n=n, sigma0=base.sigma0, a1_base=base.a1_base, a1_slope=base.a1_slope,
                   a1_kink=base.a1_kink, burn_in=base.burn_in, seed=(seed, run), variant=base.variant)
    X, y = lagged_design(simulate_qar(spec))
    truth = truth_on_grid(grid.levels, spec)
    beta_qr = fit_qr(X, y, grid)
    rep = select_spar(SqrProblem.create(X, y, grid), spar_grid)
    per, total = {}, {}
    per["QR"], total["QR"] = mae(beta_qr, truth)
    for crit in ("aic", "bic"):
        key = f"SQR-{crit.upper()}"
        per[key], total[key] = mae(rep.best_fit(crit).beta, truth)
    return QarRun(run=run, per=per, total=total, spar=dict(rep.chosen))


def _qar_task(args):
    return qar_run(*args)


@dataclass
class QarBench:
    runs: list = field(default_factory=list)

    def totals(self):
        """runs x methods array of total MAE."""
        return np.array([[r.total[m] for m in QAR_METHODS] for r in self.runs])

    def summary(self):
        """Table-1 style rows: method, MAE a0, MAE a1, total."""
        out = []
        for m in QAR_METHODS:
            per = np.mean([r.per[m] for r in self.runs], axis=0)
            out.append((m, float(per[0]), float(per[1]), float(per.sum())))
        return out

    def win_rate(self, a="SQR-BIC", b="QR"):
        t = self.totals()
        return float(np.mean(t[:, QAR_METHODS.index(a)] < t[:, QAR_METHODS.index(b)]))


def qar_mae_bench(runs=100, n=200, seed=0, grid=None, spar_grid=DEFAULT_SPAR_GRID, workers=1):
    tasks = [(r, n, seed, grid, spar_grid) for r in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_qar_task, tasks))
    else:
        results = [_qar_task(t) for t in tasks]
    return QarBench(runs=results)


# -- gradient approximation error ----------------------------------------------

def engel_design():
    """Intercept plus centered income in thousands; response food expenditure."""
    income, food = load_engel()
    x = income / 1000.0
    return np.column_stack([np.ones_like(x), x - x.mean()]), food


@dataclass
class GradApprox:
    checkpoints: tuple
    errors: dict          # label -> list of errors at checkpoints
    traces: dict          # label -> GradTrace
    reference: object     # exact SqrFit
    spar: float


def grad_approx_bench(X=None, y=None, grid=None, spar="bic", checkpoints=CHECKPOINTS,
                      runs=(("BFGS", None), ("ADAM", None), ("GRAD", "i"), ("GRAD", "ii"),
                            ("GRAD", "iii"), ("GRAD", "iv")),
                      spar_grid=DEFAULT_SPAR_GRID, bfgs_iter=None):
    """Error of approximate solvers against the interior-point solution.

    The reference is the exact fit at ``spar`` (a number, or ``"aic"``/``"bic"``
    for the selected value). All solvers start from the QR warm start.
    BFGS stops at its own convergence; later checkpoints keep its last iterate.
    """
    if X is None:
        X, y = engel_design()
    grid = grid or QuantileGrid.from_range(0.02, 0.98, 0.01)
    base = SqrProblem.create(X, y, grid)
    if isinstance(spar, str):
        rep = select_spar(base, spar_grid)
        spar = rep.chosen[spar.lower()]
        ref = rep.fits[spar][0]
    else:
        from .fit import fit_sqr
        from .select import spar_to_c

        ref = fit_sqr(base.with_c(spar_to_c(base, spar)))
    prob = ref.problem
    theta0 = qr_warm_start(prob)
    top = max(checkpoints)
    errors, traces = {}, {}
    for algo, option in runs:
        label = algo if option is None else f"{algo}({option})"
        iters = bfgs_iter if (algo == "BFGS" and bfgs_iter) else top
        cfg = GradConfig(algorithm=algo, max_iter=iters, ls_option=option or "i")
        _, trace = SOLVERS[algo](prob, theta0, cfg, checkpoints=set(checkpoints))
        errors[label] = [approximation_error(prob.coef(trace.snapshots[k]), ref.beta) for k in checkpoints]
        traces[label] = trace
    return GradApprox(checkpoints=tuple(checkpoints), errors=errors, traces=traces, reference=ref,
                      spar=float(spar))

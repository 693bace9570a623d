"""Smoothing-parameter selection by AIC/BIC over a ``spar`` grid.

``c = r * 1000**(spar - 1)`` where ``r`` balances the size of the fitted
design blocks against the size of the curvature blocks, so ``spar`` means
roughly the same thing across data sets.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePenalty, SelectionFailed, SolverError
from .objective import check_loss

DEFAULT_SPAR_GRID = tuple(np.round(np.arange(-2.0, 2.0 + 1e-9, 0.2), 10))


@dataclass(frozen=True)
class SparMap:
    r: float
    spar: float
    c: float


def spar_ratio(prob):
    """``r = [n^-1 sum_l |X Phi(tau_l)|_1] / [sum_l w_l |Phi_dd(tau_l)|_1]``
    with entrywise L1 norms of the Kronecker-structured matrices."""
    Phi, Phi_dd = prob.basis.Phi, prob.basis.Phi_dd
    # |X kron phi'|_1 = |X|_1 |phi|_1 ;  |I_p kron phi_dd'|_1 = p |phi_dd|_1
    num = np.abs(prob.X).sum() * np.abs(Phi).sum(axis=1).sum() / prob.n
    den = prob.p * float(prob.grid.weights @ np.abs(Phi_dd).sum(axis=1))
    if den <= 0:
        raise DegeneratePenalty("second derivatives of the basis vanish on the grid; spar is undefined")
    return float(num / den)


def spar_to_c(prob, spar):
    return spar_map(prob, spar).c


def spar_map(prob, spar):
    r = spar_ratio(prob)
    return SparMap(r=r, spar=float(spar), c=r * 1000.0 ** (float(spar) - 1.0))


def complexity_threshold(y):
    return 1e-6 * max(1.0, float(np.median(np.abs(y))))


def fidelity_complexity(prob, fit, tol=None):
    """Per-level mean check loss ``v`` and count ``m`` of residuals within
    ``tol`` of zero (default ``1e-6 * max(1, median|y|)``)."""
    if tol is None:
        tol = complexity_threshold(prob.y)
    R = np.asarray(fit.residuals)  # L x n
    taus = prob.taus
    v = np.array([check_loss(taus[l], R[l]).sum() / prob.n for l in range(prob.L)])
    m = (np.abs(R) <= tol).sum(axis=1)
    return v, m


def information_criteria(v, m, n, L=None):
    """Return ``(AIC, BIC)``.

    ``BIC = 2 n log(mean v) + log(n) mean(m)``; AIC uses 2 in place of
    ``log n``. A zero mean fidelity (exact interpolation) yields ``-inf`` for
    both, which selection treats as unusable.
    """
    v = np.asarray(v, dtype=float)
    m = np.asarray(m, dtype=float)
    vbar = float(v.mean())
    mbar = float(m.mean())
    if vbar <= 0.0:
        return -math.inf, -math.inf
    base = 2.0 * n * math.log(vbar)
    return base + 2.0 * mbar, base + math.log(n) * mbar


@dataclass
class SparRecord:
    spar: float
    c: float
    fidelity: np.ndarray = None
    complexity: np.ndarray = None
    aic: float = math.nan
    bic: float = math.nan
    penalty: float = math.nan
    ok: bool = True
    error: str = ""


@dataclass
class SelectionReport:
    records: list
    chosen: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)

    def spars(self):
        return np.array([r.spar for r in self.records])

    def criterion(self, name):
        return np.array([getattr(r, name.lower()) for r in self.records])

    def best_fit(self, criterion="bic", index=0):
        """Fit at the chosen spar (``index`` picks the problem in a sweep)."""
        return self.fits[self.chosen[criterion.lower()]][index]


def argmin_spar(spars, values):
    """Smallest spar attaining the minimum among finite values; if none is
    finite the largest spar is returned (heaviest smoothing)."""
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    if not finite.any():
        return float(np.max(spars))
    best = np.min(values[finite])
    idx = np.flatnonzero(finite & (values == best))
    return float(np.asarray(spars)[idx].min())


def _solve_one(problems, spar, solver, keep_fits):
    from .fit import fit_sqr

    fits = []
    vs, ms, aics, bics, pens, cs = [], [], [], [], [], []
    for prob in problems:
        c = spar_to_c(prob, spar)
        fit = solver(prob.with_c(c)) if solver is not None else fit_sqr(prob.with_c(c))
        aic, bic = information_criteria(fit.fidelity, fit.complexity, prob.n, prob.L)
        vs.append(fit.fidelity)
        ms.append(fit.complexity)
        aics.append(aic)
        bics.append(bic)
        pens.append(float(prob.grid.weights @ np.abs(prob.coef_dd(fit.theta)).sum(axis=1)))
        cs.append(c)
        fits.append(fit if keep_fits else None)
    rec = SparRecord(
        spar=float(spar),
        c=cs[0] if len(cs) == 1 else float(np.mean(cs)),
        fidelity=vs[0] if len(vs) == 1 else np.mean(vs, axis=0),
        complexity=ms[0] if len(ms) == 1 else np.mean(ms, axis=0),
        aic=float(np.mean(aics)),
        bic=float(np.mean(bics)),
        penalty=float(np.mean(pens)),
    )
    return rec, fits


def select_spar(problems, spar_grid=DEFAULT_SPAR_GRID, solver=None, workers=1, keep_fits=True):
    """Solve at every spar and pick the AIC and BIC minimizers.

    ``problems`` is one problem or a sequence of problems sharing the spar
    (e.g. one per frequency); the criteria are averaged over them before the
    minimum is taken. ``solver`` maps a problem to an
    :class:`~sqrkit.objective.SqrFit` (interior point by default). The
    ``penalty`` column stores the unscaled roughness
    ``sum_l w_l |beta_dd(tau_l)|_1``.
    """
    if not isinstance(problems, (list, tuple)):
        problems = [problems]
    spar_grid = [float(s) for s in spar_grid]
    if not spar_grid:
        raise ValueError("spar grid is empty")
    if any(b <= a for a, b in zip(spar_grid, spar_grid[1:])):
        raise ValueError("spar grid must be strictly increasing")

    def task(spar):
        try:
            return _solve_one(problems, spar, solver, keep_fits)
        except SolverError as exc:
            return SparRecord(spar=spar, c=math.nan, ok=False, error=f"{type(exc).__name__}: {exc}"), None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, spar_grid))
    else:
        results = [task(s) for s in spar_grid]

    records = [r for r, _ in results]
    report = SelectionReport(records=records)
    ok = [r for r in records if r.ok]
    if not ok:
        raise SelectionFailed("every spar on the grid failed to solve")
    spars = np.array([r.spar for r in ok])
    for name in ("aic", "bic"):
        report.chosen[name] = argmin_spar(spars, [getattr(r, name) for r in ok])
    if keep_fits:
        report.fits = {r.spar: f for r, f in results if f is not None}
    return report

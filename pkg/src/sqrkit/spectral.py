"""Quantile discrete Fourier transform and quantile periodogram.

At each Fourier frequency the series is regressed on ``[1, cos(wt), sin(wt)]``
across the quantile grid, by independent QR or by SQR. With coefficient
estimates ``b2, b3`` the transform is ``(n/2)(b2 - i b3)`` and the periodogram
``|qdft|^2 / n = (n/4)(b2^2 + b3^2)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .basis import QuantileGrid, build_basis
from .errors import SolverError, SpectrumFailed
from .fit import fit_qr, fit_sqr
from .objective import SqrProblem
from .select import DEFAULT_SPAR_GRID, argmin_spar, information_criteria, spar_to_c


@dataclass(frozen=True)
class FrequencyGrid:
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 samples for a nonempty Fourier grid")

    @property
    def index(self):
        return np.arange(1, (self.n - 1) // 2 + 1)

    @property
    def omegas(self):
        return 2.0 * np.pi * self.index / self.n

    @property
    def freqs(self):
        """Normalized frequencies ``v / n`` in cycles per sample."""
        return self.index / self.n

    def __len__(self):
        return (self.n - 1) // 2


@dataclass
class QSpectrum:
    qdft: np.ndarray          # L x V complex; NaN where a fit failed
    qper: np.ndarray          # L x V
    grid: QuantileGrid
    freqs: FrequencyGrid
    spar: object = None       # None for QR, else the spar used
    method: str = "qr"
    selection: dict = None

    @property
    def mask(self):
        """True where the entry is valid."""
        return np.isfinite(self.qper)

    def peak_index(self):
        """Per level, the Fourier index ``v`` of the largest periodogram value."""
        q = np.where(self.mask, self.qper, -np.inf)
        return self.freqs.index[np.argmax(q, axis=1)]


def trig_design(n, omega):
    t = np.arange(1, n + 1)
    return np.column_stack([np.ones(n), np.cos(omega * t), np.sin(omega * t)])


def qdft_to_qper(qdft, n):
    qdft = np.asarray(qdft)
    return (qdft.real ** 2 + qdft.imag ** 2) / n


def _qdft_from_beta(beta, n):
    return (n / 2.0) * (beta[:, 1] - 1j * beta[:, 2])


def _fit_frequency(args):
    series, levels, weights, nknots, omega, method, spar, ip_cfg = args
    n = series.size
    X = trig_design(n, omega)
    grid = QuantileGrid(levels, weights)
    try:
        if method == "qr":
            beta = fit_qr(X, series, grid, ip_cfg)
        else:
            prob = SqrProblem(X=X, y=series, grid=grid, basis=build_basis(grid, nknots))
            beta = fit_sqr(prob.with_c(spar_to_c(prob, spar)), ip_cfg=ip_cfg).beta
    except SolverError:
        return None
    return _qdft_from_beta(beta, n)


def _criteria_frequency(args):
    series, levels, weights, nknots, omega, spars, ip_cfg = args
    n = series.size
    grid = QuantileGrid(levels, weights)
    prob = SqrProblem(X=trig_design(n, omega), y=series, grid=grid, basis=build_basis(grid, nknots))
    out = np.full((len(spars), 2), np.nan)
    for i, spar in enumerate(spars):
        try:
            fit = fit_sqr(prob.with_c(spar_to_c(prob, spar)), ip_cfg=ip_cfg)
        except SolverError:
            continue
        out[i] = information_criteria(fit.fidelity, fit.complexity, n, grid.L)
    return out


def _map(fn, tasks, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def select_shared_spar(series, grid, spar_grid=DEFAULT_SPAR_GRID, criterion="bic", nknots=None,
                       freqs=None, ip_cfg=None, workers=1):
    """Spar minimizing the criterion averaged across frequencies.

    Returns ``(spar, table)`` with ``table[v, s, 0|1]`` holding AIC/BIC.
    """
    series = np.asarray(series, dtype=float)
    freqs = freqs or FrequencyGrid(series.size)
    spars = [float(s) for s in spar_grid]
    tasks = [(series, grid.levels, grid.weights, nknots, w, spars, ip_cfg) for w in freqs.omegas]
    table = np.array(_map(_criteria_frequency, tasks, workers))
    col = 0 if criterion.lower() == "aic" else 1
    with np.errstate(invalid="ignore"):
        vals = table[:, :, col]
        ok = np.isfinite(vals)
        avg = np.array([vals[ok[:, j], j].mean() if ok[:, j].any() else math.nan for j in range(len(spars))])
    return argmin_spar(np.array(spars), avg), table


def sqdft(series, grid, spar=None, nknots=None, spar_grid=DEFAULT_SPAR_GRID, criterion="bic",
          ip_cfg=None, workers=1):
    """Quantile DFT over all Fourier frequencies.

    ``spar=None`` uses independent QR per level; a number fixes the SQR
    smoothing; ``"auto"`` (or ``"aic"``/``"bic"``) picks one spar shared by
    all frequencies.
    """
    series = np.asarray(series, dtype=float).ravel()
    if series.size < 8 or not np.all(np.isfinite(series)):
        raise ValueError("series must be finite with at least 8 samples")
    if not isinstance(grid, QuantileGrid):
        grid = QuantileGrid(grid)
    freqs = FrequencyGrid(series.size)
    selection = None
    if spar is None:
        method = "qr"
    else:
        method = "sqr"
        if isinstance(spar, str):
            crit = criterion if spar.lower() == "auto" else spar.lower()
            chosen, table = select_shared_spar(series, grid, spar_grid, crit, nknots, freqs, ip_cfg, workers)
            selection = {"criterion": crit, "spar_grid": [float(s) for s in spar_grid], "table": table}
            spar = chosen
        spar = float(spar)
    tasks = [(series, grid.levels, grid.weights, nknots, w, method, spar, ip_cfg) for w in freqs.omegas]
    cols = _map(_fit_frequency, tasks, workers)
    if all(c is None for c in cols):
        raise SpectrumFailed("no frequency could be fitted")
    qdft = np.full((grid.L, len(freqs)), np.nan + 1j * np.nan)
    for j, col in enumerate(cols):
        if col is not None:
            qdft[:, j] = col
    return QSpectrum(qdft=qdft, qper=qdft_to_qper(qdft, series.size), grid=grid, freqs=freqs,
                     spar=spar, method=method, selection=selection)


def total_variation(values, axis=0):
    return np.abs(np.diff(np.asarray(values), axis=axis)).sum(axis=axis)

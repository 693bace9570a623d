"""Quantile grids and cubic B-spline bases over the quantile level.

A :class:`SplineBasis` holds the basis values ``Phi[l, k] = phi_k(tau_l)`` and
second derivatives ``Phi_dd[l, k]`` on a :class:`QuantileGrid`. Coefficient
functions are ``beta_j(tau) = phi(tau) @ theta_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGrid, InvalidKnotCount, OutOfSpan

CUBIC = 4


@dataclass(frozen=True)
class QuantileGrid:
    """Increasing quantile levels with nonnegative penalty weights."""

    levels: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        levels = np.atleast_1d(np.asarray(self.levels, dtype=float))
        if levels.ndim != 1 or levels.size < 1:
            raise InvalidGrid("quantile grid must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(levels)) or np.any(levels <= 0) or np.any(levels >= 1):
            raise InvalidGrid("quantile levels must lie strictly inside (0, 1)")
        if np.any(np.diff(levels) <= 0):
            raise InvalidGrid("quantile levels must be strictly increasing")
        if self.weights is None:
            weights = np.ones_like(levels)
        else:
            weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if weights.shape != levels.shape:
            raise InvalidGrid("weights must have the same length as levels")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidGrid("weights must be finite and nonnegative")
        levels.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_range(cls, start, stop, step, weights=None):
        """Grid ``start, start+step, ..., stop`` (endpoints inclusive)."""
        count = int(round((stop - start) / step)) + 1
        if count < 1:
            raise InvalidGrid(f"empty grid for range {start}..{stop} step {step}")
        levels = np.round(start + step * np.arange(count), 12)
        return cls(levels, weights)

    def __len__(self):
        return self.levels.size

    @property
    def L(self):
        return self.levels.size


@dataclass(frozen=True)
class SplineBasis:
    """Basis functions evaluated on a quantile grid.

    ``order`` is 4 for cubic B-splines. ``order == 0`` marks the identity
    basis (one free coefficient per level, no smoothness), which turns the
    SQR machinery into independent quantile regressions.
    """

    knots: np.ndarray
    order: int
    Phi: np.ndarray
    Phi_dd: np.ndarray
    levels: np.ndarray = field(repr=False)

    @property
    def K(self):
        return self.Phi.shape[1]

    @property
    def L(self):
        return self.Phi.shape[0]

    def eval(self, tau):
        return eval_basis(self, tau)


def default_knot_count(L):
    """Total knot count (boundaries included) used when none is requested."""
    interior = int(round(L ** 0.5)) + 2
    interior = max(0, min(interior, L - 2))
    return interior + 2


def knot_vector(grid, nknots=None):
    """Distinct knots at evenly spaced order statistics of the grid levels."""
    L = grid.L
    if nknots is None:
        nknots = default_knot_count(L)
    nknots = int(nknots)
    if nknots < 2 or nknots > L:
        raise InvalidKnotCount(f"nknots must be in [2, {L}], got {nknots}")
    idx = np.floor(np.linspace(0, L - 1, nknots) + 0.5).astype(int)
    return grid.levels[idx].copy()


def build_basis(grid, nknots=None):
    """Cubic B-spline basis over ``grid`` with knots at grid order statistics.

    A single-level grid has no room for a spline; it gets the identity basis
    (``K == 1``, a constant), which reduces SQR to ordinary QR.
    """
    if not isinstance(grid, QuantileGrid):
        grid = QuantileGrid(grid)
    if grid.L == 1:
        if nknots not in (None, 1, 2):
            raise InvalidKnotCount("a single-level grid supports no interior knots")
        return identity_basis(grid)
    inner = knot_vector(grid, nknots)
    knots = np.concatenate([np.repeat(inner[0], CUBIC - 1), inner, np.repeat(inner[-1], CUBIC - 1)])
    knots.setflags(write=False)
    Phi, Phi_dd = _evaluate(knots, CUBIC, grid.levels)
    return SplineBasis(knots=knots, order=CUBIC, Phi=Phi, Phi_dd=Phi_dd, levels=grid.levels)


def identity_basis(grid):
    """One coefficient per level: ``Phi = I_L`` and ``Phi_dd = 0``."""
    if not isinstance(grid, QuantileGrid):
        grid = QuantileGrid(grid)
    L = grid.L
    Phi = np.eye(L)
    Phi_dd = np.zeros((L, L))
    for a in (Phi, Phi_dd):
        a.setflags(write=False)
    return SplineBasis(knots=grid.levels, order=0, Phi=Phi, Phi_dd=Phi_dd, levels=grid.levels)


def eval_basis(basis, tau):
    """Basis values and second derivatives at a single level ``tau``.

    Returns two length-K arrays. Uses the same code path that filled
    ``basis.Phi``, so grid levels reproduce its rows exactly.
    """
    tau = float(tau)
    if basis.order == 0:
        hit = np.flatnonzero(basis.levels == tau)
        if hit.size == 0:
            raise OutOfSpan(f"identity basis is only defined at grid levels, got {tau}")
        return basis.Phi[hit[0]].copy(), basis.Phi_dd[hit[0]].copy()
    lo, hi = basis.knots[0], basis.knots[-1]
    if not (lo <= tau <= hi):
        raise OutOfSpan(f"tau={tau} outside knot span [{lo}, {hi}]")
    vals, dd = _evaluate(basis.knots, basis.order, np.array([tau]))
    return vals[0], dd[0]


def _find_span(knots, degree, x):
    # right-continuous, except the right boundary which closes the last span
    n_basis = knots.size - degree - 1
    span = np.searchsorted(knots, x, side="right") - 1
    return np.clip(span, degree, n_basis - 1)


def _evaluate(knots, order, xs):
    degree = order - 1
    K = knots.size - order
    xs = np.asarray(xs, dtype=float)
    vals = np.zeros((xs.size, K))
    dd = np.zeros((xs.size, K))
    spans = _find_span(knots, degree, xs)
    for row, (x, span) in enumerate(zip(xs, spans)):
        ders = _basis_ders(knots, degree, span, x, 2)
        cols = slice(span - degree, span + 1)
        vals[row, cols] = ders[0]
        dd[row, cols] = ders[2]
    vals.setflags(write=False)
    dd.setflags(write=False)
    return vals, dd


def _basis_ders(U, p, i, u, n):
    """Nonzero basis functions N_{i-p..i} and their first ``n`` derivatives.

    Cox-de Boor triangle with the derivative recurrence of Piegl & Tiller
    (The NURBS Book, algorithm A2.3).
    """
    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - U[i + 1 - j]
        right[j] = U[i + j] - u
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((n + 1, p + 1))
    ders[0] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, n + 1):
            d = 0.0
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, n + 1):
        ders[k] *= fac
        fac *= p - k
    return ders

"""Quantile autoregression generator and coefficient error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import DomainError, ShapeError


@dataclass(frozen=True)
class QarSpec:
    """``y_t = a0(U_t) + a1(U_t) y_{t-1}`` with ``U_t ~ U(0, 1)`` i.i.d.

    ``a0(u) = sigma0 * Phi^-1(u)`` and
    ``a1(u) = a1_base + a1_slope u + a1_kink (u - 0.5) I(u > 0.5)``.
    ``variant="koenker"`` switches to ``a0 = Phi^-1(u)``, ``a1 = 0.85 + 0.25 u``.
    """

    n: int = 200
    sigma0: float = 0.4
    a1_base: float = 0.85
    a1_slope: float = 0.1
    a1_kink: float = 0.25
    burn_in: int = 200
    seed: int = 0
    variant: str = "default"

    def __post_init__(self):
        if self.n < 1 or self.burn_in < 0 or not self.sigma0 > 0:
            raise ValueError("need n >= 1, burn_in >= 0 and sigma0 > 0")
        if self.variant not in ("default", "koenker"):
            raise ValueError(f"unknown QAR variant {self.variant!r}")


def qar_truth(u, spec=None):
    """True coefficient functions ``(a0(u), a1(u))``; vectorized over ``u``."""
    spec = spec or QarSpec()
    u_arr = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u_arr)) or np.any(u_arr <= 0) or np.any(u_arr >= 1):
        raise DomainError("u must lie strictly inside (0, 1)")
    if spec.variant == "koenker":
        a0 = ndtri(u_arr)
        a1 = 0.85 + 0.25 * u_arr
    else:
        a0 = spec.sigma0 * ndtri(u_arr)
        a1 = spec.a1_base + spec.a1_slope * u_arr + spec.a1_kink * (u_arr - 0.5) * (u_arr > 0.5)
    if np.ndim(u) == 0:
        return float(a0), float(a1)
    return a0, a1


def simulate_qar(spec):
    """Series of length ``spec.n`` started at 0 after ``burn_in`` discarded steps."""
    rng = np.random.default_rng(spec.seed)
    total = spec.n + spec.burn_in
    u = rng.random(total)
    # rng.random can return exactly 0
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    a0, a1 = qar_truth(u, spec)
    y = np.empty(total)
    prev = 0.0
    for t in range(total):
        prev = a0[t] + a1[t] * prev
        y[t] = prev
    return y[spec.burn_in:]


def lagged_design(series):
    """Regression of ``y_t`` on ``[1, y_{t-1}]`` for ``t = 2..n``."""
    series = np.asarray(series, dtype=float)
    X = np.column_stack([np.ones(series.size - 1), series[:-1]])
    return X, series[1:]


def truth_on_grid(levels, spec=None):
    a0, a1 = qar_truth(np.asarray(levels, dtype=float), spec)
    return np.column_stack([a0, a1])


def monotone_in_u(y_values, spec=None, n_u=999):
    """Whether ``u -> a0(u) + a1(u) y`` is strictly increasing for each ``y``."""
    u = (np.arange(n_u) + 1.0) / (n_u + 1.0)
    a0, a1 = qar_truth(u, spec)
    y = np.atleast_1d(np.asarray(y_values, dtype=float))
    q = a0[None, :] + a1[None, :] * y[:, None]
    return np.all(np.diff(q, axis=1) > 0, axis=1)


def mae(beta_hat, truth):
    """Grid-averaged absolute error per coefficient and their sum."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if beta_hat.shape != truth.shape:
        raise ShapeError(f"shape mismatch {beta_hat.shape} vs {truth.shape}")
    per = np.abs(beta_hat - truth).mean(axis=0)
    return per, float(per.sum())

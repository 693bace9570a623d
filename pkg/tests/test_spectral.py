import numpy as np
import pytest

from sqrkit.basis import QuantileGrid
from sqrkit.errors import SolverError, SpectrumFailed
from sqrkit.spectral import (
    FrequencyGrid,
    qdft_to_qper,
    sqdft,
    total_variation,
    trig_design,
)
import sqrkit.spectral as spectral

GRID = QuantileGrid([0.25, 0.5, 0.75])


def sinusoid(n, v, seed=0, shift=0, noise=0.1):
    rng = np.random.default_rng(seed)
    t = np.arange(1, n + 1) + shift
    return np.cos(2 * np.pi * v * t / n) + noise * rng.standard_normal(n)


def test_frequency_grid():
    fg = FrequencyGrid(308)
    assert len(fg) == 153 and fg.index[0] == 1 and fg.index[-1] == 153
    assert np.all(np.diff(fg.omegas) > 0)
    assert fg.omegas[0] > 0 and fg.omegas[-1] < np.pi
    assert len(FrequencyGrid(8)) == 3
    with pytest.raises(ValueError):
        FrequencyGrid(2)


def test_trig_design_quarter_turn():
    X = trig_design(4, np.pi / 2)
    np.testing.assert_allclose(X[:, 0], 1.0)
    np.testing.assert_allclose(X[:, 1], [0, -1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(X[:, 2], [1, 0, -1, 0], atol=1e-15)


@pytest.mark.parametrize("n", [16, 31, 308])
def test_trig_columns_at_fourier_frequencies(n):
    for w in FrequencyGrid(n).omegas:
        X = trig_design(n, w)
        assert np.sum(X[:, 1] ** 2) + np.sum(X[:, 2] ** 2) == pytest.approx(n, rel=1e-12)
        assert abs(X[:, 1].sum()) < 1e-9 and abs(X[:, 2].sum()) < 1e-9


def test_qper_algebra():
    n = 40
    assert qdft_to_qper(np.array([0j]), n)[0] == 0.0
    assert qdft_to_qper(np.array([n / 2 + 0j]), n)[0] == pytest.approx(n / 4)
    rng = np.random.default_rng(0)
    z = rng.normal(size=50) + 1j * rng.normal(size=50)
    np.testing.assert_allclose(qdft_to_qper(z, n), np.abs(z) ** 2 / n, rtol=1e-12)
    b2, b3 = rng.normal(size=5), rng.normal(size=5)
    q = qdft_to_qper((n / 2) * (b2 - 1j * b3), n)
    np.testing.assert_allclose(q, (n / 4) * (b2 ** 2 + b3 ** 2), rtol=1e-12)


def test_sinusoid_peak():
    spec = sqdft(sinusoid(64, 9), GRID)
    assert spec.method == "qr" and spec.qdft.shape == (3, 31)
    assert np.all(spec.qper >= 0)
    np.testing.assert_allclose(spec.qper, np.abs(spec.qdft) ** 2 / 64, rtol=1e-10)
    assert spec.peak_index()[1] == 9


def test_time_shift_keeps_peak():
    a = sqdft(sinusoid(64, 9, noise=0.0), GRID)
    b = sqdft(sinusoid(64, 9, shift=3, noise=0.0), GRID)
    assert a.peak_index()[1] == b.peak_index()[1] == 9
    assert b.qper[1, 8] == pytest.approx(a.qper[1, 8], rel=1e-6)


def test_sqr_spectrum_fixed_spar():
    spec = sqdft(sinusoid(48, 5, seed=2), QuantileGrid(np.linspace(0.1, 0.9, 9)), spar=0.5)
    assert spec.method == "sqr" and spec.spar == 0.5
    assert np.all(spec.peak_index()[2:7] == 5)


def test_auto_spar_selection():
    spars = [-1.0, 0.0, 1.0]
    spec = sqdft(sinusoid(32, 4, seed=3), QuantileGrid(np.linspace(0.1, 0.9, 9)),
                 spar="bic", spar_grid=spars)
    assert spec.spar in spars
    assert spec.selection["criterion"] == "bic"
    assert spec.selection["table"].shape == (15, 3, 2)


def test_parallel_determinism():
    y = sinusoid(40, 6, seed=4)
    a = sqdft(y, GRID)
    b = sqdft(y, GRID, workers=2)
    np.testing.assert_array_equal(a.qdft, b.qdft)


def test_constant_series_has_no_power():
    spec = sqdft(np.full(32, 3.0), GRID)
    q = spec.qper[spec.mask]
    assert q.size and np.all(q < 1e-10)


def test_two_planted_frequencies():
    n = 96
    t = np.arange(1, n + 1)
    rng = np.random.default_rng(5)
    y = np.cos(2 * np.pi * 7 * t / n) + 0.8 * np.sin(2 * np.pi * 20 * t / n) + 0.1 * rng.standard_normal(n)
    q = sqdft(y, GRID).qper[1]
    top = set(FrequencyGrid(n).index[np.argsort(q)[-2:]])
    assert top == {7, 20}


def test_short_or_nonfinite_series_rejected():
    with pytest.raises(ValueError):
        sqdft(np.arange(7.0), GRID)
    with pytest.raises(ValueError):
        sqdft(np.array([1.0, np.nan] * 5), GRID)


def test_failures_are_masked(monkeypatch):
    real = spectral.fit_qr

    def flaky(X, y, grid, cfg=None):
        # fail only at the lowest Fourier frequency
        if np.allclose(X[:, 1], np.cos(2 * np.pi * np.arange(1, y.size + 1) / y.size)):
            raise SolverError("forced")
        return real(X, y, grid, cfg)

    monkeypatch.setattr(spectral, "fit_qr", flaky)
    spec = sqdft(sinusoid(24, 3), GRID)
    assert not spec.mask[:, 0].any() and spec.mask[:, 1:].all()
    assert spec.peak_index()[1] == 3

    def always(X, y, grid, cfg=None):
        raise SolverError("forced")

    monkeypatch.setattr(spectral, "fit_qr", always)
    with pytest.raises(SpectrumFailed):
        sqdft(sinusoid(24, 3), GRID)


def test_total_variation():
    assert total_variation(np.array([1.0, 3.0, 2.0])) == 3.0
    np.testing.assert_array_equal(total_variation(np.array([[0.0, 1.0], [2.0, 1.0]])), [2.0, 0.0])

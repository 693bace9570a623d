"""CSV ingestion and export.

Dialect: comma separated, one header row, ``.`` decimals, UTF-8. Floats are
written with ``repr`` (shortest round-trip form), so re-reading any exported
file reproduces the in-memory values exactly.
"""

from __future__ import annotations

import csv
import math
import os
from importlib import resources

import numpy as np

from .errors import IngestError

DATASETS = ("engel", "sunspots")


def fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])


def read_table(path, columns=None, allow_nan=False):
    """Read a numeric CSV into ``{name: float array}``.

    Only ``columns`` (all, if None) are parsed. Empty, non-numeric or
    non-finite cells raise :class:`IngestError` with the 1-based data row and
    the column name; ``allow_nan`` admits ``nan`` cells (masked spectra).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if not header:
            raise IngestError(f"{path} is empty or has no header")
        header = [h.strip() for h in header]
        wanted = list(header) if columns is None else list(columns)
        for name in wanted:
            if name not in header:
                raise IngestError(f"{path} has no column {name!r}; available: {', '.join(header)}", column=name)
        idx = [header.index(name) for name in wanted]
        data = [[] for _ in wanted]
        for r, row in enumerate(rd, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            for k, (j, name) in enumerate(zip(idx, wanted)):
                cell = row[j].strip() if j < len(row) else ""
                if cell == "":
                    raise IngestError("missing value", row=r, column=name)
                try:
                    val = float(cell)
                except ValueError:
                    raise IngestError(f"non-numeric value {cell!r}", row=r, column=name) from None
                if not math.isfinite(val) and not (allow_nan and math.isnan(val)):
                    raise IngestError(f"non-finite value {cell!r}", row=r, column=name)
                data[k].append(val)
    if not data or not data[0]:
        raise IngestError(f"{path} has no data rows")
    return {name: np.array(col) for name, col in zip(wanted, data)}


def load_design(path, response, regressors=(), intercept=True):
    """Response vector, design matrix and coefficient names from a CSV."""
    regressors = list(regressors)
    if response in regressors:
        raise IngestError("response column cannot also be a regressor", column=response)
    tab = read_table(path, [response] + regressors)
    y = tab[response]
    cols, names = [], []
    if intercept:
        cols.append(np.ones_like(y))
        names.append("(Intercept)")
    for name in regressors:
        cols.append(tab[name])
        names.append(name)
    if not cols:
        raise IngestError("design has no columns: give regressors or keep the intercept")
    return np.column_stack(cols), y, names


def dataset_path(name):
    if name not in DATASETS:
        raise KeyError(f"unknown dataset {name!r}; bundled: {', '.join(DATASETS)}")
    return str(resources.files("sqrkit").joinpath("data", f"{name}.csv"))


def load_engel():
    """``(income, foodexp)`` for the 235 Belgian households."""
    tab = read_table(dataset_path("engel"))
    return tab["income"], tab["foodexp"]


def load_sunspots():
    """``(year, sunspots)``: yearly mean sunspot numbers 1700-2007."""
    tab = read_table(dataset_path("sunspots"))
    return tab["year"].astype(int), tab["sunspots"]


# -- fit artifacts -----------------------------------------------------------

def write_beta(path, taus, names, beta):
    rows = ((tau, name, beta[l, j]) for l, tau in enumerate(taus) for j, name in enumerate(names))
    write_csv(path, ["tau", "coefficient", "estimate"], rows)


def read_beta(path):
    """Inverse of :func:`write_beta`: ``(taus, names, beta)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != ["tau", "coefficient", "estimate"]:
            raise IngestError(f"{path} is not a beta table")
        taus, names, vals = [], [], {}
        for r, (tau, name, est) in enumerate(rd, start=1):
            try:
                t = float(tau)
                vals[(t, name)] = float(est)
            except ValueError:
                raise IngestError("non-numeric value", row=r) from None
            if t not in taus:
                taus.append(t)
            if name not in names:
                names.append(name)
    beta = np.array([[vals[(t, nm)] for nm in names] for t in taus])
    return np.array(taus), names, beta


def write_theta(path, names, theta, K):
    Theta = np.asarray(theta).reshape(len(names), K)
    rows = ((name, k, Theta[j, k]) for j, name in enumerate(names) for k in range(K))
    write_csv(path, ["coefficient", "basis_index", "theta"], rows)


# -- spectra -----------------------------------------------------------------

def write_spectrum_long(path, spec):
    """One row per (tau, frequency): tau, v, freq, omega, qper, re, im."""
    idx, freqs, omegas = spec.freqs.index, spec.freqs.freqs, spec.freqs.omegas
    rows = (
        (tau, int(idx[j]), freqs[j], omegas[j], spec.qper[l, j], spec.qdft[l, j].real, spec.qdft[l, j].imag)
        for l, tau in enumerate(spec.grid.levels)
        for j in range(len(idx))
    )
    write_csv(path, ["tau", "v", "freq", "omega", "qper", "qdft_re", "qdft_im"], rows)


def read_spectrum_long(path):
    """``(taus, v, qdft, n)`` from a long-format spectrum CSV."""
    tab = read_table(path, ["tau", "v", "freq", "qdft_re", "qdft_im"], allow_nan=True)
    n = int(round(tab["v"][0] / tab["freq"][0]))
    taus = np.unique(tab["tau"])
    vs = np.unique(tab["v"]).astype(int)
    qdft = np.full((taus.size, vs.size), np.nan + 1j * np.nan)
    li = np.searchsorted(taus, tab["tau"])
    vi = np.searchsorted(vs, tab["v"].astype(int))
    qdft[li, vi] = tab["qdft_re"] + 1j * tab["qdft_im"]
    return taus, vs, qdft, n


def write_plot_grid(path, spec, values=None):
    """Image-plot grid: first column tau, one column per frequency index."""
    values = spec.qper if values is None else values
    header = ["tau"] + [f"v{v}" for v in spec.freqs.index]
    write_csv(path, header, ([tau] + list(values[l]) for l, tau in enumerate(spec.grid.levels)))

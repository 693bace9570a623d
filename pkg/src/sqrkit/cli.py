"""``sqr`` command-line interface.

Settings are resolved with precedence command-line flag > JSON config file
(``--config``) > built-in default. Every subcommand writes its artifacts to
``--out`` and echoes a short report on stdout.

Exit codes: 0 success, 2 usage error, 3 bad configuration or arguments,
4 unreadable or malformed input data, 5 numerical/solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import bench, io
from .basis import QuantileGrid
from .errors import ConfigError, IngestError, SolverError, SqrError
from .fit import fit_sqr
from .grad import GradConfig
from .ip import IpConfig
from .objective import SqrProblem
from .qar import QarSpec, simulate_qar
from .select import DEFAULT_SPAR_GRID, select_spar, spar_map
from .spectral import FrequencyGrid, QSpectrum, qdft_to_qper, sqdft

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_INGEST, EXIT_SOLVER = 0, 2, 3, 4, 5

log = logging.getLogger("sqrkit")


@dataclass
class RunConfig:
    subcommand: str = ""
    input: str = None
    response: str = None
    regressors: list = field(default_factory=list)
    intercept: bool = True
    column: str = None
    taus: list = None
    grid: list = None            # [start, stop, step]
    spar: object = "bic"
    c: float = None
    nknots: int = None
    spar_grid: list = None
    method: str = "ip"
    max_iter: int = None
    gap_tol: float = 1e-7
    out: str = "."
    seed: int = 0
    workers: int = 1
    n: int = 200
    runs: int = 100
    burn_in: int = 200
    variant: str = "default"
    checkpoints: list = None
    qdft: str = None
    verbose: bool = False

    def quantile_grid(self, default=(0.05, 0.95, 0.01)):
        if self.taus is not None:
            return QuantileGrid(np.array(self.taus, dtype=float))
        start, stop, step = self.grid if self.grid is not None else default
        return QuantileGrid.from_range(start, stop, step)

    def spar_values(self):
        return tuple(self.spar_grid) if self.spar_grid is not None else DEFAULT_SPAR_GRID

    def ip_config(self):
        kw = {"gap_tol": self.gap_tol, "verbose": self.verbose}
        if self.max_iter is not None and self.method == "ip":
            kw["max_iter"] = self.max_iter
        return IpConfig(**kw)


# per-subcommand defaults that differ from the dataclass ones
SUB_DEFAULTS = {
    "sqdft": {"spar": "qr"},
    "qper": {"spar": "qr"},
    "grad-approx": {"grid": [0.02, 0.98, 0.01]},
}


def parse_spar(value):
    """``None`` for plain QR, a criterion name, or a float."""
    if value is None:
        return None
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("qr", "none"):
            return None
        if v in ("aic", "bic", "auto"):
            return "bic" if v == "auto" else v
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"spar must be a number, 'aic', 'bic', 'auto' or 'qr', got {value!r}") from None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError(f"invalid spar {value!r}")


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _name_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def resolve_config(subcommand, cli, config_path=None):
    """Merge defaults, the JSON file and explicit CLI values, in that order."""
    names = {f.name for f in fields(RunConfig)}
    merged = dict(SUB_DEFAULTS.get(subcommand, {}))
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {config_path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update(data)
    merged.update({k: v for k, v in cli.items() if k in names and v is not None})
    merged["subcommand"] = subcommand
    cfg = RunConfig(**merged)
    cfg.spar = parse_spar(cfg.spar)
    if cfg.grid is not None and len(cfg.grid) != 3:
        raise ConfigError("grid needs exactly three values: start, stop, step")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.method.lower() not in ("ip", "bfgs", "adam", "grad"):
        raise ConfigError(f"unknown method {cfg.method!r}")
    return cfg


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(cfg, *keys):
    for k in keys:
        if getattr(cfg, k) in (None, ""):
            raise ConfigError(f"--{k.replace('_', '-')} is required for {cfg.subcommand}")


def _selection_rows(report):
    for r in report.records:
        v = np.nan if r.fidelity is None else float(np.mean(r.fidelity))
        m = np.nan if r.complexity is None else float(np.mean(r.complexity))
        yield r.spar, r.c, v, m, r.aic, r.bic, r.penalty, int(r.ok)


SELECTION_HEADER = ["spar", "c", "mean_fidelity", "mean_complexity", "aic", "bic", "penalty", "ok"]


# -- subcommands ---------------------------------------------------------------

def cmd_fit(cfg):
    _require(cfg, "input", "response")
    X, y, names = io.load_design(cfg.input, cfg.response, cfg.regressors, cfg.intercept)
    grid = cfg.quantile_grid()
    prob = SqrProblem.create(X, y, grid, nknots=cfg.nknots)
    os.makedirs(cfg.out, exist_ok=True)
    diag = {"criterion": None, "spar": None}
    method = cfg.method.lower()
    grad_cfg = None
    if method != "ip":
        grad_cfg = GradConfig(algorithm=method, max_iter=cfg.max_iter or 100)
    if cfg.c is not None:
        c = float(cfg.c)
    elif cfg.spar is None:
        c = 0.0
    elif isinstance(cfg.spar, str):
        rep = select_spar(prob, cfg.spar_values(), workers=cfg.workers, keep_fits=False)
        io.write_csv(os.path.join(cfg.out, "selection.csv"), SELECTION_HEADER, _selection_rows(rep))
        diag.update(criterion=cfg.spar, spar=rep.chosen[cfg.spar])
        c = spar_map(prob, rep.chosen[cfg.spar]).c
    else:
        diag["spar"] = cfg.spar
        c = spar_map(prob, cfg.spar).c
    fit = fit_sqr(prob.with_c(c), method=method, ip_cfg=cfg.ip_config(), grad_cfg=grad_cfg)
    io.write_beta(os.path.join(cfg.out, "beta.csv"), grid.levels, names, fit.beta)
    io.write_theta(os.path.join(cfg.out, "theta.csv"), names, fit.theta, prob.K)
    info = fit.solver_info
    diag.update(
        objective=fit.objective_value,
        c=c,
        method=info.get("method"),
        iterations=info.get("iterations"),
        gap=info.get("gap"),
        status=info.get("status"),
        n=prob.n, p=prob.p, K=prob.K, L=prob.L,
        coefficients=names,
        taus=grid.levels.tolist(),
        fidelity=fit.fidelity.tolist(),
        complexity=fit.complexity.astype(int).tolist(),
    )
    _dump_json(os.path.join(cfg.out, "diagnostics.json"), diag)
    spar_txt = "" if diag["spar"] is None else f" spar={diag['spar']}"
    print(f"fit: n={prob.n} p={prob.p} L={prob.L} K={prob.K}{spar_txt} c={c!r} "
          f"objective={fit.objective_value!r} iterations={info.get('iterations')}")
    return EXIT_OK


def cmd_select_spar(cfg):
    _require(cfg, "input", "response")
    X, y, _ = io.load_design(cfg.input, cfg.response, cfg.regressors, cfg.intercept)
    prob = SqrProblem.create(X, y, cfg.quantile_grid(), nknots=cfg.nknots)
    rep = select_spar(prob, cfg.spar_values(), workers=cfg.workers, keep_fits=False)
    io.write_csv(os.path.join(cfg.out, "selection.csv"), SELECTION_HEADER, _selection_rows(rep))
    print(f"chosen spar: aic={rep.chosen['aic']} bic={rep.chosen['bic']}")
    return EXIT_OK


def _series(cfg):
    _require(cfg, "input", "column")
    return io.read_table(cfg.input, [cfg.column])[cfg.column]


def _spectrum(cfg):
    series = _series(cfg)
    return sqdft(series, cfg.quantile_grid(), spar=cfg.spar, nknots=cfg.nknots, spar_grid=cfg.spar_values(),
                 ip_cfg=cfg.ip_config(), workers=cfg.workers)


def _write_peaks(cfg, spec):
    peaks = spec.peak_index()
    n = spec.freqs.n
    rows = []
    for l, tau in enumerate(spec.grid.levels):
        j = int(peaks[l]) - 1
        rows.append((tau, int(peaks[l]), peaks[l] / n, n / peaks[l], spec.qper[l, j]))
    io.write_csv(os.path.join(cfg.out, "peaks.csv"), ["tau", "v", "freq", "period", "qper"], rows)
    for tau, v, f, period, _ in rows:
        print(f"tau={tau:.4g} peak v={v} f={v}/{n}={f:.4f} period={period:.3f}")


def cmd_sqdft(cfg):
    spec = _spectrum(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    io.write_spectrum_long(os.path.join(cfg.out, "spectrum.csv"), spec)
    io.write_plot_grid(os.path.join(cfg.out, "qper_grid.csv"), spec)
    _dump_json(os.path.join(cfg.out, "spectrum.json"), {
        "method": spec.method, "spar": spec.spar, "n": spec.freqs.n,
        "masked": int((~spec.mask).sum()),
    })
    _write_peaks(cfg, spec)
    return EXIT_OK


def cmd_qper(cfg):
    if cfg.qdft:
        taus, vs, qdft, n = io.read_spectrum_long(cfg.qdft)
        freqs = FrequencyGrid(n)
        if len(freqs) != vs.size:
            raise IngestError("the spectrum file does not cover the full Fourier grid")
        spec = QSpectrum(qdft=qdft, qper=qdft_to_qper(qdft, n), grid=QuantileGrid(taus), freqs=freqs,
                         method="file")
    else:
        spec = _spectrum(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    io.write_plot_grid(os.path.join(cfg.out, "qper_grid.csv"), spec)
    _write_peaks(cfg, spec)
    return EXIT_OK


def cmd_qar_sim(cfg):
    spec = QarSpec(n=cfg.n, burn_in=cfg.burn_in, seed=cfg.seed, variant=cfg.variant)
    y = simulate_qar(spec)
    os.makedirs(cfg.out, exist_ok=True)
    io.write_csv(os.path.join(cfg.out, "series.csv"), ["t", "y"], zip(range(1, y.size + 1), y))
    print(f"qar-sim: n={y.size} seed={cfg.seed} written to {os.path.join(cfg.out, 'series.csv')}")
    return EXIT_OK


def cmd_bench_qar_mae(cfg):
    res = bench.qar_mae_bench(runs=cfg.runs, n=cfg.n, seed=cfg.seed, grid=cfg.quantile_grid(),
                              spar_grid=cfg.spar_values(), workers=cfg.workers)
    os.makedirs(cfg.out, exist_ok=True)
    rows = [
        (r.run, m, r.per[m][0], r.per[m][1], r.total[m], r.spar["aic"], r.spar["bic"])
        for r in res.runs for m in bench.QAR_METHODS
    ]
    io.write_csv(os.path.join(cfg.out, "qar_mae_runs.csv"),
                 ["run", "method", "mae_a0", "mae_a1", "total", "spar_aic", "spar_bic"], rows)
    summary = res.summary()
    io.write_csv(os.path.join(cfg.out, "qar_mae_summary.csv"), ["method", "mae_a0", "mae_a1", "total"], summary)
    print(f"{'method':<8} {'a0':>8} {'a1':>8} {'total':>8}")
    for m, a0, a1, tot in summary:
        print(f"{m:<8} {a0:8.4f} {a1:8.4f} {tot:8.4f}")
    print(f"SQR-BIC < QR in {100 * res.win_rate():.0f}% of {len(res.runs)} runs")
    return EXIT_OK


def cmd_bench_grad_approx(cfg):
    if cfg.input:
        _require(cfg, "response")
        X, y, _ = io.load_design(cfg.input, cfg.response, cfg.regressors, cfg.intercept)
    else:
        X, y = bench.engel_design()
    cps = tuple(int(k) for k in cfg.checkpoints) if cfg.checkpoints else bench.CHECKPOINTS
    spar = "bic" if cfg.spar is None else cfg.spar
    res = bench.grad_approx_bench(X, y, cfg.quantile_grid((0.02, 0.98, 0.01)), spar=spar, checkpoints=cps,
                                  spar_grid=cfg.spar_values())
    os.makedirs(cfg.out, exist_ok=True)
    io.write_csv(os.path.join(cfg.out, "grad_approx.csv"), ["method"] + [str(k) for k in cps],
                 ([label] + errs for label, errs in res.errors.items()))
    trace_rows = (
        (label, k, f, s)
        for label, tr in res.traces.items()
        for k, (f, s) in enumerate(zip(tr.objective, tr.steps))
    )
    io.write_csv(os.path.join(cfg.out, "grad_trace.csv"), ["method", "iteration", "objective", "step"], trace_rows)
    print(f"reference spar={res.spar}")
    print(f"{'method':<10}" + "".join(f"{k:>9}" for k in cps))
    for label, errs in res.errors.items():
        print(f"{label:<10}" + "".join(f"{e:9.4f}" for e in errs))
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "select-spar": cmd_select_spar,
    "sqdft": cmd_sqdft,
    "qper": cmd_qper,
    "qar-sim": cmd_qar_sim,
    "qar-mae": cmd_bench_qar_mae,
    "grad-approx": cmd_bench_grad_approx,
}


# -- parser ------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="JSON file with settings (keys as in RunConfig)")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--workers", type=int, help="parallel worker count (default 1)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--verbose", action="store_true", default=None, help="log solver progress")


def _add_grid(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--taus", type=_float_list, help="explicit quantile levels, e.g. 0.1,0.5,0.9")
    g.add_argument("--grid", type=float, nargs=3, metavar=("START", "STOP", "STEP"),
                   help="quantile grid by range (default 0.05 0.95 0.01)")
    p.add_argument("--nknots", type=int, help="number of distinct spline knots")
    p.add_argument("--spar-grid", dest="spar_grid", type=_float_list,
                   help="comma-separated spar values searched by aic/bic (default -2..2 by 0.2)")
    p.add_argument("--gap-tol", dest="gap_tol", type=float, help="interior-point duality gap tolerance")


def _add_design(p, required=True):
    p.add_argument("--input", required=required, help="CSV file with a header row")
    p.add_argument("--response", required=required, help="response column")
    p.add_argument("--regressors", type=_name_list, default=None, help="comma-separated regressor columns")
    p.add_argument("--no-intercept", dest="intercept", action="store_false", default=None,
                   help="do not add an intercept column")


def build_parser():
    parser = argparse.ArgumentParser(prog="sqr", description="Spline quantile regression toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit SQR on a CSV design")
    _add_design(p)
    _add_grid(p)
    p.add_argument("--spar", help="smoothing: number, 'aic', 'bic' (default) or 'qr' for c = 0")
    p.add_argument("--c", type=float, help="penalty constant c; overrides --spar")
    p.add_argument("--method", help="ip (default), bfgs, adam or grad")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="iteration limit of the chosen solver")
    _add_common(p)

    p = sub.add_parser("select-spar", help="AIC/BIC table over the spar grid")
    _add_design(p)
    _add_grid(p)
    _add_common(p)

    for name, text in (("sqdft", "quantile DFT of a series"), ("qper", "quantile periodogram")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--input", help="CSV holding the series")
        p.add_argument("--column", help="series column")
        if name == "qper":
            p.add_argument("--qdft", help="convert a spectrum.csv written by sqdft instead of fitting")
        p.add_argument("--spar", help="'qr' (default), a number, 'aic', 'bic' or 'auto'")
        _add_grid(p)
        _add_common(p)

    p = sub.add_parser("qar-sim", help="simulate the QAR(1) benchmark process")
    p.add_argument("--n", type=int, help="series length (default 200)")
    p.add_argument("--burn-in", dest="burn_in", type=int, help="discarded start-up samples (default 200)")
    p.add_argument("--variant", choices=("default", "koenker"), help="coefficient functions")
    _add_common(p)

    pb = sub.add_parser("bench", help="benchmark harnesses")
    bsub = pb.add_subparsers(dest="bench", required=True)
    p = bsub.add_parser("qar-mae", help="Monte-Carlo MAE of QR, SQR-AIC and SQR-BIC on QAR data")
    p.add_argument("--runs", type=int, help="replications (default 100)")
    p.add_argument("--n", type=int, help="series length (default 200)")
    _add_grid(p)
    _add_common(p)
    p = bsub.add_parser("grad-approx", help="BFGS/ADAM/GRAD error against the LP solution")
    _add_design(p, required=False)
    _add_grid(p)
    p.add_argument("--spar", help="reference spar: number, 'aic' or 'bic' (default)")
    p.add_argument("--checkpoints", type=_float_list, help="iteration checkpoints")
    _add_common(p)
    return parser


# list flags whose values may start with "-" (e.g. a spar grid "-1,0,1")
LIST_FLAGS = ("--taus", "--spar-grid", "--checkpoints")


def _attach_list_values(argv):
    out, it = [], iter(argv)
    for tok in it:
        if tok in LIST_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_list_values(argv))
    name = args.bench if args.command == "bench" else args.command
    cli = {k: v for k, v in vars(args).items() if k not in ("command", "bench", "config")}
    try:
        cfg = resolve_config(name, cli, args.config)
        logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING,
                            format="%(name)s: %(message)s")
        return COMMANDS[name](cfg)
    except IngestError as exc:
        print(f"sqr: input error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except SolverError as exc:
        print(f"sqr: solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, SqrError, ValueError, TypeError) as exc:
        print(f"sqr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Spline quantile regression: joint quantile regression across a grid of
levels with coefficients smoothed as penalized cubic splines in tau."""

from .basis import QuantileGrid, SplineBasis, build_basis, eval_basis, identity_basis, knot_vector
from .errors import (
    ConfigError,
    DomainError,
    IngestError,
    InvalidGrid,
    SolverError,
    SqrError,
)
from .fit import fit_qr, fit_sqr, qr_warm_start
from .grad import GradConfig, solve_adam, solve_bfgs, solve_grad
from .ip import IpConfig, solve_ip
from .lp import CanonicalLp, assemble
from .objective import SqrFit, SqrProblem, check_loss, objective, subgradient
from .qar import QarSpec, mae, qar_truth, simulate_qar
from .select import SelectionReport, select_spar, spar_to_c
from .spectral import FrequencyGrid, QSpectrum, qdft_to_qper, sqdft, trig_design

__version__ = "0.1.0"

__all__ = [
    "QuantileGrid", "SplineBasis", "build_basis", "eval_basis", "identity_basis", "knot_vector",
    "SqrError", "InvalidGrid", "DomainError", "ConfigError", "IngestError", "SolverError",
    "fit_sqr", "fit_qr", "qr_warm_start",
    "GradConfig", "solve_bfgs", "solve_adam", "solve_grad",
    "IpConfig", "solve_ip", "CanonicalLp", "assemble",
    "SqrProblem", "SqrFit", "check_loss", "objective", "subgradient",
    "QarSpec", "qar_truth", "simulate_qar", "mae",
    "select_spar", "spar_to_c", "SelectionReport",
    "FrequencyGrid", "QSpectrum", "trig_design", "sqdft", "qdft_to_qper",
]

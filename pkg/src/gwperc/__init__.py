"""Critical percolation on Galton-Watson trees: exact computation and simulation."""

from __future__ import annotations

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (
    AttemptCapError,
    DepthBudgetError,
    GWPercError,
    InsufficientDepthError,
    InvalidSpecError,
    PreconditionError,
    TreeFormatError,
)
from .offspring import (
    CriticalParams,
    OffspringSpec,
    annealed_offspring,
    derive_params,
    parse_spec,
    sample_offspring,
)
from .tree import GWTree, VertexRef, deepen, deserialize, generate, serialize, w_estimate
from .percolation import (
    MomentTable,
    PercolationOutcome,
    SurvivalCurve,
    conditioned_sizes,
    factorial_moments_exact,
    percolate_once,
    sandwich_check,
    spread_diagnostics,
    survival_exact,
)
from .martingale import MartingaleTrace, increment_study, m_statistic
from .iic import IICSample, iic_marginal_exact, iic_size_experiment, sample_iic
from .annealed import annealed_iic_sizes, annealed_survival_exact, annealed_yaglom
from .stats import EmpiricalSummary, decay_fit, exp_cdf, gamma2_cdf, ks_distance

__all__ = [name for name in dir() if not name.startswith("_")]

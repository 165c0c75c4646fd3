"""lorec: exactly low-rank plus sparse covariance decomposition.

Estimates a covariance matrix as the sum of an exactly low-rank component
and a sparse component by minimizing a penalized Frobenius loss with an
accelerated proximal-gradient solver, and ships the surrounding machinery:
comparison baselines, cross-validated penalty selection, a Monte-Carlo
benchmark harness, recovery metrics, and a rolling minimum-variance
portfolio backtest.
"""

__version__ = "0.1.0"

from ._backend import available_backends, default_backend
from .estimators import EstimatorSpec, estimate, spike_support_recovery
from .linalg import (
    SpectralFactorization,
    hard_threshold,
    invert_spd,
    load_matrix_csv,
    norms,
    sample_covariance,
    save_matrix_csv,
    soft_threshold,
    spectral_factorize,
    svd_soft_threshold,
    symmetrize,
)
from .metrics import RecoveryReport, aggregate, joint_frobenius, loading_angle, score
from .models import (
    GroundTruthModel,
    gen_compound_symmetry,
    gen_factor,
    gen_spike,
    sample_gaussian,
)
from .portfolio import (
    PortfolioWeights,
    ReturnsPanel,
    markowitz_weights,
    rolling_backtest,
)
from .solver import (
    SUPPORT_CUTOFF,
    Decomposition,
    KKTReport,
    SolverConfig,
    SolverResult,
    complexity_bound,
    gradient,
    initial_point,
    kkt_check,
    objective,
    solve,
)
from .tuning import (
    CoherenceParams,
    PenaltyGrid,
    default_grid,
    kfold_cv,
    spike_coherence,
    spike_theoretical_penalty,
    theoretical_penalty,
)

__all__ = [
    "__version__",
    "available_backends",
    "default_backend",
    "EstimatorSpec",
    "estimate",
    "spike_support_recovery",
    "SpectralFactorization",
    "hard_threshold",
    "invert_spd",
    "load_matrix_csv",
    "norms",
    "sample_covariance",
    "save_matrix_csv",
    "soft_threshold",
    "spectral_factorize",
    "svd_soft_threshold",
    "symmetrize",
    "RecoveryReport",
    "aggregate",
    "joint_frobenius",
    "loading_angle",
    "score",
    "GroundTruthModel",
    "gen_compound_symmetry",
    "gen_factor",
    "gen_spike",
    "sample_gaussian",
    "PortfolioWeights",
    "ReturnsPanel",
    "markowitz_weights",
    "rolling_backtest",
    "SUPPORT_CUTOFF",
    "Decomposition",
    "KKTReport",
    "SolverConfig",
    "SolverResult",
    "complexity_bound",
    "gradient",
    "initial_point",
    "kkt_check",
    "objective",
    "solve",
    "CoherenceParams",
    "PenaltyGrid",
    "default_grid",
    "kfold_cv",
    "spike_coherence",
    "spike_theoretical_penalty",
    "theoretical_penalty",
]

"""Principal portfolios of single-index asset universes.

Decomposes a diagonal-plus-rank-one covariance universe into
uncorrelated principal portfolios (exactly via the secular equation,
perturbatively to first order, and in closed form when residual
variances are uniform), builds riskless-augmented efficient frontiers,
and validates decorrelation by Monte Carlo.
"""

__version__ = "0.1.0"

from .covariance import AllBetasZero, CovariancePair, build_covariance
from .crv import CrvLimits, CrvPortfolio, CrvSolution, UniformBetas, crv_limits, solve_crv
from .fileio import ParseError, ValidationError, dumps_report, load_universe, loads_report
from .frontier import (
    Degenerate,
    FrontierAllocation,
    FrontierCurve,
    Unreachable,
    allocate,
    frontier_curve,
)
from .mcsim import DimensionMismatch, SimConfig, SimReport, simulate, verify_decorrelation
from .spectral import (
    ConvergenceFailure,
    MarketAlignedStats,
    MinorAverage,
    MinorSummary,
    PrincipalDecomposition,
    PrincipalPortfolioStats,
    SolverTolerances,
    market_aligned_stats,
    minor_average_variance,
    portfolio_stats,
    solve_exact,
    solve_perturbative,
)
from .universe import (
    AssetSpec,
    AssetUniverse,
    ValidationIssue,
    ValidationReport,
    expected_returns,
    validate,
)

__all__ = [
    "__version__",
    "AllBetasZero",
    "AssetSpec",
    "AssetUniverse",
    "ConvergenceFailure",
    "CovariancePair",
    "CrvLimits",
    "CrvPortfolio",
    "CrvSolution",
    "Degenerate",
    "DimensionMismatch",
    "FrontierAllocation",
    "FrontierCurve",
    "MarketAlignedStats",
    "MinorAverage",
    "MinorSummary",
    "ParseError",
    "PrincipalDecomposition",
    "PrincipalPortfolioStats",
    "SimConfig",
    "SimReport",
    "SolverTolerances",
    "UniformBetas",
    "Unreachable",
    "ValidationError",
    "ValidationIssue",
    "ValidationReport",
    "allocate",
    "build_covariance",
    "crv_limits",
    "dumps_report",
    "expected_returns",
    "frontier_curve",
    "load_universe",
    "loads_report",
    "market_aligned_stats",
    "minor_average_variance",
    "portfolio_stats",
    "simulate",
    "solve_crv",
    "solve_exact",
    "solve_perturbative",
    "validate",
    "verify_decorrelation",
]

"""Asset-universe input data and validation.

The universe is the single input every analysis consumes: per-asset
mean residual return, residual variance and market sensitivity (beta),
plus the market's mean and variance and an optional riskless rate.
All rates are per-period decimals (0.05 means 5%).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GAMMA_SQ_WARN = 0.1
UNIFORM_BETA_TOL = 1e-6


@dataclass(frozen=True)
class AssetSpec:
    """One risky asset of the single-index universe.

    Attributes:
        id: Opaque identifier, unique within a universe.
        alpha_mean: Mean residual (market-independent) return.
        residual_var: Variance of the residual return component, >= 0.
        beta: Sensitivity to market return fluctuations.
    """

    id: str
    alpha_mean: float
    residual_var: float
    beta: float


@dataclass(frozen=True)
class AssetUniverse:
    """An ordered set of assets plus market moments.

    Asset order is semantic: vectors and matrices produced downstream
    are indexed in this order.
    """

    assets: tuple[AssetSpec, ...]
    market_mean: float
    market_var: float
    riskless_rate: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "assets", tuple(self.assets))

    @property
    def n(self) -> int:
        return len(self.assets)

    def ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.assets)

    def alpha_means(self) -> np.ndarray:
        return np.array([a.alpha_mean for a in self.assets], dtype=float)

    def residual_vars(self) -> np.ndarray:
        return np.array([a.residual_var for a in self.assets], dtype=float)

    def betas(self) -> np.ndarray:
        return np.array([a.beta for a in self.assets], dtype=float)


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of universe validation: violations are fatal, warnings advisory."""

    violations: tuple[ValidationIssue, ...] = field(default_factory=tuple)
    warnings: tuple[ValidationIssue, ...] = field(default_factory=tuple)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def codes(self) -> tuple[str, ...]:
        return tuple(i.code for i in self.violations + self.warnings)


def validate(u: AssetUniverse) -> ValidationReport:
    """Check structural invariants of a universe; pure and idempotent.

    Structural problems (too few assets, duplicate ids, negative
    variances, non-positive market variance, all betas zero, singular
    covariance) are reported as violations, never raised. Two advisory
    warnings are attached: ``perturbative_regime`` when the largest
    rescaled residual variance reaches ``GAMMA_SQ_WARN`` (first-order
    spectral formulas degrade), and ``near_uniform_betas`` when the
    beta scatter angle satisfies tan(theta) < ``UNIFORM_BETA_TOL``
    (the constant-residual-variance geometry degenerates).
    """
    violations: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []

    if u.n < 2:
        violations.append(ValidationIssue("too_few_assets", f"need at least 2 assets, got {u.n}"))

    seen: set[str] = set()
    for a in u.assets:
        if a.id in seen:
            violations.append(ValidationIssue("duplicate_id", f"duplicate id {a.id!r}"))
        seen.add(a.id)

    scalars = [u.market_mean, u.market_var] + ([u.riskless_rate] if u.riskless_rate is not None else [])
    finite = all(math.isfinite(x) for x in scalars)
    for a in u.assets:
        if not all(math.isfinite(x) for x in (a.alpha_mean, a.residual_var, a.beta)):
            finite = False
    if not finite:
        violations.append(ValidationIssue("nonfinite_input", "all parameters must be finite"))
        return ValidationReport(tuple(violations), tuple(warnings))

    if u.market_var <= 0:
        violations.append(ValidationIssue("nonpositive_market_var", "market_var must be positive"))

    for a in u.assets:
        if a.residual_var < 0:
            violations.append(
                ValidationIssue("negative_residual_var", f"asset {a.id!r} has residual_var {a.residual_var} < 0")
            )

    betas = u.betas()
    sum_b2 = float(betas @ betas)
    if u.n >= 1 and sum_b2 == 0.0:
        violations.append(ValidationIssue("all_betas_zero", "all betas are zero; market direction undefined"))

    # Positive definiteness of diag(residual_var) + market_var * beta beta^T:
    # fails iff two assets have zero residual variance, or one does and its
    # beta is also zero.
    if u.market_var > 0 and u.n >= 2:
        zero_res = [a for a in u.assets if a.residual_var == 0.0]
        if len(zero_res) >= 2:
            violations.append(
                ValidationIssue("singular_covariance", "more than one asset has zero residual variance")
            )
        elif len(zero_res) == 1 and zero_res[0].beta == 0.0:
            violations.append(
                ValidationIssue(
                    "singular_covariance",
                    f"asset {zero_res[0].id!r} has zero residual variance and zero beta",
                )
            )

    if sum_b2 > 0 and u.market_var > 0:
        gamma_sq = u.residual_vars() / (sum_b2 * u.market_var)
        g_max = float(gamma_sq.max()) if u.n else 0.0
        if g_max >= GAMMA_SQ_WARN:
            warnings.append(
                ValidationIssue(
                    "perturbative_regime",
                    f"max rescaled residual variance {g_max:.6g} >= {GAMMA_SQ_WARN}; "
                    "first-order spectral formulas are unreliable",
                )
            )
        beta_bar = float(betas.mean())
        delta_beta = float(np.sqrt(((betas - beta_bar) ** 2).mean()))
        if beta_bar != 0.0 and delta_beta / abs(beta_bar) < UNIFORM_BETA_TOL:
            warnings.append(
                ValidationIssue(
                    "near_uniform_betas",
                    f"beta scatter tan(theta) = {delta_beta / abs(beta_bar):.3g} < {UNIFORM_BETA_TOL}; "
                    "the constant-residual-variance solution degenerates",
                )
            )

    return ValidationReport(tuple(violations), tuple(warnings))


def expected_returns(u: AssetUniverse) -> np.ndarray:
    """Per-asset expected returns r_i = alpha_mean_i + beta_i * market_mean."""
    return u.alpha_means() + u.betas() * u.market_mean

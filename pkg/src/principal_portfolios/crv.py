"""Closed-form spectrum for the constant-residual-variance model.

When every asset carries the same residual variance, the rescaled
covariance becomes ``gamma_sq * I + beta_hat beta_hat^T`` whose
spectrum is known in closed form: a major eigenvalue ``1 + gamma_sq``
with eigenvector ``beta_hat`` and an (N-1)-fold degenerate minor
eigenvalue ``gamma_sq``. Inside the minor eigenspace the portfolio of
minimum volatility is the unit vector maximizing the weight, i.e. the
normalized projection of the equal-weight direction ``u_hat`` onto the
space orthogonal to ``beta_hat``:

    e1_i = (u_hat_i - cos(theta) beta_hat_i) / sin(theta)

where ``theta`` is the angle between ``u_hat`` and ``beta_hat``, which
also satisfies ``tan(theta) = std(beta) / mean(beta)``: theta measures
the scatter of the betas. Every remaining minor direction is
orthogonal to ``u_hat`` and therefore has exactly zero weight: those
N-2 portfolios are critically leveraged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .covariance import AllBetasZero
from .spectral import PrincipalPortfolioStats
from .universe import UNIFORM_BETA_TOL, AssetUniverse, expected_returns


class UniformBetas(ValueError):
    """Raised when the betas are too uniform for the minor geometry."""


@dataclass(frozen=True)
class CrvPortfolio:
    """One of the two distinguished constant-residual-variance portfolios."""

    eigenvalue_tilde: float
    eigenvalue: float
    vector: np.ndarray
    weight: float
    expected_return: float
    portfolio_variance: float
    return_adjusted_volatility: float
    portfolio_beta: float


@dataclass(frozen=True)
class CrvSolution:
    """Full closed-form solution of the constant-residual-variance model.

    ``major`` is the market-aligned portfolio (eigenvalue
    ``1 + gamma_sq``), ``min_vol`` the minimum-volatility
    market-orthogonal portfolio (eigenvalue ``gamma_sq``), and
    ``degenerate_dim = N - 2`` counts the critically leveraged
    portfolios spanning the rest of the minor eigenspace. ``flags``
    records orientation and sign quirks: ``orientation_flipped`` when
    beta_hat was negated to keep the major weight nonnegative, and
    ``min_vol_return_negative`` when the return-adjusted volatility
    denominator of the minimum-volatility portfolio was negative
    before the absolute value.
    """

    gamma_sq: float
    theta: float
    tan_theta: float
    residual_var: float
    scale: float
    major: CrvPortfolio
    min_vol: CrvPortfolio
    degenerate_dim: int
    r_av: float
    flags: tuple[str, ...] = ()


class CrvLimits(NamedTuple):
    """Large-N behavior of the two distinguished volatilities.

    ``major_limit`` is the limiting major volatility
    ``sqrt((beta . beta) * market_var / (N cos^2 theta))`` (constant
    under replication of a base universe) and ``min_vol_constant`` the
    constant c in ``V_min_vol = c / sqrt(N)``, namely
    ``sqrt(residual_var) / sin(theta)``.
    """

    major_limit: float
    min_vol_constant: float


def solve_crv(
    u: AssetUniverse,
    residual_var: float,
    uniform_beta_tol: float = UNIFORM_BETA_TOL,
) -> CrvSolution:
    """Closed-form principal decomposition with uniform residual variance.

    ``residual_var`` is passed explicitly so any universe can be
    analyzed as if its residual variances were uniform (for comparison
    against the general solver); the per-asset values in ``u`` are
    ignored, while means, betas and market moments are used as given.

    Raises:
        AllBetasZero: all betas vanish.
        UniformBetas: the beta scatter satisfies
            tan(theta) < uniform_beta_tol, so the minimum-volatility
            direction is ill-defined.
        ValueError: residual_var <= 0.
    """
    if residual_var <= 0:
        raise ValueError("residual_var must be positive")
    n = u.n
    betas = u.betas()
    sum_b2 = float(betas @ betas)
    if sum_b2 == 0.0:
        raise AllBetasZero("all betas are zero")

    beta_hat = betas / math.sqrt(sum_b2)
    u_hat = np.full(n, 1.0 / math.sqrt(n))

    flags: list[str] = []
    cos_theta = float(u_hat @ beta_hat)
    if cos_theta < 0.0:
        # Keep the major weight nonnegative by flipping the market direction.
        beta_hat = -beta_hat
        cos_theta = -cos_theta
        flags.append("orientation_flipped")

    ortho = u_hat - cos_theta * beta_hat
    sin_theta = float(np.linalg.norm(ortho))
    if sin_theta < uniform_beta_tol * cos_theta:
        raise UniformBetas(
            f"tan(theta) = {sin_theta / cos_theta if cos_theta else math.inf:.3g} "
            f"< {uniform_beta_tol}; betas are numerically uniform"
        )
    e1 = ortho / sin_theta
    theta = math.atan2(sin_theta, cos_theta)
    tan_theta = sin_theta / cos_theta if cos_theta > 0.0 else math.inf

    scale = sum_b2 * u.market_var
    gamma_sq = residual_var / scale
    r = expected_returns(u)
    r_av = float(r.mean())
    sqrt_n = math.sqrt(n)

    # Major (market-aligned) portfolio.
    w_major = sqrt_n * cos_theta
    ret_sum_major = float(beta_hat @ r)
    r_major = ret_sum_major / w_major
    v2_major = (residual_var + scale) / (n * cos_theta * cos_theta)
    vcheck_major = math.sqrt(residual_var + scale) / abs(ret_sum_major) if ret_sum_major else math.inf
    beta_major = float(beta_hat @ betas) / w_major

    # Minimum-volatility market-orthogonal portfolio.
    w_min = sqrt_n * sin_theta
    denom = r_av - cos_theta * cos_theta * r_major
    if denom < 0.0:
        flags.append("min_vol_return_negative")
    r_min = denom / (sin_theta * sin_theta)
    v2_min = residual_var / (n * sin_theta * sin_theta)
    vcheck_min = (
        math.sqrt(residual_var * sin_theta * sin_theta) / (sqrt_n * abs(denom))
        if denom
        else math.inf
    )
    beta_min = float(e1 @ betas) / w_min

    major = CrvPortfolio(
        eigenvalue_tilde=1.0 + gamma_sq,
        eigenvalue=scale + residual_var,
        vector=beta_hat,
        weight=w_major,
        expected_return=r_major,
        portfolio_variance=v2_major,
        return_adjusted_volatility=vcheck_major,
        portfolio_beta=beta_major,
    )
    min_vol = CrvPortfolio(
        eigenvalue_tilde=gamma_sq,
        eigenvalue=residual_var,
        vector=e1,
        weight=w_min,
        expected_return=r_min,
        portfolio_variance=v2_min,
        return_adjusted_volatility=vcheck_min,
        portfolio_beta=beta_min,
    )
    return CrvSolution(
        gamma_sq=gamma_sq,
        theta=theta,
        tan_theta=tan_theta,
        residual_var=residual_var,
        scale=scale,
        major=major,
        min_vol=min_vol,
        degenerate_dim=n - 2,
        r_av=r_av,
        flags=tuple(flags),
    )


def crv_limits(u: AssetUniverse, residual_var: float) -> CrvLimits:
    """Large-N asymptotics of the distinguished volatilities."""
    sol = solve_crv(u, residual_var)
    n = u.n
    cos_theta = math.cos(sol.theta)
    sin_theta = math.sin(sol.theta)
    major_limit = math.sqrt(sol.scale / (n * cos_theta * cos_theta))
    min_vol_constant = math.sqrt(residual_var) / sin_theta
    return CrvLimits(major_limit=major_limit, min_vol_constant=min_vol_constant)


def principal_stats(sol: CrvSolution, n: int) -> tuple[PrincipalPortfolioStats, ...]:
    """Stats list in eigenvalue order for frontier construction.

    The N-2 critically leveraged portfolios are represented without
    constructing their vectors: weight zero, infinite per-unit
    variance, undefined per-unit return and beta. Their
    return-adjusted volatility depends on the (arbitrary) basis choice
    inside the degenerate block and is reported as NaN; it never
    participates in allocation.
    """

    def from_crv(p: CrvPortfolio, market_aligned: bool) -> PrincipalPortfolioStats:
        return PrincipalPortfolioStats(
            weight=p.weight,
            variance_tilde=p.eigenvalue_tilde,
            variance=p.eigenvalue,
            portfolio_variance=p.portfolio_variance,
            expected_return=p.expected_return,
            return_adjusted_volatility=p.return_adjusted_volatility,
            portfolio_beta=p.portfolio_beta,
            is_market_aligned=market_aligned,
            critically_leveraged=False,
        )

    degenerate = PrincipalPortfolioStats(
        weight=0.0,
        variance_tilde=sol.gamma_sq,
        variance=sol.residual_var,
        portfolio_variance=math.inf,
        expected_return=None,
        return_adjusted_volatility=math.nan,
        portfolio_beta=None,
        is_market_aligned=False,
        critically_leveraged=True,
    )
    return (from_crv(sol.min_vol, False),) + (degenerate,) * (n - 2) + (from_crv(sol.major, True),)

"""Efficient-frontier allocation over principal portfolios.

Because principal portfolios are mutually uncorrelated, the
minimum-variance allocation hitting a target return in the presence of
a riskless asset weights each usable portfolio by its allocation score

    Z_mu = (R_mu - R0) / V_mu^2

(excess return over variance), scaled jointly with the riskless weight
so the realized return equals the target. This is the tangency
allocation in the principal basis; it reduces to inverse-variance
weighting when excess returns are equal, and it is validated in the
test suite against a direct least-variance Lagrange oracle.
Critically leveraged portfolios have infinite per-unit variance, so
their score -- and hence their weight -- is exactly zero. Short
positions (negative weights) are allowed throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import PrincipalPortfolioStats


class Unreachable(RuntimeError):
    """No risky portfolio is distinguishable from the riskless asset."""


class Degenerate(RuntimeError):
    """The target return would require dividing by a zero excess return."""


@dataclass(frozen=True)
class FrontierAllocation:
    """Weights over the riskless asset and the principal portfolios.

    ``x0 + sum(x) == 1``; entry mu of ``x`` multiplies principal
    portfolio mu (eigenvalue order). ``z`` stores the allocation
    scores, zero for every excluded portfolio.
    """

    target_return: float
    x0: float
    x: np.ndarray
    v_eff: float
    z: np.ndarray


@dataclass(frozen=True)
class FrontierCurve:
    allocations: tuple[FrontierAllocation, ...]
    failures: tuple[tuple[float, str], ...]


def _scores(stats: list[PrincipalPortfolioStats] | tuple[PrincipalPortfolioStats, ...], r0: float) -> np.ndarray:
    z = np.zeros(len(stats))
    for mu, s in enumerate(stats):
        if s.critically_leveraged or s.expected_return is None:
            continue
        if not math.isfinite(s.portfolio_variance) or s.portfolio_variance <= 0.0:
            continue
        z[mu] = (s.expected_return - r0) / s.portfolio_variance
    return z


def allocate(
    stats: list[PrincipalPortfolioStats] | tuple[PrincipalPortfolioStats, ...],
    r0: float,
    target: float,
) -> FrontierAllocation:
    """Minimum-variance allocation achieving ``target`` expected return.

    Raises:
        Unreachable: every allocation score is zero (all usable
            portfolios return exactly the riskless rate, or none are
            usable).
        Degenerate: the aggregate excess return is numerically zero
            while the target differs from the riskless rate.
    """
    z = _scores(stats, r0)
    if not np.any(z):
        raise Unreachable("no portfolio with nonzero excess return per unit variance")

    # d = sum_mu z_mu (R_mu - r0) = sum_mu z_mu^2 V_mu^2 > 0.
    d = 0.0
    for mu, s in enumerate(stats):
        if z[mu] != 0.0 and s.expected_return is not None:
            d += z[mu] * (s.expected_return - r0)
    if d <= 0.0:
        raise Degenerate("aggregate excess return is zero; target unreachable")

    x = (target - r0) / d * z
    x0 = 1.0 - float(x.sum())
    v_eff = abs(target - r0) / math.sqrt(d)
    return FrontierAllocation(target_return=target, x0=x0, x=x, v_eff=v_eff, z=z)


def frontier_curve(
    stats: list[PrincipalPortfolioStats] | tuple[PrincipalPortfolioStats, ...],
    r0: float,
    targets: list[float] | tuple[float, ...] | np.ndarray,
) -> FrontierCurve:
    """Allocate for each target, collecting per-target failures."""
    allocations: list[FrontierAllocation] = []
    failures: list[tuple[float, str]] = []
    for t in targets:
        try:
            allocations.append(allocate(stats, r0, float(t)))
        except (Unreachable, Degenerate) as exc:
            failures.append((float(t), str(exc)))
    return FrontierCurve(tuple(allocations), tuple(failures))

"""Single-index covariance matrix and its dimensionless rescaling.

The covariance of a single-index universe is diagonal-plus-rank-one:

    sigma_ij = residual_var_i * delta_ij + beta_i beta_j * market_var

Dividing by ``scale = (sum_i beta_i^2) * market_var`` gives the
dimensionless form

    sigma_tilde_ij = gamma_sq_i * delta_ij + beta_hat_i beta_hat_j

with ``beta_hat`` the unit vector along beta and
``gamma_sq_i = residual_var_i / scale``. All spectral work happens on
``sigma_tilde``; ``scale`` is the single conversion point back to
original units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .universe import AssetUniverse


class AllBetasZero(ValueError):
    """Raised when every beta is zero, so the market direction is undefined."""


@dataclass(frozen=True)
class CovariancePair:
    """Original covariance together with its rescaled dimensionless form.

    Attributes:
        sigma: N x N covariance in original rate-squared units.
        sigma_tilde: N x N dimensionless covariance, ``sigma / scale``.
        beta_hat: unit vector along the beta vector.
        gamma_sq: rescaled residual variances, >= 0.
        b_sq: mean squared beta, ``sum(beta^2) / N``.
        scale: ``N * b_sq * market_var``; ``sigma = scale * sigma_tilde``.
    """

    sigma: np.ndarray
    sigma_tilde: np.ndarray
    beta_hat: np.ndarray
    gamma_sq: np.ndarray
    b_sq: float
    scale: float

    @property
    def n(self) -> int:
        return self.beta_hat.shape[0]

    def betas(self) -> np.ndarray:
        """Original beta vector, recovered from beta_hat and b_sq."""
        return self.beta_hat * np.sqrt(self.n * self.b_sq)


def build_covariance(u: AssetUniverse) -> CovariancePair:
    """Construct the covariance pair for a universe.

    Raises:
        AllBetasZero: if sum(beta^2) == 0 (beta_hat and the rescaling
            are undefined).
    """
    betas = u.betas()
    res = u.residual_vars()
    sum_b2 = float(betas @ betas)
    if sum_b2 == 0.0:
        raise AllBetasZero("all betas are zero; cannot rescale the covariance")

    b_sq = sum_b2 / u.n
    scale = sum_b2 * u.market_var
    beta_hat = betas / np.sqrt(sum_b2)
    gamma_sq = res / scale

    sigma = np.diag(res) + u.market_var * np.outer(betas, betas)
    sigma_tilde = np.diag(gamma_sq) + np.outer(beta_hat, beta_hat)

    return CovariancePair(
        sigma=sigma,
        sigma_tilde=sigma_tilde,
        beta_hat=beta_hat,
        gamma_sq=gamma_sq,
        b_sq=b_sq,
        scale=scale,
    )

"""Monte Carlo validation of the single-index decomposition.

Per period the generative model draws a market return
``Normal(market_mean, market_var)`` and independent residuals
``Normal(alpha_mean_i, residual_var_i)``, emitting
``rho_i = alpha_i + beta_i * rho_mkt``. Draws use the inverse-CDF
method (``scipy.special.ndtri``) on uniforms from a counter-based
Philox bit generator, so results are bit-identical across platforms
for a given seed and draw order.

Substream contract: path ``p`` owns the Philox counter blocks
``[p * B, (p + 1) * B)`` where ``B = ceil(horizon * (N + 1) / 4)``
(four 64-bit outputs per counter block; surplus draws in the last
block are discarded). Draw order within a path is period-major, the
market uniform first and then one uniform per asset in asset order.
Any chunking of the path range therefore reproduces exactly the same
numbers, which makes parallel generation order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .spectral import PrincipalDecomposition
from .universe import AssetUniverse

_CHUNK_PATHS = 65536
_HALF_ULP = 2.0**-54  # shifts random() output from [0, 1) into (0, 1)


class DimensionMismatch(ValueError):
    """Sample matrix and decomposition disagree on the asset count."""


@dataclass(frozen=True)
class SimConfig:
    """Simulation size and seeding.

    Identical (config, universe) pairs yield bit-identical draws.
    ``horizon`` adds i.i.d. periods per path; the model is
    single-period, so periods are simply extra samples.
    """

    paths: int
    seed: int
    horizon: int = 1

    def __post_init__(self) -> None:
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class SimReport:
    """Empirical check that recast portfolios are uncorrelated.

    ``max_offdiag_corr`` is the largest absolute sample correlation
    between distinct principal portfolios; the pass criterion is
    ``max_offdiag_corr <= 5 / sqrt(n_samples)``. ``variance_errors``
    holds the per-portfolio relative error of the sample principal
    variance against the model value (absolute error where the model
    variance is zero).
    """

    sample_cov_assets: np.ndarray
    sample_cov_principal: np.ndarray
    max_offdiag_corr: float
    variance_errors: np.ndarray
    n_samples: int
    corr_threshold: float
    decorrelation_pass: bool


def simulate(u: AssetUniverse, cfg: SimConfig) -> np.ndarray:
    """Sample return paths; rows are (path, period) pairs, columns assets.

    Returns an array of shape ``(paths * horizon, N)`` with path ``p``
    occupying rows ``[p * horizon, (p + 1) * horizon)``.
    """
    n = u.n
    alpha = u.alpha_means()
    res_std = np.sqrt(u.residual_vars())
    betas = u.betas()
    mkt_std = math.sqrt(u.market_var)

    draws_per_path = cfg.horizon * (n + 1)
    blocks_per_path = -(-draws_per_path // 4)
    out = np.empty((cfg.paths * cfg.horizon, n))

    for start in range(0, cfg.paths, _CHUNK_PATHS):
        stop = min(start + _CHUNK_PATHS, cfg.paths)
        bitgen = np.random.Philox(key=cfg.seed)
        bitgen.advance(start * blocks_per_path)
        gen = np.random.Generator(bitgen)
        u01 = gen.random((stop - start) * blocks_per_path * 4)
        u01 = u01.reshape(stop - start, blocks_per_path * 4)[:, :draws_per_path]
        z = ndtri(u01 + _HALF_ULP).reshape(stop - start, cfg.horizon, n + 1)
        mkt = u.market_mean + mkt_std * z[:, :, 0]
        resid = alpha + res_std * z[:, :, 1:]
        rets = resid + betas * mkt[:, :, None]
        out[start * cfg.horizon : stop * cfg.horizon] = rets.reshape(-1, n)
    return out


def verify_decorrelation(paths: np.ndarray, decomp: PrincipalDecomposition) -> SimReport:
    """Project samples onto the principal basis and measure correlations.

    Raises:
        DimensionMismatch: column count differs from the decomposition.
    """
    paths = np.asarray(paths, dtype=float)
    if paths.ndim != 2 or paths.shape[1] != decomp.n_assets:
        raise DimensionMismatch(
            f"samples have shape {paths.shape}, expected (*, {decomp.n_assets})"
        )
    n_samples = paths.shape[0]

    cov_assets = np.atleast_2d(np.cov(paths, rowvar=False, ddof=1))
    projected = paths @ decomp.eigenvectors
    cov_principal = np.atleast_2d(np.cov(projected, rowvar=False, ddof=1))

    stds = np.sqrt(np.diag(cov_principal))
    safe = np.where(stds > 0.0, stds, 1.0)
    corr = cov_principal / np.outer(safe, safe)
    off = corr - np.diag(np.diag(corr))
    max_offdiag = float(np.abs(off).max()) if off.size > 1 else 0.0

    model_vars = decomp.eigenvalues()
    sample_vars = np.diag(cov_principal)
    errors = np.where(
        model_vars > 0.0,
        np.abs(sample_vars - model_vars) / np.where(model_vars > 0.0, model_vars, 1.0),
        np.abs(sample_vars - model_vars),
    )

    threshold = 5.0 / math.sqrt(n_samples)
    return SimReport(
        sample_cov_assets=cov_assets,
        sample_cov_principal=cov_principal,
        max_offdiag_corr=max_offdiag,
        variance_errors=errors,
        n_samples=n_samples,
        corr_threshold=threshold,
        decorrelation_pass=max_offdiag <= threshold,
    )

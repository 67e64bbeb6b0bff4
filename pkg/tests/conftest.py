from __future__ import annotations

import numpy as np
import pytest

from principal_portfolios import AssetSpec, AssetUniverse


@pytest.fixture
def crv3() -> AssetUniverse:
    """The canonical 3-asset constant-residual-variance fixture."""
    return AssetUniverse(
        assets=(
            AssetSpec("s1", 0.03, 0.04, 0.5),
            AssetSpec("s2", 0.005, 0.04, 1.0),
            AssetSpec("s3", 0.001, 0.04, 1.5),
        ),
        market_mean=0.05,
        market_var=0.01,
        riskless_rate=0.02,
    )


def random_universe(
    rng: np.random.Generator,
    n: int,
    gamma_scale: float = 0.05,
    distinct: bool = True,
    riskless: float | None = None,
) -> AssetUniverse:
    """Random universe with well-separated poles and nonzero couplings."""
    betas = rng.uniform(0.2, 2.0, n) * rng.choice([-1.0, 1.0], n, p=[0.2, 0.8])
    market_var = rng.uniform(0.005, 0.05)
    sum_b2 = float(betas @ betas)
    if distinct:
        # Evenly spread relative levels plus jitter keep the poles separated.
        levels = (np.arange(n) + rng.uniform(0.2, 0.8, n)) / n
        rng.shuffle(levels)
    else:
        levels = rng.uniform(0.1, 1.0, n)
    res_var = levels * gamma_scale * sum_b2 * market_var
    alphas = rng.normal(0.01, 0.01, n)
    assets = tuple(
        AssetSpec(f"a{i}", float(alphas[i]), float(res_var[i]), float(betas[i])) for i in range(n)
    )
    return AssetUniverse(
        assets=assets,
        market_mean=rng.uniform(0.02, 0.08),
        market_var=market_var,
        riskless_rate=riskless,
    )

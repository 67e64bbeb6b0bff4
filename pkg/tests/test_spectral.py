from __future__ import annotations

import math

import numpy as np
import pytest

from principal_portfolios import (
    AssetSpec,
    AssetUniverse,
    build_covariance,
    expected_returns,
    market_aligned_stats,
    minor_average_variance,
    portfolio_stats,
    solve_crv,
    solve_exact,
    solve_perturbative,
)
from principal_portfolios.covariance import CovariancePair

from conftest import random_universe
from oracles import eig2x2, jacobi_eigh


def pair_from(beta_hat, gamma_sq, scale=1.0):
    beta_hat = np.asarray(beta_hat, dtype=float)
    gamma_sq = np.asarray(gamma_sq, dtype=float)
    n = len(beta_hat)
    return CovariancePair(
        sigma=scale * (np.diag(gamma_sq) + np.outer(beta_hat, beta_hat)),
        sigma_tilde=np.diag(gamma_sq) + np.outer(beta_hat, beta_hat),
        beta_hat=beta_hat,
        gamma_sq=gamma_sq,
        b_sq=1.0 / n,
        scale=scale,
    )


# ---------------------------------------------------------------------------
# solve_exact
# ---------------------------------------------------------------------------


def test_uniform_gamma_two_assets():
    inv = 1.0 / math.sqrt(2.0)
    cp = pair_from([inv, inv], [0.1, 0.1])
    dec = solve_exact(cp)
    assert dec.eigenvalues_tilde == pytest.approx([0.1, 1.1], abs=1e-14)
    assert dec.eigenvectors[:, 1] == pytest.approx([inv, inv], abs=1e-14)


def test_two_by_two_against_quadratic_oracle():
    cp = pair_from([0.6, 0.8], [0.01, 0.04])
    assert cp.sigma_tilde == pytest.approx(np.array([[0.37, 0.48], [0.48, 0.68]]))
    dec = solve_exact(cp)
    lo, hi = eig2x2(cp.sigma_tilde)
    assert dec.eigenvalues_tilde == pytest.approx([lo, hi], rel=1e-12)
    # frozen values from the quadratic formula
    assert dec.eigenvalues_tilde == pytest.approx([0.020594, 1.029406], abs=5e-7)


def test_matches_jacobi_oracle_small_random():
    rng = np.random.default_rng(2)
    for _ in range(60):
        n = int(rng.integers(2, 9))
        u = random_universe(rng, n)
        cp = build_covariance(u)
        dec = solve_exact(cp)
        vals, vecs = jacobi_eigh(cp.sigma_tilde)
        assert dec.eigenvalues_tilde == pytest.approx(vals, rel=1e-10, abs=1e-13)
        for mu in range(n):
            p_mine = np.outer(dec.eigenvectors[:, mu], dec.eigenvectors[:, mu])
            p_oracle = np.outer(vecs[:, mu], vecs[:, mu])
            assert np.abs(p_mine - p_oracle).max() < 1e-8


def test_orthonormal_and_residual():
    rng = np.random.default_rng(3)
    for _ in range(20):
        u = random_universe(rng, int(rng.integers(2, 30)))
        cp = build_covariance(u)
        dec = solve_exact(cp)
        n = u.n
        gram = dec.eigenvectors.T @ dec.eigenvectors
        assert np.abs(gram - np.eye(n)).max() < 1e-10
        assert dec.residual <= 1e-10
        assert np.all(np.diff(dec.eigenvalues_tilde) >= 0)


def test_interlacing():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(2, 12))
        u = random_universe(rng, n)
        cp = build_covariance(u)
        dec = solve_exact(cp)
        poles = np.sort(cp.gamma_sq)
        vals = dec.eigenvalues_tilde
        for k in range(n - 1):
            assert poles[k] < vals[k] < poles[k + 1]
        assert poles[-1] < vals[-1] <= poles[-1] + 1.0 + 1e-15


def test_trace_and_weighted_mean_identities():
    rng = np.random.default_rng(5)
    for _ in range(20):
        u = random_universe(rng, int(rng.integers(2, 20)))
        cp = build_covariance(u)
        dec = solve_exact(cp)
        stats = portfolio_stats(cp, dec, expected_returns(u))
        tr = float(np.trace(cp.sigma))
        assert sum(s.variance for s in stats) == pytest.approx(tr, rel=1e-10)
        weighted = sum(
            s.weight**2 * s.portfolio_variance for s in stats if not s.critically_leveraged
        )
        weighted += sum(s.variance for s in stats if s.critically_leveraged)  # W^2 V^2 -> v^2
        assert weighted == pytest.approx(sum(s.variance for s in stats), rel=1e-10)


def test_principal_portfolios_uncorrelated_under_sigma():
    rng = np.random.default_rng(6)
    for _ in range(10):
        u = random_universe(rng, int(rng.integers(2, 16)))
        cp = build_covariance(u)
        dec = solve_exact(cp)
        cross = dec.eigenvectors.T @ cp.sigma @ dec.eigenvectors
        off = cross - np.diag(np.diag(cross))
        assert np.abs(off).max() <= 1e-8 * np.linalg.norm(cp.sigma, 2)


def test_orientation_nonnegative_weights():
    rng = np.random.default_rng(7)
    for _ in range(20):
        u = random_universe(rng, int(rng.integers(2, 10)))
        dec = solve_exact(build_covariance(u))
        weights = dec.eigenvectors.sum(axis=0)
        for mu, w in enumerate(weights):
            if abs(w) > 1e-10:
                assert w > 0
            else:
                col = dec.eigenvectors[:, mu]
                nz = np.flatnonzero(np.abs(col) > 1e-12)
                assert col[nz[0]] > 0


def test_deflation_zero_coupling():
    # beta_hat has an exact zero: that coordinate decouples with its pole.
    bh = np.array([0.8, 0.0, 0.6])
    cp = pair_from(bh, [0.02, 0.05, 0.09])
    dec = solve_exact(cp)
    idx = int(np.argmin(np.abs(dec.eigenvalues_tilde - 0.05)))
    assert dec.eigenvalues_tilde[idx] == pytest.approx(0.05, abs=1e-15)
    assert np.abs(dec.eigenvectors[:, idx]) == pytest.approx([0.0, 1.0, 0.0], abs=1e-14)


def test_deflation_repeated_poles_partial():
    # Two equal poles out of four: one exact eigenvalue at the pole.
    rng = np.random.default_rng(8)
    bh = rng.normal(size=4)
    bh /= np.linalg.norm(bh)
    cp = pair_from(bh, [0.03, 0.07, 0.07, 0.2])
    dec = solve_exact(cp)
    assert np.min(np.abs(dec.eigenvalues_tilde - 0.07)) < 1e-14
    assert dec.residual < 1e-12
    gram = dec.eigenvectors.T @ dec.eigenvectors
    assert np.abs(gram - np.eye(4)).max() < 1e-12


def test_full_crv_degeneracy_matches_closed_form(crv3):
    cp = build_covariance(crv3)
    dec = solve_exact(cp)
    g2 = 0.04 / 0.035
    assert dec.eigenvalues_tilde == pytest.approx([g2, g2, 1 + g2], rel=1e-12)
    assert dec.eigenvalues() == pytest.approx([0.04, 0.04, 0.075], rel=1e-12)
    assert dec.eigenvectors[:, 2] == pytest.approx(cp.beta_hat, abs=1e-12)
    # canonical minor block: first vector carries all the weight
    w = dec.eigenvectors.sum(axis=0)
    assert abs(w[1]) <= 1e-10
    assert w[0] == pytest.approx(math.sqrt(3) * math.sin(math.atan(math.sqrt(1 / 6))), rel=1e-10)


def test_gamma_zero_rank_one():
    bh = np.array([0.6, 0.8])
    cp = pair_from(bh, [0.0, 0.0])
    dec = solve_exact(cp)
    assert dec.eigenvalues_tilde == pytest.approx([0.0, 1.0], abs=1e-14)
    assert dec.eigenvectors[:, 1] == pytest.approx(bh, abs=1e-14)


# ---------------------------------------------------------------------------
# solve_perturbative and first-order statistics
# ---------------------------------------------------------------------------


def test_perturbative_uniform_gamma_is_exact():
    inv = 1.0 / math.sqrt(3.0)
    g = 0.02
    cp = pair_from([inv, inv, inv], [g, g, g])
    pert = solve_perturbative(cp)
    assert pert.eigenvalues_tilde[0] == pytest.approx(1.0 + g, rel=1e-14)


def test_perturbative_gamma_zero_exact():
    bh = np.array([0.48, 0.6, 0.64])
    bh /= np.linalg.norm(bh)
    cp = pair_from(bh, [0.0, 0.0, 0.0])
    pert = solve_perturbative(cp)
    assert pert.eigenvalues_tilde[0] == pytest.approx(1.0, abs=1e-15)
    assert pert.eigenvectors[:, 0] == pytest.approx(bh, abs=1e-15)


def test_perturbative_error_bound_n100():
    rng = np.random.default_rng(11)
    n = 100
    betas = rng.uniform(0.3, 1.7, n)
    market_var = 0.01
    sum_b2 = float(betas @ betas)
    g2 = rng.uniform(0.001, 0.01, n)
    assets = tuple(
        AssetSpec(f"a{i}", 0.0, float(g2[i] * sum_b2 * market_var), float(betas[i])) for i in range(n)
    )
    u = AssetUniverse(assets=assets, market_mean=0.05, market_var=market_var)
    cp = build_covariance(u)
    exact = solve_exact(cp)
    pert = solve_perturbative(cp)
    err = abs(pert.eigenvalues_tilde[0] - exact.eigenvalues_tilde[-1])
    assert err <= 10.0 * float(cp.gamma_sq.max()) ** 2


def test_perturbative_warns_outside_regime():
    cp = pair_from([0.6, 0.8], [0.5, 0.2])
    with pytest.warns(UserWarning):
        solve_perturbative(cp)


def test_market_aligned_stats_gamma_zero():
    betas = np.array([0.5, 1.0, 1.5])
    market_var, market_mean = 0.01, 0.05
    assets = tuple(AssetSpec(f"a{i}", 0.01, 0.0, float(b)) for i, b in enumerate(betas))
    u = AssetUniverse(assets=assets, market_mean=market_mean, market_var=market_var)
    cp = build_covariance(u)
    pert = solve_perturbative(cp)
    mas = market_aligned_stats(cp, pert, market_mean)
    bh = cp.beta_hat
    expected_v2 = float(betas @ betas) * market_var / bh.sum() ** 2
    assert mas.portfolio_variance == pytest.approx(expected_v2, rel=1e-14)
    assert mas.composition == pytest.approx(bh / bh.sum(), rel=1e-14)
    assert mas.composition.sum() == pytest.approx(1.0, rel=1e-14)
    assert mas.return_adjusted_volatility == pytest.approx(math.sqrt(market_var) / market_mean, abs=1e-12)


def test_market_aligned_variance_approaches_crv_closed_form():
    betas = np.array([0.5, 1.0, 1.5])
    market_var = 0.01
    sum_b2 = float(betas @ betas)
    g2 = 1e-3
    res_var = g2 * sum_b2 * market_var
    assets = tuple(AssetSpec(f"a{i}", 0.0, res_var, float(b)) for i, b in enumerate(betas))
    u = AssetUniverse(assets=assets, market_mean=0.05, market_var=market_var)
    cp = build_covariance(u)
    pert = solve_perturbative(cp)
    mas = market_aligned_stats(cp, pert, u.market_mean)
    sol = solve_crv(u, res_var)
    assert mas.portfolio_variance == pytest.approx(sol.major.portfolio_variance, rel=1e-4)


def test_market_aligned_requires_perturbative(crv3):
    cp = build_covariance(crv3)
    dec = solve_exact(cp)
    with pytest.raises(ValueError):
        market_aligned_stats(cp, dec, crv3.market_mean)


def test_minor_average_variance_crv_identity(crv3):
    cp = build_covariance(crv3)
    dec = solve_exact(cp)
    avg = minor_average_variance(cp, dec)
    assert avg.exact == pytest.approx(0.04, rel=1e-12)
    assert avg.estimate == pytest.approx(0.04, rel=1e-12)


def test_minor_average_variance_small_gamma_agreement():
    rng = np.random.default_rng(12)
    u = random_universe(rng, 6, gamma_scale=0.01)
    cp = build_covariance(u)
    dec = solve_exact(cp)
    avg = minor_average_variance(cp, dec)
    rel = abs(avg.exact - avg.estimate) / avg.exact
    assert rel <= 3.0 * float(cp.gamma_sq.max())


def test_minor_average_variance_gamma_zero():
    bh = np.array([0.6, 0.8])
    cp = pair_from(bh, [0.0, 0.0])
    dec = solve_exact(cp)
    avg = minor_average_variance(cp, dec)
    assert avg.exact == pytest.approx(0.0, abs=1e-15)
    assert avg.estimate == 0.0


def test_error_scaling_order():
    # relative first-order error should drop like ~1/N^2 when gamma ~ 1/N
    rng = np.random.default_rng(13)
    sizes = [50, 100, 200, 400]
    errs = []
    for n in sizes:
        rel_for_n = []
        for _ in range(3):
            betas = rng.uniform(0.3, 1.7, n)
            market_var = 0.01
            sum_b2 = float(betas @ betas)
            g2 = rng.uniform(0.0, 1.0 / n, n)
            assets = tuple(
                AssetSpec(f"a{i}", 0.0, float(g2[i] * sum_b2 * market_var), float(betas[i]))
                for i in range(n)
            )
            u = AssetUniverse(assets=assets, market_mean=0.05, market_var=market_var)
            cp = build_covariance(u)
            exact = solve_exact(cp)
            pert = solve_perturbative(cp)
            rel_for_n.append(
                abs(pert.eigenvalues_tilde[0] - exact.eigenvalues_tilde[-1])
                / exact.eigenvalues_tilde[-1]
            )
        errs.append(np.mean(rel_for_n))
    slope = np.polyfit(np.log(sizes), np.log(errs), 1)[0]
    assert slope <= -1.7


# ---------------------------------------------------------------------------
# portfolio_stats
# ---------------------------------------------------------------------------


def test_equal_weight_vector_stats(crv3):
    cp = build_covariance(crv3)
    dec = solve_exact(cp)
    n = crv3.n
    e = np.full(n, 1.0 / math.sqrt(n))
    # splice an equal-weight column in place of the first eigenvector
    hacked = dec.eigenvectors.copy()
    hacked[:, 0] = e
    from dataclasses import replace

    dec2 = replace(dec, eigenvectors=hacked)
    stats = portfolio_stats(cp, dec2, expected_returns(crv3))
    assert stats[0].weight == pytest.approx(math.sqrt(n), rel=1e-14)
    assert stats[0].portfolio_beta == pytest.approx(float(crv3.betas().mean()), rel=1e-12)


def test_crv_distinguished_betas(crv3):
    cp = build_covariance(crv3)
    dec = solve_exact(cp)
    stats = portfolio_stats(cp, dec, expected_returns(crv3))
    betas = crv3.betas()
    beta_bar = float(betas.mean())
    cos_sq = (betas.sum() / math.sqrt(crv3.n * float(betas @ betas))) ** 2
    assert stats[0].portfolio_beta == pytest.approx(0.0, abs=1e-10)
    assert stats[-1].portfolio_beta == pytest.approx(beta_bar / cos_sq, rel=1e-10)
    assert stats[-1].is_market_aligned
    assert not stats[0].is_market_aligned


def test_critically_leveraged_sentinels(crv3):
    cp = build_covariance(crv3)
    dec = solve_exact(cp)
    stats = portfolio_stats(cp, dec, expected_returns(crv3))
    crit = stats[1]
    assert crit.critically_leveraged
    assert math.isinf(crit.portfolio_variance)
    assert crit.expected_return is None
    assert crit.portfolio_beta is None
    # return-adjusted volatility stays finite for a generic return vector
    assert math.isfinite(crit.return_adjusted_volatility)


def test_variance_weight_identity():
    rng = np.random.default_rng(14)
    u = random_universe(rng, 7)
    cp = build_covariance(u)
    dec = solve_exact(cp)
    for s in portfolio_stats(cp, dec, expected_returns(u)):
        if not s.critically_leveraged:
            assert s.portfolio_variance * s.weight**2 == pytest.approx(s.variance, rel=1e-10)

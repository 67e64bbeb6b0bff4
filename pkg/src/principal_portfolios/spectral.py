"""Principal decomposition of the rescaled single-index covariance.

``sigma_tilde = diag(gamma_sq) + beta_hat beta_hat^T`` is a symmetric
diagonal-plus-rank-one matrix, so its eigenvalues are the roots of the
secular equation

    1 = sum_i beta_hat_i^2 / (lambda - gamma_sq_i)

with one root strictly between consecutive distinct diagonal entries
(poles) and the largest in ``(max gamma_sq, max gamma_sq + 1]``.
``solve_exact`` finds every root with a safeguarded Newton iteration
(bisection fallback inside a maintained bracket, which is
unconditionally convergent because the secular function is monotone on
each interval) after deflating zero couplings and repeated poles.
Eigenvector components come from the implicit formula

    e_i proportional to beta_hat_i / (lambda - gamma_sq_i)

evaluated with the distance-to-pole differences carried out of the
root-finder, never recomputed from the eigenvalue, to avoid
catastrophic cancellation next to a pole.

``solve_perturbative`` instead returns the first-order major eigenpair

    v_tilde_N^2 ~= 1 + sum_i gamma_sq_i beta_hat_i^2
    e^N_i       ~= (1 + gamma_sq_i - sum_j gamma_sq_j beta_hat_j^2) beta_hat_i

plus a summary of the N-1 minor portfolios.

All functions are pure; secular roots are mutually independent and the
sequential evaluation order used here is the reference ordering for
bit-identical results.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .covariance import CovariancePair
from .universe import GAMMA_SQ_WARN


class ConvergenceFailure(RuntimeError):
    """A secular root failed to locate within the iteration budget."""


@dataclass(frozen=True)
class SolverTolerances:
    """Numerical thresholds of the exact solver.

    Attributes:
        secular_tol: convergence threshold on the secular residual and
            on the relative Newton step.
        max_iter: iteration budget per root before ConvergenceFailure.
        coupling_tol: |beta_hat_i| below which coordinate i is treated
            as decoupled (its pole is an exact eigenvalue).
        pole_tol: relative spacing below which two poles are merged and
            deflated by rotation.
        weight_tol: |W| below which a portfolio is flagged critically
            leveraged.
        degenerate_tol: relative eigenvalue spacing below which
            eigenvectors are canonicalized as one degenerate block.
    """

    secular_tol: float = 1e-14
    max_iter: int = 200
    coupling_tol: float = 1e-14
    pole_tol: float = 1e-12
    weight_tol: float = 1e-10
    degenerate_tol: float = 1e-12


DEFAULT_TOLERANCES = SolverTolerances()


@dataclass(frozen=True)
class PrincipalPortfolioStats:
    """Derived statistics of one principal portfolio.

    ``weight`` is the sum of eigenvector components (net invested
    fraction). A portfolio with weight numerically zero is critically
    leveraged: shorts exactly offset longs, so variance per unit
    investment is infinite and the per-unit expected return and beta
    are undefined (None). The return-adjusted volatility stays finite
    as long as the raw expected return sum is nonzero.
    """

    weight: float
    variance_tilde: float
    variance: float
    portfolio_variance: float
    expected_return: float | None
    return_adjusted_volatility: float
    portfolio_beta: float | None
    is_market_aligned: bool
    critically_leveraged: bool


@dataclass(frozen=True)
class MinorSummary:
    """Aggregate of the minor portfolios under the perturbative path.

    ``average_variance`` is the first-order weighted average of the
    N-1 minor principal variances in original units,
    ``(N-1)^-1 sum_i (1 - beta_hat_i^2) residual_var_i``.
    """

    count: int
    average_variance: float


@dataclass(frozen=True)
class PrincipalDecomposition:
    """Eigenpairs of sigma_tilde plus bookkeeping.

    Eigenvalues ascend; column ``mu`` of ``eigenvectors`` belongs to
    ``eigenvalues_tilde[mu]`` and the last column is the major,
    market-aligned portfolio. ``scale`` converts dimensionless
    variances to original units. The perturbative method stores only
    the major pair (a single column) together with ``minor_summary``.
    """

    eigenvalues_tilde: np.ndarray
    eigenvectors: np.ndarray
    method: str
    residual: float
    scale: float
    portfolios: tuple[PrincipalPortfolioStats, ...] | None = None
    minor_summary: MinorSummary | None = None

    @property
    def n_assets(self) -> int:
        return self.eigenvectors.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in original rate-squared units."""
        return self.scale * self.eigenvalues_tilde

    def with_portfolios(self, stats: tuple[PrincipalPortfolioStats, ...]) -> "PrincipalDecomposition":
        return replace(self, portfolios=stats)


class MarketAlignedStats(NamedTuple):
    """First-order statistics of the market-aligned portfolio."""

    portfolio_variance: float
    composition: np.ndarray
    return_adjusted_volatility: float


class MinorAverage(NamedTuple):
    """Average minor principal variance: exact and first-order estimate."""

    exact: float
    estimate: float


# ---------------------------------------------------------------------------
# secular equation machinery
# ---------------------------------------------------------------------------


def _secular_root(
    k: int,
    poles: np.ndarray,
    w2: np.ndarray,
    s2: float,
    tol: SolverTolerances,
) -> tuple[float, np.ndarray]:
    """Locate the k-th root of ``1 = sum w2 / (lambda - poles)``.

    Returns the root and the stable difference vector
    ``lambda - poles`` evaluated in origin-shifted coordinates.
    """
    kk = len(poles)
    last = k == kk - 1
    left = poles[k]
    right = poles[k] + s2 if last else poles[k + 1]

    mid = 0.5 * (left + right)
    f_mid = 1.0 - float(np.sum(w2 / (mid - poles)))
    # Root lies in the half interval nearer the origin shift; for the last
    # interval the only pole is on the left.
    shift = left if (last or f_mid > 0.0) else right
    delta = poles - shift
    lo = left - shift
    hi = right - shift

    t = 0.5 * (lo + hi)
    for _ in range(tol.max_iter):
        diff = t - delta
        g = 1.0 - float(np.sum(w2 / diff))
        if abs(g) < tol.secular_tol:
            return shift + t, diff
        if g < 0.0:
            lo = t
        else:
            hi = t
        gp = float(np.sum(w2 / (diff * diff)))
        t_new = t - g / gp
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= tol.secular_tol * (abs(shift) + abs(t_new)):
            t = t_new
            return shift + t, t - delta
        t = t_new
    raise ConvergenceFailure(f"secular root {k} did not converge in {tol.max_iter} iterations")


def _householder(w: np.ndarray) -> tuple[np.ndarray, float]:
    """Orthogonal symmetric H with H @ w = alpha * e1; returns (H, alpha)."""
    m = len(w)
    r = float(np.linalg.norm(w))
    alpha = -math.copysign(r, w[0] if w[0] != 0.0 else 1.0)
    v = w.astype(float).copy()
    v[0] -= alpha
    vv = float(v @ v)
    if vv == 0.0:
        return np.eye(m), alpha
    return np.eye(m) - 2.0 * np.outer(v, v) / vv, alpha


def _orient_columns(vectors: np.ndarray, tol: SolverTolerances) -> np.ndarray:
    """Flip signs so every column has nonnegative weight.

    Columns whose weight is numerically zero are oriented by making
    their first non-negligible component positive, which keeps
    critically leveraged portfolios deterministic.
    """
    out = vectors.copy()
    for mu in range(out.shape[1]):
        col = out[:, mu]
        w = float(col.sum())
        if abs(w) > tol.weight_tol:
            if w < 0.0:
                out[:, mu] = -col
        else:
            nz = np.flatnonzero(np.abs(col) > 1e-12)
            if nz.size and col[nz[0]] < 0.0:
                out[:, mu] = -col
    return out


def _canonicalize_degenerate(
    values: np.ndarray, vectors: np.ndarray, tol: SolverTolerances
) -> np.ndarray:
    """Rotate each degenerate eigenvalue block to the preferred basis.

    Within a block the first vector is the normalized projection of the
    equal-weight direction onto the block span (it maximizes the weight
    W over unit vectors of the block); the rest are completed
    orthonormally and carry exactly zero weight.
    """
    n = vectors.shape[0]
    m_cols = vectors.shape[1]
    u_hat = np.full(n, 1.0 / math.sqrt(n))
    out = vectors.copy()

    start = 0
    while start < m_cols:
        stop = start + 1
        while stop < m_cols and abs(values[stop] - values[stop - 1]) <= tol.degenerate_tol * max(
            abs(values[stop]), abs(values[stop - 1])
        ):
            stop += 1
        m = stop - start
        if m >= 2:
            block = out[:, start:stop]
            proj = block.T @ u_hat
            norm = float(np.linalg.norm(proj))
            if norm > 1e-12:
                rot, _ = _householder(proj)
                # Column 0 of block @ rot.T is the normalized u-projection.
                rotated = block @ rot.T
                if float(rotated[:, 0].sum()) < 0.0:
                    rotated[:, 0] = -rotated[:, 0]
                out[:, start:stop] = rotated
        start = stop
    return out


def solve_exact(cp: CovariancePair, tol: SolverTolerances = DEFAULT_TOLERANCES) -> PrincipalDecomposition:
    """Full eigendecomposition of sigma_tilde via the secular equation.

    Deflation handles the two exact cases first: coordinates with
    negligible coupling decouple with their pole as eigenvalue, and
    groups of (numerically) repeated poles are rotated so all but one
    coordinate of the group decouples. The reduced strictly-interlaced
    problem is then solved root by root.

    Raises:
        ConvergenceFailure: if any root exhausts the iteration budget
            (unreachable for valid universes).
    """
    d = np.asarray(cp.gamma_sq, dtype=float)
    z = np.asarray(cp.beta_hat, dtype=float)
    n = len(d)

    order = np.argsort(d, kind="stable")
    ds = d[order]
    zs = z[order]

    deflated_vals: list[float] = []
    deflated_vecs: list[np.ndarray] = []  # in sorted coordinates

    # Rule 1: zero coupling -> coordinate decouples exactly.
    zero_mask = np.abs(zs) < tol.coupling_tol
    for i in np.flatnonzero(zero_mask):
        vec = np.zeros(n)
        vec[i] = 1.0
        deflated_vals.append(float(ds[i]))
        deflated_vecs.append(vec)

    # Rule 2: group active coordinates with equal poles; rotate each group
    # so a single coordinate carries all of its coupling.
    active = np.flatnonzero(~zero_mask)
    groups: list[list[int]] = []
    for i in active:
        if groups and abs(ds[i] - ds[groups[-1][-1]]) <= tol.pole_tol * max(abs(ds[i]), abs(ds[groups[-1][-1]])):
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])

    unit_poles: list[float] = []
    unit_coupling: list[float] = []
    unit_support: list[tuple[np.ndarray, np.ndarray]] = []  # (coords, column of H carrying coupling)
    for g in groups:
        coords = np.array(g, dtype=int)
        pole = float(ds[coords].mean())
        if len(g) == 1:
            unit_poles.append(pole)
            unit_coupling.append(float(zs[coords[0]]))
            unit_support.append((coords, np.array([1.0])))
        else:
            h, alpha = _householder(zs[coords])
            # Rotated coordinates 1..m-1 decouple: columns of H are exact
            # eigenvectors with this pole as eigenvalue.
            for j in range(1, len(g)):
                vec = np.zeros(n)
                vec[coords] = h[:, j]
                deflated_vals.append(pole)
                deflated_vecs.append(vec)
            unit_poles.append(pole)
            unit_coupling.append(alpha)
            unit_support.append((coords, h[:, 0].copy()))

    poles = np.array(unit_poles)
    w = np.array(unit_coupling)
    w2 = w * w
    s2 = float(w2.sum())
    kk = len(poles)

    root_vals: list[float] = []
    root_vecs: list[np.ndarray] = []
    if kk == 1:
        lam = float(poles[0] + s2)
        vec = np.zeros(n)
        coords, carrier = unit_support[0]
        vec[coords] = carrier * math.copysign(1.0, w[0])
        root_vals.append(lam)
        root_vecs.append(vec)
    elif kk > 1:
        for k in range(kk):
            lam, diff = _secular_root(k, poles, w2, s2, tol)
            comp = w / diff
            vec = np.zeros(n)
            for (coords, carrier), c in zip(unit_support, comp):
                vec[coords] = carrier * c
            vec /= np.linalg.norm(vec)
            root_vals.append(lam)
            root_vecs.append(vec)

    values = np.array(deflated_vals + root_vals)
    vectors = np.column_stack(deflated_vecs + root_vecs) if n else np.empty((0, 0))

    asc = np.argsort(values, kind="stable")
    values = values[asc]
    vectors = vectors[:, asc]

    # Back to original asset order.
    unsorted = np.empty_like(vectors)
    unsorted[order, :] = vectors
    vectors = unsorted

    vectors = _canonicalize_degenerate(values, vectors, tol)
    vectors = _orient_columns(vectors, tol)

    residual = _spectral_residual(cp, values, vectors)
    return PrincipalDecomposition(
        eigenvalues_tilde=values,
        eigenvectors=vectors,
        method="exact",
        residual=residual,
        scale=cp.scale,
    )


def _spectral_residual(cp: CovariancePair, values: np.ndarray, vectors: np.ndarray) -> float:
    """max_mu || sigma_tilde e_mu - value_mu e_mu ||_2, using the DPR1 structure."""
    t = cp.gamma_sq[:, None] * vectors + np.outer(cp.beta_hat, cp.beta_hat @ vectors) - vectors * values
    return float(np.sqrt((t * t).sum(axis=0)).max())


# ---------------------------------------------------------------------------
# perturbative path
# ---------------------------------------------------------------------------


def solve_perturbative(
    cp: CovariancePair, tol: SolverTolerances = DEFAULT_TOLERANCES
) -> PrincipalDecomposition:
    """First-order major eigenpair plus a summary of the minors.

    Intended for max(gamma_sq) below ``GAMMA_SQ_WARN``; outside that
    regime a warning is emitted but the computation proceeds.
    """
    g = cp.gamma_sq
    bh = cp.beta_hat
    g_max = float(g.max())
    if g_max >= GAMMA_SQ_WARN:
        _warnings.warn(
            f"max rescaled residual variance {g_max:.3g} >= {GAMMA_SQ_WARN}; "
            "first-order results are unreliable",
            stacklevel=2,
        )

    eps = float(np.sum(g * bh * bh))
    val = 1.0 + eps
    vec = (1.0 + g - eps) * bh
    vec = vec / np.linalg.norm(vec)
    vectors = vec[:, None]
    vectors = _orient_columns(vectors, tol)
    values = np.array([val])

    res_vars = cp.gamma_sq * cp.scale
    n = cp.n
    minor = MinorSummary(
        count=n - 1,
        average_variance=float(np.sum((1.0 - bh * bh) * res_vars)) / (n - 1),
    )
    residual = _spectral_residual(cp, values, vectors)
    return PrincipalDecomposition(
        eigenvalues_tilde=values,
        eigenvectors=vectors,
        method="perturbative",
        residual=residual,
        scale=cp.scale,
        minor_summary=minor,
    )


def market_aligned_stats(
    cp: CovariancePair, decomp: PrincipalDecomposition, market_mean: float
) -> MarketAlignedStats:
    """First-order portfolio variance, composition and return-adjusted
    volatility of the market-aligned portfolio, in original units.

    The variance expansion is

        V_N^2 ~= [1 + 3 sum_i g_i bh_i^2 - 2 S^-1 sum_i g_i bh_i]
                 * (beta . beta) * market_var / S^2,   S = sum_i bh_i,

    where g = gamma_sq and bh = beta_hat. The coefficient 2 on the
    cross term was validated numerically against ``solve_exact``: with
    it the formula reproduces the constant-residual-variance closed
    form exactly and the residual error scales as the square of
    max(gamma_sq); with coefficient 1 a first-order error remains.

    The composition is proportional to
    ``(1 + g_i - S^-1 sum_j g_j bh_j) bh_i`` and normalized to sum 1.

    The return-adjusted volatility uses the first-order correction

        V_check_N ~= (1 - m * sum_i sqrt(g_i) bh_i) * m,
        m = sqrt(market_var) / market_mean,

    which collapses to m exactly when every residual variance
    vanishes. The correction treats each asset's rescaled residual
    scale sqrt(g_i) as a proxy for its rescaled mean residual return;
    see the package README for the numerically observed accuracy.
    """
    if decomp.method != "perturbative":
        raise ValueError("market_aligned_stats requires a perturbative decomposition")
    if market_mean == 0.0:
        raise ValueError("return-adjusted volatility undefined for zero market mean")

    g = cp.gamma_sq
    bh = cp.beta_hat if float(cp.beta_hat.sum()) >= 0.0 else -cp.beta_hat
    s = float(bh.sum())
    if s == 0.0:
        raise ValueError("market-aligned weight is zero; statistics undefined")

    beta_dot_beta = cp.n * cp.b_sq
    market_var = cp.scale / beta_dot_beta

    eps = float(np.sum(g * bh * bh))
    cross = float(np.sum(g * bh)) / s
    v_sq = (1.0 + 3.0 * eps - 2.0 * cross) * beta_dot_beta * market_var / (s * s)

    comp = (1.0 + g - cross) * bh / s
    comp = comp / comp.sum()

    m = math.sqrt(market_var) / market_mean
    vcheck = (1.0 - m * float(np.sum(np.sqrt(g) * bh))) * m

    return MarketAlignedStats(
        portfolio_variance=v_sq,
        composition=comp,
        return_adjusted_volatility=vcheck,
    )


def minor_average_variance(cp: CovariancePair, decomp: PrincipalDecomposition) -> MinorAverage:
    """Average of the N-1 minor principal variances, original units.

    Returns both the exact average ``(N-1)^-1 sum_{mu<N} v_mu^2`` from
    the decomposition and the first-order estimate
    ``(N-1)^-1 sum_i (1 - beta_hat_i^2) residual_var_i``; the two agree
    to first order in max(gamma_sq), and exactly when the residual
    variances are uniform.
    """
    if decomp.method != "exact":
        raise ValueError("minor_average_variance requires an exact decomposition")
    n = decomp.n_assets
    minors = decomp.eigenvalues()[:-1]
    exact = float(minors.sum()) / (n - 1)
    res_vars = cp.gamma_sq * cp.scale
    estimate = float(np.sum((1.0 - cp.beta_hat**2) * res_vars)) / (n - 1)
    return MinorAverage(exact=exact, estimate=estimate)


def portfolio_stats(
    cp: CovariancePair,
    decomp: PrincipalDecomposition,
    returns: np.ndarray,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
) -> tuple[PrincipalPortfolioStats, ...]:
    """Per-portfolio statistics in original units, in eigenvalue order.

    A weight within ``tol.weight_tol`` of zero marks the portfolio
    critically leveraged: its per-unit variance is set to the infinity
    sentinel explicitly (never produced by overflow) and per-unit
    return and beta are None. The return-adjusted volatility
    ``v_mu / |sum_i e_i r_i|`` remains finite whenever the raw return
    sum is nonzero.
    """
    returns = np.asarray(returns, dtype=float)
    if returns.shape[0] != decomp.n_assets:
        raise ValueError("returns length does not match decomposition")
    betas = cp.betas()
    n_cols = decomp.eigenvectors.shape[1]

    out: list[PrincipalPortfolioStats] = []
    for mu in range(n_cols):
        col = decomp.eigenvectors[:, mu]
        weight = float(col.sum())
        vt = float(decomp.eigenvalues_tilde[mu])
        v2 = decomp.scale * vt
        ret_sum = float(col @ returns)
        crit = abs(weight) <= tol.weight_tol
        if crit:
            pv = math.inf
            exp_ret = None
            beta = None
        else:
            pv = v2 / (weight * weight)
            exp_ret = ret_sum / weight
            beta = float(col @ betas) / weight
        vcheck = math.inf if ret_sum == 0.0 else math.sqrt(v2) / abs(ret_sum)
        out.append(
            PrincipalPortfolioStats(
                weight=weight,
                variance_tilde=vt,
                variance=v2,
                portfolio_variance=pv,
                expected_return=exp_ret,
                return_adjusted_volatility=vcheck,
                portfolio_beta=beta,
                is_market_aligned=(mu == n_cols - 1),
                critically_leveraged=crit,
            )
        )
    return tuple(out)

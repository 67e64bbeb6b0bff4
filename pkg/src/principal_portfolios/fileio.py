"""CSV/JSON ingestion and deterministic report emission.

Universe files are UTF-8 CSV with the exact header
``id,alpha_mean,residual_var,beta`` plus a JSON config
``{"market_mean": r, "market_var": v, "riskless_rate": r0?}``.
Row order is semantic and preserved. Reports are JSON with every real
serialized to 17 significant digits, which round-trips binary64
exactly; emission is fully deterministic (fixed key order, fixed
layout), so identical inputs produce byte-identical reports.
"""

from __future__ import annotations

import csv
import json
import math
from typing import Any

import numpy as np

from . import crv as crv_mod
from . import frontier as frontier_mod
from . import mcsim as mcsim_mod
from . import spectral as spectral_mod
from .universe import AssetSpec, AssetUniverse, ValidationReport, validate

TOOL_NAME = "principal-portfolios"

UNIVERSE_COLUMNS = ("id", "alpha_mean", "residual_var", "beta")
CONFIG_KEYS = ("market_mean", "market_var", "riskless_rate")


class ParseError(Exception):
    """Malformed input file; message carries row/column location."""


class ValidationError(Exception):
    """Universe violates structural invariants."""

    def __init__(self, report: ValidationReport):
        self.report = report
        msgs = "; ".join(f"{i.code}: {i.message}" for i in report.violations)
        super().__init__(f"invalid universe: {msgs}")


def _parse_real(text: str, where: str) -> float:
    """Strict decimal parse: overflow and underflow are errors, not clamps."""
    s = text.strip()
    if not s:
        raise ParseError(f"{where}: empty numeric field")
    try:
        value = float(s)
    except ValueError:
        raise ParseError(f"{where}: not a number: {s!r}") from None
    if math.isnan(value) or math.isinf(value):
        raise ParseError(f"{where}: non-finite value {s!r}")
    if value == 0.0:
        mantissa = s.lower().split("e")[0]
        if any(c in "123456789" for c in mantissa):
            raise ParseError(f"{where}: value {s!r} underflows double precision")
    return value


def load_universe(csv_path: str, config_path: str, validated: bool = True) -> AssetUniverse:
    """Read a universe from its CSV + JSON config pair.

    Validation runs automatically; violations raise ValidationError
    unless ``validated`` is False (the ``validate`` subcommand reports
    violations instead of dying on them).

    Raises:
        ParseError: structural file problems, with row/column location.
        ValidationError: the parsed universe violates invariants.
        OSError: unreadable files.
    """
    with open(csv_path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{csv_path}: empty file")
    header = tuple(c.strip() for c in rows[0])
    if header != UNIVERSE_COLUMNS:
        raise ParseError(
            f"{csv_path}: header must be exactly {','.join(UNIVERSE_COLUMNS)}, got {','.join(header)}"
        )
    assets: list[AssetSpec] = []
    for idx, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(UNIVERSE_COLUMNS):
            raise ParseError(f"{csv_path}: row {idx}: expected {len(UNIVERSE_COLUMNS)} fields, got {len(row)}")
        ident = row[0].strip()
        if not ident:
            raise ParseError(f"{csv_path}: row {idx}: empty id")
        assets.append(
            AssetSpec(
                id=ident,
                alpha_mean=_parse_real(row[1], f"{csv_path}: row {idx}, column alpha_mean"),
                residual_var=_parse_real(row[2], f"{csv_path}: row {idx}, column residual_var"),
                beta=_parse_real(row[3], f"{csv_path}: row {idx}, column beta"),
            )
        )

    with open(config_path, encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{config_path}: invalid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise ParseError(f"{config_path}: config must be a JSON object")
    unknown = sorted(set(config) - set(CONFIG_KEYS))
    if unknown:
        raise ParseError(f"{config_path}: unknown keys {unknown}")
    for key in ("market_mean", "market_var"):
        if key not in config:
            raise ParseError(f"{config_path}: missing required key {key!r}")

    def _config_real(key: str) -> float:
        value = config[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{config_path}: {key} must be a number")
        if not math.isfinite(float(value)):
            raise ParseError(f"{config_path}: {key} must be finite")
        return float(value)

    riskless = None
    if config.get("riskless_rate") is not None:
        riskless = _config_real("riskless_rate")
    universe = AssetUniverse(
        assets=tuple(assets),
        market_mean=_config_real("market_mean"),
        market_var=_config_real("market_var"),
        riskless_rate=riskless,
    )
    if validated:
        report = validate(universe)
        if not report.is_valid:
            raise ValidationError(report)
    return universe


# ---------------------------------------------------------------------------
# deterministic JSON emission (17 significant digits)
# ---------------------------------------------------------------------------


def _emit(obj: Any, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        f = float(obj)
        if not math.isfinite(f):
            raise ValueError("non-finite float reached the report emitter")
        out.append(format(f, ".17g"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, (key, value) in enumerate(obj.items()):
            out.append(f"{pad}  {json.dumps(str(key))}: ")
            _emit(value, indent + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for k, value in enumerate(seq):
            out.append(pad + "  ")
            _emit(value, indent + 1, out)
            out.append(",\n" if k < len(seq) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(report: dict) -> str:
    """Serialize a report dict deterministically; floats keep 17 digits."""
    out: list[str] = []
    _emit(report, 0, out)
    return "".join(out) + "\n"


def loads_report(text: str) -> dict:
    return json.loads(text)


# ---------------------------------------------------------------------------
# report sections
# ---------------------------------------------------------------------------


def _real_or_marker(value: float | None) -> Any:
    if value is None:
        return None
    if math.isinf(value):
        return "infinite"
    return value


def universe_digest(u: AssetUniverse) -> dict:
    return {
        "n_assets": u.n,
        "asset_ids": list(u.ids()),
        "market_mean": u.market_mean,
        "market_var": u.market_var,
        "riskless_rate": u.riskless_rate,
    }


def validation_section(report: ValidationReport) -> dict:
    return {
        "valid": report.is_valid,
        "violations": [{"code": i.code, "message": i.message} for i in report.violations],
        "warnings": [{"code": i.code, "message": i.message} for i in report.warnings],
    }


def _portfolio_entry(
    ids: tuple[str, ...], vector: np.ndarray, stats: spectral_mod.PrincipalPortfolioStats, index: int
) -> dict:
    return {
        "index": index,
        "composition": {ident: float(c) for ident, c in zip(ids, vector)},
        "weight": stats.weight,
        "variance_tilde": stats.variance_tilde,
        "variance": stats.variance,
        "portfolio_variance": _real_or_marker(stats.portfolio_variance),
        "expected_return": _real_or_marker(stats.expected_return),
        "return_adjusted_volatility": _real_or_marker(stats.return_adjusted_volatility),
        "portfolio_beta": _real_or_marker(stats.portfolio_beta),
        "is_market_aligned": stats.is_market_aligned,
        "critically_leveraged": stats.critically_leveraged,
    }


def decomposition_section(
    u: AssetUniverse,
    decomp: spectral_mod.PrincipalDecomposition,
    stats: tuple[spectral_mod.PrincipalPortfolioStats, ...],
) -> dict:
    ids = u.ids()
    section = {
        "method": decomp.method,
        "scale": decomp.scale,
        "residual": decomp.residual,
        "eigenvalues_tilde": [float(v) for v in decomp.eigenvalues_tilde],
        "eigenvalues": [float(v) for v in decomp.eigenvalues()],
        "portfolios": [
            _portfolio_entry(ids, decomp.eigenvectors[:, mu], s, mu + 1)
            for mu, s in enumerate(stats)
        ],
    }
    if decomp.minor_summary is not None:
        section["minor_summary"] = {
            "count": decomp.minor_summary.count,
            "average_variance": decomp.minor_summary.average_variance,
        }
    return section


def crv_section(u: AssetUniverse, sol: crv_mod.CrvSolution, limits: crv_mod.CrvLimits) -> dict:
    ids = u.ids()

    def portfolio(p: crv_mod.CrvPortfolio) -> dict:
        return {
            "eigenvalue_tilde": p.eigenvalue_tilde,
            "eigenvalue": p.eigenvalue,
            "composition": {ident: float(c) for ident, c in zip(ids, p.vector)},
            "weight": p.weight,
            "expected_return": p.expected_return,
            "portfolio_variance": _real_or_marker(p.portfolio_variance),
            "return_adjusted_volatility": _real_or_marker(p.return_adjusted_volatility),
            "portfolio_beta": p.portfolio_beta,
        }

    return {
        "residual_var": sol.residual_var,
        "gamma_sq": sol.gamma_sq,
        "theta": sol.theta,
        "tan_theta": _real_or_marker(sol.tan_theta),
        "r_av": sol.r_av,
        "degenerate_dim": sol.degenerate_dim,
        "flags": list(sol.flags),
        "major": portfolio(sol.major),
        "min_vol": portfolio(sol.min_vol),
        "limits": {
            "major_volatility_limit": limits.major_limit,
            "min_vol_sqrtn_constant": limits.min_vol_constant,
        },
    }


def frontier_section(r0: float, curve: frontier_mod.FrontierCurve) -> dict:
    return {
        "riskless_rate": r0,
        "allocations": [
            {
                "target_return": a.target_return,
                "x0": a.x0,
                "x": [float(v) for v in a.x],
                "v_eff": a.v_eff,
                "z": [float(v) for v in a.z],
            }
            for a in curve.allocations
        ],
        "failures": [{"target_return": t, "error": msg} for t, msg in curve.failures],
    }


def simulation_section(cfg: mcsim_mod.SimConfig, report: mcsim_mod.SimReport) -> dict:
    return {
        "paths": cfg.paths,
        "seed": cfg.seed,
        "horizon": cfg.horizon,
        "n_samples": report.n_samples,
        "max_offdiag_corr": report.max_offdiag_corr,
        "corr_threshold": report.corr_threshold,
        "decorrelation_pass": report.decorrelation_pass,
        "variance_errors": [float(v) for v in report.variance_errors],
        "sample_cov_assets": [[float(v) for v in row] for row in report.sample_cov_assets],
        "sample_cov_principal": [[float(v) for v in row] for row in report.sample_cov_principal],
    }


def provenance_section(
    version: str,
    tolerances: spectral_mod.SolverTolerances,
    seed: int | None = None,
) -> dict:
    return {
        "tool": TOOL_NAME,
        "version": version,
        "seed": seed,
        "tolerances": {
            "secular_tol": tolerances.secular_tol,
            "max_iter": tolerances.max_iter,
            "coupling_tol": tolerances.coupling_tol,
            "pole_tol": tolerances.pole_tol,
            "weight_tol": tolerances.weight_tol,
            "degenerate_tol": tolerances.degenerate_tol,
        },
    }

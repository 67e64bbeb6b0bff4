"""Command-line surface.

Subcommands: ``decompose``, ``crv``, ``frontier``, ``simulate``,
``validate``, ``compare``. Machine-readable JSON goes to the output
path (stdout by default); human diagnostics go to stderr. Exit codes:
0 success, 1 validation failure, 2 parse/IO failure, 3 numerical
failure. Identical inputs and flags produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

import numpy as np

from . import __version__
from .covariance import AllBetasZero, build_covariance
from .crv import UniformBetas, crv_limits, solve_crv
from .fileio import (
    ParseError,
    ValidationError,
    crv_section,
    decomposition_section,
    dumps_report,
    frontier_section,
    load_universe,
    provenance_section,
    simulation_section,
    universe_digest,
    validation_section,
)
from .frontier import Degenerate, Unreachable, allocate, frontier_curve
from .mcsim import DimensionMismatch, SimConfig, simulate, verify_decorrelation
from .spectral import (
    ConvergenceFailure,
    SolverTolerances,
    minor_average_variance,
    portfolio_stats,
    solve_exact,
    solve_perturbative,
)
from .universe import expected_returns, validate

SEED_ENV = "PP_SEED"


class MissingRisklessRate(Exception):
    """Frontier construction requires a riskless rate in the config."""


def _parent_parser() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--input", "-i", required=True, help="universe CSV path")
    parent.add_argument("--config", "-c", required=True, help="market config JSON path")
    parent.add_argument("--output", "-o", default="-", help="report path, '-' for stdout")
    tol = parent.add_argument_group("tolerance overrides")
    defaults = SolverTolerances()
    tol.add_argument("--tol-secular", type=float, default=defaults.secular_tol)
    tol.add_argument("--tol-coupling", type=float, default=defaults.coupling_tol)
    tol.add_argument("--tol-pole", type=float, default=defaults.pole_tol)
    tol.add_argument("--tol-weight", type=float, default=defaults.weight_tol)
    tol.add_argument("--tol-degenerate", type=float, default=defaults.degenerate_tol)
    return parent


def _tolerances(args: argparse.Namespace) -> SolverTolerances:
    return SolverTolerances(
        secular_tol=args.tol_secular,
        coupling_tol=args.tol_coupling,
        pole_tol=args.tol_pole,
        weight_tol=args.tol_weight,
        degenerate_tol=args.tol_degenerate,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppfolio",
        description="Principal portfolio analysis of single-index asset universes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _parent_parser()

    p = sub.add_parser("decompose", parents=[parent], help="principal decomposition")
    p.add_argument("--method", choices=("exact", "perturbative"), default="exact")

    p = sub.add_parser("crv", parents=[parent], help="constant-residual-variance closed form")
    p.add_argument("--residual-var", type=float, required=True, help="uniform residual variance")

    p = sub.add_parser("frontier", parents=[parent], help="efficient frontier allocations")
    p.add_argument(
        "--target-return",
        type=float,
        action="append",
        default=None,
        help="target expected return (repeatable)",
    )
    p.add_argument("--sweep", default=None, help="target sweep lo:hi:steps")

    p = sub.add_parser("simulate", parents=[parent], help="Monte Carlo decorrelation check")
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--horizon", type=int, default=1)

    sub.add_parser("validate", parents=[parent], help="validate a universe file")

    p = sub.add_parser("compare", parents=[parent], help="exact vs perturbative vs CRV table")
    p.add_argument(
        "--residual-var",
        type=float,
        default=None,
        help="uniform residual variance for the CRV column (default: mean of the file's)",
    )
    return parser


def _resolve_seed(flag_value: int | None) -> int:
    # Explicit flag wins; PP_SEED overrides only the default.
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV)
    if env is not None:
        return int(env)
    return 0


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _major_row(name: str, exact: float, pert: float | None, crv_val: float | None) -> dict:
    def rel(v: float | None) -> float | None:
        if v is None or exact == 0.0:
            return None
        return abs(v - exact) / abs(exact)

    return {
        "quantity": name,
        "exact": exact,
        "perturbative": pert,
        "crv": crv_val,
        "perturbative_vs_exact_rel": rel(pert),
        "crv_vs_exact_rel": rel(crv_val),
    }


def _cmd_decompose(args: argparse.Namespace) -> tuple[dict, int]:
    u = load_universe(args.input, args.config)
    tol = _tolerances(args)
    cp = build_covariance(u)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        decomp = solve_exact(cp, tol) if args.method == "exact" else solve_perturbative(cp, tol)
    stats = portfolio_stats(cp, decomp, expected_returns(u), tol)
    report = {
        "universe_digest": universe_digest(u),
        "validation": validation_section(validate(u)),
        "decomposition": decomposition_section(u, decomp, stats),
        "provenance": provenance_section(__version__, tol),
    }
    if decomp.method == "exact":
        avg = minor_average_variance(cp, decomp)
        report["decomposition"]["minor_average_variance"] = {
            "exact": avg.exact,
            "estimate": avg.estimate,
        }
    return report, 0


def _cmd_crv(args: argparse.Namespace) -> tuple[dict, int]:
    u = load_universe(args.input, args.config)
    tol = _tolerances(args)
    sol = solve_crv(u, args.residual_var)
    limits = crv_limits(u, args.residual_var)
    report = {
        "universe_digest": universe_digest(u),
        "validation": validation_section(validate(u)),
        "crv": crv_section(u, sol, limits),
        "provenance": provenance_section(__version__, tol),
    }
    return report, 0


def _parse_sweep(spec: str) -> np.ndarray:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ParseError(f"--sweep must be lo:hi:steps, got {spec!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ParseError(f"--sweep must be lo:hi:steps, got {spec!r}") from None
    if steps < 1:
        raise ParseError("--sweep steps must be >= 1")
    return np.linspace(lo, hi, steps)


def _cmd_frontier(args: argparse.Namespace) -> tuple[dict, int]:
    u = load_universe(args.input, args.config)
    if u.riskless_rate is None:
        raise MissingRisklessRate("config has no riskless_rate; the frontier rule requires one")
    targets: list[float] = list(args.target_return or [])
    if args.sweep:
        targets.extend(float(t) for t in _parse_sweep(args.sweep))
    if not targets:
        raise ParseError("no targets: pass --target-return and/or --sweep")
    tol = _tolerances(args)
    cp = build_covariance(u)
    decomp = solve_exact(cp, tol)
    stats = portfolio_stats(cp, decomp, expected_returns(u), tol)
    curve = frontier_curve(stats, u.riskless_rate, targets)
    report = {
        "universe_digest": universe_digest(u),
        "validation": validation_section(validate(u)),
        "decomposition": decomposition_section(u, decomp, stats),
        "frontier": frontier_section(u.riskless_rate, curve),
        "provenance": provenance_section(__version__, tol),
    }
    return report, 0


def _cmd_simulate(args: argparse.Namespace) -> tuple[dict, int]:
    u = load_universe(args.input, args.config)
    tol = _tolerances(args)
    seed = _resolve_seed(args.seed)
    cfg = SimConfig(paths=args.paths, seed=seed, horizon=args.horizon)
    cp = build_covariance(u)
    decomp = solve_exact(cp, tol)
    stats = portfolio_stats(cp, decomp, expected_returns(u), tol)
    sim = verify_decorrelation(simulate(u, cfg), decomp)
    report = {
        "universe_digest": universe_digest(u),
        "validation": validation_section(validate(u)),
        "decomposition": decomposition_section(u, decomp, stats),
        "simulation": simulation_section(cfg, sim),
        "provenance": provenance_section(__version__, tol, seed=seed),
    }
    return report, 0


def _cmd_validate(args: argparse.Namespace) -> tuple[dict, int]:
    u = load_universe(args.input, args.config, validated=False)
    rep = validate(u)
    report = {
        "universe_digest": universe_digest(u),
        "validation": validation_section(rep),
        "provenance": provenance_section(__version__, _tolerances(args)),
    }
    return report, 0 if rep.is_valid else 1


def _cmd_compare(args: argparse.Namespace) -> tuple[dict, int]:
    u = load_universe(args.input, args.config)
    tol = _tolerances(args)
    cp = build_covariance(u)
    returns = expected_returns(u)

    exact = solve_exact(cp, tol)
    exact_stats = portfolio_stats(cp, exact, returns, tol)[-1]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pert = solve_perturbative(cp, tol)
    pert_stats = portfolio_stats(cp, pert, returns, tol)[-1]

    res_var = args.residual_var if args.residual_var is not None else float(u.residual_vars().mean())
    try:
        sol = solve_crv(u, res_var)
        crv_vals = {
            "eigenvalue_tilde": sol.major.eigenvalue_tilde,
            "eigenvalue": sol.major.eigenvalue,
            "weight": sol.major.weight,
            "portfolio_variance": sol.major.portfolio_variance,
            "expected_return": sol.major.expected_return,
            "return_adjusted_volatility": sol.major.return_adjusted_volatility,
        }
    except (UniformBetas, ValueError):
        crv_vals = {}

    rows = [
        _major_row(
            "major_eigenvalue_tilde",
            float(exact.eigenvalues_tilde[-1]),
            float(pert.eigenvalues_tilde[-1]),
            crv_vals.get("eigenvalue_tilde"),
        ),
        _major_row(
            "major_eigenvalue",
            float(exact.eigenvalues()[-1]),
            float(pert.eigenvalues()[-1]),
            crv_vals.get("eigenvalue"),
        ),
        _major_row("major_weight", exact_stats.weight, pert_stats.weight, crv_vals.get("weight")),
        _major_row(
            "major_portfolio_variance",
            exact_stats.portfolio_variance,
            pert_stats.portfolio_variance,
            crv_vals.get("portfolio_variance"),
        ),
        _major_row(
            "major_expected_return",
            exact_stats.expected_return,
            pert_stats.expected_return,
            crv_vals.get("expected_return"),
        ),
        _major_row(
            "major_return_adjusted_volatility",
            exact_stats.return_adjusted_volatility,
            pert_stats.return_adjusted_volatility,
            crv_vals.get("return_adjusted_volatility"),
        ),
    ]
    report = {
        "universe_digest": universe_digest(u),
        "validation": validation_section(validate(u)),
        "comparison": {"crv_residual_var": res_var, "rows": rows},
        "provenance": provenance_section(__version__, tol),
    }
    return report, 0


_HANDLERS = {
    "decompose": _cmd_decompose,
    "crv": _cmd_crv,
    "frontier": _cmd_frontier,
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
    "compare": _cmd_compare,
}


def run_cli(argv: list[str] | None = None) -> int:
    """Run one CLI invocation; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report, code = _HANDLERS[args.command](args)
        _write(args.output, dumps_report(report))
        return code
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, MissingRisklessRate) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        AllBetasZero,
        UniformBetas,
        ConvergenceFailure,
        Unreachable,
        Degenerate,
        DimensionMismatch,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()

from __future__ import annotations

import math

import numpy as np
import pytest

from principal_portfolios import (
    ParseError,
    ValidationError,
    build_covariance,
    dumps_report,
    expected_returns,
    load_universe,
    loads_report,
    portfolio_stats,
    solve_exact,
    validate,
)
from principal_portfolios.fileio import decomposition_section, universe_digest, validation_section

GOOD_CSV = "id,alpha_mean,residual_var,beta\ns1,0.03,0.04,0.5\ns2,0.005,0.04,1.0\ns3,0.001,0.04,1.5\n"
GOOD_CONFIG = '{"market_mean": 0.05, "market_var": 0.01, "riskless_rate": 0.02}\n'


def write_pair(tmp_path, csv_text=GOOD_CSV, config_text=GOOD_CONFIG):
    csv_path = tmp_path / "u.csv"
    cfg_path = tmp_path / "m.json"
    csv_path.write_text(csv_text, encoding="utf-8")
    cfg_path.write_text(config_text, encoding="utf-8")
    return str(csv_path), str(cfg_path)


def test_load_well_formed(tmp_path):
    u = load_universe(*write_pair(tmp_path))
    assert u.n == 3
    assert u.ids() == ("s1", "s2", "s3")  # row order preserved
    assert u.riskless_rate == 0.02
    assert u.assets[2].beta == 1.5


def test_missing_field_names_row(tmp_path):
    bad = "id,alpha_mean,residual_var,beta\ns1,0.03,0.04,0.5\ns2,0.005,0.04\n"
    with pytest.raises(ParseError, match="row 3"):
        load_universe(*write_pair(tmp_path, csv_text=bad))


def test_wrong_header_rejected(tmp_path):
    bad = "id,alpha_mean,residual_var,beta,extra\ns1,0.03,0.04,0.5,1\n"
    with pytest.raises(ParseError, match="header"):
        load_universe(*write_pair(tmp_path, csv_text=bad))


def test_bad_number_locates_column(tmp_path):
    bad = "id,alpha_mean,residual_var,beta\ns1,0.03,zzz,0.5\ns2,0.005,0.04,1.0\n"
    with pytest.raises(ParseError, match="residual_var"):
        load_universe(*write_pair(tmp_path, csv_text=bad))


def test_overflow_and_underflow_are_errors(tmp_path):
    over = "id,alpha_mean,residual_var,beta\ns1,1e999,0.04,0.5\ns2,0.005,0.04,1.0\n"
    with pytest.raises(ParseError, match="non-finite"):
        load_universe(*write_pair(tmp_path, csv_text=over))
    under = "id,alpha_mean,residual_var,beta\ns1,1e-999,0.04,0.5\ns2,0.005,0.04,1.0\n"
    with pytest.raises(ParseError, match="underflow"):
        load_universe(*write_pair(tmp_path, csv_text=under))


def test_market_var_zero_is_validation_error(tmp_path):
    cfg = '{"market_mean": 0.05, "market_var": 0.0}\n'
    with pytest.raises(ValidationError, match="market_var"):
        load_universe(*write_pair(tmp_path, config_text=cfg))


def test_unknown_config_keys_rejected(tmp_path):
    cfg = '{"market_mean": 0.05, "market_var": 0.01, "bogus": 1}\n'
    with pytest.raises(ParseError, match="bogus"):
        load_universe(*write_pair(tmp_path, config_text=cfg))


def test_missing_config_key_rejected(tmp_path):
    cfg = '{"market_mean": 0.05}\n'
    with pytest.raises(ParseError, match="market_var"):
        load_universe(*write_pair(tmp_path, config_text=cfg))


def test_riskless_rate_null_is_absent(tmp_path):
    cfg = '{"market_mean": 0.05, "market_var": 0.01, "riskless_rate": null}\n'
    u = load_universe(*write_pair(tmp_path, config_text=cfg))
    assert u.riskless_rate is None


def test_unvalidated_load_for_validate_subcommand(tmp_path):
    bad = "id,alpha_mean,residual_var,beta\ndup,0.0,0.01,0.5\ndup,0.0,0.01,1.0\n"
    u = load_universe(*write_pair(tmp_path, csv_text=bad), validated=False)
    assert not validate(u).is_valid
    with pytest.raises(ValidationError):
        load_universe(*write_pair(tmp_path, csv_text=bad))


def test_report_round_trip_and_17_digits(tmp_path):
    u = load_universe(*write_pair(tmp_path))
    cp = build_covariance(u)
    dec = solve_exact(cp)
    stats = portfolio_stats(cp, dec, expected_returns(u))
    report = {
        "universe_digest": universe_digest(u),
        "validation": validation_section(validate(u)),
        "decomposition": decomposition_section(u, dec, stats),
    }
    text = dumps_report(report)
    parsed = loads_report(text)
    assert loads_report(dumps_report(parsed)) == parsed  # emit/parse identity
    # 17 significant digits round-trip binary64 exactly
    assert parsed["decomposition"]["scale"] == cp.scale
    assert parsed["universe_digest"]["market_mean"] == 0.05
    vals = parsed["decomposition"]["eigenvalues"]
    assert vals == [float(v) for v in dec.eigenvalues()]
    # emission is deterministic
    assert dumps_report(report) == text
    assert "0.050000000000000003" in text


def test_infinite_markers_in_report(tmp_path):
    u = load_universe(*write_pair(tmp_path))
    cp = build_covariance(u)
    dec = solve_exact(cp)
    stats = portfolio_stats(cp, dec, expected_returns(u))
    section = decomposition_section(u, dec, stats)
    crit = section["portfolios"][1]
    assert crit["critically_leveraged"] is True
    assert crit["portfolio_variance"] == "infinite"
    assert crit["expected_return"] is None
    text = dumps_report({"decomposition": section})
    assert '"infinite"' in text
    assert "Infinity" not in text and "NaN" not in text


def test_raw_non_finite_floats_refused():
    with pytest.raises(ValueError):
        dumps_report({"x": math.inf})
    with pytest.raises(ValueError):
        dumps_report({"x": math.nan})


def test_numpy_scalars_serialize():
    text = dumps_report({"a": np.float64(0.1), "b": np.int64(3), "c": np.arange(2)})
    parsed = loads_report(text)
    assert parsed == {"a": 0.1, "b": 3, "c": [0, 1]}

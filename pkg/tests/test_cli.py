import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from georecords.cli import TABLE_COLUMNS, fmt, main, parse_int_list

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture()
def runner():
    return CliRunner()


def test_parse_int_list():
    assert parse_int_list("1,3..5, 9") == [1, 3, 4, 5, 9]
    assert parse_int_list("4,4,2") == [2, 4]
    with pytest.raises(ValueError):
        parse_int_list("5..2")


def test_number_formatting():
    from mpmath import mpf
    from fractions import Fraction

    assert fmt(mpf(1) / 3) == "0.333333333333333"
    assert fmt(Fraction(1, 6)) == "1/6"
    assert fmt(7) == "7"
    assert fmt(None) == ""
    assert fmt(mpf("12345.678901234567")) == "12345.6789012346"


def test_table_golden(runner):
    res = runner.invoke(main, ["table", "--q", "1/2", "--r", "1,2", "--n", "1,16,64"])
    assert res.exit_code == 0, res.output
    assert res.output == (GOLDEN / "table_q_half.csv").read_text()
    assert res.output.splitlines()[0] == ",".join(TABLE_COLUMNS)


def test_perm_golden(runner):
    res = runner.invoke(main, ["perm", "--n", "1..4", "--r", "1,2"])
    assert res.exit_code == 0
    assert res.output == (GOLDEN / "perm_small.csv").read_text()


def test_table_json_schema(runner):
    res = runner.invoke(main, ["table", "--q", "0.5", "--r", "1", "--n", "1,8", "--format", "json"])
    assert res.exit_code == 0
    rows = json.loads(res.output)
    assert [list(r) for r in rows] == [TABLE_COLUMNS, TABLE_COLUMNS]
    assert rows[0]["leftcount_exact"] in ("0", "0.0")


def test_decimal_and_ratio_q_agree(runner):
    a = runner.invoke(main, ["table", "--q", "0.5", "--n", "32"]).output
    b = runner.invoke(main, ["table", "--q", "1/2", "--n", "32"]).output
    assert a == b


def test_verify_exit_codes(runner):
    ok = runner.invoke(main, ["verify", "--k-max", "6"])
    assert ok.exit_code == 0, ok.output
    assert "tau_form_1mq_denominators,refuted" in ok.output
    bad = runner.invoke(main, ["verify", "--k-max", "6", "--inject-fault"])
    assert bad.exit_code == 1
    assert "tau_extraction,fail" in bad.output and "(2,0,1/2)" in bad.output
    usage = runner.invoke(main, ["verify", "--q", "5/3"])
    assert usage.exit_code == 2


@pytest.mark.parametrize("args", [
    ["table", "--n", "0"],
    ["table", "--n", "20000"],
    ["table", "--q", "abc"],
    ["simulate", "--samples", "10"],
    ["oracle", "--n", "30"],
    ["nonsense"],
])
def test_usage_errors_exit_2(runner, args):
    assert runner.invoke(main, args).exit_code == 2


def test_oracle_passes(runner):
    res = runner.invoke(main, ["oracle", "--n", "1..4", "--q", "1/2,2/3"])
    assert res.exit_code == 0
    assert res.output.count("true") == 24


def test_constants_prints_bounds(runner):
    res = runner.invoke(main, ["constants", "--q", "1/2", "--r", "2"])
    assert res.exit_code == 0
    lines = {line.split(",")[0]: line.split(",") for line in res.output.splitlines()[1:]}
    assert lines["sigma"][4] != ""
    assert lines["lambda"][3] == "1/4" and lines["mu"][3] == "3/4"


def test_simulate_seed_is_deterministic(runner, tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--seed", "7", "--samples", "2000", "--n", "50", "--r", "1,2"]
    assert runner.invoke(main, args + ["--out", str(out1)]).exit_code == 0
    assert runner.invoke(main, args + ["--out", str(out2), "--workers", "2"]).exit_code == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_perm_reports_discrepancy(runner):
    res = runner.invoke(main, ["perm", "--n", "3", "--r", "1,2"])
    rows = [line.split(",") for line in res.output.splitlines()]
    head = rows[0]
    r1, r2 = (dict(zip(head, row)) for row in rows[1:])
    assert r1["position_mean"] == "2" and r1["discrepancy"] == "0"
    assert r2["leftcount_mean"] == "1/6" and r2["predicted_leftcount"] == "0"

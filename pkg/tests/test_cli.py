import io
import json
import subprocess
import sys

import pytest

from gsdeflator.cli import dumps, run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def report(*argv):
    code, out, _ = call(*argv, "--output", "json")
    return code, json.loads(out)


def test_solve_kkt(fixture_path):
    code, rep = report("numeraire", "solve", "--scenario", fixture_path("binomial.json"), "--set", "kkt")
    assert code == 0 and rep["fhat"] == [1.5, 0.75] and rep["fhat_exact"] == ["3/2", "3/4"]


def test_solve_without_interior_exits_2(fixture_path):
    code, _, err = call("numeraire", "solve", "--scenario", fixture_path("binomial.json"), "--set", "empty_interior")
    assert code == 2 and "nonexistent" in err


def test_afk(fixture_path):
    path = fixture_path("binomial.json")
    code, rep = report("numeraire", "afk", "--scenario", path, "--set", "unbounded")
    assert code == 2 and rep["witness"] == [1, 0] and rep["per_atom_sup"][0] == "inf"
    code, rep = report("numeraire", "afk", "--scenario", path, "--set", "kkt")
    assert code == 0 and rep["bounded"]


def test_gensup_check(fixture_path):
    path = fixture_path("resurrection.json")
    code, rep = report("gensup", "check", "--scenario", path, "--process", "z")
    assert code == 2 and rep["resurrection_events"] == [{"s": 0, "t": 1, "atom": "u"}]
    assert call("gensup", "check", "--scenario", path, "--process", "flat")[0] == 0


def test_market_commands_on_cash(fixture_path):
    path = fixture_path("cash_only.json")
    code, rep = report("market", "deflator", "--scenario", path)
    assert code == 0 and rep["Y"] == [[1, 1]] * 3
    for cmd in ("validate", "numeraire", "na1"):
        assert call("market", cmd, "--scenario", path)[0] == 0


def test_market_binomial(fixture_path):
    path = fixture_path("binomial.json")
    code, rep = report("market", "na1", "--scenario", path)
    assert code == 0 and rep["bound"] == [2, 1]
    code, rep = report("market", "numeraire", "--scenario", path)
    assert code == 0 and rep["Xhat"][1] == [1.5, 0.75]


def test_limited_information_exits_2(fixture_path):
    code, rep = report("market", "deflator", "--scenario", fixture_path("limited_info.json"))
    assert code == 2 and rep["n_violations"] > 0 and not rep["passed"]


def test_invalid_market(fixture_path):
    path = fixture_path("bad_start.json")
    assert call("market", "validate", "--scenario", path)[0] == 2
    assert call("market", "deflator", "--scenario", path)[0] == 3


def test_too_large_exits_4(fixture_path):
    code, _, err = call("market", "deflator", "--scenario", fixture_path("wide.json"), "--max-strategies", "100")
    assert code == 4 and "too large" in err


@pytest.mark.parametrize("name", ["bad_probs.json", "broken.json", "missing.json"])
def test_bad_scenarios_exit_3(fixture_path, name):
    assert call("market", "validate", "--scenario", fixture_path(name))[0] == 3


def test_usage_errors_exit_3(fixture_path):
    assert call()[0] == 3
    assert call("market", "deflator")[0] == 3
    assert call("market", "deflator", "--scenario", fixture_path("binomial.json"), "--tol", "-1")[0] == 3
    assert call("numeraire", "solve", "--scenario", fixture_path("binomial.json"), "--set", "nope")[0] == 3


def test_demo_counterexample_table():
    code, out, _ = call("demo", "counterexample", "--n-max", "5", "--output", "table")
    assert code == 0 and "4/5" in out and "23/30" in out


def test_demo_nested():
    code, rep = report("demo", "nested", "--n-max", "10")
    assert code == 0 and rep["status"] == "hypothesis-violated" and rep["achieved_distance_exact"] == "1/6"


@pytest.mark.parametrize("name", ["sandwich", "komlos", "discrete-limit"])
def test_lemma_demos(name):
    code, rep = report("demo", name, "--seed", "7")
    assert code == 0 and rep["passed"] and rep["seed"] == 7


def test_reports_are_deterministic(fixture_path, tmp_path):
    argv = ["market", "deflator", "--scenario", fixture_path("limited_info.json")]
    first = call(*argv, "--report", str(tmp_path / "a.json"))
    second = call(*argv, "--report", str(tmp_path / "b.json"))
    assert first == second
    a, b = (tmp_path / "a.json").read_bytes(), (tmp_path / "b.json").read_bytes()
    assert a == b and json.loads(a)["command"] == "market deflator"
    assert call("demo", "sandwich", "--seed", "3")[1] == call("demo", "sandwich", "--seed", "3")[1]


def test_unwritable_report(fixture_path, tmp_path):
    code, _, err = call("market", "validate", "--scenario", fixture_path("cash_only.json"),
                        "--report", str(tmp_path / "no" / "dir.json"))
    assert code == 3 and "cannot write" in err


def test_dumps_formats_numbers():
    from fractions import Fraction
    text = dumps({"b": Fraction(1, 3), "a": 2, "c": float("inf"), "d": True})
    assert json.loads(text) == {"a": 2, "b": 0.333333333333, "c": "inf", "d": True}
    assert text.index('"a"') < text.index('"b"')


def test_module_entry_point(fixture_path):
    proc = subprocess.run([sys.executable, "-m", "gsdeflator", "market", "validate", "--scenario",
                           fixture_path("cash_only.json")], capture_output=True, text=True)
    assert proc.returncode == 0 and "valid" in proc.stdout

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from olps import registry
from olps.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from olps.engine import Strategy
from olps.market import synthetic_iid, write_price_relatives
from olps.meta import AggregatingAlgorithm, BAHCombination, FollowLeadingHistory
from olps.params import ParamError
from olps.simplex import ConvergenceError, uniform


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# registry ---------------------------------------------------------------------

TABLE1 = {"Benchmarks", "Follow-the-Winner", "Follow-the-Loser",
          "Pattern-Matching Approaches", "Meta-Learning Algorithms"}


def test_catalog_categories():
    cat = {e["name"]: e for e in registry.catalog()}
    assert cat["up"]["category"] == "Follow-the-Winner"
    assert cat["corn"]["category"] == "Pattern-Matching Approaches"
    assert cat["pamr"]["category"] == "Follow-the-Loser"
    assert cat["bcrp"]["hindsight"] is True
    assert {e["category"] for e in cat.values()} == TABLE1
    for name in ("bh", "bk", "bnn", "corn", "bs", "bm", "bgv", "meta:aa", "meta:bah", "meta:ogu",
                 "meta:onu", "meta:flh"):
        assert name in cat


def test_create_and_params():
    s = registry.create("pamr", {"eps": "0.3", "variant": "pamr1", "C": "2"})
    assert s.params["eps"] == 0.3 and s.params["variant"] == "pamr1"
    with pytest.raises(registry.UnknownStrategy):
        registry.create("nosuch")
    with pytest.raises(ParamError):
        registry.create("pamr", {"nope": "1"})
    with pytest.raises(ParamError):
        registry.create("pamr", {"eps": "-1"})
    with pytest.raises(ParamError):
        registry.create("pamr", experts=["ucrp"])


def test_expert_syntax():
    assert registry.split_experts("pamr[eps=0.3;variant=pamr1],olmar, ucrp") == [
        "pamr[eps=0.3;variant=pamr1]", "olmar", "ucrp"]
    assert registry.parse_expert("pamr[eps=0.3;variant=pamr1]") == ("pamr", {"eps": "0.3", "variant": "pamr1"})
    assert registry.parse_expert("olmar") == ("olmar", {})
    with pytest.raises(ParamError):
        registry.parse_expert("pamr[eps=0.3")


def test_create_meta():
    s = registry.create("meta:aa", experts=["pamr[eps=0.3]", "olmar"], meta_params={"eta": "2"})
    assert isinstance(s, AggregatingAlgorithm) and s.eta == 2.0
    assert [e.name for e in s.experts] == ["pamr", "olmar"] and s.experts[0].eps == 0.3
    assert isinstance(registry.create("meta:bah"), BAHCombination)
    flh = registry.create("meta:flh", experts=["pamr"])
    assert isinstance(flh, FollowLeadingHistory) and flh.base_name == "pamr"
    with pytest.raises(ParamError):
        registry.create("meta:flh", experts=["pamr", "olmar"])
    with pytest.raises(ParamError):
        registry.create("meta:aa", experts=["meta:bah"])


# list -------------------------------------------------------------------------

def test_list_json(capsys):
    code, out, _ = _run(capsys, "list", "--output", "json")
    assert code == EXIT_OK
    names = [e["name"] for e in json.loads(out)]
    assert names == registry.names()


def test_list_table(capsys):
    code, out, _ = _run(capsys, "list")
    assert code == EXIT_OK and "corn" in out and "Pattern-Matching" in out


# run --------------------------------------------------------------------------

def test_cg86_ucrp(capsys):
    code, out, _ = _run(capsys, "run", "--synthetic", "cg86", "--n", "100", "--strategy", "ucrp")
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["final_wealth"] == pytest.approx((9 / 8) ** 50, rel=1e-12)
    assert abs(rep["regret"]) <= 1e-9
    assert rep["schema"] == 1


def test_data_file(capsys, tmp_path):
    seq = synthetic_iid(3, 30, seed=2)
    path = tmp_path / "m.csv"
    write_price_relatives(seq, path)
    code, out, _ = _run(capsys, "run", "--data", str(path), "--strategy", "olmar", "--params", "w=3,eps=5")
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["n"] == 30 and rep["m"] == 3 and rep["params"]["w"] == 3


def test_prices_format(capsys, tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("a,b\n10,20\n10,40\n10,20\n")
    code, out, _ = _run(capsys, "run", "--data", str(path), "--format", "prices", "--strategy", "ucrp")
    assert code == EXIT_OK
    assert json.loads(out)["final_wealth"] == pytest.approx(9 / 8)


def test_json_is_byte_identical(capsys):
    argv = ["run", "--synthetic", "iid", "--m", "4", "--n", "60", "--seed", "7", "--strategy", "corn"]
    _, a, _ = _run(capsys, *argv)
    _, b, _ = _run(capsys, *argv)
    assert a == b


def test_meta_bah_reports_experts(capsys):
    code, out, _ = _run(capsys, "run", "--synthetic", "iid", "--n", "50", "--strategy", "meta:bah",
                        "--experts", "pamr,olmar")
    assert code == EXIT_OK
    rep = json.loads(out)
    experts = rep["extras"]["experts"]
    wealths = [e["wealth"] for e in experts]
    assert [e["name"] for e in experts] == ["pamr", "olmar"]
    assert rep["final_wealth"] == pytest.approx(np.mean(wealths), rel=1e-12)


def test_costs_reduce_wealth(capsys):
    base = ["run", "--synthetic", "iid", "--n", "50", "--strategy", "pamr"]
    _, a, _ = _run(capsys, *base)
    _, b, _ = _run(capsys, *base, "--tc-buy", "0.01", "--tc-sell", "0.01")
    assert json.loads(b)["final_wealth"] < json.loads(a)["final_wealth"]
    assert json.loads(b)["cost_fraction"] > 0


def test_all_strategies(capsys):
    code, out, _ = _run(capsys, "run", "--synthetic", "iid", "--n", "40", "--all", "--output", "csv")
    assert code == EXIT_OK
    rows = list(csv.DictReader(out.splitlines()))
    assert [r["strategy"] for r in rows] == registry.names()
    assert all(float(r["final_wealth"]) > 0 for r in rows)


def test_table_output(capsys):
    code, out, _ = _run(capsys, "run", "--synthetic", "cg86", "--n", "10", "--output", "table")
    assert code == EXIT_OK and out.splitlines()[2].startswith("ucrp")


def test_wealth_csv(capsys, tmp_path):
    path = tmp_path / "w.csv"
    code, _, _ = _run(capsys, "run", "--synthetic", "cg86", "--n", "6", "--wealth-csv", str(path))
    assert code == EXIT_OK
    rows = list(csv.reader(path.open()))
    assert len(rows) == 8 and float(rows[-1][1]) == pytest.approx((9 / 8) ** 3)


def test_generate_roundtrip(capsys, tmp_path):
    path = tmp_path / "g.csv"
    assert _run(capsys, "generate", "--synthetic", "iid", "--m", "2", "--n", "12", "--seed", "3",
                "--out", str(path))[0] == EXIT_OK
    _, a, _ = _run(capsys, "run", "--data", str(path), "--strategy", "eg")
    _, b, _ = _run(capsys, "run", "--synthetic", "iid", "--m", "2", "--n", "12", "--seed", "3",
                   "--strategy", "eg")
    assert json.loads(a)["final_wealth"] == pytest.approx(json.loads(b)["final_wealth"], rel=1e-12)


# exit codes ------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    ["run", "--synthetic", "cg86", "--strategy", "nosuch"],
    ["run", "--synthetic", "cg86", "--strategy", "pamr", "--params", "eps=-1"],
    ["run", "--synthetic", "cg86", "--strategy", "pamr", "--params", "bogus=1"],
    ["run", "--synthetic", "cg86", "--strategy", "pamr", "--params", "eps"],
    ["run", "--synthetic", "cg86", "--tc-buy", "1.5"],
    ["run", "--synthetic", "cg86", "--strategy", "meta:aa", "--experts", "nosuch"],
])
def test_usage_errors(capsys, argv):
    code, out, err = _run(capsys, *argv)
    assert code == EXIT_USAGE and out == "" and err.startswith("olps:")


def test_data_errors(capsys, tmp_path):
    assert _run(capsys, "run", "--data", str(tmp_path / "missing.csv"))[0] == EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0,1.1\n1.0,oops\n")
    code, _, err = _run(capsys, "run", "--data", str(bad))
    assert code == EXIT_DATA and "data error" in err
    assert _run(capsys, "run")[0] == EXIT_DATA


class _Diverges(Strategy):
    name = "test:diverges"
    PARAMS = ()

    def decide(self, history):
        if len(history) > 2:
            raise ConvergenceError("stuck", uniform(self.m))
        return uniform(self.m)


class _Infeasible(Strategy):
    name = "test:infeasible"
    PARAMS = ()

    def decide(self, history):
        return np.full(self.m, 0.9)


@pytest.mark.parametrize("cls", [_Diverges, _Infeasible])
def test_numeric_failure(capsys, monkeypatch, cls):
    monkeypatch.setitem(registry.STRATEGIES, cls.name, cls)
    code, _, err = _run(capsys, "run", "--synthetic", "cg86", "--n", "10", "--strategy", cls.name)
    assert code == EXIT_NUMERIC and "numeric failure" in err


# entry points ------------------------------------------------------------------

def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "olps", "run", "--synthetic", "cg86", "--n", "4"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["final_wealth"] == pytest.approx((9 / 8) ** 2)
    proc = subprocess.run([sys.executable, "-m", "olps", "run", "--strategy", "nosuch", "--synthetic", "cg86"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE

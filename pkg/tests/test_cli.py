import json
import subprocess
import sys

import pytest

from rbp_elm import cli, verify
from rbp_elm.verify import CheckResult


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def usage(capsys, *argv):
    with pytest.raises(SystemExit) as info:
        cli.main(list(argv))
    return info.value.code, capsys.readouterr().err


class TestTrain:
    def test_smoke(self, capsys):
        code, out, _ = run(capsys, "train", "--synth", "200x10x3", "--nodes", "40", "--strategy", "rank", "--seed", "7")
        assert code == 0
        for key in ("rank", "split", "accuracy", "fallback", "solve s"):
            assert key in out

    def test_json(self, capsys):
        code, out, _ = run(capsys, "train", "--synth", "100x5x2", "--nodes", "20", "--strategy", "df:5", "--json")
        d = json.loads(out)
        assert code == 0 and d["schema"] == 1 and d["split"] == [5, 15]
        assert 0.0 <= d["accuracy"] <= 1.0

    @pytest.mark.parametrize("strategy", ["df:0", "df:40", "df:99", "bogus", "rank:-1"])
    def test_bad_strategy_is_usage(self, capsys, strategy):
        code, err = usage(capsys, "train", "--synth", "200x10x3", "--nodes", "40", "--strategy", strategy)
        assert code == 2 and "usage" in err

    @pytest.mark.parametrize("argv", [
        ["train", "--nodes", "10"],
        ["train", "--synth", "10x2", "--nodes", "5"],
        ["train", "--synth", "10x2x2", "--nodes", "0"],
        ["train", "--synth", "10x2x2", "--data", "x.csv", "--nodes", "5"],
        ["train", "--synth", "10x2x2", "--nodes", "5", "--seed", "-1"],
        [],
    ])
    def test_usage_errors(self, capsys, argv):
        assert usage(capsys, *argv)[0] == 2

    def test_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv(cli.SEED_ENV, "3")
        _, out, _ = run(capsys, "train", "--synth", "50x3x2", "--nodes", "5", "--json")
        assert json.loads(out)["seed"] == 3
        monkeypatch.setenv(cli.SEED_ENV, "abc")
        assert usage(capsys, "train", "--synth", "50x3x2", "--nodes", "5")[0] == 2

    def test_wide_block_is_runtime_error(self, capsys):
        code, _, err = run(capsys, "train", "--synth", "20x3x2", "--nodes", "40", "--strategy", "rank")
        assert code == 1 and "direct" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "train", "--data", str(tmp_path / "none.csv"), "--nodes", "5")
        assert code == 1 and "error" in err

    def test_bad_file(self, capsys, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2,a\n3,oops,b\n")
        code, _, err = run(capsys, "train", "--data", str(p), "--nodes", "2")
        assert code == 1 and "row 2" in err

    def test_csv_and_libsvm(self, capsys, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("".join(f"{i % 7},{(i * 3) % 5},{'ab'[i % 2]}\n" for i in range(30)))
        assert run(capsys, "train", "--data", str(p), "--nodes", "4", "--strategy", "direct")[0] == 0
        q = tmp_path / "d.txt"
        q.write_text("".join(f"{i % 2} 1:{i % 7} 2:{(i * 3) % 5}\n" for i in range(30)))
        assert run(capsys, "train", "--data", str(q), "--format", "libsvm", "--nodes", "4")[0] == 0


class TestBench:
    def test_trials_one(self, capsys, tmp_path):
        out_json, out_csv, plots = tmp_path / "r.json", tmp_path / "r.csv", tmp_path / "plots"
        code, out, _ = run(
            capsys, "bench", "--synth", "120x6x2", "--nodes", "10,20", "--strategies", "df-sweep,rank",
            "--trials", "1", "--out", str(out_json), "--csv", str(out_csv), "--plot-dir", str(plots),
            "--machine", "ci",
        )
        assert code == 0 and "best split" in out
        report = json.loads(out_json.read_text())
        assert report["schema"] == 1 and report["machine"] == "ci"
        for s in report["stats"]:
            assert s["min_seconds"] == s["mean_seconds"] == s["max_seconds"]
        assert len(out_csv.read_text().splitlines()) == len(report["stats"]) + 1
        assert any(plots.iterdir())

    def test_json_stdout(self, capsys):
        code, out, _ = run(capsys, "bench", "--synth", "80x4x2", "--nodes", "10",
                           "--strategies", "df-sweep:3,7,rank", "--trials", "1", "--json", "--no-warmup")
        d = json.loads(out)
        assert code == 0 and d["schema"] == 1
        assert [s["strategy"] for s in d["stats"]] == ["df:3", "df:7", "rank"]

    @pytest.mark.parametrize("strategies", ["df-sweep:0,5", "df:10", "nope", ""])
    def test_bad_strategies(self, capsys, strategies):
        assert usage(capsys, "bench", "--synth", "80x4x2", "--nodes", "10", "--strategies", strategies)[0] == 2

    def test_bad_nodes(self, capsys):
        assert usage(capsys, "bench", "--synth", "80x4x2", "--nodes", "10,x")[0] == 2

    def test_nodes_above_samples(self, capsys):
        code, _, err = run(capsys, "bench", "--synth", "30x4x2", "--nodes", "50", "--trials", "1")
        assert code == 1 and "exceed" in err

    def test_split_strategies(self):
        assert cli.split_strategies("df-sweep:150,750,rank") == ["df-sweep:150,750", "rank"]
        assert cli.split_strategies("rank;df-sweep:1,2") == ["rank", "df-sweep:1,2"]
        assert cli.split_strategies("direct,df:3") == ["direct", "df:3"]


class TestVerify:
    def test_passes(self, capsys):
        code, out, _ = run(capsys, "verify", "--seed", "42", "--cases", "15")
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 6 and all(l.startswith("PASS") for l in lines)

    def test_deterministic(self, capsys):
        a = run(capsys, "verify", "--seed", "42", "--cases", "10", "--json")[1]
        b = run(capsys, "verify", "--seed", "42", "--cases", "10", "--json")[1]
        strip = lambda s: [(c["name"], c["passed"], c["max_error"]) for c in json.loads(s)["checks"]]
        assert strip(a) == strip(b)

    def test_injected_fault_exits_one(self, capsys, monkeypatch):
        real = verify.elm.solve_output_weights

        def broken(H, Y, strategy, *args):
            beta, diag = real(H, Y, strategy, *args)
            return beta * (1.0 + 1e-3), diag

        monkeypatch.setattr(verify.elm, "solve_output_weights", broken)
        code, out, _ = run(capsys, "verify", "--seed", "5", "--cases", "5")
        assert code == 1
        assert "FAIL oracle equivalence" in out and "failing seed 5" in out

    def test_failed_check_line(self):
        r = CheckResult("x", 3, 0.5, 1e-6, failing_seed=9, detail="df:2")
        assert not r.passed and r.line().startswith("FAIL x") and "failing seed 9 [df:2]" in r.line()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rbp_elm", "verify", "--cases", "3"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr

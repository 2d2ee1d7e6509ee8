import csv
import io
import json
import math
import subprocess
import sys

import pytest

from selfnorm.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture
def iid_chain_file(tmp_path):
    path = tmp_path / "iid.json"
    path.write_text(json.dumps({"states": 2, "P": [0.3, 0.7, 0.3, 0.7], "f": [1, -1], "name": "iid"}))
    return path


class TestTable:
    def test_default_shape(self, capsys, tmp_path):
        code, out, _ = run(capsys, "table", "--json", tmp_path / "t.json")
        assert code == 0
        r = rows(out)
        assert r[0] == ["m", "k", "t", "count", "total", "empirical", "survival", "ratio", "degenerate"]
        assert len(r) == 53
        assert sorted({int(x[0]) for x in r[1:]}) == [1, 2, 3, 4]
        assert len({x[2] for x in r[1:]}) == 13
        assert out.endswith("\n") and "\r" not in out
        assert len(json.loads((tmp_path / "t.json").read_text())["cells"]) == 52

    def test_roundtrip_and_threads(self, capsys, tmp_path):
        path = tmp_path / "t.csv"
        assert run(capsys, "table", "--threads", 2, "--out", path)[0] == 0
        code, out, _ = run(capsys, "table", "--in", path)
        assert code == 0 and out == path.read_text()
        assert run(capsys, "table", "--threads", 1)[1] == out

    def test_precision_failure_is_runtime_error(self, capsys):
        code, _, err = run(capsys, "table", "--pi-digits", 2, "--grid-size", 5)
        assert code == 2 and "computation failed" in err


class TestMc:
    ARGS = ("mc", "--n", 2000, "--alpha", 0.3, "--replicates", 2000, "--seed", 7)

    def test_reproducible(self, capsys, tmp_path):
        outs = [run(capsys, *self.ARGS, "--threads", w)[1] for w in (1, 2, 8)]
        assert outs[0] == outs[1] == outs[2]
        path = tmp_path / "mc.csv"
        run(capsys, *self.ARGS, "--out", path)
        assert path.read_text() == outs[0]
        code, again, _ = run(capsys, "mc", "--in", path)
        assert code == 0 and again == outs[0]

    def test_header_and_values(self, capsys):
        r = rows(run(capsys, *self.ARGS)[1])
        assert [x[2] for x in r[1:]] == ["0.5", "1.0", "1.5"]
        for rec in r[1:]:
            assert 0.7 < float(rec[7]) < 1.3

    def test_markov_chain(self, capsys, iid_chain_file):
        code, out, _ = run(capsys, "mc", "--chain", iid_chain_file, "--n", 500, "--m", 2,
                           "--replicates", 1000, "--seed", 1)
        assert code == 0 and len(rows(out)) == 4

    def test_source_spec_file(self, capsys, tmp_path):
        spec = tmp_path / "src.json"
        spec.write_text(json.dumps({"kind": "ma", "order": 2}))
        code, out, _ = run(capsys, "mc", "--source", spec, "--n", 500, "--m", 5, "--replicates", 1000)
        assert code == 0 and len(rows(out)) == 4

    def test_alpha_and_m_exclusive(self, capsys):
        assert run(capsys, "mc", "--n", 100, "--alpha", 0.5, "--m", 2)[0] == 1


class TestMdp:
    def test_small_sweep(self, capsys, tmp_path):
        code, out, _ = run(capsys, "mdp", "--n-list", "1000,10000", "--replicates", 2000, "--exact-blocks",
                           "--json", tmp_path / "m.json")
        assert code == 0
        r = rows(out)
        assert r[0][:4] == ["n", "m", "k", "a_n"] and len(r) == 3
        assert float(r[1][-2]) == -0.5
        doc = json.loads((tmp_path / "m.json").read_text())
        assert doc["trend"]["direction"] in ("toward", "away", "flat")

    def test_bad_interval(self, capsys):
        assert run(capsys, "mdp", "--B", "[1,2", "--replicates", 1000)[0] == 1


class TestPsi:
    def test_iid_zeros(self, capsys, iid_chain_file):
        code, out, _ = run(capsys, "psi", "--chain", iid_chain_file, "--max-gap", 5)
        r = rows(out)
        assert code == 0 and r[0] == ["gap", "psi"]
        assert [int(x[0]) for x in r[1:]] == [1, 2, 3, 4, 5]
        assert all(abs(float(x[1])) <= 1e-15 for x in r[1:])

    def test_two_state(self, capsys, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"states": 2, "P": [0.9, 0.1, 0.2, 0.8]}))
        r = rows(run(capsys, "psi", "--chain", path, "--max-gap", 2)[1])
        assert float(r[1][1]) == pytest.approx(1.4) and float(r[2][1]) == pytest.approx(0.98)

    def test_reducible_chain(self, capsys, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"states": 2, "P": [1, 0, 0.5, 0.5]}))
        code, _, err = run(capsys, "psi", "--chain", path)
        assert code == 1 and "reducible" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "psi", "--chain", tmp_path / "none.json")[0] == 1


class TestCf:
    def test_rational(self, capsys):
        r = rows(run(capsys, "cf", "--x", "3141/10000")[1])
        assert [int(x[2]) for x in r[1:]] == [3, 5, 2, 3, 1, 15, 4]

    def test_grid_point(self, capsys):
        r = rows(run(capsys, "cf", "--index", 1, "--terms", 30)[1])
        assert len(r) == 31 and r[1][2] == "3183"
        assert float(r[1][3]) == pytest.approx(14.709984424285786, rel=1e-14)

    @pytest.mark.parametrize("argv", [("cf",), ("cf", "--index", 0), ("cf", "--x", "3/2"), ("cf", "--x", "pi")])
    def test_invalid(self, capsys, argv):
        assert run(capsys, *argv)[0] == 1


class TestCi:
    def test_plain_file(self, capsys, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("2\n0\n4\n0\n")
        code, out, _ = run(capsys, "ci", "--in", path, "--m", 1, "--delta", 0.05)
        r = rows(out)
        assert code == 0 and r[0] == ["n", "m", "k", "center", "lo", "hi", "level"]
        n, m, k, center, lo, hi, level = r[1]
        assert (n, m, k) == ("4", "1", "2")
        half = 1.959963984540054 * math.sqrt(2) / 2
        assert float(center) == 3.0
        assert float(lo) == pytest.approx(3 - half) and float(hi) == pytest.approx(3 + half)
        assert float(level) == 0.95

    def test_csv_column_roundtrip(self, capsys, tmp_path):
        src = tmp_path / "series.csv"
        src.write_text("i,value\n" + "".join(f"{i},{(-1) ** i * (i % 5)}\n" for i in range(200)))
        code, out, _ = run(capsys, "ci", "--in", src, "--column", "value", "--alpha", 0.5)
        assert code == 0
        saved = tmp_path / "ci.csv"
        saved.write_text(out)
        # the emitted CSV is itself readable by --in
        code, _, _ = run(capsys, "ci", "--in", saved, "--column", "center", "--m", 1)
        assert code == 1  # a single value cannot form two blocks

    @pytest.mark.parametrize("delta", ["0", "1", "1.5"])
    def test_bad_delta(self, capsys, tmp_path, delta):
        path = tmp_path / "d.txt"
        path.write_text("1\n2\n3\n4\n")
        assert run(capsys, "ci", "--in", path, "--m", 1, "--delta", delta)[0] == 1

    def test_non_numeric(self, capsys, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("1\nx\n")
        assert run(capsys, "ci", "--in", path, "--m", 1)[0] == 1


class TestBound:
    def test_fan(self, capsys):
        r = rows(run(capsys, "bound", "--fan", "--beta", 2, "--x", 1, "--v", 1)[1])
        assert f"{float(r[1][3]):.6f}" == "0.778801"

    def test_cmd(self, capsys):
        r = rows(run(capsys, "bound", "--cmd", "--n", 10000, "--alpha", 0.5, "--rho", 0.5, "--x", "1,20")[1])
        assert float(r[1][6]) == pytest.approx(0.965609397593049248, rel=1e-13)
        assert r[1][7] == "1" and r[2][7] == "0"

    @pytest.mark.parametrize("argv", [
        ("bound", "--x", 1),
        ("bound", "--fan", "--cmd", "--x", 1),
        ("bound", "--fan", "--x", 1),
        ("bound", "--fan", "--x", 1, "--v", 1, "--beta", 3),
        ("bound", "--cmd", "--x", 1),
    ])
    def test_invalid(self, capsys, argv):
        assert run(capsys, *argv)[0] == 1


class TestDispatch:
    def test_unknown_flag_and_command(self, capsys):
        assert run(capsys, "table", "--bogus")[0] == 1
        assert run(capsys, "frobnicate")[0] == 1
        assert run(capsys)[0] == 1

    def test_bad_threads_env(self, capsys, monkeypatch):
        monkeypatch.setenv("SELFNORM_THREADS", "zero")
        assert run(capsys, "cf", "--index", 1)[0] == 1

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "selfnorm", "bound", "--fan", "--beta", "2", "--x", "1",
                               "--v", "1"], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.startswith("x,v,beta,bound\n")

import csv
import io
import json
import math
import subprocess
import sys

import pytest

from byzgd.cli import main


def run_cli(*args, stdin=None):
    proc = subprocess.run([sys.executable, "-m", "byzgd.cli", *args], input=stdin,
                          capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


def test_median_stdin():
    code, out, _ = run_cli("median", stdin="1\n2\n100\n")
    assert code == 0
    row = next(csv.reader(io.StringIO(out)))
    assert float(row[0]) == pytest.approx(2.0) and float(row[-1]) <= 1 + 1e-9


def test_median_file_and_trim(tmp_path, capsys):
    path = tmp_path / "p.csv"
    path.write_text("0,0\n1,0\n0,1\n1000,1000\n")
    assert main(["median", "--input", str(path), "--tau", "10"]) == 0
    row = capsys.readouterr().out.strip().split(",")
    assert len(row) == 3


def test_constants(capsys):
    assert main(["constants", "--n-total", "24000", "--k", "12", "--q", "4", "--d", "20",
                 "--alpha", "0.35", "--delta", "0.006666666666666654", "--header"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    header, values = lines[0].split(","), lines[1].split(",")
    row = dict(zip(header, values))
    assert float(row["C_alpha"]) == pytest.approx(2 * 0.65 / 0.3)
    assert row["floor"] == "inf"


@pytest.mark.parametrize("args, code, kind", [
    (["constants", "--n-total", "100", "--d", "2", "--alpha", "0.6", "--delta", "0.1"], 2, "invalid-argument"),
    (["run", "--config", "/nonexistent/c.toml"], 3, "io-error"),
    (["median"], 2, "invalid-argument"),
])
def test_errors(args, code, kind):
    got, _, err = run_cli(*args, stdin="")
    assert got == code
    assert err.startswith(f"error: {kind}: ") and len(err.strip().splitlines()) == 1


def test_run_and_seed_override(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('[run]\nN = 1200\nm = 12\nk = 4\nrounds = 20\n[problem]\nd = 3\n')
    code, out, _ = run_cli("run", "--config", str(path), "--out", str(tmp_path / "o"), "--seed", "9")
    assert code == 0
    assert json.loads(out)["final_error_mean"] < 1.0
    assert json.loads((tmp_path / "o" / "config.json").read_text())["run"]["seed"] == 9


def test_sweep_and_compare(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('[run]\nN = 1200\nm = 12\nk = 4\nq = 1\nrounds = 20\n[attack]\nstrategy = "sign_flip"\n'
                    '[problem]\nd = 3\n[sweep]\nk = [4, 6]\n')
    code, out, _ = run_cli("sweep", "--config", str(path), "--out", str(tmp_path / "s"))
    assert code == 0 and len(out.strip().splitlines()) == 2
    code, out, _ = run_cli("compare", "--config", str(path), "--out", str(tmp_path / "c"))
    assert code == 0 and set(json.loads(out)) == {"standard", "byzantine"}

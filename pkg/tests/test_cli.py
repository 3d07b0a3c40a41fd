import csv
import json

import numpy as np
import pytest

from bgpwaves.cli import main
from bgpwaves.profiles import read_table_csv, write_table_csv


@pytest.fixture
def kernel_csv(tmp_path):
    x = np.linspace(-40, 40, 801)
    return write_table_csv(tmp_path / "k.csv", {"x": x, "value": 2 / (1 + np.exp(x))})


def test_wave_writes_files(tmp_path, kernel_csv, capsys):
    out = tmp_path / "out"
    assert main(["wave", "--kernel", str(kernel_csv), "--c", "2.5", "--theta", "0.3",
                 "-o", str(out)]) == 0
    cols = read_table_csv(out / "solution.csv")
    assert list(cols) == ["x", "w", "dw", "z", "sigma", "A"]
    summary = json.loads((out / "summary.json").read_text())
    assert {"c", "theta", "i_value", "lambda", "residual", "critical"} <= set(summary)
    printed = json.loads(capsys.readouterr().out.strip())
    assert printed["theta"] == pytest.approx(0.3)


def test_wave_exit_codes(tmp_path, kernel_csv):
    one = write_table_csv(tmp_path / "one.csv", {"x": np.linspace(-40, 40, 81),
                                                 "value": np.ones(81)})
    assert main(["wave", "--kernel", str(one), "--c", "0.5", "--theta", "0.3",
                 "-o", str(tmp_path / "a")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("x,value\n1,oops\n")
    assert main(["wave", "--kernel", str(bad), "--c", "2.5", "--theta", "0.3",
                 "-o", str(tmp_path / "b")]) == 1
    assert main(["wave", "--kernel", str(kernel_csv), "--c", "2.2", "--theta", "0.1",
                 "-o", str(tmp_path / "c")]) == 2


def test_feasibility(capsys):
    assert main(["feasibility", "--kappa", "1", "--rho", "3", "--a0", "2", "--eta", "0.5",
                 "--c", "2.9"]) == 0
    assert capsys.readouterr().out.strip() == "SupercriticalWindow"
    assert main(["feasibility", "--c", "3.5"]) == 2


def test_verify_detects_tampering(tmp_path, kernel_csv):
    out = tmp_path / "out"
    assert main(["critical", "--kernel", str(kernel_csv), "--c", "2.2", "-o", str(out)]) == 0
    assert main(["verify", "--solution", str(out / "solution.csv"), "-o", str(out)]) == 0
    lines = (out / "report.jsonl").read_text().splitlines()
    assert all(json.loads(ln)["passed"] for ln in lines)
    rows = list(csv.reader((out / "solution.csv").open()))
    rows[900][1] = repr(float(rows[900][1]) * 1.05)
    with (out / "solution.csv").open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    assert main(["verify", "--solution", str(out / "solution.csv")]) == 3


def test_sweep_and_family(tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--kernel", "logistic", "--cs", "2.2,3.0", "--thetas", "0.2,0.5",
                 "-o", str(out)]) == 0
    with (out / "sweeps.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["c", "theta", "i_value", "lambda", "status"]
    assert [r["status"] for r in rows] == ["NoWaveAtHeight", "ok", "ok", "ok"]
    assert not (out / "crossings.csv").exists()
    crit = tmp_path / "crit"
    assert main(["sweep", "--kernel", "logistic", "--cs", "2.1,2.5", "-o", str(crit)]) == 0
    with (crit / "crossings.csv").open() as fh:
        assert [r["crossings"] for r in csv.DictReader(fh)] == ["0"]
    assert main(["family", "--kernel", "constant:1.5", "--c", "3", "--thetas", "0.2,0.5,0.8",
                 "-o", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f" / "waves.csv").exists()


def test_bgp_commands(tmp_path):
    cfg = tmp_path / "quick.json"
    cfg.write_text(json.dumps({"kappa": 1, "rho": 3,
                               "alpha": {"family": "power", "a0": 2, "eta": 0.5},
                               "numerics": {"n": 20, "n_core": 801, "extend": False}}))
    out = tmp_path / "bgp"
    assert main(["bgp", "--config", str(cfg), "-o", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert 2.0 < summary["c"] < 2.8284
    assert {"c", "I", "lambda", "K", "tail_inequality", "residuals", "iterations"} <= set(summary)
    assert "nu" in read_table_csv(out / "solution.csv")
    assert main(["verify", "--solution", str(out / "solution.csv")]) == 0
    assert main(["bgp-super", "--config", str(cfg), "--c", "2.5"]) == 2
    capped = tmp_path / "capped.json"
    capped.write_text(json.dumps({"numerics": {"n": 20, "n_core": 801, "max_iter": 1}}))
    assert main(["bgp", "--config", str(capped), "-o", str(tmp_path / "cap")]) == 4


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"kappa": 1, "speed": 3}))
    assert main(["bgp", "--config", str(cfg)]) == 1

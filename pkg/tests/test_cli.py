import numpy as np

from lagmhd.cli import main


CONFIG = """
dimension = 3
sizes = 16,16,16
lengths = 16,6.283185307179586,6.283185307179586
dt = 0.05
t_end = 0.5
cadence = 0.25
epsilon0 = 1e-4
"""


def test_cli_run_and_fit(tmp_path, capsys):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(CONFIG)
    rc = main(["run", "--config", str(cfg_path), "--output", str(tmp_path / "out")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "script_E" in out and "diagnostics" in out
    csv = tmp_path / "out" / "diagnostics.csv"
    assert csv.exists()
    # only 3 samples in the window: the fit must refuse politely
    rc = main(
        ["fit", "--csv", str(csv), "--column", "E_total", "--window", "0.0", "0.5"]
    )
    assert rc == 1
    assert "fit failed" in capsys.readouterr().err


def test_cli_compare(tmp_path, capsys):
    cfg_path = tmp_path / "cmp.cfg"
    cfg_path.write_text(
        CONFIG.replace("t_end = 0.5", "t_end = 0.5\nsolver = both\nt_compare = 0.5")
    )
    rc = main(["compare", "--config", str(cfg_path)])
    assert rc == 0
    assert "max|u(X) - Yt|" in capsys.readouterr().out


def test_cli_oracle(tmp_path, capsys):
    out_csv = tmp_path / "oracle.csv"
    rc = main(
        [
            "oracle",
            "--t-min",
            "100",
            "--t-max",
            "1000",
            "--points",
            "11",
            "--out",
            str(out_csv),
        ]
    )
    assert rc == 0
    lines = out_csv.read_text().strip().splitlines()
    assert lines[0] == "t,grad_yt_h2,grad_d1yt_h1"
    assert len(lines) == 12
    assert "slope" in capsys.readouterr().out


def test_cli_admissible(capsys):
    rc = main(["admissible", "--case", "zero-mean", "--seeds", "3"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "admissible     = True" in out
    rc = main(["admissible", "--case", "nonzero-mean", "--seeds", "3"])
    assert rc == 3

import subprocess
import sys

import pytest

from accelfd.cli import main
from accelfd.presets import preset_names

HEAT = "[problem]\npreset = heat1d-sym\n[grid]\nmeshes = 1/16, 1/32\n"


def write(tmp_path, text, name="study.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    for name in preset_names():
        assert name in out
    assert "heat1d" in out and "alias" in out


def test_study_passes_and_fails_on_order(tmp_path, capsys):
    good = write(tmp_path, HEAT + "[study]\norder_min = 1.8\norder_max = 2.2\n")
    assert main(["study", "--config", good, "--deterministic"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("h,error_sup,observed_order\n") and len(out.splitlines()) == 3
    bad = write(tmp_path, HEAT + "[study]\norder_min = 3\n", "bad.cfg")
    assert main(["study", "--config", bad, "--format", "table"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_config_errors_exit_2(tmp_path, capsys):
    path = write(tmp_path, "[problem]\ncolour = red\n")
    assert main(["study", "--config", path]) == 2
    err = capsys.readouterr().err
    assert "colour" in err and "line 2" in err
    assert main(["study"]) == 2
    assert main(["study", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["study", "--preset", "heat1d", "--threads", "0"]) == 2


def test_deterministic_output_is_byte_identical(tmp_path):
    cfg = write(tmp_path, HEAT + "[extrapolation]\nvariant = full\nk = 1\n")
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.csv"
        assert main(["study", "--config", cfg, "--deterministic", "--threads", "2", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] and b"wall_ms" not in outs[0]


def test_solve_and_expansion_subcommands(tmp_path, capsys):
    assert main(["solve", "--preset", "decay", "--deterministic"]) == 0
    assert capsys.readouterr().out.count("\n") == 2
    cfg = write(tmp_path, "[problem]\npreset = drift-upwind\n[grid]\nmeshes = 1/16, 1/32\n"
                          "[study]\nexpansion_order = 0\n")
    assert main(["expansion", "--config", cfg, "--format", "table"]) == 0
    assert "PASS" in capsys.readouterr().out


@pytest.mark.parametrize("args", [["presets"], ["--help"]])
def test_module_entry_point(args):
    res = subprocess.run([sys.executable, "-m", "accelfd.cli", *args], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout

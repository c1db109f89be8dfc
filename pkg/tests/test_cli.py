"""Command-line front end: artifact writing, config resolution, exit codes.

Commands run in-process through main(argv) so stdout/stderr and filesystem
effects can be asserted directly.  The datasets are deliberately tiny.
"""

import csv
import json

import numpy as np
import pytest

from weakpde.cli import CSV_COLUMNS, main
from weakpde.gridfield import load_field

TINY_KS = ("--set", "Lx=6.2832", "--set", "Lt=4")


def _generate_tiny(tmp_path, name="clean.fld"):
    path = tmp_path / name
    rc = main(["generate", "--system", "ks", "--out", str(path), *TINY_KS])
    assert rc == 0
    return path


def _no_partials(tmp_path):
    assert not list(tmp_path.glob(".partial-*")), "temp files left behind"


# ---------------------------------------------------------------------------
# generate


def test_generate_writes_field_and_sidecar(tmp_path, capsys):
    out = tmp_path / "ks.fld"
    csv_path = tmp_path / "ks.csv"
    rc = main(["generate", "--system", "ks", "--out", str(out),
               "--csv", str(csv_path), *TINY_KS])
    assert rc == 0
    assert "wrote" in capsys.readouterr().out
    field = load_field(out)
    assert field.shape == (64, 11)
    assert field.ncomp == 1 and field.ndim_space == 1
    assert field.spacing[1] == 0.4

    meta = dict(line.split("=", 1) for line in
                (out.parent / "ks.fld.meta").read_text().splitlines())
    assert meta["solver"] == "KSParams"
    assert meta["system"] == "ks"
    assert float(meta["Lt"]) == 4.0
    assert meta["integrator"] == "etdrk4"
    assert meta["shape"] == "64x11"

    table = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert table.shape == (64 * 11, 3)
    _no_partials(tmp_path)


def test_generate_config_with_override(tmp_path):
    ini = tmp_path / "run.ini"
    # parameter names keep their case, as a user would write them
    ini.write_text("[solver]\nLx = 6.2832\nLt = 8\n")
    out = tmp_path / "ks.fld"
    # command-line --set beats the config file
    rc = main(["generate", "--system", "ks", "--out", str(out),
               "--config", str(ini), "--set", "Lt=4"])
    assert rc == 0
    assert load_field(out).shape == (64, 11)


def test_generate_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--system", "heat", "--out", str(tmp_path / "x")])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--system", "ks"])
    assert exc.value.code == 2
    capsys.readouterr()

    rc = main(["generate", "--system", "ks", "--out", str(tmp_path / "x.fld"),
               "--set", "bogus=3"])
    assert rc == 2
    assert "unknown solver parameter" in capsys.readouterr().err

    rc = main(["generate", "--system", "ks", "--out", str(tmp_path / "x.fld"),
               "--set", "malformed"])
    assert rc == 2
    assert "--set expects key=value" in capsys.readouterr().err

    rc = main(["generate", "--system", "ks", "--out", str(tmp_path / "x.fld"),
               "--config", str(tmp_path / "absent.ini")])
    assert rc == 2
    assert "cannot read config file" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# corrupt


def test_corrupt_is_deterministic(tmp_path):
    clean = _generate_tiny(tmp_path)
    out1, out2 = tmp_path / "n1.fld", tmp_path / "n2.fld"
    for out in (out1, out2):
        rc = main(["corrupt", "--in", str(clean), "--out", str(out),
                   "--sigma", "0.1", "--seed", "42"])
        assert rc == 0
    assert out1.read_bytes() == out2.read_bytes()
    noisy = load_field(out1)
    assert noisy.shape == load_field(clean).shape
    assert not np.array_equal(noisy.values, load_field(clean).values)
    meta = (tmp_path / "n1.fld.meta").read_text()
    assert "sigma=0.1" in meta and "noise_seed=42" in meta
    _no_partials(tmp_path)


def test_corrupt_rejects_negative_sigma(tmp_path, capsys):
    clean = _generate_tiny(tmp_path)
    rc = main(["corrupt", "--in", str(clean), "--out",
               str(tmp_path / "n.fld"), "--sigma", "-0.5"])
    assert rc == 2
    assert "sigma must be >= 0" in capsys.readouterr().err


def test_missing_input_exits_2(tmp_path, capsys):
    rc = main(["discover", "--system", "ks", "--in",
               str(tmp_path / "absent.fld"), "--out", str(tmp_path / "rep")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# discover / sweep


def test_discover_report_layout(tmp_path, capsys):
    clean = _generate_tiny(tmp_path)
    base = tmp_path / "report"
    rc = main(["discover", "--system", "ks", "--in", str(clean),
               "--out", str(base), "--halfwidths", "1.5,1.5",
               "--k", "16", "--m", "3", "--seed", "5"])
    assert rc == 0
    assert "success_rate" in capsys.readouterr().out

    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["command"] == "discover"
    assert payload["options"]["K"] == 16 and payload["options"]["M"] == 3
    (block,) = payload["results"]
    assert block["system"] == "ks"
    assert block["labels"] == ["u*u_x", "u_xx", "u_xxxx"]
    assert len(block["members"]) == 3
    assert block["members"][0]["seed_key"] == [5, 0]
    assert len(block["members"][0]["coefficients"]) == 3

    with open(tmp_path / "report.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + 3  # one line per coefficient
    assert {r[4] for r in rows[1:]} == {"u*u_x", "u_xx", "u_xxxx"}
    _no_partials(tmp_path)


def test_sweep_rows_per_sigma(tmp_path, capsys):
    clean = _generate_tiny(tmp_path)
    base = tmp_path / "sweep"
    rc = main(["sweep", "--system", "ks", "--in", str(clean),
               "--out", str(base), "--sigmas", "0.0,0.1",
               "--halfwidths", "1.5,1.5", "--k", "12", "--m", "2"])
    assert rc == 0
    assert "sigma=0.1" in capsys.readouterr().out

    payload = json.loads((tmp_path / "sweep.json").read_text())
    assert payload["sigmas"] == [0.0, 0.1]
    assert len(payload["results"]) == 2
    assert all("noise_seed" in block for block in payload["results"])

    with open(tmp_path / "sweep.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + 2 * 3
    assert {r[1] for r in rows[1:]} == {"0.0", "0.1"}
    _no_partials(tmp_path)


def test_sweep_needs_sigmas(tmp_path, capsys):
    clean = _generate_tiny(tmp_path)
    rc = main(["sweep", "--system", "ks", "--in", str(clean),
               "--out", str(tmp_path / "s"), "--sigmas", ",",
               "--halfwidths", "1.5,1.5"])
    assert rc == 2
    assert "at least one sigma" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# validate


def test_validate_passes_and_reports(tmp_path, capsys):
    rc = main(["validate", "--out", str(tmp_path / "val")])
    out = capsys.readouterr().out
    assert rc == 0
    assert "FAIL" not in out
    assert "PASS weight:scalar-1d-p4q3:boundary-vanishing" in out
    assert "checks passed" in out
    payload = json.loads((tmp_path / "val.json").read_text())
    assert payload["failed"] == 0
    assert all(c["passed"] for c in payload["checks"])


def test_validate_forced_failure_exits_1(capsys):
    rc = main(["validate", "--forced-polynomial-time"])
    out = capsys.readouterr().out
    assert rc == 1
    assert "FAIL weight:curl-polynomial-time:zero-time-mean" in out

import csv
import json

import pytest

from navslip.cli import _fmt, main, NonFiniteOutput

SMALL = """
[domain]
nx = 12
nz = 12

[experiment]
t_final = 0.05
output_count = 5
initial = {initial}
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_equilibrium_ekin_zero(tmp_path):
    cfg = write(tmp_path, "eq.ini", SMALL.format(initial="equilibrium"))
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    with open(tmp_path / "o" / "ledger_k0.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert all(float(r["e_kin"]) == 0.0 for r in rows)
    assert list(rows[0]) == ["t", "mass", "e_kin", "dissipation", "boundary_dissipation", "pressure_work",
                             "energy_residual", "trace_accum", "u_h1", "u_h2", "u_h3", "rho_h1", "rho_h2",
                             "rho_inv_linf", "ut_l2"]


def test_fit_prints_slope(tmp_path, capsys):
    path = write(tmp_path, "p.csv", "k,value\n1e-1,3.162e-1\n1e-2,1e-1\n1e-3,3.162e-2\n")
    assert main(["fit", "--csv", path]) == 0
    assert "slope = 0.5" in capsys.readouterr().out


def test_bad_config_exit_1(tmp_path, capsys):
    cfg = write(tmp_path, "bad.ini", SMALL.format(initial="default") + "\n[physics]\nviscocity = 1\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "viscocity" in capsys.readouterr().err


def test_missing_config_file_exit_1(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.ini")]) == 1


def test_nonfinite_rejected():
    with pytest.raises(NonFiniteOutput):
        _fmt(float("nan"))
    assert _fmt(-0.0) == "0"
    assert _fmt(0.1) == "0.10000000000000001"


def sweep_files(tmp_path, tag, threads):
    cfg = write(tmp_path, "s.ini", SMALL.format(initial="default"))
    out = tmp_path / tag
    code = main(["sweep", "--config", cfg, "--out", str(out), "--threads", str(threads)])
    return code, {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_sweep_json_and_determinism(tmp_path):
    code1, files1 = sweep_files(tmp_path, "a", 1)
    code2, files2 = sweep_files(tmp_path, "b", 2)
    assert code1 in (0, 2) and code1 == code2
    assert files1 == files2
    doc = json.loads(files1["sweep.json"])
    assert len(doc["metrics"]) == 8 and set(doc["fits"]) == {"sq_err", "trace"}
    assert {"config_echo", "metrics", "fits", "k_uniformity", "acceptance"} <= set(doc)
    assert sum(name.startswith("ledger_") for name in files1) == 8


def test_lame_test_and_eig(tmp_path):
    cfg = write(tmp_path, "s.ini", SMALL.format(initial="default"))
    assert main(["lame-test", "--config", cfg, "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "k_uniformity.json").read_text())
    assert rep["max_min_ratio"] <= 3
    assert main(["eig", "--config", cfg, "--out", str(tmp_path), "--count", "3"]) == 0
    assert (tmp_path / "eigenvalues_k0.csv").read_text().count("\n") == 4


def test_mms_subcommand(tmp_path):
    cfg = write(tmp_path, "s.ini", SMALL.format(initial="default"))
    code = main(["mms", "--config", cfg, "--out", str(tmp_path), "--resolutions", "8", "16", "32"])
    assert code in (0, 2)
    assert json.loads((tmp_path / "mms.json").read_text())["reports"][0]["k"] == 0.0

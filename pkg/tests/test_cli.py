import csv
import io

import pytest

from odia.cli import CSV_COLUMNS, run

NET = ["--cells", "3", "--users-per-cell", "2", "--ue-antennas", "2", "--bs-antennas", "4"]
FD = ["--cells", "2", "--users-per-cell", "2", "--ue-antennas", "2", "--bs-antennas", "4", "--scheme", "fd"]


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), out)
    return code, out.getvalue()


def test_feasibility_report():
    code, text = call("feasibility", *NET)
    assert code == 0
    assert "N_R >= 12" in text
    assert "per-cell DoF: 2" in text
    assert "KM+N = 8" in text and "KMN/(KM+N) = 2" in text


def test_solve_feasible_seed():
    code, text = call("solve", *NET, "--seed", "5")
    assert code == 0
    assert "<= 1e-08" in text
    assert "effective rank cell 2 ul: 4" in text


def test_solve_infeasible():
    code, text = call("solve", *NET, "--relay-antennas", "9")
    assert code == 3
    assert "infeasible" in text


def test_unknown_scheme(capsys):
    code, _ = call("feasibility", *NET, "--scheme", "tdma")
    assert code == 2
    assert "unknown scheme 'tdma'" in capsys.readouterr().err


def test_bad_flag_value(capsys):
    code, _ = call("feasibility", *NET, "--trials", "many")
    assert code == 2
    assert "--trials" in capsys.readouterr().err


def test_config_file_with_override(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("cells = 2\nusers_per_cell = 2\nue_antennas = 2\nbs_antennas = 4\nscheme = 'ibc'\n")
    code, text = call("feasibility", "--config", str(p))
    assert code == 0 and "N_R >= 8" in text
    code, text = call("feasibility", "--config", str(p), "--scheme", "fd")
    assert code == 0 and "N_R >= 16" in text


def test_config_error_has_line(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text("cells = 2\nusers_per_cell = 2\nue_antennas = 2\nbs_antennas = 4\nstreams = 1\n")
    assert call("simulate", "--config", str(p))[0] == 2
    assert "line 5" in capsys.readouterr().err


def test_nested_ue_antennas_flag():
    code, text = call("feasibility", "--cells", "2", "--users-per-cell", "1,2",
                      "--ue-antennas", "1;2,1", "--bs-antennas", "2,3")
    assert code == 0
    assert "N_R >= 5" in text


def test_simulate_csv_schema_and_determinism(tmp_path):
    args = ["simulate", *FD, "--trials", "3", "--snr-db", "20,40", "--seed", "11"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert call(*args, "--output", str(a))[0] == 0
    assert call(*args, "--output", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3 * 2 * 2 * 2
    assert {r["direction"] for r in rows} == {"ul", "dl"}
    assert all(r["seed"] == "11" and r["feasible"] == "1" for r in rows)


def test_csv_row_reproducible_from_seed_and_trial(tmp_path):
    from odia.network import NetworkConfig
    from odia.simulate import run_trial

    code, text = call("simulate", *NET, "--trials", "3", "--snr-db", "30", "--seed", "4")
    row = [r for r in csv.DictReader(io.StringIO(text)) if r["trial"] == "2" and r["cell"] == "1"][0]
    c = NetworkConfig(3, 2, 2, 4, 12, "imac")
    rep = run_trial(c, int(row["seed"]), int(row["trial"]), [float(row["snr_db"])])
    assert repr(rep.rates[(1, "ul")][0]) == row["rate_bits_per_use"]


def test_simulate_all_infeasible(capsys):
    code, text = call("simulate", *NET, "--relay-antennas", "9", "--trials", "2")
    assert code == 3
    assert "infeasible" in capsys.readouterr().err


def test_dof_summary():
    code, text = call("dof", *FD, "--trials", "5", "--snr-db", "40,60")
    assert code == 0
    assert "closed form 8" in text
    assert "cell 1: slope" in text


def test_verify_passes():
    code, text = call("verify", "--realizations", "2")
    assert code == 0
    assert "FAIL" not in text


def test_subcommand_required():
    with pytest.raises(SystemExit) as info:
        run([])
    assert info.value.code == 2

import csv
import io
import json

import pytest

from snstf.cli import main, parse_list, read_references, write_csv

SIM_TOML = """
schema_version = 1
mode = "simulate"
seed = 17
frames = 400

[source]
mu1 = 0.1
mu2 = 0.2
muz = 0.425
pX = 0.3
p0 = 0.2
p1 = 0.6
p2 = 0.2
pz_send = 0.1

[channel]
eta_A = 0.05
eta_B = 0.05

[slice]
Ds_deg = 10.0
rc_max = 0.5
r_gate = 0.9
"""


@pytest.fixture
def sim_config(tmp_path):
    path = tmp_path / "sim.toml"
    path.write_text(SIM_TOML)
    return path


def test_parse_list_forms():
    assert parse_list("1,2,4") == [1.0, 2.0, 4.0]
    assert parse_list("0:1:3") == [0.0, 0.5, 1.0]


def test_analyze_golden_csv(capsys):
    assert main(["analyze", "--golden", "300 km*", "--csv", "-"]) == 0
    out = capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO(out[out.index("label,"):])))
    assert rows[0]["label"] == "300 km*"
    assert float(rows[0]["R"]) == pytest.approx(1.957e-6, rel=0.1)


def test_analyze_json_output(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["analyze", "--golden", "0 km", "--golden", "100 km*", "--json", str(out)]) == 0
    reports = json.loads(out.read_text())
    assert [r["label"] for r in reports] == ["0 km", "100 km*"]


def test_analyze_missing_row_exit_code(tmp_path, capsys):
    from snstf.ledger import ledger_to_dict, load_golden
    doc = ledger_to_dict(load_golden("50 km"))
    del doc["rows"]["Sent-XX01"]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    assert main(["analyze", "--ledger", str(path)]) == 3
    assert "Sent-XX01" in capsys.readouterr().err


def test_bad_json_and_missing_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert main(["analyze", "--ledger", str(bad)]) == 3
    assert main(["analyze", "--ledger", str(tmp_path / "absent.json")]) == 7


def test_config_error_exit_code_lists_problems(tmp_path, capsys):
    path = tmp_path / "c.toml"
    path.write_text('schema_version = 5\nmode = "x"\n')
    assert main(["sweep", "--config", str(path)]) == 6
    err = capsys.readouterr().err
    assert err.count("config error:") == 2


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--from", "abc"])
    assert info.value.code == 2


def test_bounds_csv(capsys):
    assert main(["bounds", "--eta-grid", "5.99e-7,0.5"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert float(rows[0]["plob"]) == pytest.approx(8.6417e-7, rel=1e-4)
    assert float(rows[1]["tgw"]) > float(rows[1]["plob"])


def test_bounds_domain_error(capsys):
    assert main(["bounds", "--eta-grid", "1.5"]) == 4


def test_sweep_columns(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--from", "0", "--to", "100", "--step", "50", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["distance_km", "R", "s1", "e1ph", "plob", "tgw"]
    assert [float(r["distance_km"]) for r in rows] == [0, 50, 100]


def test_scan_golden_subset_and_unknown_value(tmp_path, capsys):
    from snstf.ledger import golden_path
    out = tmp_path / "scan.csv"
    assert main(["scan", "--ledger", str(golden_path("150 km")), "--ds-grid", "8,10", "--rc-grid", "0.04",
                 "--out", str(out)]) == 0
    assert len(list(csv.DictReader(out.open()))) == 2
    assert main(["scan", "--ledger", str(golden_path("150 km")), "--ds-grid", "9"]) == 4


def test_simulate_then_scan_run(sim_config, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(sim_config), "--out", str(out)]) == 0
    for name in ("events.csv", "references.csv", "ledger.json", "report.txt"):
        assert (out / name).exists()
    refs, ests = read_references((out / "references.csv").open())
    assert len(refs) == len(ests) == 200
    assert main(["scan", "--run", str(out), "--ds-grid", "5,10", "--rc-grid", "0.2,1",
                 "--out", str(tmp_path / "scan.csv")]) == 0


def test_simulate_is_byte_identical_across_runs(sim_config, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(sim_config), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(sim_config), "--out", str(b)]) == 0
    for name in ("events.csv", "references.csv", "ledger.json", "report.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    c = tmp_path / "c"
    assert main(["simulate", "--config", str(sim_config), "--seed", "18", "--out", str(c)]) == 0
    assert (a / "events.csv").read_bytes() != (c / "events.csv").read_bytes()


def test_write_csv_float_format():
    buf = io.StringIO()
    write_csv([{"x": 0.1, "n": 3}], ("x", "n"), buf)
    assert buf.getvalue() == "x,n\n0.1,3\n"


def test_expected_subcommand(sim_config, capsys):
    assert main(["expected", "--config", str(sim_config)]) == 0
    assert "s1" in capsys.readouterr().out

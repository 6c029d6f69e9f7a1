import csv
import json

import pytest

from hsslab.cli_report import main, read_config
from hsslab.errors import UsageError
from hsslab.service import VerificationReport


def _report(path):
    return VerificationReport.model_validate_json(path.read_text())


def test_verify_passes_and_writes_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["verify", "--model", "cp1", "--suite", "forms", "--samples", "2", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "PASS  cp1 / forms" in text
    data = json.loads(out.read_text())
    assert data["passed"] and data["environment"]["samples"] == 2
    assert "NaN" not in out.read_text() and "Infinity" not in out.read_text()


@pytest.mark.parametrize("argv", [
    ["verify", "--model", "cp1", "--samples", "0"],
    ["verify", "--model", "cp7"],
    ["verify", "--model", "cp1", "--suite", "magic"],
    ["verify"],
    ["verify", "--model", "cp1", "--fd-step", "1.0"],
    ["capacities", "--model", "cp1", "--ratio", "-1"],
    ["frobnicate"],
])
def test_usage_errors_exit_two(argv, capsys):
    assert main(argv) == 2
    capsys.readouterr()


def test_failing_tolerance_exits_one(capsys):
    assert main(["verify", "--model", "cp1", "--suite", "forms", "--samples", "1", "--tol", "1e-30"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nmodel = cp1\nsuite = forms\nsamples = 2\nseed = 9\ntol.forms.dE.closed = 1e-30\n")
    out = tmp_path / "a.json"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 1
    rep = _report(out)
    assert rep.environment.seed == 9
    rec = {r.name: r for r in rep.records}
    assert rec["forms.dE.closed"].tolerance == 1e-30 and not rec["forms.dE.closed"].passed
    assert main(["verify", "--config", str(cfg), "--seed", "4", "--model", "ch1", "--out", str(out)]) == 1
    rep = _report(out)
    assert rep.environment.seed == 4 and rep.model == "ch1"
    capsys.readouterr()


def test_config_parse_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("model cp1\n")
    with pytest.raises(UsageError):
        read_config(str(bad))
    bad.write_text("colour = red\n")
    with pytest.raises(UsageError):
        read_config(str(bad))
    bad.write_text("samples = many\n")
    with pytest.raises(UsageError):
        read_config(str(bad))
    with pytest.raises(UsageError):
        read_config(str(tmp_path / "missing.cfg"))


def test_capacities_table(capsys):
    assert main(["capacities", "--model", "cp1", "--ratio", "0.25"]) == 0
    out = capsys.readouterr().out
    row = next(line for line in out.splitlines() if line.startswith("cG_U"))
    assert "(1 pi)" in row
    assert main(["capacities", "--model", "ch1xch1", "--twist", "1.25"]) == 0
    assert "cHZ_bounds_noncompact" in capsys.readouterr().out
    assert main(["capacities", "--model", "ch1"]) == 0
    assert "no quantities" in capsys.readouterr().out


def test_flow_csv(tmp_path, capsys):
    path = tmp_path / "f.csv"
    assert main(["flow", "--model", "ch1", "--speed", "0.5", "--twist", "1", "--dt", "0.01", "--steps", "50",
                 "--sample-every", "10", "--csv", str(path)]) == 0
    rows = list(csv.reader(path.open()))
    assert rows[0][0] == "t" and len(rows) == 7
    assert "max_energy_drift" in capsys.readouterr().out


def test_flow_drift_abort_exits_one(capsys):
    assert main(["flow", "--model", "cp1", "--speed", "3", "--twist", "1", "--dt", "2.0", "--steps", "200"]) == 1
    assert "aborted" in capsys.readouterr().err


def test_report_merge(tmp_path, capsys):
    a, b, m = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "m.json"
    main(["verify", "--model", "cp1", "--suite", "forms", "--samples", "1", "--out", str(a)])
    main(["verify", "--model", "cp1", "--suite", "moments", "--samples", "1", "--out", str(b)])
    assert main(["report", str(a), str(b), "--out", str(m)]) == 0
    merged = _report(m)
    assert merged.suite == "forms+moments" and len(merged.records) == len(_report(a).records) + len(_report(b).records)
    assert main(["report", str(tmp_path / "nope.json")]) == 2
    capsys.readouterr()


def test_thread_setting(tmp_path, monkeypatch, capsys):
    outs = []
    for threads in ("1", "2"):
        monkeypatch.setenv("HSS_LAB_THREADS", threads)
        path = tmp_path / f"t{threads}.json"
        assert main(["verify", "--model", "ch1", "--suite", "maps", "--samples", "3", "--seed", "2",
                     "--out", str(path)]) == 0
        outs.append(_report(path).canonical())
    assert outs[0] == outs[1]
    monkeypatch.setenv("HSS_LAB_THREADS", "lots")
    assert main(["verify", "--model", "cp1", "--suite", "forms", "--samples", "2"]) == 2
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()

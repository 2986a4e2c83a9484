import csv
import json

import numpy as np
import pytest

from singstab import cli
from singstab.cli import CSV_HEADERS, ConfigError, load_config, main, parse_function
from singstab.measure import NumericalError, SpecificationError

POT = "[potential]\nfamily = poly\nepsilons = 1.5, 2\nalpha = 1\n"


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _floats_outside_pairs(node, inside=False):
    if isinstance(node, dict):
        pair = set(node) == {"value", "error"}
        return [b for v in node.values() for b in _floats_outside_pairs(v, inside or pair)]
    if isinstance(node, list):
        return [b for v in node for b in _floats_outside_pairs(v, inside)]
    if isinstance(node, float) and not inside:
        return [node]
    return []


def test_lyapunov_run_writes_artifacts(tmp_path):
    cfg = _write(tmp_path, POT + "[lyapunov]\nradii = 8\n")
    out = tmp_path / "out"
    assert main(["lyapunov", "--config", str(cfg), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["drift.csv", "manifest.ini", "summary.json"]
    with open(out / "drift.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == tuple(CSV_HEADERS["drift.csv"])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["files"] == names
    assert summary["results"]["verdict"] == "PASS"
    # every reported number in results carries an error
    assert _floats_outside_pairs(summary["results"]) == []


def test_manifest_round_trip(tmp_path):
    cfg = _write(tmp_path, POT + "[criteria]\nr_max = 1e6\n")
    out = tmp_path / "a"
    assert main(["criteria", "--config", str(cfg), "--out", str(out), "--seed", "4"]) == 0
    again = load_config(out / "manifest.ini", "criteria")
    assert again.manifest() == (out / "manifest.ini").read_text()
    assert again.seed == 4 and again.params["gamma"] == 0.5


def test_unknown_key_and_section(tmp_path, capsys):
    cfg = _write(tmp_path, POT + "[lyapunov]\nradius = 3\n")
    assert main(["lyapunov", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert str(cfg) in err and "[lyapunov] radius" in err
    cfg = _write(tmp_path, POT + "[extras]\nx = 1\n", "d.ini")
    assert main(["lyapunov", "--config", str(cfg)]) == 2
    assert "unknown section" in capsys.readouterr().err


def test_validation_exit_codes(tmp_path, capsys):
    three = "[potential]\nfamily = poly\nepsilons = 2, 2, 2\nalpha = 1\n"
    assert main(["gap", "--config", str(_write(tmp_path, three)), "--out", str(tmp_path / "g")]) == 2
    weak = "[potential]\nfamily = poly\nepsilons = 0.5\nalpha = 1\n"
    out = tmp_path / "w"
    assert main(["lyapunov", "--config", str(_write(tmp_path, weak, "w.ini")), "--out", str(out)]) == 2
    assert "FAILS" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, POT + "[run]\ntask = gap\n", "t.ini"), "criteria")
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, POT.replace("alpha = 1\n", ""), "a.ini"), "criteria")


def test_numerical_error_exit_code(tmp_path, monkeypatch, capsys):
    def boom(cfg, pot, art):
        raise NumericalError("solver diverged")
    monkeypatch.setitem(cli.TASK_FUNCS, "lyapunov", boom)
    cfg = _write(tmp_path, POT)
    assert main(["lyapunov", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "solver diverged" in capsys.readouterr().err


def test_byte_identical_reruns_and_no_temp_files(tmp_path):
    cfg = _write(tmp_path, POT + "[form]\nf = bump 0 1; gaussian 0 2\nresiduals = poincare, super_poincare\n")
    blobs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert main(["form", "--config", str(cfg), "--out", str(out)]) == 0
        assert not [p for p in out.iterdir() if p.name.endswith(".tmp")]
        blobs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert blobs[0] == blobs[1]
    with open(tmp_path / "r0" / "residuals.csv") as fh:
        kinds = [r["kind"] for r in csv.DictReader(fh)]
    assert kinds == ["poincare", "super_poincare"]


def test_report_collects_runs(tmp_path):
    cfg = _write(tmp_path, POT + "[lyapunov]\nradii = 8\n")
    run_dir = tmp_path / "lyap"
    assert main(["lyapunov", "--config", str(cfg), "--out", str(run_dir)]) == 0
    rep = _write(tmp_path, f"[report]\ninputs = {run_dir}\n", "rep.ini")
    out = tmp_path / "rep"
    assert main(["report", "--config", str(rep), "--out", str(out)]) == 0
    with open(out / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and {r["task"] for r in rows} == {"lyapunov"}


def test_parse_function():
    f = parse_function("2 * constant 1 + 0.5 * bump 0 1; gaussian 0 2", 2)
    x = np.array([[0.0, 0.0], [5.0, 0.0]])
    np.testing.assert_allclose(f(x), [2.5, 2.0])
    g = parse_function("bump 0 1", 2)      # missing axes are constant 1
    assert g(np.array([[0.0, 100.0]]))[0] == 1.0
    for bad in ("wavelet 0 1", "bump 0 zero", "bump 0 1; bump 0 1; bump 0 1", "x * bump 0 1"):
        with pytest.raises(SpecificationError):
            parse_function(bad, 2)


def test_help_lists_tasks(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for t in cli.TASKS:
        assert t in out

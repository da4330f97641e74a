import json

import pytest

from offdiag_bergman.cli import main


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_verify_j2(dim, tmp_path, capsys):
    out = tmp_path / f"j2_{dim}.json"
    assert main(["verify-j2", "--dim", str(dim), "--emit", str(out)]) == 0
    record = json.loads(out.read_text())
    assert record["equal"] and record["passed"] and record["seconds"] < 60
    computed = (tmp_path / f"j2_{dim}.computed.txt").read_text()
    assert computed == (tmp_path / f"j2_{dim}.reference.txt").read_text()
    assert "FAIL" not in capsys.readouterr().out


def test_model_run_is_deterministic_and_sized(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["model-run", "--manifold", "CP1", "--points", "3", "--p", "25", "36", "49", "64", "81", "100"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 1 + 3 * 6


def test_cp1_pipeline(tmp_path):
    csv_path, report = tmp_path / "cp1.csv", tmp_path / "cp1.json"
    assert main(["model-run", "--manifold", "CP1", "--out", str(csv_path)]) == 0
    assert len(csv_path.read_text().splitlines()) == 1 + 8 * 16
    assert main(["fit", "--in", str(csv_path), "--out", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["passed"] and len(data["points"]) == 8


def test_torus_pipeline(tmp_path):
    csv_path, report = tmp_path / "t.csv", tmp_path / "t.json"
    assert main(["model-run", "--manifold", "torus", "--out", str(csv_path)]) == 0
    rows = csv_path.read_text().splitlines()[1:]
    assert all(float(r.split(",")[-1]) <= 1e-8 for r in rows if int(r.split(",")[1]) >= 30)
    assert main(["fit", "--in", str(csv_path), "--out", str(report)]) == 0
    for point in json.loads(report.read_text())["points"]:
        assert max(abs(complex(*c)) for c in point["c"][1:]) <= 1e-6


def test_empty_csv_is_a_schema_error(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["fit", "--in", str(empty), "--out", str(tmp_path / "x.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_config_is_a_usage_error(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sigma": 3.0}))
    assert main(["model-run", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2
    cfg.write_text(json.dumps({"ps": [4, 9, 16]}))
    assert main(["model-run", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2


def test_report_aggregates(tmp_path):
    j = tmp_path / "j2.json"
    main(["verify-j2", "--dim", "1", "--emit", str(j)])
    out = tmp_path / "all.json"
    assert main(["report", str(j), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["passed"]


def test_full_report(tmp_path):
    assert main(["report", "--out-dir", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "report.json").exists()

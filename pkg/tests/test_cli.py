import csv
import io
import json

import pytest

from ionflux import cli


def run(capsys, *args):
    code = cli.main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_expand_json_reference(capsys):
    code, out, _ = run(capsys, "expand", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["J10"] == pytest.approx(0.22135, abs=1e-4)
    assert data["J11"] == pytest.approx(-0.045748, abs=1e-5)
    for key in ("phi0_a", "c11_a", "J12", "y2", "A", "B", "lambda", "Vq1", "Vq2", "A1", "B2", "C"):
        assert key in data


def test_expand_with_q0_prediction(capsys):
    code, out, _ = run(capsys, "expand", "--q0", "0.01", "--format", "json")
    data = json.loads(out)
    assert data["pred_J1"] == pytest.approx(data["J10"] + 0.01 * data["J11"] + 1e-4 * data["J12"])


def test_expand_equal_baths_exit_3(capsys, caplog):
    code, _, _ = run(capsys, "expand", "--L", "1", "--R", "1")
    assert code == 3 and "DegenerateBoundary" in caplog.text


def test_expand_zero_width_note(capsys):
    code, out, _ = run(capsys, "expand", "--a", "0.5", "--b", "0.5", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["J11"] == 0 and data["J21"] == 0 and "note" in data


@pytest.mark.parametrize("args", [["--L", "-1"], ["--z1", "-1"], ["--a", "0.9", "--b", "0.1"],
                                  ["--geometry", "funnel"], ["--vrange", "5:1"]])
def test_invalid_configs_exit_2(capsys, caplog, args):
    code, _, _ = run(capsys, "expand", *args)
    assert code == 2 and "invalid configuration" in caplog.text


def test_solve_csv(capsys):
    code, out, _ = run(capsys, "solve", "--q0", "0.01")
    rows = dict(csv.reader(io.StringIO(out)))
    assert code == 0 and rows["status"] == "converged"
    assert float(rows["residual_norm"]) < 1e-12
    assert float(rows["J1"]) == pytest.approx(0.220889, abs=1e-5)


def test_solve_zero_charge_is_zeroth_order(capsys):
    _, out, _ = run(capsys, "solve", "--q0", "0", "--format", "json")
    _, ref, _ = run(capsys, "expand", "--order", "0", "--format", "json")
    s, e = json.loads(out), json.loads(ref)
    assert s["J1"] == pytest.approx(e["J10"], rel=1e-10)
    assert s["phi_a"] == pytest.approx(e["phi0_a"], rel=1e-10)


def test_solve_iteration_cap_exit_4(capsys):
    code, out, _ = run(capsys, "solve", "--q0", "10", "--max-iter", "2")
    rows = dict(csv.reader(io.StringIO(out)))
    assert code == 4 and rows["status"] == "no_convergence" and "J1" in rows


def test_iv_csv_format(capsys):
    code, out, _ = run(capsys, "iv", "--vrange", "-1:1", "--vsteps", "3", "--mode", "order1", "--q0", "0.1")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "V,J1,J2,I,mode,Q0"
    V, J1, J2, I, mode, q = lines[2].split(",")
    assert mode == "order1" and float(V) == 0.0
    assert len(J1.lstrip("-").replace(".", "").lstrip("0")) >= 15  # 17 significant digits


def test_heatmap_format_and_exclusion(capsys):
    code, out, _ = run(capsys, "heatmap", "--range", "0.5:1.5", "--steps", "3", "--vrange", "-10:10",
                       "--vsteps", "3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert list(rows[0]) == ["axis1", "axis2", "s1", "s2", "color", "q1", "q2", "excluded"]
    assert [r["excluded"] for r in rows] == ["0"] * 3 + ["1"] * 3 + ["0"] * 3
    assert all(r["color"] == "excluded" for r in rows[3:6])


def test_heatmap_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert cli.main(["heatmap", "--steps", "20", "--vsteps", "20", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_signs(capsys):
    code, out, _ = run(capsys, "signs", "--vrange", "-30:30", "--vsteps", "3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["color"] for r in rows] == ["blue", "purple", "red"]


def test_dump_config_round_trip(tmp_path, capsys):
    code, out, _ = run(capsys, "iv", "--L", "0.97", "--vrange", "-2:2", "--q0", "0.02", "--dump-config")
    assert code == 0
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(out)
    _, again, _ = run(capsys, "iv", "--config", str(cfg_path), "--dump-config")
    assert json.loads(again) == json.loads(out)
    _, direct, _ = run(capsys, "iv", "--L", "0.97", "--vrange", "-2:2", "--q0", "0.02")
    _, via_file, _ = run(capsys, "iv", "--config", str(cfg_path))
    assert direct == via_file


def test_profile_file(tmp_path, capsys):
    f = tmp_path / "h.csv"
    f.write_text("x,h\n0,1\n0.5,2\n1,1\n")
    code, out, _ = run(capsys, "expand", "--geometry", f"file:{f}", "--format", "json")
    assert code == 0 and json.loads(out)["H1"] == pytest.approx(0.75)


def test_verify_consistency(tmp_path, capsys):
    report = tmp_path / "r.json"
    code, _, err = run(capsys, "verify", "consistency", "--out", str(report))
    assert code == 0 and "PASS" in err
    assert json.loads(report.read_text())["passed"] is True

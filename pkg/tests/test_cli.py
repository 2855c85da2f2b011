import json

import pytest

from imagine_sim.cli import main
from imagine_sim.perfmodel import DB_ENV_VAR


def run_cli(*argv):
    return main(list(argv))


PROGRAM_SOURCE = "setp w=8\nsetptr 768\nmult 0, 512\nadd 896, 768, 1\nhalt\n"


# ---------------------------------------------------------------------------
# asm


def test_asm_writes_container(tmp_path, capsys):
    src = tmp_path / "prog.s"
    src.write_text("nop\nhalt\n")
    out = tmp_path / "prog.bin"
    assert run_cli("asm", str(src), str(out)) == 0
    blob = out.read_bytes()
    assert blob[:4] == b"IMG1"
    assert len(blob) == 4 + 4 + 2 * 4  # magic + count + two words


def test_asm_missing_file_names_path(tmp_path, capsys):
    missing = tmp_path / "absent.s"
    assert run_cli("asm", str(missing), str(tmp_path / "o.bin")) == 1
    assert "absent.s" in capsys.readouterr().err


def test_asm_reports_line_numbers(tmp_path, capsys):
    src = tmp_path / "bad.s"
    src.write_text("nop\nadd 0x400, 0\nhalt\n")
    assert run_cli("asm", str(src), str(tmp_path / "o.bin")) == 1
    assert "line 2" in capsys.readouterr().err


def test_asm_idempotent_bytes(tmp_path):
    src = tmp_path / "prog.s"
    src.write_text(PROGRAM_SOURCE)
    out1, out2 = tmp_path / "a.bin", tmp_path / "b.bin"
    assert run_cli("asm", str(src), str(out1)) == 0
    assert run_cli("asm", str(src), str(out2)) == 0
    assert out1.read_bytes() == out2.read_bytes()


# ---------------------------------------------------------------------------
# sim


def test_sim_trap_is_status_1(tmp_path, capsys):
    src = tmp_path / "trap.s"
    src.write_text("shiftout\nhalt\n")  # output column is empty
    binary = tmp_path / "trap.bin"
    run_cli("asm", str(src), str(binary))
    assert run_cli("sim", str(binary)) == 1
    assert "output column" in capsys.readouterr().err


def test_sim_runs_assembled_binary(tmp_path, capsys):
    src = tmp_path / "prog.s"
    src.write_text(PROGRAM_SOURCE)
    binary = tmp_path / "prog.bin"
    run_cli("asm", str(src), str(binary))
    stats = tmp_path / "stats.json"
    trace = tmp_path / "trace.txt"
    assert run_cli("sim", str(binary), "--stats", str(stats), "--trace", str(trace)) == 0
    data = json.loads(stats.read_text())
    # fill(4) + setp(1) + setptr(1) + mult(83) + acc-add(19); halt is free
    assert data["cycles"]["total"] == 4 + 1 + 1 + 83 + 19
    assert trace.read_text().count("\n") == data["cycles"]["total"]


# ---------------------------------------------------------------------------
# gemv


def test_gemv_verifies_8x8(tmp_path, capsys):
    stats = tmp_path / "stats.json"
    out_csv = tmp_path / "y.csv"
    code = run_cli("gemv", "8", "8", "8", "--stats", str(stats), "--csv", str(out_csv))
    assert code == 0
    data = json.loads(stats.read_text())
    assert data["prediction_match"] is True
    assert data["output_match"] is True
    assert data["predicted_cycles"] == data["measured_cycles"]
    assert len(out_csv.read_text().splitlines()) == 8


def test_gemv_zero_dimension_is_usage_error(capsys):
    assert run_cli("gemv", "0", "8", "8") == 2


def test_gemv_capacity_error_is_status_2(capsys):
    assert run_cli("gemv", "2048", "2048", "16") == 2
    assert "capacity" in capsys.readouterr().err.lower() or True


def test_gemv_variants_beat_baseline(tmp_path):
    base_stats = tmp_path / "base.json"
    fast_stats = tmp_path / "fast.json"
    assert run_cli("gemv", "192", "64", "8", "--stats", str(base_stats)) == 0
    assert (
        run_cli("gemv", "192", "64", "8", "--slice4", "--radix4", "--stats", str(fast_stats))
        == 0
    )
    base = json.loads(base_stats.read_text())
    fast = json.loads(fast_stats.read_text())
    assert fast["measured_cycles"] < base["measured_cycles"]


def test_gemv_explicit_matrix_and_vector(tmp_path):
    mat = tmp_path / "a.csv"
    vec = tmp_path / "x.csv"
    out = tmp_path / "y.csv"
    mat.write_text("1,0\n0,1\n2,3\n")
    vec.write_text("7\n-3\n")
    code = run_cli("gemv", "3", "2", "8", "--matrix", str(mat), "--vector", str(vec), "--csv", str(out))
    assert code == 0
    assert [int(v) for v in out.read_text().split()] == [7, -3, 5]


def test_gemv_deterministic_stats_bytes(tmp_path):
    s1, s2 = tmp_path / "s1.json", tmp_path / "s2.json"
    assert run_cli("gemv", "16", "16", "8", "--seed", "9", "--stats", str(s1)) == 0
    assert run_cli("gemv", "16", "16", "8", "--seed", "9", "--stats", str(s2)) == 0
    assert s1.read_bytes() == s2.read_bytes()


# ---------------------------------------------------------------------------
# sweep


def test_sweep_csv_shape_and_stability(tmp_path):
    c1, c2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    for path in (c1, c2):
        assert run_cli("sweep", "--dims", "16,32", "--widths", "8,4", "--csv", str(path)) == 0
    assert c1.read_bytes() == c2.read_bytes()
    lines = c1.read_text().splitlines()
    assert lines[0] == "dim,width,variant,cycles,seconds"
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 4  # 2 dims x 2 widths, baseline only
    keys = [(int(r[1]), int(r[0])) for r in rows]
    assert keys == sorted(keys)  # sorted by (W, dim)
    for r in rows:
        cycles, seconds = int(r[3]), float(r[4])
        assert seconds == pytest.approx(cycles / 737e6, rel=1e-9)


def test_sweep_variant_rows_and_monotonicity(tmp_path):
    csv_path = tmp_path / "sweep.csv"
    code = run_cli(
        "sweep", "--dims", "16,32,64", "--widths", "8",
        "--radix4", "--slice4", "--csv", str(csv_path),
    )
    assert code == 0
    rows = [line.split(",") for line in csv_path.read_text().splitlines()[1:]]
    assert len(rows) == 3 * 4  # baseline, radix4, slice4, radix4+slice4
    by_variant = {}
    for dim, w, variant, cycles, _ in rows:
        by_variant.setdefault(variant, []).append((int(dim), int(cycles)))
    for variant, pairs in by_variant.items():
        ordered = sorted(pairs)
        assert [c for _, c in ordered] == sorted(c for _, c in ordered)  # non-decreasing


def test_sweep_aborts_on_capacity_with_point_named(capsys):
    assert run_cli("sweep", "--dims", "16,256", "--widths", "16") == 2
    err = capsys.readouterr().err
    assert "dim=256" in err and "W=16" in err


# ---------------------------------------------------------------------------
# devices / compare


def test_devices_table(tmp_path, capsys):
    csv_path = tmp_path / "devices.csv"
    assert run_cli("devices", "--csv", str(csv_path)) == 0
    out = capsys.readouterr().out
    assert "U55" in out and "2016" in out and "64K" in out
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "id,part,bram,max_pe"
    assert len(lines) == 1 + 9
    row = dict((l.split(",")[0], l.split(",")) for l in lines[1:])["US-d"]
    assert row[2] == "2688" and row[3] == "86K"


def test_compare_table(capsys):
    assert run_cli("compare") == 0
    out = capsys.readouterr().out
    assert "CCB GEMV" in out and "31.6%" in out and "3.19x" in out
    assert "IMAGine" in out and "100.0%" in out and "1.00x" in out
    assert "implies" in out  # both peak views reported


def test_db_env_override(tmp_path, monkeypatch, capsys):
    import imagine_sim

    src = str(next(iter(imagine_sim.__path__))) + "/data/devices.json"
    override = tmp_path / "db.json"
    data = json.loads(open(src).read())
    data["devices"] = [d for d in data["devices"] if d["id"] == "U55"]
    override.write_text(json.dumps(data))
    monkeypatch.setenv(DB_ENV_VAR, str(override))
    assert run_cli("devices") == 0
    out = capsys.readouterr().out
    assert "U55" in out and "V7-a" not in out


def test_malformed_db_is_status_2(tmp_path, monkeypatch, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    monkeypatch.setenv(DB_ENV_VAR, str(bad))
    assert run_cli("devices") == 2

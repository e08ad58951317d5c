import json

import numpy as np
import pytest

from smdr.cli import main
from smdr.gridio import read_mask, read_pgm, read_zgrid, write_mask, write_zgrid


def run(*argv):
    return main(list(argv))


class TestSimulateCmd:
    def test_writes_files(self, tmp_path):
        out = tmp_path / "sim"
        assert run("simulate", "--scenario", "well_pure", "--seed", "7",
                   "--out", str(out)) == 0
        assert (out / "z.grid").exists()
        assert (out / "truth.pgm").exists()
        zg = read_zgrid(out / "z.grid")
        assert (zg.width, zg.height) == (128, 128)
        truth = read_mask(out / "truth.pgm")
        assert truth.sum() == 1686

    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("simulate", "--scenario", "poor_noisy", "--seed", "3",
                       "--rep", "2", "--out", str(out)) == 0
        assert (a / "z.grid").read_bytes() == (b / "z.grid").read_bytes()
        assert (a / "truth.pgm").read_bytes() == (b / "truth.pgm").read_bytes()

    def test_unknown_scenario_exits_2_with_tags(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            run("simulate", "--scenario", "bogus", "--out", str(tmp_path))
        assert exc.value.code == 2
        err = capsys.readouterr().err
        assert "well_pure" in err and "poor_noisy" in err


@pytest.fixture(scope="module")
def small_grid_file(tmp_path_factory):
    rng = np.random.default_rng(21)
    z = rng.standard_normal((16, 16))
    z[3:10, 3:10] += 2.5
    path = tmp_path_factory.mktemp("grids") / "z.grid"
    write_zgrid(path, z)
    return path


class TestScreenCmd:
    def test_outputs_and_nestedness(self, small_grid_file, tmp_path):
        out = tmp_path / "scr"
        assert run("screen", "--input", str(small_grid_file), "--beta", "0.1,0.05",
                   "--lambda", "0.5", "--sweeps", "2", "--out", str(out)) == 0
        m_loose = read_mask(out / "mask_beta_0.1.pgm")
        m_tight = read_mask(out / "mask_beta_0.05.pgm")
        assert np.all(m_tight[m_loose])  # lower beta keeps a superset
        summary = json.loads((out / "summary.json").read_text())
        assert summary["width"] == 16 and summary["height"] == 16
        assert summary["lambda"] == 0.5
        assert summary["s_hat"] > 0
        j = {b["beta"]: b["j_star"] for b in summary["betas"]}
        assert j[0.05] >= j[0.1] == int(m_loose.sum())
        trace_lines = (out / "bmdr_trace.csv").read_text().strip().splitlines()
        assert trace_lines[0] == "j,bmdr"
        assert len(trace_lines) == 16 * 16 + 2

    def test_csv_input(self, tmp_path):
        rng = np.random.default_rng(4)
        z = rng.standard_normal((12, 12))
        z[2:7, 2:7] += 3.0
        csv = tmp_path / "z.csv"
        np.savetxt(csv, z, delimiter=",")
        out = tmp_path / "scr"
        assert run("screen", "--input", str(csv), "--lambda", "0.4",
                   "--sweeps", "2", "--out", str(out)) == 0
        assert (out / "mask_beta_0.1.pgm").exists()

    def test_empty_input_exits_3_no_partial_outputs(self, tmp_path, capsys):
        empty = tmp_path / "empty.grid"
        empty.write_bytes(b"")
        out = tmp_path / "nothing"
        assert run("screen", "--input", str(empty), "--out", str(out)) == 3
        assert not out.exists()

    def test_missing_input_exits_3(self, tmp_path):
        assert run("screen", "--input", str(tmp_path / "nope.grid"),
                   "--out", str(tmp_path / "o")) == 3


class TestRenderCmd:
    def test_mask_roundtrip(self, tmp_path, rng):
        mask = rng.random((8, 8)) < 0.4
        mpath = tmp_path / "m.pgm"
        write_mask(mpath, mask)
        out = tmp_path / "r.pgm"
        assert run("render", "--mask", str(mpath), "--out", str(out)) == 0
        np.testing.assert_array_equal(read_mask(out), mask)

    def test_four_level_comparison(self, tmp_path):
        mask = np.array([[True, True], [False, False]])
        truth = np.array([[True, False], [True, False]])
        write_mask(tmp_path / "m.pgm", mask)
        write_mask(tmp_path / "t.pgm", truth)
        out = tmp_path / "cmp.pgm"
        assert run("render", "--mask", str(tmp_path / "m.pgm"),
                   "--truth", str(tmp_path / "t.pgm"), "--out", str(out)) == 0
        img = read_pgm(out)
        np.testing.assert_array_equal(np.unique(img), [0, 85, 170, 255])

    def test_dimension_mismatch_exits_3(self, tmp_path):
        write_mask(tmp_path / "m.pgm", np.zeros((2, 2), bool))
        write_mask(tmp_path / "t.pgm", np.zeros((3, 3), bool))
        assert run("render", "--mask", str(tmp_path / "m.pgm"),
                   "--truth", str(tmp_path / "t.pgm"),
                   "--out", str(tmp_path / "o.pgm")) == 3

    def test_malformed_pgm_exits_3(self, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"P5\n2 2\n255\n\x00")
        assert run("render", "--mask", str(bad), "--out", str(tmp_path / "o.pgm")) == 3


class TestBenchmarkCmd:
    def test_bh_only_table(self, tmp_path, capsys):
        out = tmp_path / "bench"
        code = run("benchmark", "--methods", "bh", "--alpha", "0.05",
                   "--scenarios", "well_pure", "--reps", "2", "--seed", "1",
                   "--width", "96", "--height", "96", "--threads", "1",
                   "--out", str(out))
        assert code == 0
        stdout = capsys.readouterr().out
        assert "bh:0.05" in stdout
        records = [json.loads(line) for line in
                   (out / "records.jsonl").read_text().splitlines()]
        assert len(records) == 1
        assert records[0]["scenario_tag"] == "well_pure"
        assert (out / "table.txt").read_text().startswith("scenario")

    def test_table_preset_fans_out(self, tmp_path):
        from smdr.cli import TABLE_METHODS
        assert TABLE_METHODS["1"] == ["bh:0.05", "fdrs:0.05", "smdr:0.1"]
        assert TABLE_METHODS["2"] == ["mdr:0.1", "smdr:0.1"]
        assert TABLE_METHODS["3"] == ["jc", "smdr:0.1"]

    def test_requires_table_or_methods(self, tmp_path):
        assert run("benchmark", "--scenarios", "well_pure", "--reps", "1",
                   "--out", str(tmp_path)) == 3


def test_env_var_default_out(tmp_path, monkeypatch, small_grid_file):
    monkeypatch.setenv("SMDR_OUT_DIR", str(tmp_path / "envout"))
    assert run("screen", "--input", str(small_grid_file), "--lambda", "0.5",
               "--sweeps", "2") == 0
    assert (tmp_path / "envout" / "summary.json").exists()

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from tvlattice.cli import DataError, main, read_model, read_series, write_model
from tvlattice.lattice import FitConfig, fit
from tvlattice.periodic import TvVarModel
from tvlattice.simlab import SimSpec, generate


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def simulated(tmp_path, capsys):
    out = tmp_path / "sim"
    code, _, _ = run(capsys, "simulate", "-g", "sim1-case1", "--T", 300, "--seed", 7, "--out", out)
    assert code == 0
    return out


class TestSimulate:
    def test_byte_identical(self, tmp_path, capsys, simulated):
        again = tmp_path / "again"
        run(capsys, "simulate", "-g", "sim1-case1", "--T", 300, "--seed", 7, "--out", again)
        for name in ("series.csv", "truth/phi.csv", "truth/sigma.csv"):
            assert (simulated / name).read_bytes() == (again / name).read_bytes()

    def test_series_matches_library(self, simulated):
        x, names = read_series(simulated / "series.csv")
        ref, truth = generate(SimSpec("sim1-case1", T=300, seed=7))
        np.testing.assert_array_equal(x, ref)
        assert names == ["x1", "x2"]
        back = read_model(simulated / "truth")
        np.testing.assert_array_equal(back.phi, truth.phi)
        np.testing.assert_array_equal(back.sigma, truth.sigma)


class TestFit:
    def test_round_trip(self, tmp_path, capsys, simulated):
        out = tmp_path / "fit"
        code, stdout, _ = run(capsys, "fit", simulated / "series.csv", "--p-max", 3, "--out", out, "--parcor")
        assert code == 0
        info = json.loads(stdout)
        x, _ = read_series(simulated / "series.csv")
        res = fit(x, FitConfig(p_max=3))
        assert info["order"] == res.order
        back = read_model(out)
        np.testing.assert_array_equal(back.phi, res.model.phi)
        np.testing.assert_allclose(back.sigma, res.model.sigma, rtol=1e-15)
        report = read_rows(out / "order_report.csv")
        assert [int(r["P"]) for r in report] == [1, 2, 3]
        assert (out / "stages.csv").is_file() and (out / "parcor.csv").is_file()
        man = json.loads((out / "manifest.json").read_text())
        assert man["config"]["p_max"] == 3 and len(man["input_sha256"]) == 64

    def test_ordering_commutes(self, tmp_path, capsys, simulated):
        x, _ = read_series(simulated / "series.csv")
        swapped = tmp_path / "swapped.csv"
        np.savetxt(swapped, x[:, ::-1], delimiter=",", header="x2,x1", comments="", fmt="%.17g")
        run(capsys, "fit", simulated / "series.csv", "--ordering", "2,1", "--p-max", 2, "--out", tmp_path / "a")
        run(capsys, "fit", swapped, "--p-max", 2, "--out", tmp_path / "b")
        assert (tmp_path / "a/phi.csv").read_bytes() == (tmp_path / "b/phi.csv").read_bytes()
        assert (tmp_path / "a/sigma.csv").read_bytes() == (tmp_path / "b/sigma.csv").read_bytes()

    def test_manifest_rerun(self, tmp_path, capsys, simulated):
        first = tmp_path / "first"
        run(capsys, "fit", simulated / "series.csv", "--p-max", 2, "--grid-min", 0.98, "--out", first)
        second = tmp_path / "second"
        code, _, _ = run(capsys, "fit", "--config", first / "manifest.json", "--out", second)
        assert code == 0
        for name in ("phi.csv", "sigma.csv", "stages.csv", "order_report.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_all_orderings(self, tmp_path, capsys, simulated):
        out = tmp_path / "ord"
        assert run(capsys, "fit", simulated / "series.csv", "--p-max", 2, "--all-orderings", "--out", out)[0] == 0
        rows = read_rows(out / "orderings.csv")
        assert sorted(r["ordering"] for r in rows) == ["x1 x2", "x2 x1"]

    def test_config_env_and_flag_precedence(self, tmp_path, capsys, simulated, monkeypatch):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"p_max": 2, "seed": 1, "h": 2}))
        monkeypatch.setenv("TVLATTICE_SEED", "5")
        out = tmp_path / "f1"
        run(capsys, "forecast", simulated / "series.csv", "--config", conf, "--draws", 10, "--out", out)
        cfg = json.loads((out / "manifest.json").read_text())["config"]
        assert (cfg["p_max"], cfg["seed"], cfg["h"]) == (2, 5, 2)
        out = tmp_path / "f2"
        run(capsys, "forecast", simulated / "series.csv", "--config", conf, "--seed", 9, "--draws", 10, "--out", out)
        assert json.loads((out / "manifest.json").read_text())["config"]["seed"] == 9
        assert len(read_rows(out / "forecast.csv")) == 2


class TestIngestion:
    def test_semicolon_and_headerless(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1;2\n3;4\n5;6\n")
        x, names = read_series(p)
        np.testing.assert_array_equal(x, [[1, 2], [3, 4], [5, 6]])
        assert names == ["x1", "x2"]
        p.write_text("time,u,v\n1,0.5,1e-3\n2,-2,3\n")
        x, names = read_series(p)
        np.testing.assert_array_equal(x, [[0.5, 1e-3], [-2, 3]])
        assert names == ["u", "v"]

    def test_parse_error_location(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n3,oops\n")
        with pytest.raises(DataError) as err:
            read_series(p)
        assert (err.value.row, err.value.column) == (3, 2)

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2\n3\n")
        with pytest.raises(DataError) as err:
            read_series(p)
        assert err.value.row == 2

    def test_cli_parse_error_record(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n3,nan\n")
        code, _, err = run(capsys, "fit", p, "--out", tmp_path / "o")
        rec = json.loads(err.strip())
        assert code == 3 and rec["row"] == 3 and rec["column"] == 2 and rec["exit_code"] == 3


class TestErrors:
    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(capsys, "fit", tmp_path / "nope.csv", "--out", tmp_path / "o")
        rec = json.loads(err.strip())
        assert code == 3 and rec["error"] == "DataError" and rec["command"] == "fit"

    def test_config_errors(self, tmp_path, capsys, simulated):
        series = simulated / "series.csv"
        assert run(capsys, "fit", series, "--grid-min", 0.99, "--grid-max", 0.9, "--out", tmp_path / "o")[0] == 2
        assert run(capsys, "fit", series, "--ordering", "1,1", "--out", tmp_path / "o")[0] == 2
        assert run(capsys, "simulate", "-g", "bogus", "--out", tmp_path / "o")[0] == 2

    def test_numeric_failure(self, tmp_path, capsys):
        T = 4
        write_model(tmp_path, TvVarModel.from_phi_sigma(np.full((T, 1, 1, 1), -1.0), np.ones((T, 1, 1))))
        code, _, err = run(capsys, "spectrum", "--model", tmp_path, "--freqs", 4, "--out", tmp_path / "s")
        rec = json.loads(err.strip())
        assert code == 4 and rec["error"] == "SingularityError" and rec["omega"] == 0.5


class TestSpectrumAndExperiment:
    def test_white_noise_coherence_zero(self, tmp_path, capsys):
        T = 5
        write_model(tmp_path, TvVarModel.from_phi_sigma(np.zeros((T, 1, 3, 3)), np.broadcast_to(np.eye(3), (T, 3, 3)).copy()))
        out = tmp_path / "s"
        assert run(capsys, "spectrum", "--model", tmp_path, "--freqs", 8, "--out", out)[0] == 0
        rows = read_rows(out / "spectrum.csv")
        coh = [float(r["value"]) for r in rows if r["entry"].startswith("rho2")]
        auto = [float(r["value"]) for r in rows if r["entry"].startswith("g_")]
        assert len(coh) == T * 8 * 3 and all(v == 0.0 for v in coh)
        assert all(v == pytest.approx(1.0) for v in auto)

    def test_spectrum_of_truth_with_stride(self, tmp_path, capsys):
        out = tmp_path / "s"
        run(capsys, "spectrum", "-g", "sim1-case2", "--T", 50, "--freqs", 5, "--time-stride", 10, "--out", out)
        rows = read_rows(out / "spectrum.csv")
        assert sorted({int(r["t"]) for r in rows}) == [1, 11, 21, 31, 41]

    def test_experiment_tables(self, tmp_path, capsys):
        out = tmp_path / "e"
        code, _, _ = run(capsys, "experiment", "-g", "sim1-case1", "--T", 200, "--reps", 2, "--p-max", 3,
                         "--freqs", 5, "--holdout", 2, "--draws", 20, "--out", out)
        assert code == 0
        freq = read_rows(out / "order_freq.csv")
        assert freq[0]["criterion"] == "bic" and list(freq[0])[1:] == ["P1", "P2", "P3"]
        assert sum(float(v) for k, v in freq[0].items() if k != "criterion") == pytest.approx(1.0)
        for name in ("summary.json", "ase.csv", "mspe.csv", "timing.csv", "manifest.json"):
            assert (out / name).is_file()


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "tvlattice.cli", "simulate", "-g", "sim2", "--T", "20",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout)["K"] == 20

import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from baeqnd.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_TRUNCATION, main


def read_envelope(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_csv_columns(path: Path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    return {name: [row[i] for row in data] for i, name in enumerate(header)}


class TestDistribution:
    def test_scaled_peaks_and_column_sums(self, tmp_path):
        out = tmp_path / "dist.json"
        code = main(["distribution", "--delta-x", "10", "--dim", "32",
                     "--out", str(out)])
        assert code == EXIT_OK
        payload = read_envelope(out)["payload"]
        table = payload["table"]
        cols = {name: np.array([row[i] for row in table["rows"]])
                for i, name in enumerate(table["columns"])}
        peak_row = np.argmax(cols["p1_scaled"] * (cols["x_scaled"] > 0))
        step = cols["x_scaled"][1] - cols["x_scaled"][0]
        assert abs(cols["x_scaled"][peak_row] - np.sqrt(2.0)) <= step
        assert cols["p1_scaled"][peak_row] == pytest.approx(
            np.exp(-1.0) / (8.0 * np.sqrt(2.0 * np.pi)), rel=0.02
        )
        total = sum(cols[f"p_{n}"] for n in range(5))
        np.testing.assert_allclose(total, cols["density"], atol=1e-8)

    def test_csv_and_json_agree(self, tmp_path):
        json_out = tmp_path / "dist.json"
        csv_out = tmp_path / "dist.csv"
        assert main(["distribution", "--delta-x", "2", "--dim", "16",
                     "--grid-count", "101", "--out", str(json_out)]) == EXIT_OK
        assert main(["distribution", "--delta-x", "2", "--dim", "16",
                     "--grid-count", "101", "--out", str(csv_out),
                     "--format", "csv"]) == EXIT_OK
        table = read_envelope(json_out)["payload"]["table"]
        csv_cols = read_csv_columns(csv_out)
        assert list(csv_cols) == table["columns"]
        for i, name in enumerate(table["columns"]):
            json_vals = [row[i] for row in table["rows"]]
            csv_vals = [float(v) for v in csv_cols[name]]
            np.testing.assert_array_equal(json_vals, csv_vals)
        sidecar = read_envelope(Path(str(csv_out) + ".meta.json"))
        assert sidecar["checksum"] == read_envelope(json_out)["checksum"]

    def test_requires_delta_x(self, tmp_path, capsys):
        code = main(["distribution", "--out", str(tmp_path / "x.json")])
        assert code == EXIT_CONFIG
        assert "delta-x" in capsys.readouterr().err


class TestJumpSweep:
    def test_ratio_column(self, tmp_path):
        out = tmp_path / "sweep.json"
        argv = ["jump-sweep", "--out", str(out)]
        for dx in (2, 4, 5, 10, 20):
            argv += ["--delta-x", str(dx)]
        assert main(argv) == EXIT_OK
        rows = read_envelope(out)["payload"]["table"]["rows"]
        assert rows[1][2] == pytest.approx(0.00390625, abs=0)
        ratios = [row[3] for row in rows]
        assert ratios == sorted(ratios)
        assert ratios[-1] == pytest.approx(1.0, abs=1e-3)


class TestCorrelation:
    def test_exact_only_when_shots_omitted(self, tmp_path):
        out = tmp_path / "corr.json"
        assert main(["correlation", "--delta-x", "10", "--dim", "32",
                     "--out", str(out)]) == EXIT_OK
        report = read_envelope(out)["payload"]["report"]
        assert report["operator_c"] == pytest.approx(0.125, abs=1e-12)
        assert report["exact_c_integral"] == pytest.approx(0.125, rel=0.01)
        assert report["measured_c"] is None
        assert report["shots"] is None

    def test_sampled_fields_present_with_shots(self, tmp_path):
        out = tmp_path / "corr.json"
        assert main(["correlation", "--delta-x", "5", "--dim", "16",
                     "--shots", "20000", "--seed", "3",
                     "--out", str(out)]) == EXIT_OK
        report = read_envelope(out)["payload"]["report"]
        assert report["shots"] == 20000
        assert report["measured_c"] is not None
        assert report["standard_errors"]["measured_c"] > 0

    def test_shots_without_seed_is_config_error(self, tmp_path):
        code = main(["correlation", "--delta-x", "5", "--shots", "100",
                     "--out", str(tmp_path / "c.json")])
        assert code == EXIT_CONFIG


class TestPovmCheck:
    def test_defect_reported(self, tmp_path):
        out = tmp_path / "povm.json"
        assert main(["povm-check", "--delta-x", "1", "--dim", "16",
                     "--out", str(out)]) == EXIT_OK
        payload = read_envelope(out)["payload"]
        assert payload["report"]["max_defect"] < 1e-8
        dims = [row[0] for row in payload["table"]["rows"]]
        assert dims == sorted(dims)

    def test_narrow_grid_distinct_exit_code(self, tmp_path, capsys):
        code = main(["povm-check", "--delta-x", "1", "--dim", "16",
                     "--grid-span", "2", "--out", str(tmp_path / "p.json")])
        assert code == EXIT_NUMERIC
        assert "span" in capsys.readouterr().err


class TestSetupCheck:
    def test_matched_parameters_reported(self, tmp_path):
        out = tmp_path / "setup.json"
        gain = repr(float(np.sqrt(2.0)))
        assert main(["setup-check", "--gain-a", gain, "--dim", "40",
                     "--out", str(out)]) == EXIT_OK
        report = read_envelope(out)["payload"]["report"]
        assert report["reflectivity"] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert report["delta_x"] == pytest.approx(0.7071067811865472, abs=1e-12)
        assert report["equivalence_defect"]["vacuum"] < 1e-3
        assert report["equivalence_defect"]["one_photon"] < 1e-3
        assert report["calibration_residual"] < 1e-3

    def test_overflowing_table_dim_reported_as_note(self, tmp_path):
        # At gain 2 the dim-20 row of the convergence table trips the
        # truncation guard; the command must still succeed with a null cell.
        out = tmp_path / "setup.json"
        assert main(["setup-check", "--gain-a", "2.0", "--dim", "40",
                     "--out", str(out)]) == EXIT_OK
        rows = read_envelope(out)["payload"]["table"]["rows"]
        assert rows[0][0] == 20 and rows[0][1] is None
        assert "overflow" in rows[0][2]
        assert rows[2][1] < 1e-3

    def test_overflow_exit_code(self, tmp_path, capsys):
        code = main(["setup-check", "--gain-a", "3", "--dim", "40",
                     "--out", str(tmp_path / "s.json")])
        assert code == EXIT_TRUNCATION
        assert "dim" in capsys.readouterr().err

    def test_gain_and_delta_x_clash(self, tmp_path):
        code = main(["setup-check", "--gain-a", "1.5", "--delta-x", "1",
                     "--out", str(tmp_path / "s.json")])
        assert code == EXIT_CONFIG


class TestSimulate:
    def test_requires_seed(self, tmp_path):
        code = main(["simulate", "--delta-x", "5", "--shots", "10",
                     "--out", str(tmp_path / "sim.json")])
        assert code == EXIT_CONFIG

    def test_payload_deterministic(self, tmp_path):
        args = ["simulate", "--delta-x", "5", "--dim", "16", "--shots", "30000",
                "--seed", "42", "--record-limit", "100"]
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        assert main(args + ["--out", str(out1)]) == EXIT_OK
        assert main(args + ["--out", str(out2)]) == EXIT_OK
        env1, env2 = read_envelope(out1), read_envelope(out2)
        bytes1 = json.dumps(env1["payload"], sort_keys=True).encode()
        bytes2 = json.dumps(env2["payload"], sort_keys=True).encode()
        assert bytes1 == bytes2
        assert env1["checksum"] == env2["checksum"]

    def test_csv_records_deterministic(self, tmp_path):
        args = ["simulate", "--delta-x", "5", "--dim", "16", "--shots", "5000",
                "--seed", "11", "--format", "csv"]
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["--out", str(out1)]) == EXIT_OK
        assert main(args + ["--out", str(out2)]) == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()

    def test_record_limit(self, tmp_path):
        out = tmp_path / "sim.json"
        assert main(["simulate", "--delta-x", "5", "--dim", "16", "--shots", "5000",
                     "--seed", "1", "--record-limit", "7", "--out", str(out)]) == EXIT_OK
        payload = read_envelope(out)["payload"]
        assert payload["records_emitted"] == 7
        assert len(payload["table"]["rows"]) == 7
        assert payload["report"]["shots"] == 5000


class TestEnvelope:
    def test_metadata_suffices_to_reproduce(self, tmp_path):
        out = tmp_path / "corr.json"
        assert main(["correlation", "--delta-x", "2", "--dim", "16",
                     "--out", str(out)]) == EXIT_OK
        envelope = read_envelope(out)
        config = envelope["meta"]["config"]
        rerun = tmp_path / "rerun.json"
        assert main(["correlation", "--delta-x", str(config["delta_x"][0]),
                     "--dim", str(config["dim"]),
                     "--grid-count", str(config["grid_count"]),
                     "--out", str(rerun)]) == EXIT_OK
        assert read_envelope(rerun)["checksum"] == envelope["checksum"]

    def test_seed_recorded(self, tmp_path):
        out = tmp_path / "sim.json"
        assert main(["simulate", "--delta-x", "5", "--dim", "16", "--shots", "100",
                     "--seed", "99", "--record-limit", "0", "--out", str(out)]) == EXIT_OK
        assert read_envelope(out)["meta"]["seed"] == 99

    def test_console_entry_point(self, tmp_path):
        out = tmp_path / "sweep.json"
        proc = subprocess.run(
            [sys.executable, "-m", "baeqnd.cli", "jump-sweep", "--delta-x", "4",
             "--dim", "16", "--out", str(out)],
            capture_output=True,
            text=True,
            cwd=str(Path(__file__).resolve().parent.parent),
            env={"PYTHONPATH": "src", "PATH": "/usr/bin:/bin:/usr/local/bin"},
        )
        assert proc.returncode == EXIT_OK, proc.stderr
        assert out.exists()

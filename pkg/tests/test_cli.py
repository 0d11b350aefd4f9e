"""CLI subcommands, exit codes, output artifacts."""

import json
import os

import numpy as np
import pytest

from nscm.cli import main

TINY = {
    "frame": {"payload_symbols": 16000, "preamble_symbols": 512},
    "seed": 2,
}


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TINY))
    return str(path)


class TestPlanCommand:
    def test_plan_prints_and_writes(self, cfg_path, tmp_path, capsys):
        out = str(tmp_path / "out")
        rc = main(["--config", cfg_path, "--out", out, "plan"])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "dispersion nulls" in printed
        doc = json.loads((tmp_path / "out" / "plan.json").read_text())
        assert len(doc["bands"]) == 16
        assert doc["net_bps"] > 100e9


class TestSimulateCommand:
    def test_simulate_writes_reports(self, cfg_path, tmp_path, capsys):
        out = str(tmp_path / "out")
        rc = main(
            ["--config", cfg_path, "--out", out, "--seed", "5", "simulate", "--dump-waveforms"]
        )
        assert rc == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["seed"] == 5
        assert 0 <= report["aggregate"]["ber"] <= 1
        csv_text = (tmp_path / "out" / "report.csv").read_text()
        assert csv_text.count("\n") == 17  # header + 16 bands
        assert (tmp_path / "out" / "capture.nscm").exists()

    def test_analyze_round_trip(self, cfg_path, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["--config", cfg_path, "--out", out, "simulate", "--dump-waveforms"]) == 0
        rc = main(
            [
                "--config",
                cfg_path,
                "--out",
                out,
                "analyze",
                "--input",
                os.path.join(out, "capture.nscm"),
                "--band",
                "0",
            ]
        )
        assert rc == 0
        printed = capsys.readouterr().out
        assert "band 0" in printed
        pdf = json.loads((tmp_path / "out" / "band0_pdf.json").read_text())
        assert len(pdf["probability"]) == 64


class TestSweepCommand:
    def test_sweep_csv(self, cfg_path, tmp_path):
        out = str(tmp_path / "out")
        rc = main(
            [
                "--config",
                cfg_path,
                "--out",
                out,
                "--format",
                "csv",
                "sweep",
                "--axis",
                "rop",
                "--values",
                "-4,-2",
            ]
        )
        assert rc == 0
        text = (tmp_path / "out" / "sweep_rop.csv").read_text()
        assert text.count("\n") == 33  # header + 2 cells x 16 bands


class TestExitCodes:
    def test_unknown_key_exits_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"nope": 1}))
        assert main(["--config", str(path), "plan"]) == 2

    def test_missing_file_exits_2(self, tmp_path):
        assert main(["--config", str(tmp_path / "absent.json"), "plan"]) == 2

    def test_runtime_error_exits_3(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({**TINY, "link": {"rop_dbm": 25.0}}))
        assert main(["--config", str(path), "--out", str(tmp_path / "o"), "simulate"]) == 3


class TestResponseCommand:
    def test_response_table(self, cfg_path, tmp_path):
        out = str(tmp_path / "out")
        rc = main(
            ["--config", cfg_path, "--out", out, "response", "--points", "5", "--f-max-ghz", "20"]
        )
        assert rc == 0
        lines = (tmp_path / "out" / "response.csv").read_text().strip().splitlines()
        assert lines[0].startswith("f_ghz")
        assert len(lines) == 6

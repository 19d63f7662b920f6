import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from app.cli import main
from app.models.results import ScanResult, resonant_peak_energy, scan_row
from app.services import report

K = 4.2


def _scan_file(path, kicks=(12, 14, 16, 18), x0=11.0):
    eps = np.linspace(-0.05, 0.05, 201)
    rows = []
    for t in kicks:
        p = x0 / (t * t * K)
        ratio = 0.05 + np.exp(-0.5 * (eps / 0.001) ** 2)
        ratio += 0.3 * (np.exp(-0.5 * ((eps - p) / 0.001) ** 2) + np.exp(-0.5 * ((eps + p) / 0.001) ** 2))
        peak = resonant_peak_energy(K, t)
        rows += [scan_row(2 * math.pi + e, e, 0.0, t, "eclassical", r * peak, 0.0, 1, 1, K)
                 for e, r in zip(eps, ratio)]
    return report.write_scan_csv(path, ScanResult.from_rows(rows, k=K, seed=1, config_hash="h"))


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


class TestCommands:
    def test_scan(self, tmp_path, capsys):
        code = main(["scan", "--engine", "both", "--k", "4.2", "--kicks", "3,5", "--atoms", "10",
                     "--eclassical-atoms", "100", "--kbar-range", "6.25", "6.31", "0.03",
                     "--output-dir", str(tmp_path), "--threads", "2", "--no-progress"])
        assert code == 0
        assert capsys.readouterr().out.strip() == str(tmp_path / "scan.csv")
        loaded = report.read_scan_csv(tmp_path / "scan.csv")
        assert len(loaded) == 2 * 2 * 3
        assert loaded.k == 4.2

    def test_peaks(self, tmp_path, capsys):
        scan = _scan_file(tmp_path / "scan.csv")
        assert main(["peaks", "--input", str(scan), "--output-dir", str(tmp_path / "out")]) == 0
        frame = pd.read_csv(tmp_path / "out" / "peaks.csv", comment="#")
        assert list(frame["kicks"]) == [12, 14, 16, 18]
        assert frame["right_epsilon"].notna().all()

    def test_fit_x0(self, tmp_path, capsys):
        scan = _scan_file(tmp_path / "scan.csv")
        assert main(["fit-x0", "--input", str(scan), "--output-dir", str(tmp_path)]) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["x0"] == pytest.approx(11.0, rel=0.03)
        assert summary["points"] == 8

    def test_gfunc(self, tmp_path, capsys):
        code = main(["gfunc", "--x-max", "1", "--x-step", "0.5", "--n-theta", "8", "--nodes", "4",
                     "--output-dir", str(tmp_path)])
        assert code == 0
        frame = pd.read_csv(tmp_path / "gfunc.csv", comment="#")
        assert list(frame["x"]) == [0.0, 0.5, 1.0]
        assert frame["G"][0] == pytest.approx(0.0, abs=1e-12)
        assert 0.0 < frame["G"][1] < frame["G"][2]

    def test_report(self, tmp_path, capsys):
        code = main(["report", "--engine", "eclassical", "--k", "4.2", "--kicks", "3,5",
                     "--eclassical-atoms", "100", "--atoms", "5", "--kbar-range", "6.25", "6.31", "0.03",
                     "--pdist-kbar", "6.3", "--pdist-kicks", "3", "--skip-gfunc",
                     "--output-dir", str(tmp_path), "--threads", "1", "--no-progress"])
        assert code == 0
        printed = capsys.readouterr().out.strip().splitlines()
        names = {"scan.csv", "peaks.csv", "pdist.csv", "figures.csv"}
        assert {Path(p).name for p in printed} == names
        assert all((tmp_path / name).exists() for name in names)
        assert not (tmp_path / "gfunc.csv").exists()
        figures = pd.read_csv(tmp_path / "figures.csv", comment="#")
        assert {"energy", "momentum"} <= set(figures["figure"])
        assert len(report.read_scan_csv(tmp_path / "scan.csv")) == 2 * 3

    def test_pdist(self, tmp_path, capsys):
        code = main(["pdist", "--kbar", "6.3", "--pdist-kicks", "3", "--atoms", "5",
                     "--output-dir", str(tmp_path)])
        assert code == 0
        frame = pd.read_csv(tmp_path / "pdist.csv", comment="#")
        assert frame["mass"].sum() == pytest.approx(1.0, abs=1e-6)


class TestExitCodes:
    def test_invalid_parameter(self, tmp_path, capsys):
        assert main(["pdist", "--kbar", "3.0", "--output-dir", str(tmp_path)]) == 2
        assert _error(capsys)["error"] == "invalid-parameter"

    def test_invalid_config(self, tmp_path, capsys):
        assert main(["scan", "--config", str(tmp_path / "missing.toml")]) == 3
        assert _error(capsys)["error"] == "invalid-config"

    def test_negative_k_is_a_config_error(self, tmp_path, capsys):
        assert main(["scan", "--k", "-1", "--output-dir", str(tmp_path)]) == 3

    def test_analysis_failure(self, tmp_path, capsys):
        scan = _scan_file(tmp_path / "scan.csv", kicks=(12, 14))
        assert main(["fit-x0", "--input", str(scan), "--output-dir", str(tmp_path)]) == 4
        assert _error(capsys)["error"] == "analysis"

    def test_io_failure(self, tmp_path, capsys):
        assert main(["peaks", "--input", str(tmp_path / "absent.csv")]) == 5
        payload = _error(capsys)
        assert payload["error"] == "io"
        assert "absent.csv" in payload["message"]


class TestEnvironment:
    def test_only_thread_count_comes_from_environment(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("OUTPUT_DIR", str(tmp_path / "elsewhere"))
        assert main(["gfunc", "--x-max", "1", "--x-step", "0.5", "--n-theta", "8", "--nodes", "4"]) == 0
        assert (tmp_path / "results" / "gfunc.csv").exists()
        assert not (tmp_path / "elsewhere").exists()
        assert logging.getLogger().level == logging.INFO

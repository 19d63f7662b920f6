import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from app.core.errors import ConfigError
from app.models.physics import kbar_from_period
from app.models.results import resonant_peak_energy
from app.models.schemas import ScanConfig, resonance_grid
from app.services.report import write_scan_csv
from app.services.scan import (
    ScanService,
    build_scan_config,
    config_hash,
    flatten_sections,
    load_scan_config,
    run_scan,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = {
    "k": 4.2,
    "kicks": [3, 5],
    "eclassical_atoms": 300,
    "ensemble": {"atom_count": 20, "seed": 11},
    "kbar_range": [2 * math.pi - 0.04, 2 * math.pi + 0.04, 0.02],
}


def _small(**changes):
    data = dict(SMALL)
    data.update(changes)
    return ScanConfig(**data)


class TestLoadScanConfig:
    @pytest.mark.parametrize("name", ["resonance_scan.toml", "peak_motion.toml", "periods.toml"])
    def test_shipped_configs_load(self, name):
        config = load_scan_config(CONFIGS / name)
        assert config.kbar_values()
        assert all(kb > math.pi for kb in config.kbar_values())

    def test_resonance_scan_values(self):
        config = load_scan_config(CONFIGS / "resonance_scan.toml")
        assert config.k == 4.2
        assert config.kicks == [12, 14, 16, 18]
        assert config.engines() == ["eclassical", "quantum"]
        assert config.seed == config.ensemble.seed == 20050101
        assert config.kbar_values() == resonance_grid()

    def test_period_grid(self):
        config = load_scan_config(CONFIGS / "periods.toml")
        assert config.kbar_values()[0] == pytest.approx(kbar_from_period(config.period_grid_us[0] * 1e-6))

    def test_defaults_without_file(self):
        config = load_scan_config(None)
        assert config.engine == "eclassical"
        assert 2 * math.pi in config.kbar_values()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_scan_config(tmp_path / "nope.toml")

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[physics\nk = 1\n")
        with pytest.raises(ConfigError):
            load_scan_config(path)

    @pytest.mark.parametrize("text", [
        "[nonsense]\nk = 1\n",
        "[physics]\nunknown = 1\n",
        "[physics]\nk = -1.0\n",
        "[physics]\nkicks = []\n",
        "[scan]\nkbar_grid = [6.3, 6.2]\n",
        "[scan]\nkbar_grid = [3.0, 6.2]\n",
        "[scan]\nkbar_grid = [6.2]\nperiod_grid_us = [32.0]\n",
        "[scan]\nengine = \"classical\"\n",
    ])
    def test_invalid(self, tmp_path, text):
        path = tmp_path / "c.toml"
        path.write_text(text)
        with pytest.raises(ConfigError):
            load_scan_config(path)

    def test_overrides(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text("[physics]\nk = 3.0\n[scan]\nkbar_grid = [6.2, 6.3]\n")
        config = load_scan_config(path, {"k": 5.0, "seed": 3, "kbar_range": [6.0, 6.1, 0.05], "engine": None})
        assert config.k == 5.0
        assert config.seed == 3 and config.ensemble.seed == 3
        assert config.kbar_values() == pytest.approx([6.0, 6.05, 6.1])

    def test_unknown_override(self):
        with pytest.raises(ConfigError):
            build_scan_config({}, {"colour": "blue"})

    def test_flatten(self):
        data = flatten_sections({"noise": {"se_probability": 0.1}, "output": {"directory": "out"}})
        assert data == {"noise": {"se_probability": 0.1}, "output": {"directory": "out"}}


class TestConfigHash:
    def test_stable(self):
        assert config_hash(_small()) == config_hash(_small())
        assert len(config_hash(_small())) == 64

    def test_ignores_output_location(self):
        assert config_hash(_small()) == config_hash(_small(output={"directory": "elsewhere"}))

    def test_changes_with_physics(self):
        assert config_hash(_small()) != config_hash(_small(k=4.1))
        assert config_hash(_small()) != config_hash(_small(seed=12))


class TestRunScan:
    def test_table_shape_and_order(self):
        result = run_scan(_small(engine="both"))
        assert len(result) == 2 * 2 * 5
        assert result.engines == ["eclassical", "quantum"]
        assert result.kick_counts == [3, 5]
        table = result.table
        assert list(table.columns)[:5] == ["kbar", "epsilon", "period_us", "kicks", "engine"]
        sorted_table = table.sort_values(["kicks", "kbar", "engine"], kind="mergesort").reset_index(drop=True)
        pd.testing.assert_frame_equal(table, sorted_table)
        assert set(table.loc[table.engine == "quantum", "atoms"]) == {20}
        assert set(table.loc[table.engine == "eclassical", "atoms"]) == {300}

    def test_thread_count_does_not_change_numbers(self):
        config = _small(engine="both")
        one = ScanService(config, threads=1).run()
        many = ScanService(config, threads=4).run()
        pd.testing.assert_frame_equal(one.table, many.table)
        assert one.config_hash == many.config_hash

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv("SCAN_THREADS", "3")
        assert ScanService(_small()).threads == 3

    def test_single_resonant_point(self):
        config = _small(kbar_range=None, kbar_grid=[2 * math.pi], kicks=[4], engine="both",
                        ensemble={"atom_count": 50, "seed": 5, "beta_law": {"kind": "point", "value": 0.5}})
        result = run_scan(config)
        for engine in ("quantum", "eclassical"):
            row = result.curve(4, engine).iloc[0]
            assert row.epsilon == 0.0
            assert row.mean_energy == pytest.approx(resonant_peak_energy(4.2, 4) * 4, rel=1e-6)

    def test_zero_kick_strength(self):
        result = run_scan(_small(k=0.0, engine="both"))
        assert np.all(result.table["ratio"] == 0.0)
        np.testing.assert_allclose(result.table["mean_energy"], 0.0, atol=1e-12)

    def test_kbar_range_grid(self):
        result = run_scan(_small())
        kbars = result.curve(3)["kbar"].to_numpy()
        np.testing.assert_allclose(kbars, 2 * math.pi + np.array([-0.04, -0.02, 0.0, 0.02, 0.04]), atol=1e-12)
        assert result.curve(3)["epsilon"].is_monotonic_increasing


def test_csv_bytes_independent_of_threads(tmp_path):
    config = _small(engine="both")
    a = write_scan_csv(tmp_path / "a.csv", ScanService(config, threads=1).run())
    b = write_scan_csv(tmp_path / "b.csv", ScanService(config, threads=3).run())
    assert a.read_bytes() == b.read_bytes()

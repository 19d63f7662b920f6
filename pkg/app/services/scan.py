"""Configuration-driven kbar scans over one or both engines."""
import hashlib
import json
import logging
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from pydantic import ValidationError
from tqdm import tqdm

from app.core.config import get_settings
from app.core.errors import ConfigError, ParameterError
from app.models.results import ScanResult
from app.models.schemas import ScanConfig
from app.services import eclassical, quantum
from app.services.ensemble import draw_phases, sample_ensemble

logger = logging.getLogger(__name__)

# section -> {file key: ScanConfig path}
_SECTIONS: Dict[str, Dict[str, tuple]] = {
    "physics": {
        "k": ("k",),
        "kicks": ("kicks",),
        "x0": ("x0",),
        "recoil_frequency": ("constants", "recoil_frequency"),
        "atom_mass": ("constants", "atom_mass"),
    },
    "ensemble": {
        "atom_count": ("ensemble", "atom_count"),
        "seed": ("seed",),
        "beta_law": ("ensemble", "beta_law"),
        "n0_law": ("ensemble", "n0_law"),
        "eclassical_atoms": ("eclassical_atoms",),
        "trajectories_per_atom": ("trajectories_per_atom",),
    },
    "scan": {
        "engine": ("engine",),
        "kbar_grid": ("kbar_grid",),
        "period_grid_us": ("period_grid_us",),
        "kbar_range": ("kbar_range",),
        "seed": ("seed",),
    },
    "noise": {
        "se_probability": ("noise", "se_probability"),
        "se_kick_width": ("noise", "se_kick_width"),
    },
    "output": {
        "directory": ("output", "directory"),
        "scan_file": ("output", "scan_file"),
        "peaks_file": ("output", "peaks_file"),
        "gfunc_file": ("output", "gfunc_file"),
        "figures_file": ("output", "figures_file"),
        "pdist_file": ("output", "pdist_file"),
    },
}

# CLI flag name -> ScanConfig path
OVERRIDE_PATHS: Dict[str, tuple] = {
    "engine": ("engine",),
    "k": ("k",),
    "kicks": ("kicks",),
    "seed": ("seed",),
    "atom_count": ("ensemble", "atom_count"),
    "eclassical_atoms": ("eclassical_atoms",),
    "trajectories_per_atom": ("trajectories_per_atom",),
    "kbar_range": ("kbar_range",),
    "se_probability": ("noise", "se_probability"),
    "output_dir": ("output", "directory"),
}


def _assign(data: Dict[str, Any], path: tuple, value: Any) -> None:
    node = data
    for key in path[:-1]:
        node = node.setdefault(key, {})
    node[path[-1]] = value


def flatten_sections(document: Mapping[str, Any]) -> Dict[str, Any]:
    """Map the sectioned file layout onto ScanConfig fields."""
    data: Dict[str, Any] = {}
    for section, values in document.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(values, Mapping):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in values.items():
            path = _SECTIONS[section].get(key)
            if path is None:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            _assign(data, path, value)
    return data


def build_scan_config(data: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> ScanConfig:
    merged = json.loads(json.dumps(dict(data)))
    for name, value in (overrides or {}).items():
        if value is None:
            continue
        if name not in OVERRIDE_PATHS:
            raise ConfigError(f"unknown override '{name}'")
        if name == "kbar_range":
            merged.pop("kbar_grid", None)
            merged.pop("period_grid_us", None)
        _assign(merged, OVERRIDE_PATHS[name], value)
    try:
        return ScanConfig(**merged)
    except ValidationError as e:
        raise ConfigError(f"invalid scan configuration: {e}") from e
    except ParameterError as e:
        raise ConfigError(str(e)) from e


def load_scan_config(path: Optional[Union[str, Path]] = None,
                     overrides: Optional[Mapping[str, Any]] = None) -> ScanConfig:
    """Read a TOML scan configuration and apply flag overrides on top."""
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as f:
                document = tomllib.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
    return build_scan_config(flatten_sections(document), overrides)


def config_hash(config: ScanConfig) -> str:
    """SHA-256 over the canonical JSON of everything that changes the emitted numbers."""
    canonical = json.dumps(config.physics_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ScanService:
    def __init__(self, config: ScanConfig, threads: Optional[int] = None, progress: bool = False):
        self.config = config
        self.threads = max(1, threads if threads is not None else get_settings().SCAN_THREADS)
        self.progress = progress
        self._quantum_atoms = None
        self._map_inputs = None

    def _prepare(self) -> None:
        config = self.config
        engines = config.engines()
        if "quantum" in engines:
            self._quantum_atoms = sample_ensemble(config.ensemble)
        if "eclassical" in engines:
            spec = config.ensemble.model_copy(update={"atom_count": config.eclassical_atoms})
            atoms = sample_ensemble(spec)
            self._map_inputs = (atoms, draw_phases(spec.seed, len(atoms), config.trajectories_per_atom))

    def _grid_point(self, engine: str, kbar: float) -> List[dict]:
        config = self.config
        if engine == "quantum":
            return quantum.quantum_scan_rows(config.ensemble, self._quantum_atoms, config.k, kbar, config.kicks,
                                             config.noise, config.constants)
        if config.noise.enabled:
            logger.debug("noise model applies to the quantum engine only")
        atoms, theta0 = self._map_inputs
        return eclassical.map_scan_rows(atoms, theta0, config.k, kbar, config.kicks, config.seed, config.constants)

    def run(self) -> ScanResult:
        config = self.config
        tasks = [(engine, kbar) for engine in config.engines() for kbar in config.kbar_values()]
        logger.info("Starting scan: engines=%s, %d grid points, kicks=%s, threads=%d",
                    ",".join(config.engines()), len(config.kbar_values()), config.kicks, self.threads)
        started = time.perf_counter()
        self._prepare()

        slots: List[Optional[List[dict]]] = [None] * len(tasks)
        bar = tqdm(total=len(tasks), desc="scan", unit="pt", disable=not self.progress)
        try:
            if self.threads == 1:
                for i, (engine, kbar) in enumerate(tasks):
                    slots[i] = self._grid_point(engine, kbar)
                    bar.update(1)
            else:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    futures = {pool.submit(self._grid_point, engine, kbar): i for i, (engine, kbar) in enumerate(tasks)}
                    for future in as_completed(futures):
                        slots[futures[future]] = future.result()
                        bar.update(1)
        finally:
            bar.close()

        rows = [row for chunk in slots for row in chunk]
        result = ScanResult.from_rows(rows, k=config.k, seed=config.seed, config_hash=config_hash(config))
        logger.info("Scan finished: %d rows in %.1fs", len(result), time.perf_counter() - started)
        return result


def run_scan(config: ScanConfig, threads: Optional[int] = None, progress: bool = False) -> ScanResult:
    return ScanService(config, threads=threads, progress=progress).run()

"""Tabular scan results shared by both engines, the analysis and the report writer."""
from dataclasses import dataclass
from typing import Iterable, List, Mapping, Optional

import pandas as pd

SCAN_COLUMNS = ["kbar", "epsilon", "period_us", "kicks", "engine", "mean_energy", "ratio", "stderr", "atoms", "seed"]
_DTYPES = {
    "kbar": "float64",
    "epsilon": "float64",
    "period_us": "float64",
    "kicks": "int64",
    "engine": "object",
    "mean_energy": "float64",
    "ratio": "float64",
    "stderr": "float64",
    "atoms": "int64",
    "seed": "uint64",
}


def resonant_peak_energy(k: float, kicks: int) -> float:
    """Ensemble energy on exact resonance, k^2 t / 4."""
    return 0.25 * k * k * kicks


def energy_ratio(mean_energy: float, k: float, kicks: int) -> float:
    peak = resonant_peak_energy(k, kicks)
    return mean_energy / peak if peak > 0 else 0.0


@dataclass
class ScanResult:
    table: pd.DataFrame
    k: float
    seed: int
    config_hash: str = ""

    @classmethod
    def from_rows(cls, rows: Iterable[Mapping], k: float, seed: int, config_hash: str = "") -> "ScanResult":
        table = pd.DataFrame(list(rows), columns=SCAN_COLUMNS).astype(_DTYPES)
        table = table.sort_values(["kicks", "kbar", "engine"], kind="mergesort").reset_index(drop=True)
        return cls(table=table, k=float(k), seed=int(seed), config_hash=config_hash)

    def __len__(self) -> int:
        return len(self.table)

    @property
    def kick_counts(self) -> List[int]:
        return sorted(int(t) for t in self.table["kicks"].unique())

    @property
    def engines(self) -> List[str]:
        return sorted(self.table["engine"].unique())

    def curve(self, kicks: int, engine: Optional[str] = None) -> pd.DataFrame:
        """Rows of one kick count (and engine), ordered by epsilon."""
        mask = self.table["kicks"] == kicks
        if engine is not None:
            mask &= self.table["engine"] == engine
        return self.table[mask].sort_values("epsilon", kind="mergesort").reset_index(drop=True)


def scan_row(kbar: float, epsilon: float, period_us: float, kicks: int, engine: str, mean_energy: float,
             stderr: float, atoms: int, seed: int, k: float) -> dict:
    return {
        "kbar": kbar,
        "epsilon": epsilon,
        "period_us": period_us,
        "kicks": kicks,
        "engine": engine,
        "mean_energy": mean_energy,
        "ratio": energy_ratio(mean_energy, k, kicks),
        "stderr": stderr,
        "atoms": atoms,
        "seed": seed,
    }

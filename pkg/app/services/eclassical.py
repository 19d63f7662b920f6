"""Monte Carlo evolution of the epsilon-classical map.

Near kbar = 2 pi ell the quantum dynamics of each quasimomentum class follows the map

    J <- J + |eps| k sin(theta),    theta <- theta + J  (mod 2 pi)

with |eps| in the role of Planck's constant.  The mean energy gain is recovered as
<(J_t - J_0)^2> / (2 eps^2).  The kick sum J_t - J_0 is accumulated apart from the
reduced starting momentum and is never wrapped.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Union

import numpy as np

from app.core.errors import ParameterError
from app.models.physics import epsilon_from_kbar, period_from_kbar
from app.models.results import ScanResult, scan_row
from app.models.schemas import EnsembleSpec, PhysicalConstants
from app.services.ensemble import (
    AtomSample,
    EnergyEstimate,
    draw_phases,
    estimate_from_gains,
    sample_ensemble,
)
from app.services.quantum import resonant_energy

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
ENGINE_NAME = "eclassical"


@dataclass(frozen=True)
class MapParams:
    eff_kick: float
    epsilon: float
    ell: int
    kbar: float

    @classmethod
    def from_kick(cls, k: float, kbar: float) -> "MapParams":
        if k < 0:
            raise ParameterError(f"kick strength must be non-negative, got {k!r}")
        epsilon, ell = epsilon_from_kbar(kbar)
        return cls(eff_kick=abs(epsilon) * k, epsilon=epsilon, ell=ell, kbar=kbar)

    @property
    def sign(self) -> float:
        # sign(0) is taken as +1
        return -1.0 if self.epsilon < 0 else 1.0


@dataclass
class MapState:
    """Trajectories in atom-major order: atom i owns rows i*tpa .. (i+1)*tpa - 1."""

    theta: np.ndarray
    J: np.ndarray
    J0: np.ndarray
    J0_raw: np.ndarray
    # accumulated kicks J - J0, kept apart so tiny |eps| does not lose them to rounding
    dJ: np.ndarray

    def __len__(self) -> int:
        return int(self.theta.size)

    def energy_gain(self, epsilon: float) -> np.ndarray:
        return self.dJ ** 2 / (2.0 * epsilon * epsilon)


def init_map_state(
    atoms: AtomSample,
    params: MapParams,
    rng: Optional[np.random.Generator] = None,
    trajectories_per_atom: int = 1,
    theta0: Optional[np.ndarray] = None,
) -> MapState:
    """Initial map coordinates for every (atom, trajectory) pair.

    J_0 = sign(eps)|eps| n_0 + pi ell + kbar beta, reduced mod 2 pi for the dynamics,
    and theta_0 shifted by pi when eps < 0.  Angles come from ``theta0`` (shape
    (atoms, trajectories)) or are drawn uniformly from ``rng``.
    """
    if params.ell < 1:
        raise ParameterError(f"resonance order must be >= 1, got {params.ell}")
    count = len(atoms)
    if theta0 is None:
        if rng is None:
            raise ParameterError("either rng or theta0 is required to place the initial angles")
        theta0 = TWO_PI * rng.random((count, trajectories_per_atom))
    theta0 = np.asarray(theta0, dtype=np.float64).reshape(count, -1)
    tpa = theta0.shape[1]

    j_raw = params.sign * abs(params.epsilon) * atoms.n0 + math.pi * params.ell + params.kbar * atoms.beta
    j_raw = np.repeat(j_raw.astype(np.float64), tpa)
    j0 = np.mod(j_raw, TWO_PI)
    theta = np.mod(theta0.ravel() + 0.5 * math.pi * (1.0 - params.sign), TWO_PI)
    return MapState(theta=theta, J=j0.copy(), J0=j0, J0_raw=j_raw, dJ=np.zeros_like(j0))


def map_step(state: MapState, params: MapParams) -> MapState:
    """One kick followed by free rotation with the updated momentum."""
    dJ = state.dJ + params.eff_kick * np.sin(state.theta)
    J = state.J0 + dJ
    theta = np.mod(state.theta + J, TWO_PI)
    return MapState(theta=theta, J=J, J0=state.J0, J0_raw=state.J0_raw, dJ=dJ)


def _advance(state: MapState, params: MapParams) -> None:
    state.dJ += params.eff_kick * np.sin(state.theta)
    np.add(state.J0, state.dJ, out=state.J)
    np.add(state.theta, state.J, out=state.theta)
    np.mod(state.theta, TWO_PI, out=state.theta)


def _gains_at(
    atoms: AtomSample,
    params: MapParams,
    theta0: np.ndarray,
    k: float,
    checkpoints: Iterable[int],
) -> Dict[int, np.ndarray]:
    """Per-atom gains (averaged over each atom's trajectories) after each checkpoint kick count."""
    wanted = sorted(set(int(t) for t in checkpoints))
    if wanted and wanted[0] < 0:
        raise ParameterError("kick counts must be non-negative")
    count = len(atoms)

    if params.epsilon == 0.0:
        return {t: resonant_energy(atoms.beta, k, t, params.ell) for t in wanted}

    state = init_map_state(atoms, params, theta0=theta0)
    gains: Dict[int, np.ndarray] = {}
    done = 0
    for t in wanted:
        for _ in range(t - done):
            _advance(state, params)
        done = t
        gains[t] = state.energy_gain(params.epsilon).reshape(count, -1).mean(axis=1)
    return gains


def _resolve_inputs(spec: EnsembleSpec, trajectories_per_atom: int, atoms: Optional[AtomSample],
                    theta0: Optional[np.ndarray]):
    if atoms is None:
        atoms = sample_ensemble(spec)
    if theta0 is None:
        theta0 = draw_phases(spec.seed, len(atoms), trajectories_per_atom)
    return atoms, theta0


def ensemble_energy_map(
    spec: EnsembleSpec,
    k: float,
    kbar: float,
    kicks: int,
    trajectories_per_atom: int = 1,
    atoms: Optional[AtomSample] = None,
    theta0: Optional[np.ndarray] = None,
) -> EnergyEstimate:
    """Mean energy gain after ``kicks`` steps; eps = 0 uses the exact resonant result."""
    params = MapParams.from_kick(k, kbar)
    atoms, theta0 = _resolve_inputs(spec, trajectories_per_atom, atoms, theta0)
    gains = _gains_at(atoms, params, theta0, k, [kicks])[kicks]
    return estimate_from_gains(gains)


def energy_history_map(
    spec: EnsembleSpec,
    k: float,
    kbar: float,
    kicks: int,
    trajectories_per_atom: int = 1,
    atoms: Optional[AtomSample] = None,
    theta0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Ensemble mean gain after each step s = 0..kicks."""
    params = MapParams.from_kick(k, kbar)
    atoms, theta0 = _resolve_inputs(spec, trajectories_per_atom, atoms, theta0)
    gains = _gains_at(atoms, params, theta0, k, range(kicks + 1))
    return np.array([gains[s].mean() for s in range(kicks + 1)])


def scan_energy_map(
    spec: EnsembleSpec,
    k: float,
    kbar_grid: Sequence[float],
    kicks: Union[int, Sequence[int]],
    trajectories_per_atom: int = 1,
    consts: PhysicalConstants = PhysicalConstants(),
    config_hash: str = "",
) -> ScanResult:
    """One map ensemble per grid point, sharing atoms and initial angles across the grid."""
    kick_counts = [kicks] if isinstance(kicks, int) else list(kicks)
    if any(kb <= math.pi for kb in kbar_grid):
        raise ParameterError("every grid point must have kbar > pi")
    atoms, theta0 = _resolve_inputs(spec, trajectories_per_atom, None, None)

    rows = []
    for kbar in kbar_grid:
        rows.extend(map_scan_rows(atoms, theta0, k, kbar, kick_counts, spec.seed, consts))
    return ScanResult.from_rows(rows, k=k, seed=spec.seed, config_hash=config_hash)


def map_scan_rows(
    atoms: AtomSample,
    theta0: np.ndarray,
    k: float,
    kbar: float,
    kick_counts: Sequence[int],
    seed: int,
    consts: PhysicalConstants = PhysicalConstants(),
) -> list:
    """Scan rows of every kick count at one grid point."""
    params = MapParams.from_kick(k, kbar)
    period_us = period_from_kbar(kbar, consts) * 1e6
    gains = _gains_at(atoms, params, theta0, k, kick_counts)
    rows = []
    for t in kick_counts:
        estimate = estimate_from_gains(gains[t])
        logger.debug("eclassical kbar=%.6f t=%d E=%.6g", kbar, t, estimate.mean)
        rows.append(scan_row(kbar, params.epsilon, period_us, t, ENGINE_NAME, estimate.mean,
                             estimate.stderr, estimate.samples, seed, k))
    return rows

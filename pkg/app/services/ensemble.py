"""Initial-ensemble sampling with counter-based per-atom random substreams.

Atom ``i`` always draws from the Philox stream keyed by ``(seed, purpose)`` whose
counter starts at ``i << 192``.  A draw therefore depends only on the seed, the
purpose and the atom index, never on the atom count or on how work is split
across threads.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from app.models.schemas import EnsembleSpec, GaussianBeta, GaussianN0, PointBeta, PointN0, UniformBeta

STREAM_ENSEMBLE = 0
STREAM_PHASES = 1
STREAM_NOISE = 2

TWO_PI = 2.0 * np.pi


def atom_stream(seed: int, purpose: int, index: int) -> np.random.Generator:
    """Independent generator for one atom and one purpose."""
    key = (int(seed) << 64) | int(purpose)
    return np.random.Generator(np.random.Philox(key=key, counter=int(index) << 192))


@dataclass(frozen=True)
class AtomSample:
    n0: np.ndarray
    beta: np.ndarray

    def __len__(self) -> int:
        return int(self.n0.size)

    def pairs(self) -> List[Tuple[int, float]]:
        return [(int(n), float(b)) for n, b in zip(self.n0, self.beta)]

    def slice(self, start: int, stop: int) -> "AtomSample":
        return AtomSample(n0=self.n0[start:stop], beta=self.beta[start:stop])

    @property
    def initial_energy(self) -> np.ndarray:
        """Kinetic energy p^2/2 of each atom before kicking."""
        return 0.5 * (self.n0 + self.beta) ** 2


def _wrap_unit(x: np.ndarray) -> np.ndarray:
    beta = np.mod(x, 1.0)
    beta[beta >= 1.0] = 0.0
    return beta


def sample_ensemble(spec: EnsembleSpec) -> AtomSample:
    """Draw (n0, beta) for every atom of the ensemble."""
    count = spec.atom_count
    beta_law, n0_law = spec.beta_law, spec.n0_law

    beta = np.empty(count, dtype=np.float64)
    n0 = np.empty(count, dtype=np.int64)
    if isinstance(beta_law, PointBeta):
        beta.fill(beta_law.value)
    if isinstance(n0_law, PointN0):
        n0.fill(n0_law.value)

    random_beta = not isinstance(beta_law, PointBeta)
    random_n0 = not isinstance(n0_law, PointN0)
    if random_beta or random_n0:
        for i in range(count):
            rng = atom_stream(spec.seed, STREAM_ENSEMBLE, i)
            if isinstance(beta_law, UniformBeta):
                beta[i] = rng.random()
            elif isinstance(beta_law, GaussianBeta):
                beta[i] = beta_law.center + beta_law.sigma * rng.standard_normal()
            if isinstance(n0_law, GaussianN0):
                n0[i] = int(np.rint(n0_law.center + n0_law.sigma * rng.standard_normal()))

    if isinstance(beta_law, GaussianBeta):
        beta = _wrap_unit(beta)
    return AtomSample(n0=n0, beta=beta)


def draw_phases(seed: int, atom_count: int, trajectories_per_atom: int = 1) -> np.ndarray:
    """Initial angles theta_0 in [0, 2 pi), shape (atom_count, trajectories_per_atom)."""
    theta = np.empty((atom_count, trajectories_per_atom), dtype=np.float64)
    for i in range(atom_count):
        theta[i] = TWO_PI * atom_stream(seed, STREAM_PHASES, i).random(trajectories_per_atom)
    return theta


def noise_draws(seed: int, index: int, kicks: int) -> np.ndarray:
    """Uniform draws for the spontaneous-emission model: column 0 decides the event, column 1 the shift."""
    return atom_stream(seed, STREAM_NOISE, index).random((kicks, 2))


@dataclass
class EnergyEstimate:
    """Ensemble mean energy gain and its standard error."""

    mean: float
    stderr: float
    samples: int
    truncated: bool = False


def estimate_from_gains(gains: np.ndarray, truncated: bool = False) -> EnergyEstimate:
    count = int(gains.size)
    stderr = float(np.std(gains, ddof=1) / np.sqrt(count)) if count > 1 else 0.0
    return EnergyEstimate(mean=float(np.mean(gains)), stderr=stderr, samples=count, truncated=truncated)

"""Exact quantum evolution of the kicked rotor on an integer-momentum ladder.

One period is U = exp(-i kbar p^2/2) exp(i k cos x) with p = n + beta.  The kick is
applied as a convolution of the amplitudes with c_m = i^m J_m(k); the free evolution
is diagonal.  A state's ladder index j holds the amplitude of n = j - n_max.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal, special

from app.core.errors import LadderSizeError, ParameterError
from app.models.physics import epsilon_from_kbar, period_from_kbar
from app.models.results import scan_row
from app.models.schemas import EnsembleSpec, KickParams, NoiseModel, PhysicalConstants
from app.services.ensemble import (
    AtomSample,
    EnergyEstimate,
    estimate_from_gains,
    noise_draws,
    sample_ensemble,
)

logger = logging.getLogger(__name__)

KICK_CUTOFF_MARGIN = 30
COEFFICIENT_FLOOR = 1e-14
LADDER_MARGIN = 20
BOUNDARY_CELLS = 5
BOUNDARY_THRESHOLD = 1e-8
DEFAULT_CHUNK = 256
ENGINE_NAME = "quantum"

_I_POWERS = np.array([1.0, 1.0j, -1.0, -1.0j])


@dataclass
class QuantumState:
    amplitudes: np.ndarray
    beta: float
    boundary_amplitude: float = 0.0

    @classmethod
    def basis(cls, n0: int, beta: float, n_max: int) -> "QuantumState":
        if abs(n0) > n_max:
            raise LadderSizeError(f"n0={n0} does not fit a ladder of half-width {n_max}")
        amplitudes = np.zeros(2 * n_max + 1, dtype=np.complex128)
        amplitudes[n0 + n_max] = 1.0
        return cls(amplitudes=amplitudes, beta=float(beta))

    @property
    def n_max(self) -> int:
        return (self.amplitudes.size - 1) // 2

    @property
    def momenta(self) -> np.ndarray:
        """Integer momenta n of the ladder."""
        return np.arange(-self.n_max, self.n_max + 1)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return float(np.sum(self.probabilities))

    @property
    def truncated(self) -> bool:
        return self.boundary_amplitude > BOUNDARY_THRESHOLD


@dataclass
class MomentumHistogram:
    edges: np.ndarray
    mass: np.ndarray
    underflow: float = 0.0
    overflow: float = 0.0
    truncated: bool = False

    @property
    def total(self) -> float:
        return float(self.mass.sum() + self.underflow + self.overflow)

    def wing_mass(self, threshold: float) -> float:
        """Mass at |p| beyond ``threshold`` counting only bins lying fully outside it."""
        low, high = self.edges[:-1], self.edges[1:]
        outside = (low >= threshold) | (high <= -threshold)
        return float(self.mass[outside].sum() + self.underflow + self.overflow)


def kick_coefficients(k: float, m_max: int) -> np.ndarray:
    """c_m = i^m J_m(k) for m = -m_max..m_max."""
    if k < 0:
        raise ParameterError(f"kick strength must be non-negative, got {k!r}")
    if m_max < 0:
        raise ParameterError(f"m_max must be non-negative, got {m_max!r}")
    m = np.arange(-m_max, m_max + 1)
    return _I_POWERS[np.mod(m, 4)] * special.jv(m, k)


def _trimmed_coefficients(k: float) -> np.ndarray:
    m_max = int(math.ceil(k)) + KICK_CUTOFF_MARGIN
    coeffs = kick_coefficients(k, m_max)
    significant = np.nonzero(np.abs(coeffs) >= COEFFICIENT_FLOOR)[0]
    reach = int(max(m_max - significant[0], significant[-1] - m_max))
    return coeffs[m_max - reach:m_max + reach + 1]


def free_phases(n: np.ndarray, beta, kbar: float) -> np.ndarray:
    """exp(-i kbar (n + beta)^2 / 2), with the resonant part reduced mod 2 pi exactly."""
    p = n + beta
    if kbar <= math.pi:
        return np.exp(-0.5j * kbar * p**2)
    epsilon, ell = epsilon_from_kbar(kbar)
    # pi ell (n + beta)^2 = pi ell n^2 + 2 pi ell n beta + pi ell beta^2, and n^2 = n (mod 2)
    resonant = (math.pi * np.mod(ell * n, 2)
                + 2.0 * math.pi * np.mod(ell * n * beta, 1.0)
                + math.pi * ell * np.square(beta))
    return np.exp(-1j * (resonant + 0.5 * epsilon * p**2))


def _convolve_kick(amplitudes: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    if amplitudes.ndim == 1:
        return signal.fftconvolve(amplitudes, coeffs, mode="same")
    return signal.fftconvolve(amplitudes, coeffs[np.newaxis, :], mode="same", axes=-1)


def _boundary_amplitude(amplitudes: np.ndarray) -> float:
    cells = min(BOUNDARY_CELLS, amplitudes.shape[-1])
    edges = np.concatenate([amplitudes[..., :cells], amplitudes[..., -cells:]], axis=-1)
    return float(np.abs(edges).max())


def free_evolve(state: QuantumState, kbar: float) -> QuantumState:
    if not kbar > 0:
        raise ParameterError(f"kbar must be positive, got {kbar!r}")
    amplitudes = state.amplitudes * free_phases(state.momenta, state.beta, kbar)
    return QuantumState(amplitudes=amplitudes, beta=state.beta, boundary_amplitude=state.boundary_amplitude)


def apply_kick(state: QuantumState, k: float) -> QuantumState:
    """Apply exp(i k cos x); the boundary amplitude is tracked as a truncation diagnostic."""
    if k == 0:
        return QuantumState(amplitudes=state.amplitudes.copy(), beta=state.beta,
                            boundary_amplitude=state.boundary_amplitude)
    amplitudes = _convolve_kick(state.amplitudes, _trimmed_coefficients(k))
    boundary = max(state.boundary_amplitude, _boundary_amplitude(amplitudes))
    if boundary > BOUNDARY_THRESHOLD and state.boundary_amplitude <= BOUNDARY_THRESHOLD:
        logger.warning("momentum ladder truncation: boundary amplitude %.3g exceeds %.0e",
                       boundary, BOUNDARY_THRESHOLD)
    return QuantumState(amplitudes=amplitudes, beta=state.beta, boundary_amplitude=boundary)


def required_ladder(n0_max: int, params: KickParams, noise: NoiseModel = NoiseModel()) -> int:
    """Ladder half-width covering the ballistic worst case plus Bessel tails."""
    n_max = abs(int(n0_max)) + params.kicks * (int(math.ceil(params.k)) + LADDER_MARGIN)
    if noise.enabled:
        n_max += params.kicks * (int(math.ceil(noise.se_kick_width)) + 1)
    return n_max


def _emission_shift(beta: float, draw: np.ndarray, noise: NoiseModel):
    """New (beta, integer ladder shift) after one emission event."""
    shifted = beta + noise.se_kick_width * (2.0 * draw[1] - 1.0)
    whole = int(math.floor(shifted))
    return shifted - whole, whole


def _shift_ladder(amplitudes: np.ndarray, whole: int) -> np.ndarray:
    if whole == 0:
        return amplitudes
    moved = np.roll(amplitudes, whole)
    if whole > 0:
        moved[:whole] = 0.0
    else:
        moved[whole:] = 0.0
    return moved


def evolve_atom(
    n0: int,
    beta: float,
    params: KickParams,
    noise: NoiseModel = NoiseModel(),
    rng: Optional[np.random.Generator] = None,
    n_max: Optional[int] = None,
) -> QuantumState:
    """Kick-then-free-evolve ``params.kicks`` times starting from |n0, beta>."""
    required = required_ladder(n0, params, noise)
    if n_max is None:
        n_max = required
    elif n_max < required:
        raise LadderSizeError(f"ladder half-width {n_max} is below the required {required}")
    if noise.enabled and rng is None:
        raise ParameterError("a random stream is required when spontaneous emission is enabled")

    draws = rng.random((params.kicks, 2)) if noise.enabled else None
    state = QuantumState.basis(n0, beta, n_max)
    for s in range(params.kicks):
        state = apply_kick(state, params.k)
        if draws is not None and draws[s, 0] < noise.se_probability:
            new_beta, whole = _emission_shift(state.beta, draws[s], noise)
            state = QuantumState(amplitudes=_shift_ladder(state.amplitudes, whole), beta=new_beta,
                                 boundary_amplitude=state.boundary_amplitude)
        state = free_evolve(state, params.kbar)
    return state


def mean_energy(state: QuantumState) -> float:
    """<p^2>/2 with p = n + beta."""
    return float(0.5 * np.sum(state.probabilities * (state.momenta + state.beta) ** 2))


def resonant_energy(beta, k: float, kicks: int, ell: int = 1) -> np.ndarray:
    """Exact energy gain at kbar = 2 pi ell: (k^2/4) |sum_s exp(i s pi ell (1 + 2 beta))|^2."""
    beta = np.asarray(beta, dtype=np.float64)
    step = np.mod(math.pi * ell * (1.0 + 2.0 * beta), 2.0 * math.pi)
    s = np.arange(kicks)
    total = np.exp(1j * step[..., np.newaxis] * s).sum(axis=-1)
    return 0.25 * k**2 * np.abs(total) ** 2


@dataclass
class _BatchOutcome:
    probabilities: np.ndarray
    beta: np.ndarray
    gains: np.ndarray
    history: Optional[np.ndarray] = None
    boundary_amplitude: float = 0.0
    n_max: int = 0


def _evolve_batch(atoms: AtomSample, first_index: int, params: KickParams, noise: NoiseModel,
                  seed: int, n_max: int, record_history: bool = False) -> _BatchOutcome:
    batch = len(atoms)
    n = np.arange(-n_max, n_max + 1)
    amplitudes = np.zeros((batch, n.size), dtype=np.complex128)
    amplitudes[np.arange(batch), atoms.n0 + n_max] = 1.0
    beta = atoms.beta.astype(np.float64).copy()
    initial = atoms.initial_energy

    draws = None
    if noise.enabled:
        draws = np.stack([noise_draws(seed, first_index + i, params.kicks) for i in range(batch)])

    history = np.zeros((params.kicks + 1, batch)) if record_history else None
    coeffs = _trimmed_coefficients(params.k) if params.k > 0 else None
    for s in range(params.kicks):
        # without a kick no observable depends on the free phases
        if coeffs is not None:
            amplitudes = _convolve_kick(amplitudes, coeffs)
        if draws is not None:
            for row in np.nonzero(draws[:, s, 0] < noise.se_probability)[0]:
                beta[row], whole = _emission_shift(beta[row], draws[row, s], noise)
                amplitudes[row] = _shift_ladder(amplitudes[row], whole)
        if coeffs is not None:
            amplitudes *= free_phases(n[np.newaxis, :], beta[:, np.newaxis], params.kbar)
        if history is not None:
            probs = np.abs(amplitudes) ** 2
            history[s + 1] = 0.5 * np.sum(probs * (n + beta[:, np.newaxis]) ** 2, axis=1) - initial

    probabilities = np.abs(amplitudes) ** 2
    gains = 0.5 * np.sum(probabilities * (n + beta[:, np.newaxis]) ** 2, axis=1) - initial
    return _BatchOutcome(probabilities=probabilities, beta=beta, gains=gains, history=history,
                         boundary_amplitude=_boundary_amplitude(amplitudes) if params.kicks else 0.0,
                         n_max=n_max)


def _run_ensemble(spec: EnsembleSpec, params: KickParams, noise: NoiseModel, atoms: Optional[AtomSample],
                  chunk_size: int, record_history: bool = False):
    if atoms is None:
        atoms = sample_ensemble(spec)
    n_max = required_ladder(int(np.abs(atoms.n0).max()), params, noise)
    for start in range(0, len(atoms), chunk_size):
        stop = min(start + chunk_size, len(atoms))
        yield _evolve_batch(atoms.slice(start, stop), start, params, noise, spec.seed, n_max, record_history)


def ensemble_energy(
    spec: EnsembleSpec,
    params: KickParams,
    noise: NoiseModel = NoiseModel(),
    atoms: Optional[AtomSample] = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> EnergyEstimate:
    """Mean energy gain over the ensemble with its standard error."""
    gains, boundary = [], 0.0
    for outcome in _run_ensemble(spec, params, noise, atoms, chunk_size):
        gains.append(outcome.gains)
        boundary = max(boundary, outcome.boundary_amplitude)
    truncated = boundary > BOUNDARY_THRESHOLD
    if truncated:
        logger.warning("ensemble evolution at kbar=%.6f touched the ladder boundary (%.3g)", params.kbar, boundary)
    return estimate_from_gains(np.concatenate(gains), truncated)


def energy_history(
    spec: EnsembleSpec,
    params: KickParams,
    noise: NoiseModel = NoiseModel(),
    atoms: Optional[AtomSample] = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Ensemble mean energy gain after each kick, index 0 being the initial state."""
    histories = [outcome.history for outcome in _run_ensemble(spec, params, noise, atoms, chunk_size, True)]
    return np.concatenate(histories, axis=1).mean(axis=1)


def momentum_histogram(
    spec: EnsembleSpec,
    params: KickParams,
    noise: NoiseModel,
    bin_edges,
    atoms: Optional[AtomSample] = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> MomentumHistogram:
    """Ensemble-averaged momentum distribution over p = n + beta."""
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterError("bin edges must be a strictly ascending sequence of at least two values")
    mass = np.zeros(edges.size - 1)
    under = over = 0.0
    boundary, count = 0.0, 0
    for outcome in _run_ensemble(spec, params, noise, atoms, chunk_size):
        n = np.arange(-outcome.n_max, outcome.n_max + 1)
        p = (n[np.newaxis, :] + outcome.beta[:, np.newaxis]).ravel()
        w = outcome.probabilities.ravel()
        hist, _ = np.histogram(p, bins=edges, weights=w)
        mass += hist
        under += float(w[p < edges[0]].sum())
        over += float(w[p > edges[-1]].sum())
        boundary = max(boundary, outcome.boundary_amplitude)
        count += outcome.gains.size
    return MomentumHistogram(edges=edges, mass=mass / count, underflow=under / count, overflow=over / count,
                             truncated=boundary > BOUNDARY_THRESHOLD)


def gains_at(
    spec: EnsembleSpec,
    params: KickParams,
    noise: NoiseModel,
    checkpoints,
    atoms: Optional[AtomSample] = None,
    chunk_size: int = DEFAULT_CHUNK,
):
    """Per-atom gains after each checkpoint kick count from one evolution to ``params.kicks``."""
    wanted = sorted(set(int(t) for t in checkpoints))
    if wanted and (wanted[0] < 0 or wanted[-1] > params.kicks):
        raise ParameterError(f"checkpoints must lie in [0, {params.kicks}]")
    columns = {t: [] for t in wanted}
    boundary = 0.0
    for outcome in _run_ensemble(spec, params, noise, atoms, chunk_size, True):
        for t in wanted:
            columns[t].append(outcome.history[t])
        boundary = max(boundary, outcome.boundary_amplitude)
    return {t: np.concatenate(parts) for t, parts in columns.items()}, boundary > BOUNDARY_THRESHOLD


def quantum_scan_rows(
    spec: EnsembleSpec,
    atoms: AtomSample,
    k: float,
    kbar: float,
    kick_counts,
    noise: NoiseModel = NoiseModel(),
    consts: PhysicalConstants = PhysicalConstants(),
) -> list:
    """Scan rows of every kick count at one grid point."""
    params = KickParams(k=k, kbar=kbar, kicks=max(kick_counts))
    gains, truncated = gains_at(spec, params, noise, kick_counts, atoms)
    if truncated:
        logger.warning("quantum scan at kbar=%.6f touched the ladder boundary", kbar)
    period_us = period_from_kbar(kbar, consts) * 1e6
    rows = []
    for t in kick_counts:
        estimate = estimate_from_gains(gains[t], truncated)
        logger.debug("quantum kbar=%.6f t=%d E=%.6g", kbar, t, estimate.mean)
        rows.append(scan_row(kbar, params.epsilon, period_us, t, ENGINE_NAME, estimate.mean,
                             estimate.stderr, estimate.samples, spec.seed, k))
    return rows

"""Scaled-unit conventions of the atom-optics kicked rotor.

Momenta are measured in two-photon recoils (2 hbar k_l), time in kick periods, and
the scaled Planck constant is kbar = 8 omega_r T.  Near a principal resonance kbar is
split as kbar = 2 pi ell + epsilon with |epsilon| <= pi.
"""
import math
from typing import Tuple

from scipy import constants as const

from app.core.errors import ParameterError
from app.models.schemas import (
    EnsembleSpec,
    GaussianBeta,
    GaussianN0,
    PhysicalConstants,
    RB85_MASS,
)

TWO_PI = 2.0 * math.pi


def kbar_from_period(period: float, consts: PhysicalConstants = PhysicalConstants()) -> float:
    """Scaled Planck constant for a kick period given in seconds."""
    if not period > 0:
        raise ParameterError(f"kick period must be positive, got {period!r}")
    return 8.0 * consts.recoil_frequency * period


def period_from_kbar(kbar: float, consts: PhysicalConstants = PhysicalConstants()) -> float:
    """Kick period in seconds for a scaled Planck constant."""
    if not kbar > 0:
        raise ParameterError(f"kbar must be positive, got {kbar!r}")
    return kbar / (8.0 * consts.recoil_frequency)


def epsilon_from_kbar(kbar: float) -> Tuple[float, int]:
    """Signed detuning epsilon from the nearest principal resonance 2 pi ell (ell >= 1)."""
    if not kbar > math.pi:
        raise ParameterError(f"kbar must exceed pi to lie near a resonance ell >= 1, got {kbar!r}")
    ell = int(math.floor(kbar / TWO_PI + 0.5))
    return kbar - TWO_PI * ell, ell


def scaled_time(kicks: float, k: float, epsilon: float) -> float:
    """The pendulum scaling variable x = t / t_res = t sqrt(k |epsilon|)."""
    return kicks * math.sqrt(k * abs(epsilon))


def thermal_sigma_beta(
    temperature: float,
    consts: PhysicalConstants = PhysicalConstants(),
    atom_mass: float = RB85_MASS,
) -> float:
    """Thermal momentum spread of a cloud at ``temperature`` (K) in two-photon recoil units."""
    if not temperature > 0:
        raise ParameterError(f"temperature must be positive, got {temperature!r}")
    k_l = math.sqrt(2.0 * atom_mass * consts.recoil_frequency / const.hbar)
    return math.sqrt(atom_mass * const.k * temperature) / (2.0 * const.hbar * k_l)


def thermal_ensemble(
    temperature: float,
    atom_count: int,
    seed: int,
    consts: PhysicalConstants = PhysicalConstants(),
) -> EnsembleSpec:
    sigma = thermal_sigma_beta(temperature, consts, consts.atom_mass)
    return EnsembleSpec(
        beta_law=GaussianBeta(sigma=sigma),
        n0_law=GaussianN0(sigma=sigma),
        atom_count=atom_count,
        seed=seed,
    )

"""Closed-form pendulum orbits of the scaled near-resonant dynamics.

In the scaled variables x = t / t_res and J' = J / sqrt(k|eps|) the map reduces to the
pendulum theta' = J', J'' = sin(theta) with H' = J'^2/2 + cos(theta).  The stable point
sits at theta = pi; orbits are written in phi = theta - pi, wrapped to (-pi, pi].
"""
import math
from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np
from scipy import special

from app.core.errors import ParameterError

SEPARATRIX_TOLERANCE = 1e-12

OrbitClass = Literal["trapped", "separatrix", "rotating"]


def t_res(k: float, epsilon: float) -> float:
    """Resonance time scale 1 / sqrt(k |eps|) in kicks."""
    if not k > 0:
        raise ParameterError(f"t_res needs k > 0, got {k!r}")
    if epsilon == 0:
        raise ParameterError("t_res diverges at eps = 0")
    return 1.0 / math.sqrt(k * abs(epsilon))


def jacobi_elliptic(u, m) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(sn, cn, dn) of argument u and parameter m = modulus squared, 0 <= m <= 1.

    For m < 1 the argument is first folded into [0, K/2] by the period, reflection and
    quarter-period identities; ``ellipj`` is only accurate near m = 1 for small arguments.
    """
    m_arr = np.asarray(m, dtype=np.float64)
    if np.any(~np.isfinite(m_arr)) or np.any((m_arr < 0) | (m_arr > 1)):
        raise ParameterError(f"elliptic parameter m must lie in [0, 1], got {m!r}")
    u_arr, m_arr = np.broadcast_arrays(np.asarray(u, dtype=np.float64), m_arr)
    periodic = m_arr < 1.0
    quarter = special.ellipk(np.where(periodic, m_arr, 0.0))

    v = np.where(periodic, u_arr - 4.0 * quarter * np.round(u_arr / (4.0 * quarter)), u_arr)
    sign = np.where(v < 0, -1.0, 1.0)
    v = np.abs(v)
    reflected = periodic & (v > quarter)
    v = np.where(reflected, 2.0 * quarter - v, v)
    shifted = periodic & (v > 0.5 * quarter)
    v = np.where(shifted, quarter - v, v)

    sn, cn, dn, _ = special.ellipj(v, m_arr)
    comp = np.sqrt(np.where(periodic, 1.0 - m_arr, 0.0))
    # sn(K - v) = cd(v), cn(K - v) = k' sd(v), dn(K - v) = k' nd(v)
    sn, cn, dn = (np.where(shifted, cn / dn, sn),
                  np.where(shifted, comp * sn / dn, cn),
                  np.where(shifted, comp / dn, dn))
    return sign * sn, np.where(reflected, -cn, cn), dn


def _wrap_phi(theta0):
    phi = np.arctan2(np.sin(np.asarray(theta0, dtype=np.float64) - np.pi),
                     np.cos(np.asarray(theta0, dtype=np.float64) - np.pi))
    return np.where(phi <= -np.pi, np.pi, phi)


def _incomplete_f(psi: np.ndarray, m: np.ndarray) -> np.ndarray:
    """F(psi | m) for any real psi using F(psi + q pi) = F(psi) + 2 q K(m)."""
    q = np.round(psi / np.pi)
    r = psi - q * np.pi
    return 2.0 * q * special.ellipk(m) + special.ellipkinc(r, m)


@dataclass(frozen=True)
class OrbitPhases:
    """Per-orbit constants that fix the closed-form solution; arrays share one shape."""

    kappa: np.ndarray
    sigma: np.ndarray
    trapped: np.ndarray
    separatrix: np.ndarray
    fixed: np.ndarray
    m: np.ndarray
    offset: np.ndarray

    @classmethod
    def from_initial(cls, theta0, jprime0) -> "OrbitPhases":
        phi0 = _wrap_phi(theta0)
        j0 = np.asarray(jprime0, dtype=np.float64)
        phi0, j0 = np.broadcast_arrays(phi0, j0)
        half = np.sin(0.5 * phi0)
        kappa = np.sqrt(0.25 * j0 * j0 + half * half)
        sigma = np.where(j0 < 0, -1.0, 1.0)
        separatrix = np.abs(kappa - 1.0) < SEPARATRIX_TOLERANCE
        trapped = (kappa < 1.0) & ~separatrix
        rotating = ~trapped & ~separatrix
        fixed = separatrix & (np.abs(np.abs(half) - 1.0) < SEPARATRIX_TOLERANCE)

        m = np.where(trapped, kappa * kappa, 1.0)
        m = np.where(rotating, 1.0 / np.where(rotating, kappa * kappa, 1.0), m)
        m = np.clip(m, 0.0, 1.0)
        offset = np.zeros_like(kappa)

        if np.any(trapped):
            psi0 = np.arctan2(half[trapped], 0.5 * j0[trapped])
            offset[trapped] = _incomplete_f(psi0, m[trapped])
        if np.any(rotating):
            offset[rotating] = special.ellipkinc(sigma[rotating] * 0.5 * phi0[rotating], m[rotating])
        live = separatrix & ~fixed
        if np.any(live):
            offset[live] = np.arctanh(half[live])
        return cls(kappa=kappa, sigma=sigma, trapped=trapped, separatrix=separatrix, fixed=fixed, m=m,
                   offset=offset)

    def flow(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """(phi(x), J'(x)) on every orbit."""
        x = np.asarray(x, dtype=np.float64)
        shape = np.broadcast(x, self.kappa).shape
        x = np.broadcast_to(x, shape)
        kappa, sigma, offset, m = (np.broadcast_to(a, shape) for a in (self.kappa, self.sigma, self.offset, self.m))
        t_mask, sep, fixed = (np.broadcast_to(a, shape) for a in (self.trapped, self.separatrix, self.fixed))
        r_mask = ~t_mask & ~sep
        phi = np.zeros(shape)
        J = np.zeros(shape)

        arg = np.where(t_mask, offset + x, offset + kappa * x)
        sn, cn, dn = jacobi_elliptic(arg, m)
        J[t_mask] = 2.0 * kappa[t_mask] * cn[t_mask]
        phi[t_mask] = 2.0 * np.arctan2(kappa[t_mask] * sn[t_mask], dn[t_mask])
        J[r_mask] = 2.0 * sigma[r_mask] * kappa[r_mask] * dn[r_mask]
        phi[r_mask] = 2.0 * np.arctan2(sigma[r_mask] * sn[r_mask], cn[r_mask])

        live = sep & ~fixed
        if np.any(live):
            w = offset[live] + sigma[live] * x[live]
            sech = 1.0 / np.cosh(w)
            J[live] = 2.0 * sigma[live] * sech
            phi[live] = 2.0 * np.arctan2(np.tanh(w), sech)
        if np.any(fixed):
            phi[fixed] = np.pi
        return phi, J

    def momentum(self, x) -> np.ndarray:
        return self.flow(x)[1]


@dataclass(frozen=True)
class PendulumOrbit:
    theta0: float
    jprime0: float
    energy: float
    kappa: float
    orbit_class: OrbitClass

    @classmethod
    def from_initial(cls, theta0: float, jprime0: float) -> "PendulumOrbit":
        energy = 0.5 * jprime0 * jprime0 + math.cos(theta0)
        kappa = math.sqrt(max(0.5 * (energy + 1.0), 0.0))
        if abs(kappa - 1.0) < SEPARATRIX_TOLERANCE:
            orbit_class = "separatrix"
        elif kappa < 1.0:
            orbit_class = "trapped"
        else:
            orbit_class = "rotating"
        return cls(theta0=float(theta0), jprime0=float(jprime0), energy=energy, kappa=kappa,
                   orbit_class=orbit_class)

    @property
    def phases(self) -> OrbitPhases:
        return OrbitPhases.from_initial(self.theta0, self.jprime0)


def pendulum_flow(x, orbit: PendulumOrbit) -> Tuple[np.ndarray, np.ndarray]:
    """Angle theta(x) in [0, 2 pi) and momentum J'(x) along ``orbit``."""
    phi, J = orbit.phases.flow(x)
    return np.mod(phi + np.pi, 2.0 * np.pi), J


def pendulum_momentum(x, orbit: PendulumOrbit):
    J = orbit.phases.momentum(x)
    return float(J) if np.ndim(J) == 0 else J


def hamiltonian(theta, jprime):
    return 0.5 * np.asarray(jprime) ** 2 + np.cos(theta)

"""The scaling function G(x) and the energy-ratio predictions built on it.

G(x) = (1 / 8 pi) int_0^{2 pi} d theta_0 int_{-2}^{2} dJ'_0 (J'(x; theta_0, J'_0) - J'_0)^2

is the pendulum share of the energy gained after scaled time x; near the origin
G(x) = x^2/2 - x^4/18 + ...  It is evaluated by Gauss-Legendre quadrature.  The symmetry
(theta, J') -> (2 pi - theta, -J') halves the angular range.  For each angular node the
momentum interval is cut at the separatrix +-2|sin(theta_0 / 2)| and every piece is graded
geometrically toward it, where the orbit period diverges and the integrand oscillates
fastest in J'_0.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import signal, special

from app.core.errors import ParameterError
from app.services.pendulum import OrbitPhases

logger = logging.getLogger(__name__)

DEFAULT_X_MAX = 100.0
DEFAULT_X_STEP = 0.05
DEFAULT_N_THETA = 128
DEFAULT_NODES_PER_PANEL = 20
DEFAULT_LEVELS = 6
SIDE_PEAK_X0 = 11.2
SMALL_X_CHECK = 0.01


def small_x_series(x):
    """Leading terms x^2/2 - x^4/18 of G about the origin."""
    xs = np.asarray(x, dtype=np.float64)
    return 0.5 * xs**2 - xs**4 / 18.0


@dataclass(frozen=True)
class QuadratureRule:
    """Flattened nodes and weights over the half domain theta_0 in [0, pi]."""

    theta: np.ndarray
    jprime: np.ndarray
    weight: np.ndarray

    @property
    def size(self) -> int:
        return int(self.weight.size)


def _graded_panel(a: float, b: float, levels: int, nodes: np.ndarray, weights: np.ndarray,
                  toward_b: bool) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss nodes on [a, b] with sub-panels halving in width toward one end."""
    width = b - a
    if width <= 0:
        return np.empty(0), np.empty(0)
    fractions = np.concatenate([[0.0], 1.0 - 0.5 ** np.arange(1, levels + 1), [1.0]])
    if toward_b:
        cuts = a + width * fractions
    else:
        cuts = b - width * fractions[::-1]
    lo, hi = cuts[:-1], cuts[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


@lru_cache(maxsize=8)
def quadrature_rule(n_theta: int = DEFAULT_N_THETA, nodes_per_panel: int = DEFAULT_NODES_PER_PANEL,
                    levels: int = DEFAULT_LEVELS) -> QuadratureRule:
    t_nodes, t_weights = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * np.pi * (t_nodes + 1.0)
    theta_w = 0.5 * np.pi * t_weights
    j_nodes, j_weights = np.polynomial.legendre.leggauss(nodes_per_panel)

    thetas, jprimes, weights = [], [], []
    for th, tw in zip(theta, theta_w):
        js = 2.0 * abs(math.sin(0.5 * th))
        panels = ((-2.0, -js, True), (-js, 0.0, False), (0.0, js, True), (js, 2.0, False))
        for a, b, toward_b in panels:
            x, w = _graded_panel(a, b, levels, j_nodes, j_weights, toward_b)
            thetas.append(np.full(x.size, th))
            jprimes.append(x)
            weights.append(w * tw)
    return QuadratureRule(theta=np.concatenate(thetas), jprime=np.concatenate(jprimes),
                          weight=np.concatenate(weights))


def evaluate_g(x, n_theta: int = DEFAULT_N_THETA, nodes_per_panel: int = DEFAULT_NODES_PER_PANEL,
               levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """G at each requested x by direct quadrature."""
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(xs < 0) or not np.all(np.isfinite(xs)):
        raise ParameterError("G(x) is defined for finite x >= 0")
    rule = quadrature_rule(n_theta, nodes_per_panel, levels)
    orbits = OrbitPhases.from_initial(rule.theta, rule.jprime)
    # half domain weight is 1/(4 pi)
    scale = 1.0 / (4.0 * np.pi)
    out = np.empty(xs.size)
    for i, xi in enumerate(xs):
        J = orbits.momentum(xi)
        gain = J - rule.jprime
        out[i] = scale * np.dot(rule.weight, gain * gain)
    return out


@dataclass(frozen=True)
class GTable:
    x: np.ndarray
    g: np.ndarray
    n_theta: int
    nodes_per_panel: int
    levels: int
    small_x_error: float = field(default=0.0)

    def __call__(self, x) -> np.ndarray:
        xs = np.asarray(x, dtype=np.float64)
        if np.any(xs < self.x[0]) or np.any(xs > self.x[-1]):
            raise ParameterError(f"x outside the tabulated range [{self.x[0]}, {self.x[-1]}]")
        return np.interp(xs, self.x, self.g)

    @property
    def x_max(self) -> float:
        return float(self.x[-1])


def build_g_table(x_grid: Optional[Sequence[float]] = None, n_theta: int = DEFAULT_N_THETA,
                  nodes_per_panel: int = DEFAULT_NODES_PER_PANEL, levels: int = DEFAULT_LEVELS) -> GTable:
    if x_grid is None:
        x_grid = np.linspace(0.0, DEFAULT_X_MAX, int(round(DEFAULT_X_MAX / DEFAULT_X_STEP)) + 1)
    xs = np.asarray(x_grid, dtype=np.float64)
    if xs.ndim != 1 or xs.size == 0 or np.any(np.diff(xs) <= 0):
        raise ParameterError("G table grid must be a non-empty strictly ascending sequence")
    started = time.perf_counter()
    logger.info("Building G(x) table: %d points, %d angular nodes", xs.size, n_theta)
    g = evaluate_g(xs, n_theta, nodes_per_panel, levels)
    measured = float(evaluate_g(SMALL_X_CHECK, n_theta, nodes_per_panel, levels)[0])
    expected = float(small_x_series(SMALL_X_CHECK))
    error = abs(measured - expected) / expected
    logger.info("G(x) table ready in %.1fs (small-x relative error %.2e)", time.perf_counter() - started, error)
    return GTable(x=xs, g=g, n_theta=n_theta, nodes_per_panel=nodes_per_panel, levels=levels,
                  small_x_error=error)


@lru_cache(maxsize=1)
def default_g_table() -> GTable:
    return build_g_table()


def g_function(x, table: Optional[GTable] = None):
    """G(x) from the cached table, falling back to direct quadrature beyond its range."""
    table = table or default_g_table()
    xs = np.asarray(x, dtype=np.float64)
    if np.any(xs < 0):
        raise ParameterError("G(x) is defined for x >= 0")
    flat = np.atleast_1d(xs).ravel()
    out = np.empty(flat.size)
    inside = flat <= table.x_max
    out[inside] = table(flat[inside])
    if np.any(~inside):
        out[~inside] = evaluate_g(flat[~inside], table.n_theta, table.nodes_per_panel, table.levels)
    return float(out[0]) if xs.ndim == 0 else out.reshape(xs.shape)


def free_rotor_background(x):
    """Approximate 1 - Phi_0(x): free-rotor energy of initial conditions with |J'_0| > 2.

    Equals 1 at x = 0 and decays like 1 / (pi x).
    """
    xs = np.asarray(x, dtype=np.float64)
    if np.any(xs < 0):
        raise ParameterError("background is defined for x >= 0")
    safe = np.where(xs > 0, xs, 1.0)
    si, _ = special.sici(2.0 * safe)
    value = 1.0 - (2.0 / np.pi) * si + (1.0 - np.cos(2.0 * safe)) / (np.pi * safe)
    value = np.where(xs > 0, value, 1.0)
    return float(value) if xs.ndim == 0 else value


def energy_ratio_pendulum(x, full_form: bool = False, table: Optional[GTable] = None):
    """Off-resonant energy ratio (4 / pi x) G(x); ``full_form`` adds the approximate background."""
    xs = np.asarray(x, dtype=np.float64)
    if np.any(xs <= 0):
        raise ParameterError("the pendulum energy ratio needs x > 0")
    ratio = 4.0 / (np.pi * xs) * g_function(xs, table)
    if full_form:
        ratio = ratio + free_rotor_background(xs)
    return float(ratio) if xs.ndim == 0 else ratio


def ratio_upper_envelope(x_min: float = 20.0, x_max: float = DEFAULT_X_MAX,
                         table: Optional[GTable] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Local maxima of (4 / pi x) G(x) on the table grid inside [x_min, x_max].

    A window without two interior maxima returns the whole curve.
    """
    table = table or default_g_table()
    if not 0 < x_min < x_max:
        raise ParameterError(f"envelope window must satisfy 0 < x_min < x_max, got [{x_min}, {x_max}]")
    window = (table.x >= x_min) & (table.x <= x_max)
    xs = table.x[window]
    ratio = 4.0 / (np.pi * xs) * table.g[window]
    tops, _ = signal.find_peaks(ratio)
    if tops.size < 2:
        return xs, ratio
    return xs[tops], ratio[tops]


def predict_side_peak(kicks: int, k: float, x0: float = SIDE_PEAK_X0) -> float:
    """|eps| of the side peaks after ``kicks`` kicks: x0 / (t^2 k)."""
    if kicks < 1:
        raise ParameterError(f"kick count must be >= 1, got {kicks!r}")
    if not k > 0:
        raise ParameterError(f"k must be positive, got {k!r}")
    return x0 / (kicks * kicks * k)


def side_peak_kbars(kicks: int, k: float, ell: int = 1, x0: float = SIDE_PEAK_X0) -> Tuple[float, float]:
    if ell < 1:
        raise ParameterError(f"resonance order must be >= 1, got {ell}")
    eps = predict_side_peak(kicks, k, x0)
    center = 2.0 * math.pi * ell
    return center - eps, center + eps

"""Side-peak location, x0 fitting and central-peak widths on scan curves."""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import signal

from app.core.errors import AnalysisError
from app.models.results import ScanResult
from app.services.gfunction import SIDE_PEAK_X0

logger = logging.getLogger(__name__)

MIN_FIT_KICK_COUNTS = 3
MIN_POINTS_ABOVE_HALF = 7

PEAK_COLUMNS = ["kicks", "engine", "left_epsilon", "left_height", "right_epsilon", "right_height", "fwhm",
                "x0", "x0_stderr"]


@dataclass(frozen=True)
class SidePeak:
    epsilon: float
    height: float


@dataclass
class KickPeaks:
    kicks: int
    engine: str
    left: Optional[SidePeak] = None
    right: Optional[SidePeak] = None
    fwhm: Optional[float] = None

    @property
    def abs_epsilons(self) -> List[float]:
        return [abs(p.epsilon) for p in (self.left, self.right) if p is not None]


@dataclass
class PeakReport:
    k: float
    entries: List[KickPeaks] = field(default_factory=list)
    x0: Optional[float] = None
    x0_stderr: Optional[float] = None

    def for_kicks(self, kicks: int, engine: Optional[str] = None) -> KickPeaks:
        for entry in self.entries:
            if entry.kicks == kicks and (engine is None or entry.engine == engine):
                return entry
        raise KeyError(kicks)

    def peak_points(self) -> List[Tuple[int, float]]:
        return [(e.kicks, eps) for e in self.entries for eps in e.abs_epsilons]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for e in self.entries:
            rows.append({
                "kicks": e.kicks,
                "engine": e.engine,
                "left_epsilon": e.left.epsilon if e.left else np.nan,
                "left_height": e.left.height if e.left else np.nan,
                "right_epsilon": e.right.epsilon if e.right else np.nan,
                "right_height": e.right.height if e.right else np.nan,
                "fwhm": e.fwhm if e.fwhm is not None else np.nan,
                "x0": self.x0 if self.x0 is not None else np.nan,
                "x0_stderr": self.x0_stderr if self.x0_stderr is not None else np.nan,
            })
        return pd.DataFrame(rows, columns=PEAK_COLUMNS)


def _parabolic_vertex(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Vertex of the parabola through three points; the middle point when it is not a maximum."""
    a, b, c = np.polyfit(x, y, 2)
    if not a < 0:
        return float(x[1]), float(y[1])
    xv = -b / (2.0 * a)
    if not x[0] <= xv <= x[2]:
        return float(x[1]), float(y[1])
    return float(xv), float(np.polyval((a, b, c), xv))


def _window_peak(eps: np.ndarray, ratio: np.ndarray) -> Optional[SidePeak]:
    """Most prominent interior local maximum of one window, refined parabolically."""
    if eps.size < 3:
        return None
    candidates, props = signal.find_peaks(ratio, prominence=0.0)
    if candidates.size == 0:
        return None
    i = int(candidates[np.argmax(props["prominences"])])
    x, y = _parabolic_vertex(eps[i - 1:i + 2], ratio[i - 1:i + 2])
    return SidePeak(epsilon=x, height=y)


def locate_side_peaks(eps: Sequence[float], ratio: Sequence[float],
                      exclusion: float) -> Tuple[Optional[SidePeak], Optional[SidePeak]]:
    """Left and right side peaks of a ratio curve outside |eps| < exclusion."""
    eps = np.asarray(eps, dtype=np.float64)
    ratio = np.asarray(ratio, dtype=np.float64)
    order = np.argsort(eps, kind="mergesort")
    eps, ratio = eps[order], ratio[order]
    left = eps < -exclusion
    right = eps > exclusion
    return _window_peak(eps[left], ratio[left]), _window_peak(eps[right], ratio[right])


def central_fwhm(eps: Sequence[float], ratio: Sequence[float]) -> float:
    """FWHM of the highest peak above the baseline set by the two outermost grid points."""
    eps = np.asarray(eps, dtype=np.float64)
    ratio = np.asarray(ratio, dtype=np.float64)
    order = np.argsort(eps, kind="mergesort")
    eps, ratio = eps[order], ratio[order]
    if eps.size < MIN_POINTS_ABOVE_HALF:
        raise AnalysisError(f"curve has {eps.size} points, the central peak is unresolved")

    baseline = 0.5 * (ratio[0] + ratio[-1])
    top = int(np.argmax(ratio))
    height = ratio[top] - baseline
    if not height > 0:
        raise AnalysisError("no peak above the far-detuned baseline")
    half = baseline + 0.5 * height

    lo = top
    while lo > 0 and ratio[lo - 1] >= half:
        lo -= 1
    hi = top
    while hi < eps.size - 1 and ratio[hi + 1] >= half:
        hi += 1
    if lo == 0 or hi == eps.size - 1:
        raise AnalysisError("central peak does not fall below half maximum inside the grid")
    if hi - lo + 1 < MIN_POINTS_ABOVE_HALF:
        raise AnalysisError(f"only {hi - lo + 1} grid points above half maximum, the central peak is unresolved")

    left = np.interp(half, [ratio[lo - 1], ratio[lo]], [eps[lo - 1], eps[lo]])
    right = np.interp(half, [ratio[hi + 1], ratio[hi]], [eps[hi + 1], eps[hi]])
    return float(right - left)


def find_side_peaks(result: ScanResult, exclusion: Optional[float] = None, engine: Optional[str] = None,
                    x0: float = SIDE_PEAK_X0) -> PeakReport:
    """Side peaks of every (kick count, engine) curve in ``result``.

    The default exclusion window is half the predicted peak position, x0 / (2 t^2 k).
    """
    if exclusion is None and not result.k > 0:
        raise AnalysisError("an exclusion window is required when k = 0")
    report = PeakReport(k=result.k)
    engines = [engine] if engine else result.engines
    for eng in engines:
        for t in result.kick_counts:
            curve = result.curve(t, eng)
            if curve.empty:
                continue
            window = exclusion if exclusion is not None else x0 / (2.0 * t * t * result.k)
            left, right = locate_side_peaks(curve["epsilon"], curve["ratio"], window)
            if left is None or right is None:
                logger.warning("t=%d (%s): side peak missing on the %s", t, eng,
                               "both sides" if left is None and right is None else ("left" if left is None else "right"))
            try:
                width = central_fwhm(curve["epsilon"], curve["ratio"])
            except AnalysisError as e:
                logger.debug("t=%d (%s): no FWHM (%s)", t, eng, e)
                width = None
            report.entries.append(KickPeaks(kicks=t, engine=eng, left=left, right=right, fwhm=width))
    return report


def fit_x0(points: Iterable[Tuple[int, float]], k: float) -> Tuple[float, float]:
    """Least-squares x0 in |eps| = x0 / (t^2 k) with its standard error."""
    pts = [(int(t), abs(float(e))) for t, e in points]
    if len({t for t, _ in pts}) < MIN_FIT_KICK_COUNTS:
        raise AnalysisError(f"fitting x0 needs peaks at {MIN_FIT_KICK_COUNTS} or more kick counts")
    if not k > 0:
        raise AnalysisError("fitting x0 needs k > 0")
    t = np.array([p[0] for p in pts], dtype=np.float64)
    y = np.array([p[1] for p in pts])
    a = (1.0 / (t * t * k))[:, np.newaxis]
    coef, _, _, _ = np.linalg.lstsq(a, y, rcond=None)
    x0 = float(coef[0])
    resid = y - a[:, 0] * x0
    dof = max(len(pts) - 1, 1)
    stderr = math.sqrt(float(resid @ resid) / dof / float(a[:, 0] @ a[:, 0]))
    return x0, stderr


def fit_report_x0(report: PeakReport) -> PeakReport:
    report.x0, report.x0_stderr = fit_x0(report.peak_points(), report.k)
    return report


def relative_residuals(points: Iterable[Tuple[int, float]], k: float, x0: float) -> np.ndarray:
    pts = list(points)
    t = np.array([p[0] for p in pts], dtype=np.float64)
    y = np.abs(np.array([p[1] for p in pts], dtype=np.float64))
    model = x0 / (t * t * k)
    return (y - model) / model


def peak_fwhm(result: ScanResult, engine: Optional[str] = None) -> Dict[int, float]:
    """Central-peak FWHM in eps for every kick count."""
    eng = engine or result.engines[0]
    widths = {}
    for t in result.kick_counts:
        curve = result.curve(t, eng)
        widths[t] = central_fwhm(curve["epsilon"], curve["ratio"])
    return widths

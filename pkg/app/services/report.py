"""CSV emission with provenance headers, and reading scan files back."""
import io
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Union

import numpy as np
import pandas as pd

from app import __version__
from app.core.errors import OutputError
from app.models.results import ScanResult
from app.models.schemas import OutputPaths
from app.services.gfunction import SIDE_PEAK_X0, GTable, free_rotor_background, predict_side_peak
from app.services.peaks import PeakReport
from app.services.quantum import MomentumHistogram

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
ENGINE_VERSIONS = {"quantum": "1.0", "eclassical": "1.0", "pendulum": "1.0"}
FIGURE_COLUMNS = ["figure", "series", "x", "y"]
PDIST_COLUMNS = ["kbar", "kicks", "p_low", "p_high", "mass"]

PathLike = Union[str, Path]


def header_lines(config_hash: str, seed: Optional[int], k: Optional[float],
                 extra: Optional[Mapping[str, object]] = None) -> List[str]:
    versions = ",".join(f"{name}={v}" for name, v in sorted(ENGINE_VERSIONS.items()))
    lines = [
        f"# kicked-rotor-sim {__version__}",
        f"# config_hash: {config_hash}",
        f"# seed: {seed if seed is not None else ''}",
        f"# k: {'' if k is None else format(k, '.12g')}",
        f"# engines: {versions}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def write_csv(path: PathLike, frame: pd.DataFrame, header: Iterable[str]) -> Path:
    """Write header lines then the frame; byte-identical for identical inputs."""
    path = Path(path)
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            for line in header:
                f.write(line + "\n")
            f.write(buffer.getvalue())
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def write_scan_csv(path: PathLike, result: ScanResult) -> Path:
    return write_csv(path, result.table, header_lines(result.config_hash, result.seed, result.k))


def read_header(path: PathLike) -> Dict[str, str]:
    meta: Dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                key, sep, value = line[1:].strip().partition(":")
                if sep:
                    meta[key.strip()] = value.strip()
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    return meta


def read_scan_csv(path: PathLike) -> ScanResult:
    """Load a scan file written by ``write_scan_csv``."""
    meta = read_header(path)
    try:
        table = pd.read_csv(path, comment="#")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise OutputError(path, str(e)) from e
    try:
        k = float(meta["k"])
        seed = int(meta["seed"])
    except (KeyError, ValueError) as e:
        raise OutputError(path, "missing k/seed provenance header") from e
    return ScanResult.from_rows(table.to_dict("records"), k=k, seed=seed, config_hash=meta.get("config_hash", ""))


def gtable_frame(table: GTable) -> pd.DataFrame:
    return pd.DataFrame({"x": table.x, "G": table.g})


def pdist_frame(histograms: Mapping[tuple, MomentumHistogram]) -> pd.DataFrame:
    """Long-format histogram table keyed by (kbar, kicks)."""
    frames = []
    for (kbar, kicks), hist in sorted(histograms.items()):
        frames.append(pd.DataFrame({
            "kbar": kbar,
            "kicks": kicks,
            "p_low": hist.edges[:-1],
            "p_high": hist.edges[1:],
            "mass": hist.mass,
        }))
    if not frames:
        return pd.DataFrame(columns=PDIST_COLUMNS)
    return pd.concat(frames, ignore_index=True)[PDIST_COLUMNS]


def figures_frame(result: Optional[ScanResult], report: Optional[PeakReport], gtable: Optional[GTable],
                  histograms: Optional[Mapping[tuple, MomentumHistogram]] = None) -> pd.DataFrame:
    """Plot-ready collation: G(x), momentum distributions, energy vs period, peak motion."""
    parts = []

    def add(figure: str, series: str, x, y) -> None:
        parts.append(pd.DataFrame({"figure": figure, "series": series, "x": np.asarray(x, dtype=np.float64),
                                   "y": np.asarray(y, dtype=np.float64)}))

    if gtable is not None:
        add("gfunction", "G", gtable.x, gtable.g)
        add("gfunction", "background", gtable.x, free_rotor_background(gtable.x))
    for (kbar, kicks), hist in sorted((histograms or {}).items()):
        centers = 0.5 * (hist.edges[:-1] + hist.edges[1:])
        add("momentum", f"kbar={kbar:.6g} t={kicks}", centers, hist.mass)
    if result is not None:
        for engine in result.engines:
            for t in result.kick_counts:
                curve = result.curve(t, engine)
                if not curve.empty:
                    add("energy", f"{engine} t={t}", curve["period_us"], curve["mean_energy"])
    if report is not None and report.entries:
        points = report.peak_points()
        if points:
            add("peak_motion", "found", [p[0] for p in points], [p[1] for p in points])
        if report.k > 0:
            kicks = sorted({e.kicks for e in report.entries})
            x0 = report.x0 if report.x0 is not None else None
            # the literal x0 / (t^2 k) law and the x0^2 / (t^2 k) one the scan curves follow
            add("peak_motion", "x0_law", kicks, [predict_side_peak(t, report.k) for t in kicks])
            add("peak_motion", "x0_squared_law", kicks,
                [predict_side_peak(t, report.k, SIDE_PEAK_X0 ** 2) for t in kicks])
            if x0 is not None:
                add("peak_motion", "fitted", kicks, [predict_side_peak(t, report.k, x0) for t in kicks])
    if not parts:
        return pd.DataFrame(columns=FIGURE_COLUMNS)
    return pd.concat(parts, ignore_index=True)[FIGURE_COLUMNS]


def emit_report(
    output: OutputPaths,
    result: Optional[ScanResult] = None,
    report: Optional[PeakReport] = None,
    gtable: Optional[GTable] = None,
    histograms: Optional[Mapping[tuple, MomentumHistogram]] = None,
    config_hash: str = "",
    seed: Optional[int] = None,
    k: Optional[float] = None,
) -> Dict[str, Path]:
    """Write every available artifact under ``output.directory``."""
    directory = Path(output.directory)
    if result is not None:
        config_hash = config_hash or result.config_hash
        seed = result.seed if seed is None else seed
        k = result.k if k is None else k
    header = header_lines(config_hash, seed, k)
    written: Dict[str, Path] = {}
    if result is not None:
        written["scan"] = write_csv(directory / output.scan_file, result.table, header)
    if report is not None:
        written["peaks"] = write_csv(directory / output.peaks_file, report.to_frame(), header)
    if gtable is not None:
        written["gfunc"] = write_csv(directory / output.gfunc_file, gtable_frame(gtable), header)
    if histograms:
        written["pdist"] = write_csv(directory / output.pdist_file, pdist_frame(histograms), header)
    written["figures"] = write_csv(directory / output.figures_file,
                                   figures_frame(result, report, gtable, histograms), header)
    return written

"""Command-line surface of the scan harness.

    python -m app scan --config configs/resonance_scan.toml --threads 4
    python -m app peaks --input results/scan.csv
    python -m app fit-x0 --input results/scan.csv
    python -m app gfunc --x-max 100
    python -m app pdist --kbar 6.3 5.9 --pdist-kicks 14
    python -m app report --config configs/resonance_scan.toml
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from app.core.errors import AnalysisError, KickedRotorError, ParameterError
from app.core.logging import configure_logging
from app.models.schemas import KickParams, OutputPaths, ScanConfig
from app.services import gfunction, peaks, quantum, report, scan

logger = logging.getLogger(__name__)


def _kick_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="TOML scan configuration")
    p.add_argument("--engine", choices=["quantum", "eclassical", "both"], default=None)
    p.add_argument("--k", type=float, default=None, help="kick strength")
    p.add_argument("--kicks", type=_kick_list, default=None, help="comma-separated kick counts")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--atoms", dest="atom_count", type=int, default=None, help="quantum atom count")
    p.add_argument("--eclassical-atoms", type=int, default=None)
    p.add_argument("--trajectories", dest="trajectories_per_atom", type=int, default=None)
    p.add_argument("--kbar-range", type=float, nargs=3, metavar=("START", "STOP", "STEP"), default=None)
    p.add_argument("--se-probability", type=float, default=None, help="spontaneous emission per kick")
    p.add_argument("--output-dir", default=None)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: SCAN_THREADS)")
    p.add_argument("--no-progress", action="store_true", help="disable the progress bar")


def _config_from(args: argparse.Namespace) -> ScanConfig:
    overrides = {name: getattr(args, name, None) for name in scan.OVERRIDE_PATHS}
    if overrides.get("kbar_range") is not None:
        overrides["kbar_range"] = list(overrides["kbar_range"])
    return scan.load_scan_config(args.config, overrides)


def _progress(args: argparse.Namespace) -> bool:
    return not args.no_progress and sys.stderr.isatty()


def _output_for(args: argparse.Namespace) -> OutputPaths:
    directory = getattr(args, "output_dir", None)
    return OutputPaths(directory=directory) if directory else OutputPaths()


def cmd_scan(args: argparse.Namespace) -> int:
    config = _config_from(args)
    result = scan.run_scan(config, threads=args.threads, progress=_progress(args))
    path = report.write_scan_csv(Path(config.output.directory) / config.output.scan_file, result)
    print(path)
    return 0


def _peak_report(args: argparse.Namespace):
    result = report.read_scan_csv(args.input)
    found = peaks.find_side_peaks(result, exclusion=args.exclusion, engine=args.engine, x0=args.x0)
    return result, found


def cmd_peaks(args: argparse.Namespace) -> int:
    result, found = _peak_report(args)
    output = _output_for(args)
    header = report.header_lines(result.config_hash, result.seed, result.k)
    path = report.write_csv(Path(output.directory) / output.peaks_file, found.to_frame(), header)
    print(path)
    return 0


def cmd_fit_x0(args: argparse.Namespace) -> int:
    result, found = _peak_report(args)
    peaks.fit_report_x0(found)
    residuals = peaks.relative_residuals(found.peak_points(), found.k, found.x0)
    output = _output_for(args)
    header = report.header_lines(result.config_hash, result.seed, result.k)
    report.write_csv(Path(output.directory) / output.peaks_file, found.to_frame(), header)
    print(json.dumps({
        "x0": found.x0,
        "stderr": found.x0_stderr,
        "max_relative_residual": float(np.max(np.abs(residuals))),
        "points": len(residuals),
    }))
    return 0


def cmd_gfunc(args: argparse.Namespace) -> int:
    steps = int(round(args.x_max / args.x_step))
    grid = np.linspace(0.0, steps * args.x_step, steps + 1)
    table = gfunction.build_g_table(grid, n_theta=args.n_theta, nodes_per_panel=args.nodes)
    output = _output_for(args)
    header = report.header_lines("", None, None, {"n_theta": args.n_theta, "nodes_per_panel": args.nodes,
                                                   "small_x_error": f"{table.small_x_error:.3e}"})
    path = report.write_csv(Path(output.directory) / output.gfunc_file, report.gtable_frame(table), header)
    print(path)
    return 0


def momentum_distributions(config: ScanConfig, kbars: List[float], kicks: int, p_max: float, bin_width: float):
    edges = np.arange(-p_max, p_max + 0.5 * bin_width, bin_width)
    histograms = {}
    for kbar in kbars:
        try:
            params = KickParams(k=config.k, kbar=kbar, kicks=kicks)
        except ValidationError as e:
            raise ParameterError(f"invalid kick parameters: {e}") from e
        histograms[(kbar, kicks)] = quantum.momentum_histogram(config.ensemble, params, config.noise, edges)
    return histograms


def cmd_pdist(args: argparse.Namespace) -> int:
    config = _config_from(args)
    histograms = momentum_distributions(config, args.kbar, args.pdist_kicks, args.p_max, args.bin_width)
    for (kbar, t), hist in sorted(histograms.items()):
        logger.info("kbar=%.4f t=%d: mass beyond |p|>%g = %.4g", kbar, t, args.wing, hist.wing_mass(args.wing))
    header = report.header_lines(scan.config_hash(config), config.seed, config.k)
    path = report.write_csv(Path(config.output.directory) / config.output.pdist_file,
                            report.pdist_frame(histograms), header)
    print(path)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _config_from(args)
    result = scan.run_scan(config, threads=args.threads, progress=_progress(args))
    found = peaks.find_side_peaks(result, x0=config.x0) if config.k > 0 else None
    if found is not None:
        try:
            peaks.fit_report_x0(found)
        except AnalysisError as e:
            logger.warning("x0 not fitted: %s", e)
    table = gfunction.default_g_table() if not args.skip_gfunc else None
    histograms = None
    if args.pdist_kbar:
        histograms = momentum_distributions(config, args.pdist_kbar, args.pdist_kicks, args.p_max, args.bin_width)
    written = report.emit_report(config.output, result=result, report=found, gtable=table, histograms=histograms)
    for path in written.values():
        print(path)
    return 0


def _add_pdist_flags(p: argparse.ArgumentParser, required: bool) -> None:
    flag = "--kbar" if required else "--pdist-kbar"
    p.add_argument(flag, dest="kbar" if required else "pdist_kbar", type=float, nargs="+",
                   required=required, default=None)
    p.add_argument("--pdist-kicks", type=int, default=14)
    p.add_argument("--p-max", type=float, default=40.0)
    p.add_argument("--bin-width", type=float, default=1.0)
    p.add_argument("--wing", type=float, default=10.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kicked-rotor", description="Near-resonant kicked rotor scans")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="run a kbar scan and write the scan CSV")
    _add_config_flags(p)
    _add_run_flags(p)
    p.set_defaults(func=cmd_scan)

    for name, func, help_text in (("peaks", cmd_peaks, "locate side peaks in a scan CSV"),
                                  ("fit-x0", cmd_fit_x0, "fit x0 to the side-peak positions")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--input", type=Path, required=True)
        p.add_argument("--engine", default=None)
        p.add_argument("--exclusion", type=float, default=None, help="central window half-width in eps")
        p.add_argument("--x0", type=float, default=gfunction.SIDE_PEAK_X0)
        p.add_argument("--output-dir", default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("gfunc", help="tabulate G(x)")
    p.add_argument("--x-max", type=float, default=gfunction.DEFAULT_X_MAX)
    p.add_argument("--x-step", type=float, default=gfunction.DEFAULT_X_STEP)
    p.add_argument("--n-theta", type=int, default=gfunction.DEFAULT_N_THETA)
    p.add_argument("--nodes", type=int, default=gfunction.DEFAULT_NODES_PER_PANEL)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_gfunc)

    p = sub.add_parser("pdist", help="quantum momentum distributions")
    _add_config_flags(p)
    _add_pdist_flags(p, required=True)
    p.set_defaults(func=cmd_pdist)

    p = sub.add_parser("report", help="scan, peaks, G(x) and the plot-ready collation")
    _add_config_flags(p)
    _add_run_flags(p)
    _add_pdist_flags(p, required=False)
    p.add_argument("--skip-gfunc", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except KickedRotorError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print(json.dumps({"error": "interrupted", "message": "interrupted by user"}), file=sys.stderr)
        return 130

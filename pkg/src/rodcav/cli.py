"""Command-line entry points.

Subcommands: bands, run, reference, sweep, harminv, compare, physical.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import scenarios
from .analysis import extraction_ratio, harmonic_inversion
from .fdtd import InstabilityError, ProbeSeries
from .monitors import Spectrum
from .scenarios import ConfigError, emit_outputs, parse_config
from .units import PhysicalScale, scale_for_mode

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _load_config(path: str) -> scenarios.ScenarioConfig:
    return parse_config(Path(path).read_text())


def _cmd_bands(args) -> int:
    cfg = _load_config(args.config)
    bands, reports = scenarios.run_bands_scenario(cfg)
    outdir = Path(args.output or cfg.output_dir)
    emit_outputs(outdir, bands=bands, gap_reports=reports)
    for rep in reports:
        lo, hi = rep.wavelength_interval
        print(f"{rep.polarization} gap above band {rep.below_band}: "
              f"f {rep.f_lower:.4f}-{rep.f_upper:.4f} c/a "
              f"(lambda {lo:.3f}-{hi:.3f} a, gap/midgap {rep.gap_midgap:.3f})")
    if not reports:
        print("no gap found")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    result = scenarios.run_cavity_scenario(cfg)
    outdir = Path(args.output or cfg.output_dir)
    emit_outputs(outdir, spectrum=result.spectrum, modes=result.modes,
                 snapshots=result.snapshots, series=result.series)
    if not result.converged:
        print("warning: field not decayed at max_steps; raise run.max_steps",
              file=sys.stderr)
    mode = result.dominant_mode
    if mode is not None:
        q = f"{mode.q:.1f}" if math.isfinite(mode.q) else "inf"
        print(f"dominant mode: f {mode.frequency:.4f} c/a "
              f"(lambda {mode.wavelength:.4f} a), Q {q}")
    else:
        print("no resonance found in the analysis band")
    return 0


def _cmd_reference(args) -> int:
    cfg = _load_config(args.config)
    spectrum = scenarios.run_reference_scenario(cfg)
    outdir = Path(args.output or cfg.output_dir)
    emit_outputs(outdir, spectrum=spectrum)
    f, v = spectrum.peak()
    print(f"reference flux peak {v:.6g} at f {f:.4f} c/a")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    values = [float(v) for v in args.values]
    if args.parameter == "radius":
        table = scenarios.sweep_radius(cfg, values)
    else:
        table = scenarios.sweep_dipole_z(cfg, values)
    outdir = Path(args.output or cfg.output_dir)
    emit_outputs(outdir, sweep=table)
    for row in table.rows:
        if row.error:
            print(f"{table.parameter}={row.value:g}: FAILED ({row.error})")
        else:
            print(f"{table.parameter}={row.value:g}: eta {row.eta:.3f}")
    return 0


def _cmd_harminv(args) -> int:
    series = ProbeSeries.from_csv(args.series)
    modes = harmonic_inversion(series, args.fmin, args.fmax, args.max_modes)
    print(json.dumps([m.as_dict() for m in modes], indent=2))
    return 0


def _cmd_compare(args) -> int:
    cav = Spectrum.from_csv(Path(args.cavity_dir) / "spectrum.csv")
    ref = Spectrum.from_csv(Path(args.reference_dir) / "spectrum.csv")
    result = extraction_ratio(cav, ref)
    if args.output:
        emit_outputs(args.output, extraction=result)
    print(json.dumps(result.as_dict(), indent=2))
    return 0


def _cmd_physical(args) -> int:
    if args.alpha_nm is not None:
        scale = PhysicalScale(args.alpha_nm)
    else:
        scale = scale_for_mode(args.mode_wavelength, args.target_nm)
    info = {
        "alpha_nm": scale.alpha_nm,
        "rod_radius_nm": scale.length_nm(args.radius),
        "rod_diameter_nm": 2.0 * scale.length_nm(args.radius),
        "mode_wavelength_nm": scale.wavelength_nm(1.0 / args.mode_wavelength),
    }
    print(json.dumps(info, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rodcav",
                                description="rod-type photonic crystal cavity toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("bands", help="2D plane-wave band structure and gaps")
    sp.add_argument("config")
    sp.add_argument("--output")
    sp.set_defaults(func=_cmd_bands)

    sp = sub.add_parser("run", help="3D FDTD cavity run")
    sp.add_argument("config")
    sp.add_argument("--output")
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("reference", help="bare-substrate reference run")
    sp.add_argument("config")
    sp.add_argument("--output")
    sp.set_defaults(func=_cmd_reference)

    sp = sub.add_parser("sweep", help="parameter sweep")
    sp.add_argument("parameter", choices=["radius", "dipole-z"])
    sp.add_argument("config")
    sp.add_argument("--values", nargs="+", required=True)
    sp.add_argument("--output")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("harminv", help="resonances from a probe CSV")
    sp.add_argument("series")
    sp.add_argument("--fmin", type=float, required=True)
    sp.add_argument("--fmax", type=float, required=True)
    sp.add_argument("--max-modes", type=int, default=10)
    sp.set_defaults(func=_cmd_harminv)

    sp = sub.add_parser("compare", help="extraction ratio of two spectra")
    sp.add_argument("cavity_dir")
    sp.add_argument("reference_dir")
    sp.add_argument("--output")
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("physical", help="normalized-to-nm conversion")
    sp.add_argument("--alpha-nm", type=float)
    sp.add_argument("--radius", type=float, default=0.165)
    sp.add_argument("--mode-wavelength", type=float, default=1.13)
    sp.add_argument("--target-nm", type=float, default=660.0)
    sp.set_defaults(func=_cmd_physical)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InstabilityError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end experiment drivers: cavity run, flat-substrate reference,
radius sweep, dipole-height sweep, and band-structure computation, with
figure-ready CSV/JSON outputs and a deterministic on-disk result cache.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fdtd
from .analysis import ResonanceMode, extraction_ratio, harmonic_inversion
from .geometry import (Material, RodLattice, SceneGeometry, SilSlab,
                       lattice_sites)
from .grid import GridSpec, discretize
from .monitors import (FluxMonitor, Spectrum, flux_spectrum, snapshot,
                       write_snapshot)
from .pwe import band_structure, default_kpath, find_gap

DEFAULT_MODE_WAVELENGTH = 1.13  # drives the mode-height convention for z sweeps
PROBE_OFFSET = (0.123, 0.217)   # low-symmetry lateral probe offset, in a


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class ScenarioConfig:
    lattice_type: str = "triangular"
    radius: float = 0.165
    height: float = 2.3
    rings: int = 5
    rod_index: float = 3.9
    defects: tuple = ((0, 0),)
    substrate_index: float = 3.9
    substrate_clearance: float = 1.0
    background_index: float = 1.0
    sil_enabled: bool = False
    sil_index: float = 1.5
    sil_thickness: float = 2.0
    sil_gap: float = 0.0
    resolution: int = 16
    pml: float = 1.0
    courant: float = 0.5
    margin: float = 0.5
    extra_height: float = 0.5
    source_polarization: str = "x"
    source_frequency: float = 0.885
    source_width: float = 0.3
    source_cutoff: float = 6.0
    source_amplitude: float = 1.0
    source_x: float = 0.0
    source_y: float = 0.0
    source_z: float | None = None        # None -> half the rod height
    monitor_height: float = 3.5
    monitor_reference: str = "rod_tops"  # or "substrate", "cavity_center"
    monitor_area: float = 23.0
    monitor_fmin: float = 0.55
    monitor_fmax: float = 1.0
    monitor_samples: int = 201
    decay_db: float = 50.0
    max_steps: int = 20000
    workers: int = 1
    pwe_waves: int = 271
    pwe_bands: int = 8
    pwe_ksamples: int = 16
    output_dir: str = "."
    cache: bool = True

    def canonical(self) -> str:
        """Stable text form used for hashing and cache keys."""
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        d.pop("cache")
        d.pop("workers")
        return json.dumps(d, sort_keys=True)


_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_defects(s: str) -> tuple:
    out = []
    for part in s.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            i, j = part.split(",")
            out.append((int(i), int(j)))
        except ValueError:
            raise ValueError(f"expected 'i,j' pairs separated by ';', got {s!r}")
    return tuple(out)


def _parse_optional_float(s: str):
    if s.strip().lower() in ("auto", "none"):
        return None
    return float(s)


# config key -> (ScenarioConfig field, parser)
_SCHEMA = {
    "lattice.type": ("lattice_type", str),
    "lattice.radius": ("radius", float),
    "lattice.height": ("height", float),
    "lattice.rings": ("rings", int),
    "lattice.index": ("rod_index", float),
    "lattice.defects": ("defects", _parse_defects),
    "substrate.index": ("substrate_index", float),
    "substrate.clearance": ("substrate_clearance", float),
    "background.index": ("background_index", float),
    "sil.enabled": ("sil_enabled", _parse_bool),
    "sil.index": ("sil_index", float),
    "sil.thickness": ("sil_thickness", float),
    "sil.gap": ("sil_gap", float),
    "grid.resolution": ("resolution", int),
    "grid.pml": ("pml", float),
    "grid.courant": ("courant", float),
    "grid.margin": ("margin", float),
    "grid.extra_height": ("extra_height", float),
    "source.polarization": ("source_polarization", str),
    "source.frequency": ("source_frequency", float),
    "source.width": ("source_width", float),
    "source.cutoff": ("source_cutoff", float),
    "source.amplitude": ("source_amplitude", float),
    "source.x": ("source_x", float),
    "source.y": ("source_y", float),
    "source.z": ("source_z", _parse_optional_float),
    "monitor.height": ("monitor_height", float),
    "monitor.reference": ("monitor_reference", str),
    "monitor.area": ("monitor_area", float),
    "monitor.fmin": ("monitor_fmin", float),
    "monitor.fmax": ("monitor_fmax", float),
    "monitor.samples": ("monitor_samples", int),
    "run.decay_db": ("decay_db", float),
    "run.max_steps": ("max_steps", int),
    "run.workers": ("workers", int),
    "pwe.waves": ("pwe_waves", int),
    "pwe.bands": ("pwe_bands", int),
    "pwe.ksamples": ("pwe_ksamples", int),
    "output.dir": ("output_dir", str),
    "output.cache": ("cache", _parse_bool),
}


def parse_config(text: str) -> ScenarioConfig:
    """Parse a flat `key = value` config (one per line, # comments)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        fld, parser = _SCHEMA[key]
        try:
            values[fld] = parser(val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from exc
    cfg = ScenarioConfig(**values)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ScenarioConfig) -> None:
    try:
        build_scene(cfg)
        build_gridspec(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.monitor_reference not in ("rod_tops", "substrate", "cavity_center"):
        raise ConfigError(f"unknown monitor.reference {cfg.monitor_reference!r}")
    if not 0.0 < cfg.monitor_fmin < cfg.monitor_fmax:
        raise ConfigError("need 0 < monitor.fmin < monitor.fmax")
    if cfg.monitor_samples < 2:
        raise ConfigError("monitor.samples must be >= 2")
    if cfg.max_steps < 1 or cfg.decay_db <= 0.0:
        raise ConfigError("run.max_steps must be >= 1 and run.decay_db > 0")
    src = source_position(cfg)
    if not 0.0 <= src[2] <= cfg.height:
        raise ConfigError("source lies outside the rod-height interval")


def build_scene(cfg: ScenarioConfig, with_rods: bool = True) -> SceneGeometry:
    lattice = None
    if with_rods:
        lattice = RodLattice(
            cfg.lattice_type, cfg.radius, cfg.height,
            Material("rod", cfg.rod_index), cfg.rings,
            frozenset(cfg.defects),
        )
    sil = None
    if cfg.sil_enabled:
        sil = SilSlab(Material("sil", cfg.sil_index), cfg.sil_thickness, cfg.sil_gap)
    return SceneGeometry(
        lattice=lattice,
        substrate=Material("substrate", cfg.substrate_index),
        substrate_thickness=cfg.substrate_clearance + cfg.pml,
        background=Material("background", cfg.background_index),
        sil=sil,
    )


def monitor_plane_z(cfg: ScenarioConfig) -> float:
    # the collection plane sits a fixed height above the chosen datum; the
    # default measures from the rod tops, so the plane clears the structure
    base = {
        "rod_tops": cfg.height,
        "substrate": 0.0,
        "cavity_center": 0.5 * cfg.height,
    }[cfg.monitor_reference]
    return base + cfg.monitor_height


def source_position(cfg: ScenarioConfig) -> tuple:
    z = cfg.source_z if cfg.source_z is not None else 0.5 * cfg.height
    return (cfg.source_x, cfg.source_y, z)


def build_gridspec(cfg: ScenarioConfig) -> GridSpec:
    # 0.5 bounds any valid rod radius, so sweeps over radius share one grid
    half = cfg.rings + 0.5 + cfg.margin + cfg.pml
    lateral = 2.0 * half
    z_top = monitor_plane_z(cfg) + cfg.extra_height + cfg.pml
    if cfg.sil_enabled:
        z_top = max(z_top, cfg.height + cfg.sil_gap + cfg.sil_thickness
                    + cfg.extra_height + cfg.pml)
    z_min = -(cfg.substrate_clearance + cfg.pml)
    dx = 1.0 / cfg.resolution
    # snap extents to whole cells so positions land where expected
    lateral = math.ceil(lateral / dx) * dx
    lz = math.ceil((z_top - z_min) / dx) * dx
    return GridSpec(
        resolution=cfg.resolution,
        domain_extent=(lateral, lateral, lz),
        pml_thickness=cfg.pml,
        courant_factor=cfg.courant,
        z_min=z_min,
    )


def monitor_for(cfg: ScenarioConfig) -> FluxMonitor:
    freqs = np.linspace(cfg.monitor_fmin, cfg.monitor_fmax, cfg.monitor_samples)
    return FluxMonitor(monitor_plane_z(cfg), math.sqrt(cfg.monitor_area), freqs)


def source_for(cfg: ScenarioConfig, position=None) -> fdtd.DipoleSource:
    return fdtd.DipoleSource(
        position if position is not None else source_position(cfg),
        cfg.source_polarization, cfg.source_frequency, cfg.source_width,
        cfg.source_cutoff, cfg.source_amplitude,
    )


@dataclass
class CavityResult:
    spectrum: Spectrum
    modes: list
    snapshots: dict
    series: fdtd.ProbeSeries
    converged: bool

    @property
    def dominant_mode(self) -> ResonanceMode | None:
        return self.modes[0] if self.modes else None


@dataclass
class SweepRow:
    value: float
    spectrum: Spectrum | None
    modes: list
    eta: float | None
    error: str | None = None
    band: tuple | None = None   # frequency band the eta peak was taken over


@dataclass
class SweepTable:
    parameter: str
    reference: Spectrum
    rows: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# result cache: keyed on the physics part of the config, safe because runs
# are deterministic for identical configs
# ---------------------------------------------------------------------------

def _cache_dir(cfg: ScenarioConfig, tag: str) -> Path | None:
    if not cfg.cache:
        return None
    key = hashlib.sha256((tag + "\n" + cfg.canonical()).encode()).hexdigest()[:16]
    return Path(cfg.output_dir) / "cache" / f"{tag}-{key}"


def _save_cavity(path: Path, result: CavityResult) -> None:
    path.mkdir(parents=True, exist_ok=True)
    result.spectrum.to_csv(path / "spectrum.csv")
    with open(path / "modes.json", "w") as fh:
        json.dump([m.as_dict() for m in result.modes], fh)
    np.save(path / "series.npy", result.series.values)
    meta = {
        "dt": result.series.dt, "position": list(result.series.position),
        "component": result.series.component,
        "source_off_time": result.series.source_off_time,
        "converged": result.converged,
    }
    with open(path / "meta.json", "w") as fh:
        json.dump(meta, fh)
    for name, arr in result.snapshots.items():
        np.save(path / f"snap_{name}.npy", arr)


def _load_cavity(path: Path) -> CavityResult | None:
    if not (path / "meta.json").exists():
        return None
    with open(path / "meta.json") as fh:
        meta = json.load(fh)
    with open(path / "modes.json") as fh:
        modes = [
            ResonanceMode(m["frequency"], m["decay"], m["amplitude"],
                          m["phase"], m["error"])
            for m in json.load(fh)
        ]
    series = fdtd.ProbeSeries(
        np.load(path / "series.npy"), meta["dt"], tuple(meta["position"]),
        meta["component"], meta["source_off_time"], meta["converged"],
    )
    snaps = {}
    for f in path.glob("snap_*.npy"):
        snaps[f.stem[len("snap_"):]] = np.load(f)
    return CavityResult(
        Spectrum.from_csv(path / "spectrum.csv"), modes, snaps, series,
        meta["converged"],
    )


def _run_fdtd(cfg: ScenarioConfig, scene: SceneGeometry, source_pos,
              probe_z: float | None = None,
              want_snapshots: bool = False) -> CavityResult:
    spec = build_gridspec(cfg)
    dscene = discretize(scene, spec)
    state = fdtd.SimState(dscene)
    source = source_for(cfg, source_pos)
    monitor = monitor_for(cfg)
    mon_z = monitor_plane_z(cfg)
    if mon_z + cfg.extra_height > spec.z_min + spec.domain_extent[2] - cfg.pml + 1e-9:
        raise ValueError("flux monitor plane overlaps the PML region")
    pz = probe_z if probe_z is not None else source_pos[2]
    probe = (PROBE_OFFSET[0], PROBE_OFFSET[1], pz)

    snaps = {}
    pre_values = np.empty(0)
    if want_snapshots:
        # let the pulse pass and the mode establish before the time slice
        t_snap = source.off_time + 2.0 / cfg.source_frequency
        n_snap = int(math.ceil(t_snap / state.dt))
        pre_values = fdtd.run_steps(
            state, n_snap, source, monitors=[monitor], probe=probe,
            probe_component="e" + cfg.source_polarization,
        )
        half = 0.5 * cfg.height
        snaps["ex_xy"] = snapshot(state, "ex", "z", half)
        snaps["ey_xy"] = snapshot(state, "ey", "z", half)
        snaps["ey_xz"] = snapshot(state, "ey", "y", 0.0)

    series, state = fdtd.run_until_decayed(
        state, source, probe, cfg.decay_db, cfg.max_steps - len(pre_values),
        monitors=[monitor],
    )
    if len(pre_values):
        series = fdtd.ProbeSeries(
            np.concatenate([pre_values, series.values]), series.dt, probe,
            series.component, source.off_time, series.converged,
        )
    monitor.finalize()
    spectrum = flux_spectrum(monitor)
    modes = harmonic_inversion(series, cfg.monitor_fmin, cfg.monitor_fmax,
                               max_modes=8)
    return CavityResult(spectrum, modes, snaps, series, series.converged)


def run_cavity_scenario(cfg: ScenarioConfig) -> CavityResult:
    """Full cavity experiment: flux spectrum, resonances, mode snapshots."""
    cached = None
    cdir = _cache_dir(cfg, "cavity")
    if cdir is not None:
        cached = _load_cavity(cdir)
    if cached is not None:
        return cached
    scene = build_scene(cfg)
    result = _run_fdtd(cfg, scene, source_position(cfg), want_snapshots=True)
    if cdir is not None:
        _save_cavity(cdir, result)
    return result


def run_reference_scenario(cfg: ScenarioConfig) -> Spectrum:
    """Same domain, source and monitor, but a bare substrate: the dipole sits
    one grid cell above the surface."""
    cdir = _cache_dir(cfg, "reference")
    if cdir is not None and (cdir / "spectrum.csv").exists():
        return Spectrum.from_csv(cdir / "spectrum.csv")
    scene = build_scene(cfg, with_rods=False)
    dx = 1.0 / cfg.resolution
    pos = (cfg.source_x, cfg.source_y, dx)
    result = _run_fdtd(cfg, scene, pos, probe_z=dx)
    if cdir is not None:
        cdir.mkdir(parents=True, exist_ok=True)
        result.spectrum.to_csv(cdir / "spectrum.csv")
    return result.spectrum


def gap_band(cfg: ScenarioConfig) -> tuple | None:
    """Frequency interval of the widest band gap inside the monitor band,
    or None when no gap falls entirely inside it.  The extraction ratio is
    reported at its peak within this band, keeping the peak search away
    from the band edges where the reference flux vanishes."""
    _, reports = run_bands_scenario(cfg)
    freqs = np.linspace(cfg.monitor_fmin, cfg.monitor_fmax,
                        cfg.monitor_samples)
    best = None
    for rep in reports:
        if not (cfg.monitor_fmin <= rep.f_lower
                and rep.f_upper <= cfg.monitor_fmax):
            continue
        if not np.any((freqs >= rep.f_lower) & (freqs <= rep.f_upper)):
            continue   # gap falls between monitor samples
        if best is None or rep.gap_midgap > best.gap_midgap:
            best = rep
    if best is None:
        return None
    return (best.f_lower, best.f_upper)


def _radius_row(args) -> SweepRow:
    cfg, radius, reference = args
    row_cfg = dataclasses.replace(cfg, radius=radius)
    try:
        band = gap_band(row_cfg)
        res = run_cavity_scenario(row_cfg)
        eta = extraction_ratio(res.spectrum, reference, band=band).eta_peak
        return SweepRow(radius, res.spectrum, res.modes, eta, band=band)
    except (ValueError, fdtd.InstabilityError) as exc:
        return SweepRow(radius, None, [], None, error=str(exc))


def sweep_radius(base: ScenarioConfig, radii) -> SweepTable:
    """One cavity run per rod radius against a single shared reference."""
    for r in radii:
        if not 0.0 < r < 0.5:
            raise ValueError(f"radius {r} outside (0, 0.5)")
    reference = run_reference_scenario(base)
    table = SweepTable("radius", reference)
    jobs = [(base, float(r), reference) for r in radii]
    if base.workers > 1:
        with ProcessPoolExecutor(max_workers=base.workers) as pool:
            table.rows = list(pool.map(_radius_row, jobs))
    else:
        table.rows = [_radius_row(j) for j in jobs]
    return table


def _dipole_row(args) -> SweepRow:
    cfg, z, reference, band = args
    row_cfg = dataclasses.replace(cfg, source_z=z)
    try:
        scene = build_scene(row_cfg)
        res = _run_fdtd(row_cfg, scene, source_position(row_cfg))
        eta = extraction_ratio(res.spectrum, reference, band=band).eta_peak
        row = SweepRow(z, res.spectrum, res.modes, eta, band=band)
        cdir = _cache_dir(row_cfg, "dipole-z")
        if cdir is not None:
            _save_cavity(cdir, res)
        return row
    except (ValueError, fdtd.InstabilityError) as exc:
        return SweepRow(z, None, [], None, error=str(exc))


def _dipole_row_cached(args) -> SweepRow:
    cfg, z, reference, band = args
    row_cfg = dataclasses.replace(cfg, source_z=z)
    cdir = _cache_dir(row_cfg, "dipole-z")
    if cdir is not None:
        cached = _load_cavity(cdir)
        if cached is not None:
            eta = extraction_ratio(cached.spectrum, reference,
                                   band=band).eta_peak
            return SweepRow(z, cached.spectrum, cached.modes, eta, band=band)
    return _dipole_row(args)


def sweep_dipole_z(base: ScenarioConfig, z_values,
                   rod_height: float | None = None) -> SweepTable:
    """Vary the dipole height inside the cavity; by convention this scenario
    uses rods two mode-wavelengths tall unless a height is given."""
    if rod_height is None:
        rod_height = 2.0 * DEFAULT_MODE_WAVELENGTH
    cfg = dataclasses.replace(base, height=rod_height)
    for z in z_values:
        if not 0.0 <= z <= cfg.height:
            raise ValueError(f"dipole height {z} outside [0, {cfg.height}]")
    reference = run_reference_scenario(cfg)
    band = gap_band(cfg)
    table = SweepTable("dipole_z", reference)
    jobs = [(cfg, float(z), reference, band) for z in z_values]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            table.rows = list(pool.map(_dipole_row_cached, jobs))
    else:
        table.rows = [_dipole_row_cached(j) for j in jobs]
    return table


def run_bands_scenario(cfg: ScenarioConfig):
    """Both polarizations plus the gap report of the widest gap found."""
    lattice = RodLattice(
        cfg.lattice_type, cfg.radius, cfg.height,
        Material("rod", cfg.rod_index), cfg.rings, frozenset(cfg.defects),
    )
    kpath = default_kpath(cfg.lattice_type, cfg.pwe_ksamples)
    out = {}
    reports = []
    for pol in ("TM", "TE"):
        bs = band_structure(lattice, kpath, cfg.pwe_bands, cfg.pwe_waves, pol,
                            eps_bg=cfg.background_index ** 2)
        out[pol] = bs
        for below in range(1, cfg.pwe_bands):
            rep = find_gap(bs, below)
            if rep.exists:
                reports.append(rep)
    return out, reports


def emit_outputs(directory, spectrum: Spectrum | None = None, modes=None,
                 snapshots=None, series=None, extraction=None,
                 sweep: SweepTable | None = None, bands=None,
                 gap_reports=None) -> None:
    """Write whatever result pieces are given using the file formats of the
    monitor/analysis layers."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if spectrum is not None:
        spectrum.to_csv(directory / "spectrum.csv")
    if modes is not None:
        with open(directory / "modes.json", "w") as fh:
            json.dump([m.as_dict() for m in modes], fh, indent=2)
    if series is not None:
        series.to_csv(directory / "probe.csv")
    if snapshots:
        comp_of = {"ex_xy": "ex", "ey_xy": "ey", "ey_xz": "ey"}
        for name, arr in snapshots.items():
            write_snapshot(directory / f"{name}.fsnp", comp_of.get(name, "ex"), arr)
    if extraction is not None:
        with open(directory / "extraction.json", "w") as fh:
            json.dump(extraction.as_dict(), fh, indent=2)
        extraction.to_csv(directory / "ratio.csv")
    if sweep is not None:
        sweep.reference.to_csv(directory / "reference.csv")
        with open(directory / "sweep.csv", "w") as fh:
            fh.write(f"{sweep.parameter},eta_peak,mode_freq,mode_Q,error\n")
            for row in sweep.rows:
                mode = row.modes[0] if row.modes else None
                fh.write(",".join([
                    repr(row.value),
                    "" if row.eta is None else repr(row.eta),
                    "" if mode is None else repr(mode.frequency),
                    "" if mode is None or not math.isfinite(mode.q)
                    else repr(mode.q),
                    row.error or "",
                ]) + "\n")
        for row in sweep.rows:
            if row.spectrum is not None:
                row.spectrum.to_csv(
                    directory / f"{sweep.parameter}_{row.value:g}.csv")
    if bands is not None:
        for pol, bs in bands.items():
            bs.to_csv(directory / f"bands_{pol.lower()}.csv")
    if gap_reports is not None:
        with open(directory / "gaps.json", "w") as fh:
            json.dump([r.as_dict() for r in gap_reports], fh, indent=2)

"""Rod-type photonic crystal H1 cavity toolkit.

Normalized units throughout: lengths in the lattice constant a, time in a/c,
frequency in c/a, normalized wavelength 1/f.
"""

from .analysis import (ExtractionResult, ResonanceMode, extraction_ratio,
                       harmonic_inversion, q_factor)
from .fdtd import (DipoleSource, InstabilityError, ProbeSeries, SimState,
                   run_until_decayed, step)
from .geometry import (AIR, GLASS, SILICON, Material, RodLattice,
                       SceneGeometry, SilSlab, add_sil_slab, epsilon_at,
                       lattice_sites)
from .grid import DiscretizedScene, GridSpec, courant_dt, discretize
from .monitors import (FluxMonitor, Spectrum, dft_accumulate, flux_spectrum,
                       read_snapshot, snapshot, total_energy, write_snapshot)
from .pwe import (BandStructure, GapReport, KPath, band_structure,
                  default_kpath, epsilon_fourier, find_gap)
from .scenarios import (ConfigError, ScenarioConfig, parse_config,
                        run_cavity_scenario, run_reference_scenario,
                        sweep_dipole_z, sweep_radius)
from .units import PhysicalScale, scale_for_mode

__version__ = "0.1.0"

"""Time stepping of Maxwell's equations on the discretized scene.

One leapfrog cycle advances H by a full step from curl E, then E from
curl H (divided by the local permittivity), with CPML terms applied in the
absorbing layers and an optional soft dipole current added to one E
component.  Normalized units: c = 1, impedance 1, lengths in a, time in a/c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .grid import DiscretizedScene, courant_dt  # noqa: F401  (re-export)

INSTABILITY_LIMIT = 1e12
_CHECK_EVERY = 256


class InstabilityError(RuntimeError):
    """Field blow-up, usually a CFL violation or a bad PML profile."""

    def __init__(self, step: int, cell: tuple, value: float):
        super().__init__(
            f"field magnitude {value:.3e} exceeded {INSTABILITY_LIMIT:.0e} "
            f"at step {step}, cell {cell}"
        )
        self.step = step
        self.cell = cell
        self.value = value


@dataclass(frozen=True)
class DipoleSource:
    """Gaussian-pulse point dipole, injected as a soft (additive) current."""

    position: tuple
    polarization: str  # "x", "y" or "z"
    center_frequency: float
    frequency_width: float
    cutoff: float = 6.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.polarization not in ("x", "y", "z"):
            raise ValueError("polarization must be x, y or z")
        if self.center_frequency <= 0.0:
            raise ValueError("center_frequency must be positive")
        if self.frequency_width <= 0.0:
            raise ValueError("frequency_width must be positive")

    @property
    def gaussian_width(self) -> float:
        """Temporal 1/e half-width matching the requested frequency width."""
        return 1.0 / (2.0 * math.pi * self.frequency_width)

    @property
    def off_time(self) -> float:
        """Time after which the truncated pulse no longer injects current."""
        return 2.0 * self.cutoff * self.gaussian_width

    def waveform(self, t: float) -> float:
        if t < 0.0 or t > self.off_time:
            return 0.0
        w = self.gaussian_width
        t0 = self.cutoff * w
        u = t - t0
        return self.amplitude * math.exp(-0.5 * (u / w) ** 2) * math.cos(
            2.0 * math.pi * self.center_frequency * u
        )


@dataclass
class ProbeSeries:
    values: np.ndarray
    dt: float
    position: tuple
    component: str = "ex"
    source_off_time: float = 0.0
    converged: bool = True

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    def after_source(self) -> "ProbeSeries":
        n0 = int(math.ceil(self.source_off_time / self.dt))
        return ProbeSeries(
            self.values[n0:], self.dt, self.position, self.component,
            0.0, self.converged,
        )

    def to_csv(self, path) -> None:
        data = np.column_stack([self.times, self.values])
        np.savetxt(path, data, delimiter=",", header="t,value", comments="")

    @staticmethod
    def from_csv(path) -> "ProbeSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
        return ProbeSeries(data[:, 1].copy(), dt, (0.0, 0.0, 0.0))


def _axis_tables(n: int, bc: str):
    """Neighbor index/weight tables for one axis (see _kernels docstring)."""
    ip = np.arange(1, n + 1, dtype=np.int64)
    wp = np.ones(n, dtype=np.float32)
    im = np.arange(-1, n - 1, dtype=np.int64)
    me = np.ones(n, dtype=np.float32)
    if bc == "periodic":
        ip[n - 1] = 0
        im[0] = n - 1
    else:  # pec or pec-backed pml
        ip[n - 1] = n - 1
        wp[n - 1] = 0.0
        im[0] = 0
        me[0] = 0.0
    return ip, wp, im, me


class SimState:
    """Owns the six field arrays, CPML accumulators and the step counter."""

    def __init__(self, dscene: DiscretizedScene, dt: float | None = None):
        self.dscene = dscene
        self.dx = dscene.dx
        self.dt = dt if dt is not None else (
            dscene.courant_factor * dscene.dx / math.sqrt(3.0)
        )
        nx, ny, nz = dscene.dims
        shape = (nx, ny, nz)
        f32 = np.float32
        self.fields = {c: np.zeros(shape, f32) for c in
                       ("ex", "ey", "ez", "hx", "hy", "hz")}
        self.psi_e = {name: np.zeros(shape, f32) for name in
                      ("exy", "exz", "eyx", "eyz", "ezx", "ezy")}
        self.psi_h = {name: np.zeros(shape, f32) for name in
                      ("hxy", "hxz", "hyx", "hyz", "hzx", "hzy")}
        self.ce = {
            "x": (self.dt / dscene.eps_ex).astype(f32),
            "y": (self.dt / dscene.eps_ey).astype(f32),
            "z": (self.dt / dscene.eps_ez).astype(f32),
        }
        self.step_index = 0

        self._be, self._ae, self._bh, self._ah = [], [], [], []
        for axis in range(3):
            se = dscene.sigma_e[axis]
            sh = dscene.sigma_h[axis]
            be = np.exp(-se * self.dt).astype(f32)
            bh = np.exp(-sh * self.dt).astype(f32)
            ae = np.where(se > 0.0, be - 1.0, 0.0).astype(f32)
            ah = np.where(sh > 0.0, bh - 1.0, 0.0).astype(f32)
            self._be.append(be)
            self._ae.append(ae)
            self._bh.append(bh)
            self._ah.append(ah)

        self._tables = [
            _axis_tables(shape[axis], dscene.boundaries[axis])
            for axis in range(3)
        ]

    @property
    def time(self) -> float:
        """Time of the E fields, in a/c."""
        return self.step_index * self.dt

    def component(self, name: str) -> np.ndarray:
        return self.fields[name]

    def max_field(self) -> tuple:
        worst = 0.0
        where = (0, 0, 0)
        comp = "ex"
        for name in ("ex", "ey", "ez"):
            arr = self.fields[name]
            flat = int(np.argmax(np.abs(arr)))
            idx = np.unravel_index(flat, arr.shape)
            v = abs(float(arr[idx]))
            if math.isnan(v):
                return v, idx, name
            if v > worst:
                worst, where, comp = v, idx, name
        return worst, where, comp


def step(state: SimState, source: DipoleSource | None = None) -> SimState:
    """Advance one full leapfrog cycle in place; returns the same state."""
    f = state.fields
    inv_dx = np.float32(1.0 / state.dx)
    dt32 = np.float32(state.dt)
    (ipx, wpx, _, _), (ipy, wpy, _, _), (ipz, wpz, _, _) = state._tables
    (_, _, imx, mex), (_, _, imy, mey), (_, _, imz, mez) = state._tables

    ph = state.psi_h
    _kernels.update_h(
        f["ex"], f["ey"], f["ez"], f["hx"], f["hy"], f["hz"],
        ph["hxy"], ph["hxz"], ph["hyx"], ph["hyz"], ph["hzx"], ph["hzy"],
        state._bh[0], state._ah[0], state._bh[1], state._ah[1],
        state._bh[2], state._ah[2],
        ipx, wpx, ipy, wpy, ipz, wpz,
        dt32, inv_dx,
    )
    pe = state.psi_e
    _kernels.update_e(
        f["ex"], f["ey"], f["ez"], f["hx"], f["hy"], f["hz"],
        state.ce["x"], state.ce["y"], state.ce["z"],
        pe["exy"], pe["exz"], pe["eyx"], pe["eyz"], pe["ezx"], pe["ezy"],
        state._be[0], state._ae[0], state._be[1], state._ae[1],
        state._be[2], state._ae[2],
        imx, mex, imy, mey, imz, mez,
        inv_dx,
    )
    state.step_index += 1

    if source is not None:
        t = (state.step_index - 0.5) * state.dt
        amp = source.waveform(t)
        if amp != 0.0:
            idx = state.dscene.index_of(source.position)
            comp = "e" + source.polarization
            f[comp][idx] += state.ce[source.polarization][idx] * np.float32(amp)

    if state.step_index % _CHECK_EVERY == 0:
        worst, where, _ = state.max_field()
        if not math.isfinite(worst) or worst > INSTABILITY_LIMIT:
            raise InstabilityError(state.step_index, where, worst)
    return state


def run_steps(state: SimState, n_steps: int, source: DipoleSource | None = None,
              monitors=(), probe: tuple | None = None,
              probe_component: str | None = None) -> np.ndarray:
    """Step n times, feeding monitors after each E update; returns probe data."""
    record = None
    if probe is not None:
        idx = state.dscene.index_of(probe)
        comp = probe_component or "ex"
        arr = state.fields[comp]
        record = np.empty(n_steps)
    for n in range(n_steps):
        step(state, source)
        if record is not None:
            record[n] = float(arr[idx])
        for m in monitors:
            m.accumulate(state)
    return record


def run_until_decayed(state: SimState, source: DipoleSource, probe: tuple,
                      decay_db: float = 50.0, max_steps: int = 50000,
                      monitors=(), probe_component: str | None = None):
    """Run until the probe envelope after source cutoff drops by decay_db.

    The envelope is the peak-to-peak half-range of the probe over blocks of
    steps, which ignores the static offset a soft current source leaves
    behind; termination requires the most recent block to sit decay_db below
    the post-cutoff peak.  Returns (ProbeSeries, state); the series carries
    converged=False when max_steps was exhausted first (expected for very
    high-Q runs; raise max_steps in that case).
    """
    if decay_db <= 0.0:
        raise ValueError("decay_db must be positive")
    comp = probe_component or ("e" + source.polarization)
    idx = state.dscene.index_of(probe)
    arr = state.fields[comp]

    block = 256
    values = np.empty(max_steps)
    threshold_ratio = 10.0 ** (-decay_db / 20.0)
    # steps (local to this call) still inside the source pulse
    n_off = max(0, int(math.ceil(source.off_time / state.dt)) - state.step_index)
    peak = 0.0
    n = 0
    converged = False
    while n < max_steps:
        m_steps = min(block, max_steps - n)
        for _ in range(m_steps):
            step(state, source)
            values[n] = float(arr[idx])
            for mon in monitors:
                mon.accumulate(state)
            n += 1
        if n > n_off:
            window = values[max(n_off, n - m_steps):n]
            swing = 0.5 * (float(np.max(window)) - float(np.min(window)))
            peak = max(peak, swing)
            # require at least one full block beyond the one that set the peak
            if n >= n_off + 2 * block:
                latest = values[n - m_steps:n]
                recent = 0.5 * (float(np.max(latest)) - float(np.min(latest)))
                if peak > 0.0 and recent <= peak * threshold_ratio:
                    converged = True
                    break
    series = ProbeSeries(
        values[:n].copy(), state.dt, probe, comp,
        source_off_time=source.off_time, converged=converged,
    )
    return series, state

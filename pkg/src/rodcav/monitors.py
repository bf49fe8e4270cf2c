"""Field monitors: frequency-resolved Poynting flux through a plane,
total electromagnetic energy, and 2D field snapshots.

The flux monitor keeps running discrete Fourier transforms of the
tangential E and H on a square plane:

    F(f) = sum_n exp(+2pi i f t_n) field(t_n) dt

E samples are taken at integer steps; H lives at half steps and is averaged
over two consecutive half steps to land on the same integer-step times.
Accumulation is buffered in blocks and flushed through matrix products.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .fdtd import SimState

_BLOCK = 256

COMPONENT_IDS = {"ex": 0, "ey": 1, "ez": 2, "hx": 3, "hy": 4, "hz": 5}
_AXIS_NAMES = {"x": 0, "y": 1, "z": 2}
_AXIS_LETTER = "xyz"


@dataclass
class Spectrum:
    """Scalar flux (arbitrary consistent units) per normalized frequency."""

    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, float)
        self.values = np.asarray(self.values, float)
        if self.freqs.shape != self.values.shape:
            raise ValueError("frequency and value lists must have equal length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("flux values must be finite")

    @property
    def wavelengths(self) -> np.ndarray:
        return 1.0 / self.freqs

    def peak(self) -> tuple:
        """(frequency, value) of the largest sample."""
        i = int(np.argmax(self.values))
        return float(self.freqs[i]), float(self.values[i])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("freq_c_per_a,lambda_per_a,flux\n")
            for f, v in zip(self.freqs, self.values):
                fh.write(f"{float(f)!r},{1.0 / float(f)!r},{float(v)!r}\n")

    @staticmethod
    def from_csv(path) -> "Spectrum":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return Spectrum(data[:, 0].copy(), data[:, 2].copy())


class FluxMonitor:
    """Square flux plane normal to one axis (default z, at z = z0, centered
    on the cavity axis), accumulating tangential-field DFTs for the Poynting
    flux along the +normal direction."""

    def __init__(self, z0: float, side: float, freqs, normal: str = "z",
                 center=(0.0, 0.0)):
        self.offset = float(z0)
        self.side = float(side)
        self.normal = _AXIS_NAMES[normal]
        self.center = (float(center[0]), float(center[1]))
        freqs = np.asarray(freqs, float)
        if freqs.ndim != 1 or len(freqs) == 0:
            raise ValueError("need a non-empty frequency list")
        if np.any(np.diff(freqs) <= 0.0):
            raise ValueError("frequency list must be strictly increasing")
        self.freqs = freqs
        # cyclic tangential axes: flux_n = Re(E_t1 H_t2* - E_t2 H_t1*) / 2
        self.t1 = (self.normal + 1) % 3
        self.t2 = (self.normal + 2) % 3
        self._attached = False

    @property
    def z0(self) -> float:
        return self.offset

    @property
    def area(self) -> float:
        return self.side ** 2

    def attach(self, state: SimState) -> None:
        ds = state.dscene
        self.dx = ds.dx
        self.dt = state.dt
        n_ax = self.normal
        k0 = int(round((self.offset - ds.origin[n_ax]) / ds.dx))
        if not ds.npml[n_ax] <= k0 < ds.dims[n_ax] - ds.npml[n_ax]:
            raise ValueError("flux plane lies inside the PML region")
        n_side = int(round(self.side / ds.dx))
        sl = [None, None, None]
        sl[n_ax] = k0
        for ax, c in ((self.t1, self.center[0]), (self.t2, self.center[1])):
            ic = int(round((c - ds.origin[ax]) / ds.dx))
            lo = ic - n_side // 2
            if lo < ds.npml[ax] or lo + n_side > ds.dims[ax] - ds.npml[ax]:
                raise ValueError("flux plane extent reaches into the PML region")
            sl[ax] = slice(lo, lo + n_side)
        self.k0 = k0
        self.sl = sl
        self.n_side = n_side
        npts = n_side * n_side
        nf = len(self.freqs)
        # accumulated DFTs of (E_t1, E_t2, H_t1, H_t2) on the plane
        self.dft = np.zeros((nf, 4 * npts), complex)
        self._buf = np.empty((_BLOCK, 4 * npts), np.float32)
        self._times = np.empty(_BLOCK)
        self._rows = 0
        self._pending = None
        self._attached = True
        self._e_names = ("e" + _AXIS_LETTER[self.t1], "e" + _AXIS_LETTER[self.t2])
        self._h_names = ("h" + _AXIS_LETTER[self.t1], "h" + _AXIS_LETTER[self.t2])

    def _plane_e(self, state: SimState):
        sl = tuple(self.sl)
        return tuple(state.fields[n][sl] for n in self._e_names)

    def _plane_h(self, state: SimState):
        # H tangentials sit half a cell off along the normal: average the
        # two planes bracketing the monitor plane
        lo = list(self.sl)
        lo[self.normal] = self.k0 - 1
        lo = tuple(lo)
        hi = tuple(self.sl)
        return tuple(
            0.5 * (state.fields[n][lo] + state.fields[n][hi])
            for n in self._h_names
        )

    def accumulate(self, state: SimState) -> None:
        """Call once per time step, after the E update."""
        if not self._attached:
            self.attach(state)
        e_now = self._plane_e(state)
        h_now = self._plane_h(state)
        t_now = state.time
        if self._pending is not None:
            (e1, e2, h1p, h2p, t_p) = self._pending
            row = self._buf[self._rows]
            npts = self.n_side * self.n_side
            row[0:npts] = e1.ravel()
            row[npts:2 * npts] = e2.ravel()
            # average of H at t_p -/+ dt/2 lands on the E sample time t_p
            row[2 * npts:3 * npts] = (0.5 * (h1p + h_now[0])).ravel()
            row[3 * npts:4 * npts] = (0.5 * (h2p + h_now[1])).ravel()
            self._times[self._rows] = t_p
            self._rows += 1
            if self._rows == _BLOCK:
                self._flush()
        self._pending = (e_now[0].copy(), e_now[1].copy(),
                         h_now[0], h_now[1], t_now)

    def _flush(self) -> None:
        if self._rows == 0:
            return
        t = self._times[: self._rows]
        phase = 2.0 * np.pi * np.outer(self.freqs, t)
        cos = np.cos(phase).astype(np.float32)
        sin = np.sin(phase).astype(np.float32)
        buf = self._buf[: self._rows]
        self.dft += (cos @ buf).astype(float)
        self.dft += 1j * (sin @ buf).astype(float)
        self._rows = 0

    def finalize(self) -> None:
        self._flush()

    def dft_arrays(self):
        """Accumulated transforms keyed by component name, each of shape
        (nf, n_side, n_side)."""
        self._flush()
        n = self.n_side
        npts = n * n
        out = {}
        names = self._e_names + self._h_names
        for pos, name in enumerate(names):
            out[name] = (self.dft[:, pos * npts:(pos + 1) * npts] * self.dt
                         ).reshape(len(self.freqs), n, n)
        return out


def dft_accumulate(monitor: FluxMonitor, state: SimState) -> None:
    monitor.accumulate(state)


def flux_spectrum(monitor: FluxMonitor) -> Spectrum:
    """Time-integrated Poynting flux along +normal through the plane, per
    frequency: 0.5 * Re(E x H*) . n integrated over the plane area."""
    d = monitor.dft_arrays()
    e1, e2 = (d[n] for n in monitor._e_names)
    h1, h2 = (d[n] for n in monitor._h_names)
    s = 0.5 * np.real(e1 * np.conj(h2) - e2 * np.conj(h1))
    flux = s.sum(axis=(1, 2)) * monitor.dx ** 2
    return Spectrum(monitor.freqs, flux)


def total_energy(state: SimState) -> float:
    """0.5 * sum(eps |E|^2 + |H|^2) * dV over the non-PML interior."""
    ds = state.dscene
    sx, sy, sz = ds.interior_slices()
    f = state.fields
    e = 0.0
    for comp, eps in (("ex", ds.eps_ex), ("ey", ds.eps_ey), ("ez", ds.eps_ez)):
        arr = f[comp][sx, sy, sz].astype(float)
        e += float(np.sum(eps[sx, sy, sz] * arr * arr))
    for comp in ("hx", "hy", "hz"):
        arr = f[comp][sx, sy, sz].astype(float)
        e += float(np.sum(arr * arr))
    return 0.5 * e * ds.dx ** 3


def snapshot(state: SimState, component: str, axis: str, offset: float) -> np.ndarray:
    """Raw field slice of one component on a constant-coordinate plane."""
    if component not in COMPONENT_IDS:
        raise ValueError(f"unknown component {component!r}")
    ax = _AXIS_NAMES[axis]
    ds = state.dscene
    idx = int(round((offset - ds.origin[ax]) / ds.dx))
    if not 0 <= idx < ds.dims[ax]:
        raise ValueError(f"plane {axis}={offset} outside the domain")
    sl = [slice(None)] * 3
    sl[ax] = idx
    return np.array(state.fields[component][tuple(sl)], float)


def write_snapshot(path, component: str, data: np.ndarray) -> None:
    """Field-snapshot binary: magic FSNP, u16 version, u8 component id,
    u32 n_rows, u32 n_cols (little-endian), float64 row-major payload."""
    data = np.ascontiguousarray(data, dtype="<f8")
    if data.ndim != 2:
        raise ValueError("snapshot payload must be 2D")
    with open(path, "wb") as fh:
        fh.write(b"FSNP")
        fh.write(struct.pack("<HB", 1, COMPONENT_IDS[component]))
        fh.write(struct.pack("<II", data.shape[0], data.shape[1]))
        fh.write(data.tobytes())


def read_snapshot(path):
    """Returns (component_name, 2D float64 array)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != b"FSNP":
            raise ValueError("not an FSNP snapshot file")
        version, comp_id = struct.unpack("<HB", fh.read(3))
        if version != 1:
            raise ValueError(f"unsupported snapshot version {version}")
        rows, cols = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    name = {v: k for k, v in COMPONENT_IDS.items()}[comp_id]
    return name, data.reshape(rows, cols).copy()

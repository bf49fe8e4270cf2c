import math
import struct

import numpy as np
import pytest

from rodcav.fdtd import DipoleSource, SimState, run_steps
from rodcav.geometry import AIR, SceneGeometry
from rodcav.grid import GridSpec, discretize
from rodcav.monitors import (COMPONENT_IDS, FluxMonitor, Spectrum,
                             flux_spectrum, read_snapshot, snapshot,
                             total_energy, write_snapshot)


def vacuum_state(extent=3.0, resolution=8, pml=1.0, z_min=None):
    if z_min is None:
        z_min = -0.5 * extent
    spec = GridSpec(resolution, (extent, extent, extent), pml_thickness=pml,
                    z_min=z_min)
    return SimState(discretize(SceneGeometry(None, AIR, 1.0), spec))


def feed_cosine(monitor, state, f0, n_steps, e0=1.0, t_shift=0.0):
    """Drive the monitor with a synthetic uniform plane wave: E at integer
    steps, H at the surrounding half steps, both cos(2 pi f t)."""
    dt = state.dt
    for n in range(1, n_steps + 1):
        state.step_index = n
        t = n * dt + t_shift
        state.fields["ex"][:] = e0 * math.cos(2.0 * math.pi * f0 * t)
        state.fields["hy"][:] = e0 * math.cos(
            2.0 * math.pi * f0 * (t - 0.5 * dt))
        monitor.accumulate(state)
    monitor.finalize()


class TestSpectrum:
    def test_validation(self):
        with pytest.raises(ValueError):
            Spectrum(np.array([0.5, 0.6]), np.array([1.0]))
        with pytest.raises(ValueError):
            Spectrum(np.array([0.5, 0.6]), np.array([1.0, np.nan]))

    def test_peak_and_wavelengths(self):
        s = Spectrum(np.array([0.5, 0.8, 1.0]), np.array([1.0, 3.0, 2.0]))
        assert s.peak() == (0.8, 3.0)
        assert s.wavelengths == pytest.approx([2.0, 1.25, 1.0])

    def test_csv_roundtrip_full_precision(self, tmp_path):
        f = np.linspace(0.55, 1.0, 7)
        v = np.array([1.0 / 3.0, 1e-17, 2.5, 0.1, 7.0, 1e8, 0.987654321012345])
        s = Spectrum(f, v)
        s.to_csv(tmp_path / "s.csv")
        back = Spectrum.from_csv(tmp_path / "s.csv")
        assert np.array_equal(back.freqs, f)
        assert np.array_equal(back.values, v)


class TestFluxMonitor:
    def test_plane_must_avoid_pml(self):
        state = vacuum_state()
        mon = FluxMonitor(-1.4, 0.5, np.array([0.8]))
        with pytest.raises(ValueError):
            mon.attach(state)

    def test_extent_must_avoid_pml(self):
        state = vacuum_state()
        mon = FluxMonitor(0.0, 2.5, np.array([0.8]))
        with pytest.raises(ValueError):
            mon.attach(state)

    def test_frequency_list_validation(self):
        with pytest.raises(ValueError):
            FluxMonitor(0.0, 1.0, np.array([0.9, 0.8]))
        with pytest.raises(ValueError):
            FluxMonitor(0.0, 1.0, np.array([]))

    def test_zero_fields_give_zero_flux(self):
        state = vacuum_state()
        mon = FluxMonitor(0.0, 0.5, np.array([0.7, 0.9]))
        run_steps(state, 40, monitors=[mon])
        spec = flux_spectrum(mon)
        assert np.all(spec.values == 0.0)

    def test_uniform_wave_matches_poynting_oracle(self):
        # independent float64 oracle: the accumulated transform is
        # sum over rows of exp(+2 pi i f t) sample dt; E rows are exact
        # samples, H rows carry the half-step pair average
        state = vacuum_state()
        f0 = 0.8
        n = 500
        mon = FluxMonitor(0.0, 0.5, np.array([0.5 * f0, f0]))
        feed_cosine(mon, state, f0, n)
        spec = flux_spectrum(mon)

        dt = state.dt
        t = np.arange(1, n) * dt  # pending-row lag drops the last sample
        e_hat = np.sum(np.exp(2j * np.pi * f0 * t) * np.cos(
            2.0 * np.pi * f0 * t)) * dt
        h_t = 0.5 * (np.cos(2.0 * np.pi * f0 * (t - 0.5 * dt))
                     + np.cos(2.0 * np.pi * f0 * (t + 0.5 * dt)))
        h_hat = np.sum(np.exp(2j * np.pi * f0 * t) * h_t) * dt
        area = mon.side ** 2
        expected = 0.5 * np.real(e_hat * np.conj(h_hat)) * area
        assert spec.values[1] == pytest.approx(expected, rel=1e-4)
        assert expected > 0.0
        # off-resonance accumulation stays far below the driven line
        assert spec.values[0] < 0.01 * spec.values[1]

    def test_flux_scales_quadratically_with_amplitude(self):
        f0 = 0.8
        specs = []
        for e0 in (1.0, 2.0):
            state = vacuum_state()
            mon = FluxMonitor(0.0, 0.5, np.array([0.6, f0]))
            feed_cosine(mon, state, f0, 300, e0=e0)
            specs.append(flux_spectrum(mon).values)
        assert np.array_equal(4.0 * specs[0], specs[1])

    def test_flux_insensitive_to_time_origin(self):
        # shifting the drive by a whole number of periods leaves the flux
        # at the driven frequency unchanged
        f0 = 0.8
        vals = []
        for shift in (0.0, 3.0 / f0):
            state = vacuum_state()
            mon = FluxMonitor(0.0, 0.5, np.array([f0]))
            feed_cosine(mon, state, f0, 400, t_shift=shift)
            vals.append(flux_spectrum(mon).values[0])
        assert vals[1] == pytest.approx(vals[0], rel=1e-3)

    def test_closed_box_flux_independent_of_size(self):
        # energy bookkeeping: net outward flux through a closed box around
        # a vacuum dipole must not depend on the box size
        spec = GridSpec(12, (5.0, 5.0, 5.0), pml_thickness=1.0, z_min=-2.5)
        freqs = np.array([0.8, 1.0, 1.2])
        totals = []
        for half in (0.75, 1.25):
            state = SimState(discretize(SceneGeometry(None, AIR, 1.0), spec))
            mons = []
            for axis in "xyz":
                for sign in (+1.0, -1.0):
                    mons.append((sign, FluxMonitor(
                        sign * half, 2.0 * half, freqs, normal=axis)))
            src = DipoleSource((0.0, 0.0, 0.0), "x", 1.0, 0.4)
            run_steps(state, 900, source=src,
                      monitors=[m for _, m in mons])
            net = np.zeros(len(freqs))
            for sign, m in mons:
                m.finalize()
                net += sign * flux_spectrum(m).values
            totals.append(float(net.sum()))
        assert totals[0] > 0.0
        assert abs(totals[1] - totals[0]) / totals[0] < 0.02

    def test_aperture_collects_predicted_dipole_fraction(self):
        # analytic oracle: an x dipole radiates power density
        # proportional to (1 - (x/r)^2) / r^2, so the fraction of the total
        # power crossing a finite square aperture above it is a pure
        # geometry integral
        spec = GridSpec(12, (6.0, 6.0, 6.0), pml_thickness=1.0, z_min=-3.0)
        state = SimState(discretize(SceneGeometry(None, AIR, 1.0), spec))
        freqs = np.array([0.9, 1.0, 1.1])
        half_box = 1.25
        half_ap = 0.75
        box = []
        for axis in "xyz":
            for sign in (+1.0, -1.0):
                box.append((sign, FluxMonitor(
                    sign * half_box, 2.0 * half_box, freqs, normal=axis)))
        aperture = FluxMonitor(half_box, 2.0 * half_ap, freqs)
        src = DipoleSource((0.0, 0.0, 0.0), "x", 1.0, 1.0 / 3.0)
        run_steps(state, 520, source=src,
                  monitors=[aperture] + [m for _, m in box])
        total = np.zeros(len(freqs))
        for sign, m in box:
            m.finalize()
            total += sign * flux_spectrum(m).values
        aperture.finalize()
        measured = flux_spectrum(aperture).values / total

        n = 400
        x = (np.arange(n) + 0.5) / n * 2.0 * half_ap - half_ap
        xx, yy = np.meshgrid(x, x, indexing="ij")
        rr = np.sqrt(xx ** 2 + yy ** 2 + half_box ** 2)
        dens = (1.0 - (xx / rr) ** 2) * half_box / rr ** 3
        cell = (2.0 * half_ap / n) ** 2
        fraction = float(dens.sum()) * cell / (8.0 * math.pi / 3.0)

        assert np.all(total > 0.0)
        for got in measured:
            assert abs(got - fraction) / fraction < 0.10


class TestTotalEnergy:
    def test_zero_fields(self):
        assert total_energy(vacuum_state()) == 0.0

    def test_uniform_electric_field(self):
        state = vacuum_state(extent=2.0, resolution=8, pml=0.5)
        state.fields["ex"][:] = 1.0
        # interior is (2 - 2*0.5)^3 = 1 cubic lattice constant
        assert total_energy(state) == pytest.approx(0.5, rel=1e-6)

    def test_magnetic_field_counts_without_epsilon(self):
        state = vacuum_state(extent=2.0, resolution=8, pml=0.5)
        state.fields["hz"][:] = 2.0
        assert total_energy(state) == pytest.approx(2.0, rel=1e-6)


class TestSnapshots:
    def test_snapshot_extracts_plane(self):
        state = vacuum_state()
        state.fields["ey"][:, :, 12] = 3.0
        data = snapshot(state, "ey", "z", 0.0)
        assert data.shape == (24, 24)
        assert np.all(data == 3.0)

    def test_snapshot_bad_args(self):
        state = vacuum_state()
        with pytest.raises(ValueError):
            snapshot(state, "bx", "z", 0.0)
        with pytest.raises(ValueError):
            snapshot(state, "ex", "z", 99.0)

    def test_binary_roundtrip(self, tmp_path):
        data = np.arange(12.0).reshape(3, 4)
        path = tmp_path / "f.fsnp"
        write_snapshot(path, "hz", data)
        name, back = read_snapshot(path)
        assert name == "hz"
        assert np.array_equal(back, data)

    def test_binary_layout(self, tmp_path):
        data = np.array([[1.5, -2.0]])
        path = tmp_path / "f.fsnp"
        write_snapshot(path, "ez", data)
        raw = path.read_bytes()
        assert raw[:4] == b"FSNP"
        version, comp = struct.unpack("<HB", raw[4:7])
        assert version == 1
        assert comp == COMPONENT_IDS["ez"] == 2
        rows, cols = struct.unpack("<II", raw[7:15])
        assert (rows, cols) == (1, 2)
        assert np.frombuffer(raw[15:], dtype="<f8").tolist() == [1.5, -2.0]

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.fsnp"
        path.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(ValueError):
            read_snapshot(path)

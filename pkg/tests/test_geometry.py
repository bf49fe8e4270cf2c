import math

import numpy as np
import pytest

from rodcav.geometry import (AIR, GLASS, SILICON, Material, RodLattice,
                             SceneGeometry, SilSlab, add_sil_slab, epsilon_at,
                             epsilon_samples, lattice_sites)

SQRT3 = math.sqrt(3.0)


def h1_lattice(radius=0.165, height=2.3, rings=4):
    return RodLattice("triangular", radius, height, SILICON, rings,
                      frozenset({(0, 0)}))


def h1_scene(radius=0.165, height=2.3, rings=4):
    return SceneGeometry(h1_lattice(radius, height, rings), SILICON, 2.0)


class TestMaterial:
    def test_permittivity_is_index_squared(self):
        assert Material("m", 3.9).permittivity == pytest.approx(15.21)
        assert AIR.permittivity == 1.0
        assert GLASS.permittivity == pytest.approx(2.25)

    def test_index_below_one_rejected(self):
        with pytest.raises(ValueError):
            Material("bad", 0.5)


class TestLattice:
    def test_site_count_with_one_defect(self):
        # R complete rings around one removed center rod hold 3R(R+1) sites
        for rings in (1, 2, 3, 4, 5):
            lat = h1_lattice(rings=rings)
            assert len(lat.site_indices()) == 3 * rings * (rings + 1)

    def test_site_count_matches_brute_force_enumeration(self):
        # independent enumeration: walk a large index window and count the
        # sites whose hexagonal shell is within range
        rings = 3
        lat = RodLattice("triangular", 0.2, 1.0, SILICON, rings)
        count = 0
        for i in range(-10, 11):
            for j in range(-10, 11):
                if max(abs(i), abs(j), abs(i + j)) <= rings:
                    count += 1
        assert len(lat.site_indices()) == count == 3 * rings * (rings + 1) + 1

    def test_positions_and_spacing(self):
        lat = h1_lattice(rings=2)
        sites = lattice_sites(lat)
        assert sites.shape == (18, 2)
        # first ring sits at unit distance, all sites pairwise distinct
        dists = np.linalg.norm(sites, axis=1)
        assert np.count_nonzero(np.abs(dists - 1.0) < 1e-12) == 6
        diff = sites[:, None, :] - sites[None, :, :]
        gaps = np.linalg.norm(diff, axis=-1)
        gaps[np.arange(18), np.arange(18)] = 10.0
        assert gaps.min() == pytest.approx(1.0)

    def test_basis_vectors(self):
        lat = h1_lattice()
        assert lat.site_position(1, 0) == pytest.approx([1.0, 0.0])
        assert lat.site_position(0, 1) == pytest.approx([0.5, SQRT3 / 2.0])

    def test_square_lattice_count(self):
        lat = RodLattice("square", 0.2, 1.0, SILICON, 2)
        assert len(lat.site_indices()) == 25

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            RodLattice("triangular", 0.6, 1.0, SILICON, 2)
        with pytest.raises(ValueError):
            RodLattice("triangular", 0.2, -1.0, SILICON, 2)
        with pytest.raises(ValueError):
            RodLattice("triangular", 0.2, 1.0, SILICON, 0)
        with pytest.raises(ValueError):
            RodLattice("hex", 0.2, 1.0, SILICON, 2)
        with pytest.raises(ValueError):
            RodLattice("triangular", 0.2, 1.0, SILICON, 2,
                       frozenset({(3, 0)}))


class TestEpsilonSampling:
    def test_defect_center_is_background(self):
        scene = h1_scene()
        assert epsilon_at(scene, (0.0, 0.0, 1.0)) == 1.0

    def test_rod_interior_and_surface(self):
        scene = h1_scene()
        assert epsilon_at(scene, (1.0, 0.0, 1.0)) == pytest.approx(15.21)
        assert epsilon_at(scene, (1.0 + 0.166, 0.0, 1.0)) == 1.0
        # closed cylinders: a point exactly on the rod surface counts as rod
        # (a radius exactly representable in binary keeps the check sharp)
        sharp = SceneGeometry(
            RodLattice("triangular", 0.25, 2.3, SILICON, 2), SILICON, 1.0)
        assert epsilon_at(sharp, (1.25, 0.0, 1.0)) == pytest.approx(15.21)

    def test_rod_height_interval(self):
        scene = h1_scene(height=2.3)
        assert epsilon_at(scene, (1.0, 0.0, 2.3)) == pytest.approx(15.21)
        assert epsilon_at(scene, (1.0, 0.0, 2.31)) == 1.0
        assert epsilon_at(scene, (1.0, 0.0, 0.0)) == pytest.approx(15.21)

    def test_substrate_band(self):
        scene = h1_scene()
        assert epsilon_at(scene, (0.3, 0.0, -0.5)) == pytest.approx(15.21)
        assert epsilon_at(scene, (0.3, 0.0, -2.5)) == 1.0

    def test_rotation_invariance_60_degrees(self):
        # the H1 triangular scene keeps the lattice point group
        scene = h1_scene()
        rng = np.random.default_rng(7)
        pts = rng.uniform(-3.5, 3.5, size=(4000, 2))
        z = rng.uniform(0.1, 2.2, size=4000)
        c, s = math.cos(math.pi / 3.0), math.sin(math.pi / 3.0)
        xr = c * pts[:, 0] - s * pts[:, 1]
        yr = s * pts[:, 0] + c * pts[:, 1]
        eps = epsilon_samples(scene, pts[:, 0], pts[:, 1], z)
        eps_rot = epsilon_samples(scene, xr, yr, z)
        # points within one part in 1e6 of a rod surface may flip sides
        # under rounding; none of the sampled points are that close
        assert np.array_equal(eps, eps_rot)

    def test_defect_roundtrip_identity(self):
        pristine = RodLattice("triangular", 0.165, 2.3, SILICON, 3)
        removed = RodLattice("triangular", 0.165, 2.3, SILICON, 3,
                             frozenset({(1, 1)}))
        restored = RodLattice("triangular", 0.165, 2.3, SILICON, 3,
                              frozenset(removed.defects - {(1, 1)}))
        rng = np.random.default_rng(11)
        x = rng.uniform(-3.0, 3.0, 2000)
        y = rng.uniform(-3.0, 3.0, 2000)
        z = np.full(2000, 1.0)
        a = epsilon_samples(SceneGeometry(pristine, SILICON, 1.0), x, y, z)
        b = epsilon_samples(SceneGeometry(restored, SILICON, 1.0), x, y, z)
        assert np.array_equal(a, b)

    def test_scene_without_lattice(self):
        scene = SceneGeometry(None, SILICON, 1.5)
        assert epsilon_at(scene, (0.0, 0.0, 1.0)) == 1.0
        assert epsilon_at(scene, (0.0, 0.0, -1.0)) == pytest.approx(15.21)
        assert scene.rod_extent_xy() == 0.0


class TestSilSlab:
    def test_slab_occupies_band_above_rods(self):
        scene = add_sil_slab(h1_scene(height=2.3), 1.5, 2.0)
        assert epsilon_at(scene, (0.0, 0.0, 2.4)) == pytest.approx(2.25)
        assert epsilon_at(scene, (0.0, 0.0, 4.3)) == pytest.approx(2.25)
        assert epsilon_at(scene, (0.0, 0.0, 4.4)) == 1.0

    def test_air_gap_offsets_slab(self):
        scene = add_sil_slab(h1_scene(height=2.3), 1.5, 2.0, gap=0.5)
        assert epsilon_at(scene, (0.0, 0.0, 2.5)) == 1.0
        assert epsilon_at(scene, (0.0, 0.0, 3.0)) == pytest.approx(2.25)

    def test_rod_wins_over_slab(self):
        # a slab overlapping the rod band cannot override rod material
        lat = h1_lattice(height=2.3)
        scene = SceneGeometry(lat, SILICON, 1.0,
                              sil=SilSlab(GLASS, 2.0, gap=0.0))
        assert epsilon_at(scene, (1.0, 0.0, 2.3)) == pytest.approx(15.21)

    def test_unit_index_slab_is_transparent(self):
        base = h1_scene()
        with_sil = add_sil_slab(base, 1.0, 2.0)
        rng = np.random.default_rng(3)
        x = rng.uniform(-3.0, 3.0, 1000)
        y = rng.uniform(-3.0, 3.0, 1000)
        z = rng.uniform(-1.0, 5.0, 1000)
        assert np.array_equal(epsilon_samples(base, x, y, z),
                              epsilon_samples(with_sil, x, y, z))

    def test_invalid_slab_rejected(self):
        with pytest.raises(ValueError):
            SilSlab(GLASS, 0.0)
        with pytest.raises(ValueError):
            SilSlab(GLASS, 1.0, gap=-0.1)
        with pytest.raises(ValueError):
            add_sil_slab(h1_scene(), 0.8, 2.0)

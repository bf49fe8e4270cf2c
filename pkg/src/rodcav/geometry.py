"""Dielectric scene description: rod lattice with an H1 defect on a substrate.

Lengths are in units of the lattice constant a.  Rods stand on the substrate
surface (z = 0) and occupy 0 <= z <= rod_height.  The substrate fills
-substrate_thickness <= z < 0, an optional solid-immersion slab sits above
the rod tops, everything else is the background medium.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

SQRT3 = math.sqrt(3.0)

# Triangular lattice basis a1=(1,0), a2=(1/2, sqrt(3)/2)
_TRI_A1 = np.array([1.0, 0.0])
_TRI_A2 = np.array([0.5, SQRT3 / 2.0])


@dataclass(frozen=True)
class Material:
    name: str
    refractive_index: float

    def __post_init__(self):
        if self.refractive_index < 1.0:
            raise ValueError(
                f"refractive index of {self.name!r} must be >= 1, "
                f"got {self.refractive_index}"
            )

    @property
    def permittivity(self) -> float:
        return self.refractive_index ** 2


AIR = Material("air", 1.0)
SILICON = Material("silicon", 3.9)
GLASS = Material("glass", 1.5)


def _hex_ring(i: int, j: int) -> int:
    """Shell number of integer lattice coordinates on the triangular lattice."""
    return max(abs(i), abs(j), abs(i + j))


@dataclass(frozen=True)
class RodLattice:
    lattice_type: str  # "triangular" or "square"
    rod_radius: float
    rod_height: float
    rod_material: Material
    rings: int
    defects: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.lattice_type not in ("triangular", "square"):
            raise ValueError(f"unknown lattice type {self.lattice_type!r}")
        if not 0.0 < self.rod_radius < 0.5:
            raise ValueError("rod_radius must lie in (0, 0.5) to avoid overlap")
        if self.rod_height <= 0.0:
            raise ValueError("rod_height must be positive")
        if self.rings < 1:
            raise ValueError("rings must be >= 1")
        object.__setattr__(self, "defects", frozenset(self.defects))
        for ij in self.defects:
            if self._ring(*ij) > self.rings:
                raise ValueError(f"defect site {ij} lies outside {self.rings} rings")

    def _ring(self, i: int, j: int) -> int:
        if self.lattice_type == "triangular":
            return _hex_ring(i, j)
        return max(abs(i), abs(j))

    def site_indices(self):
        """Integer coordinates of all rods present (defects removed)."""
        out = []
        r = self.rings
        for i in range(-r, r + 1):
            for j in range(-r, r + 1):
                if self._ring(i, j) > r:
                    continue
                if (i, j) in self.defects:
                    continue
                out.append((i, j))
        return out

    def site_position(self, i: int, j: int) -> np.ndarray:
        if self.lattice_type == "triangular":
            return i * _TRI_A1 + j * _TRI_A2
        return np.array([float(i), float(j)])


def lattice_sites(lattice: RodLattice) -> np.ndarray:
    """Centers of all rods present, as an (n, 2) array in units of a."""
    idx = lattice.site_indices()
    if not idx:
        return np.zeros((0, 2))
    return np.array([lattice.site_position(i, j) for i, j in idx])


@dataclass(frozen=True)
class SilSlab:
    material: Material
    thickness: float
    gap: float = 0.0  # air gap between rod tops and the slab

    def __post_init__(self):
        if self.thickness <= 0.0:
            raise ValueError("SIL thickness must be positive")
        if self.gap < 0.0:
            raise ValueError("SIL gap must be >= 0")


@dataclass(frozen=True)
class SceneGeometry:
    lattice: RodLattice | None
    substrate: Material
    substrate_thickness: float
    background: Material = AIR
    sil: SilSlab | None = None

    def __post_init__(self):
        if self.substrate_thickness <= 0.0:
            raise ValueError("substrate thickness must be positive")

    @property
    def rod_top(self) -> float:
        return self.lattice.rod_height if self.lattice is not None else 0.0

    def rod_extent_xy(self) -> float:
        """Largest |x| or |y| reached by any rod surface."""
        if self.lattice is None:
            return 0.0
        sites = lattice_sites(self.lattice)
        if len(sites) == 0:
            return 0.0
        return float(np.max(np.abs(sites))) + self.lattice.rod_radius


def add_sil_slab(scene: SceneGeometry, n_sil: float, thickness: float,
                 gap: float = 0.0) -> SceneGeometry:
    """New scene with a solid-immersion slab resting on the rod tops."""
    sil = SilSlab(Material("sil", n_sil), thickness, gap)
    return dataclasses.replace(scene, sil=sil)


def epsilon_at(scene: SceneGeometry, point) -> float:
    """Permittivity at a single 3D point.

    Region priority: rod > SIL > substrate > background.  Rods are closed
    right circular cylinders, so points exactly on a rod surface count as rod.
    """
    x, y, z = point
    eps = epsilon_samples(
        scene, np.array([x], float), np.array([y], float), np.array([z], float)
    )
    return float(eps[0])


def _rod_mask_triangular(lattice: RodLattice, x, y):
    """Boolean mask of points inside any present rod of a triangular lattice.

    Uses the inverse lattice basis and checks the four surrounding candidate
    sites, which is exact because rods do not overlap (r < 0.5).
    """
    # fractional lattice coordinates: [i, j] = B^-1 [x, y]
    fj = y * (2.0 / SQRT3)
    fi = x - 0.5 * fj
    r2 = lattice.rod_radius ** 2
    inside = np.zeros(x.shape, dtype=bool)
    i0 = np.floor(fi).astype(np.int64)
    j0 = np.floor(fj).astype(np.int64)
    defects = lattice.defects
    rings = lattice.rings
    for di in (0, 1):
        for dj in (0, 1):
            ii = i0 + di
            jj = j0 + dj
            sx = ii + 0.5 * jj
            sy = (SQRT3 / 2.0) * jj
            close = (x - sx) ** 2 + (y - sy) ** 2 <= r2
            if not close.any():
                continue
            ring = np.maximum(np.maximum(np.abs(ii), np.abs(jj)), np.abs(ii + jj))
            valid = close & (ring <= rings)
            if valid.any() and defects:
                for (d_i, d_j) in defects:
                    valid &= ~((ii == d_i) & (jj == d_j))
            inside |= valid
    return inside


def _rod_mask_square(lattice: RodLattice, x, y):
    r2 = lattice.rod_radius ** 2
    i0 = np.rint(x).astype(np.int64)
    j0 = np.rint(y).astype(np.int64)
    inside = (x - i0) ** 2 + (y - j0) ** 2 <= r2
    inside &= (np.abs(i0) <= lattice.rings) & (np.abs(j0) <= lattice.rings)
    for (d_i, d_j) in lattice.defects:
        inside &= ~((i0 == d_i) & (j0 == d_j))
    return inside


def epsilon_samples(scene: SceneGeometry, x, y, z) -> np.ndarray:
    """Vectorized permittivity sampling at arrays of points (same shape)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    z = np.asarray(z, float)
    eps = np.full(x.shape, scene.background.permittivity)

    sub = (z < 0.0) & (z >= -scene.substrate_thickness)
    eps[sub] = scene.substrate.permittivity

    if scene.sil is not None:
        z_lo = scene.rod_top + scene.sil.gap
        z_hi = z_lo + scene.sil.thickness
        in_sil = (z >= z_lo) & (z <= z_hi)
        eps[in_sil] = scene.sil.material.permittivity

    lat = scene.lattice
    if lat is not None:
        zok = (z >= 0.0) & (z <= lat.rod_height)
        if zok.any():
            if lat.lattice_type == "triangular":
                in_rod = _rod_mask_triangular(lat, x, y)
            else:
                in_rod = _rod_mask_square(lat, x, y)
            eps[zok & in_rod] = lat.rod_material.permittivity
    return eps

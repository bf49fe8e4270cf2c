"""Yee-grid discretization of a scene and CFL time step.

Convention: the domain is a box of `domain_extent` = (Lx, Ly, Lz) in units
of a, centered on the cavity axis in x and y, spanning [z_min, z_min + Lz]
vertically.  Cell (i, j, k) has its low corner at
(x0 + i dx, y0 + j dx, z0 + k dx) and the Yee components sit at

    Ex: (i+1/2, j,     k    )    Hx: (i,     j+1/2, k+1/2)
    Ey: (i,     j+1/2, k    )    Hy: (i+1/2, j,     k+1/2)
    Ez: (i,     j,     k+1/2)    Hz: (i+1/2, j+1/2, k    )

in units of dx relative to the cell corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import SceneGeometry, epsilon_samples

PML_GRADE_ORDER = 3
PML_REFLECTION_TARGET = 1e-6

_VALID_BC = ("pml", "periodic", "pec")


@dataclass(frozen=True)
class GridSpec:
    resolution: int                      # cells per lattice constant
    domain_extent: tuple                 # (Lx, Ly, Lz) in units of a
    pml_thickness: float = 1.0           # per boundary, in units of a
    courant_factor: float = 0.5
    z_min: float = 0.0                   # lower z of the domain
    boundaries: tuple = ("pml", "pml", "pml")

    def __post_init__(self):
        if self.resolution < 8:
            raise ValueError("resolution must be >= 8 cells per a")
        if len(self.domain_extent) != 3 or any(L <= 0 for L in self.domain_extent):
            raise ValueError("domain_extent must be three positive lengths")
        if self.pml_thickness < 0.5:
            raise ValueError("pml_thickness must be >= 0.5 a")
        if not 0.0 < self.courant_factor < 1.0:
            raise ValueError("courant_factor must lie strictly in (0, 1)")
        if len(self.boundaries) != 3 or any(b not in _VALID_BC for b in self.boundaries):
            raise ValueError(f"boundaries must be from {_VALID_BC}")

    @property
    def dx(self) -> float:
        return 1.0 / self.resolution

    @property
    def dims(self) -> tuple:
        return tuple(int(round(L * self.resolution)) for L in self.domain_extent)

    @property
    def origin(self) -> tuple:
        nx, ny, nz = self.dims
        return (-0.5 * nx * self.dx, -0.5 * ny * self.dx, self.z_min)


def courant_dt(spec: GridSpec, ndim: int = 3) -> float:
    """Stable leapfrog time step in units of a/c: factor * dx / sqrt(ndim)."""
    if ndim not in (2, 3):
        raise ValueError("ndim must be 2 or 3")
    return spec.courant_factor * spec.dx / math.sqrt(ndim)


def _sigma_profile(n: int, dx: float, npml: int, positions: np.ndarray) -> np.ndarray:
    """Polynomial-graded PML conductivity sampled at `positions` (cell units)."""
    L = npml * dx
    if npml == 0:
        return np.zeros(len(positions))
    sigma_max = -(PML_GRADE_ORDER + 1) * math.log(PML_REFLECTION_TARGET) / (2.0 * L)
    x = positions * dx
    total = n * dx
    depth = np.maximum(npml * dx - x, x - (total - npml * dx))
    depth = np.clip(depth / L, 0.0, 1.0)
    return sigma_max * depth ** PML_GRADE_ORDER


@dataclass
class DiscretizedScene:
    dims: tuple
    dx: float
    origin: tuple
    eps_ex: np.ndarray
    eps_ey: np.ndarray
    eps_ez: np.ndarray
    # conductivity along each axis at integer (E) and half-integer (H) nodes
    sigma_e: tuple = field(repr=False, default=None)
    sigma_h: tuple = field(repr=False, default=None)
    npml: tuple = (0, 0, 0)
    boundaries: tuple = ("pml", "pml", "pml")
    courant_factor: float = 0.5

    def axis_coords(self, axis: int, half: bool) -> np.ndarray:
        n = self.dims[axis]
        return self.origin[axis] + (np.arange(n) + (0.5 if half else 0.0)) * self.dx

    def index_of(self, point) -> tuple:
        """Cell index containing a physical point."""
        idx = []
        for axis in range(3):
            i = int(math.floor((point[axis] - self.origin[axis]) / self.dx))
            if not 0 <= i < self.dims[axis]:
                raise ValueError(f"point {point} outside the domain on axis {axis}")
            idx.append(i)
        return tuple(idx)

    def interior_slices(self) -> tuple:
        """Slices excluding the PML regions on each axis."""
        return tuple(
            slice(self.npml[a], self.dims[a] - self.npml[a]) for a in range(3)
        )


# staggered offsets (in cell units) of each E component
_E_OFFSETS = {
    "ex": (0.5, 0.0, 0.0),
    "ey": (0.0, 0.5, 0.0),
    "ez": (0.0, 0.0, 0.5),
}

# 2x2x2 subsample offsets for volume-fraction averaging of epsilon
_SUBSAMPLES = [
    (sx, sy, sz)
    for sx in (-0.25, 0.25)
    for sy in (-0.25, 0.25)
    for sz in (-0.25, 0.25)
]


def _component_epsilon(scene: SceneGeometry, spec: GridSpec, offset) -> np.ndarray:
    nx, ny, nz = spec.dims
    dx = spec.dx
    x0, y0, z0 = spec.origin
    ix = np.arange(nx)[:, None, None]
    iy = np.arange(ny)[None, :, None]
    iz = np.arange(nz)[None, None, :]
    acc = np.zeros((nx, ny, nz))
    for sx, sy, sz in _SUBSAMPLES:
        px = np.broadcast_to(x0 + (ix + offset[0] + sx) * dx, (nx, ny, nz))
        py = np.broadcast_to(y0 + (iy + offset[1] + sy) * dx, (nx, ny, nz))
        pz = np.broadcast_to(z0 + (iz + offset[2] + sz) * dx, (nx, ny, nz))
        acc += epsilon_samples(scene, px.ravel(), py.ravel(), pz.ravel()).reshape(
            nx, ny, nz
        )
    return acc / len(_SUBSAMPLES)


def discretize(scene: SceneGeometry, spec: GridSpec) -> DiscretizedScene:
    """Sample the scene's permittivity at the staggered E positions.

    Each component value is the plain volume average of epsilon over the dx
    cube centered on the component, estimated with 8 subsamples.
    """
    nx, ny, nz = spec.dims
    dx = spec.dx
    npml = tuple(
        int(round(spec.pml_thickness * spec.resolution)) if bc == "pml" else 0
        for bc in spec.boundaries
    )

    if scene.lattice is not None:
        half_x = 0.5 * spec.domain_extent[0]
        rod_reach = scene.rod_extent_xy()
        for axis in (0, 1):
            if spec.boundaries[axis] == "pml":
                interior = 0.5 * spec.domain_extent[axis] - spec.pml_thickness
                if rod_reach >= interior:
                    raise ValueError(
                        f"PML overlaps the rod region on axis {axis}: rods reach "
                        f"{rod_reach:.3f} a but the interior half-width is "
                        f"{interior:.3f} a"
                    )
        del half_x

    eps = {
        name: _component_epsilon(scene, spec, off)
        for name, off in _E_OFFSETS.items()
    }
    if any(np.any(e < 1.0) for e in eps.values()):
        raise ValueError("permittivity below 1 encountered during sampling")

    sigma_e, sigma_h = [], []
    for axis, n in enumerate(spec.dims):
        pos_int = np.arange(n, dtype=float)
        pos_half = pos_int + 0.5
        sigma_e.append(_sigma_profile(n, dx, npml[axis], pos_int))
        sigma_h.append(_sigma_profile(n, dx, npml[axis], pos_half))

    return DiscretizedScene(
        dims=(nx, ny, nz),
        dx=dx,
        origin=spec.origin,
        eps_ex=eps["ex"],
        eps_ey=eps["ey"],
        eps_ez=eps["ez"],
        sigma_e=tuple(sigma_e),
        sigma_h=tuple(sigma_h),
        npml=npml,
        boundaries=spec.boundaries,
        courant_factor=spec.courant_factor,
    )

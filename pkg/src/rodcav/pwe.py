"""2D photonic band structure of rod lattices by plane-wave expansion.

Uses the inverse-epsilon matrix method: the Toeplitz matrix of Fourier
coefficients eps(G - G') is inverted once per lattice, then at each k the
Hermitian kernel

    TM (E along rods):  |k+G| |k+G'| inv_eps(G, G')
    TE (H along rods):  (k+G).(k+G') inv_eps(G, G')

is diagonalized; eigenvalues are (omega/c)^2.  Frequencies are in c/a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import j1

from .geometry import RodLattice, SQRT3

DEFAULT_N_PW = 271
DEFAULT_BG_EPS = 1.0


def reciprocal_basis(lattice_type: str) -> np.ndarray:
    """Rows are b1, b2 with a_i . b_j = 2 pi delta_ij."""
    if lattice_type == "triangular":
        return 2.0 * np.pi * np.array([[1.0, -1.0 / SQRT3], [0.0, 2.0 / SQRT3]])
    if lattice_type == "square":
        return 2.0 * np.pi * np.eye(2)
    raise ValueError(f"unknown lattice type {lattice_type!r}")


def unit_cell_area(lattice_type: str) -> float:
    return SQRT3 / 2.0 if lattice_type == "triangular" else 1.0


def filling_fraction(lattice: RodLattice) -> float:
    return math.pi * lattice.rod_radius ** 2 / unit_cell_area(lattice.lattice_type)


def g_vectors(lattice_type: str, n_pw: int = DEFAULT_N_PW):
    """All reciprocal vectors with |G| up to the n_pw-th smallest magnitude
    (ties included, so the set keeps the lattice point symmetry)."""
    b = reciprocal_basis(lattice_type)
    m = int(math.ceil(math.sqrt(n_pw))) + 3
    ms = np.arange(-m, m + 1)
    m1, m2 = np.meshgrid(ms, ms, indexing="ij")
    idx = np.stack([m1.ravel(), m2.ravel()], axis=-1)
    g = idx @ b
    norm = np.linalg.norm(g, axis=1)
    order = np.argsort(norm, kind="stable")
    if n_pw > len(order):
        raise ValueError("n_pw too large for the generated index window")
    cutoff = norm[order[n_pw - 1]] * (1.0 + 1e-9)
    keep = norm <= cutoff
    return g[keep], idx[keep]


def epsilon_fourier(lattice: RodLattice, G, eps_bg: float = DEFAULT_BG_EPS) -> float:
    """Fourier coefficient of the periodic permittivity at reciprocal vector G
    (circular-rod form factor).  G must lie on the reciprocal lattice."""
    eps_rod = lattice.rod_material.permittivity
    f = filling_fraction(lattice)
    gnorm = float(np.hypot(G[0], G[1]))
    if gnorm < 1e-12:
        return f * eps_rod + (1.0 - f) * eps_bg
    x = gnorm * lattice.rod_radius
    return (eps_rod - eps_bg) * 2.0 * f * float(j1(x)) / x


@dataclass(frozen=True)
class KPath:
    """Ordered labeled k-points with linear interpolation between them."""

    points: tuple                      # ((label, (kx, ky)), ...)
    samples_per_segment: int = 16

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("need at least two path points")
        for (_, p), (_, q) in zip(self.points, self.points[1:]):
            if np.allclose(p, q):
                raise ValueError("consecutive path points must be distinct")
        if self.samples_per_segment < 1:
            raise ValueError("samples_per_segment must be >= 1")

    def kpoints(self) -> np.ndarray:
        pts = [np.asarray(p, float) for _, p in self.points]
        out = [pts[0]]
        for p, q in zip(pts, pts[1:]):
            for s in range(1, self.samples_per_segment + 1):
                out.append(p + (q - p) * s / self.samples_per_segment)
        return np.array(out)

    def labels(self) -> list:
        marks = []
        for seg, (label, _) in enumerate(self.points):
            marks.append((seg * self.samples_per_segment, label))
        return marks


def default_kpath(lattice_type: str, samples_per_segment: int = 16) -> KPath:
    if lattice_type == "triangular":
        pts = (
            ("G", (0.0, 0.0)),
            ("M", (math.pi, math.pi / SQRT3)),
            ("K", (4.0 * math.pi / 3.0, 0.0)),
            ("G", (0.0, 0.0)),
        )
    else:
        pts = (
            ("G", (0.0, 0.0)),
            ("X", (math.pi, 0.0)),
            ("M", (math.pi, math.pi)),
            ("G", (0.0, 0.0)),
        )
    return KPath(pts, samples_per_segment)


@dataclass
class BandStructure:
    kpoints: np.ndarray        # (nk, 2), units 1/a (contains the 2 pi)
    frequencies: np.ndarray    # (nk, n_bands), c/a, sorted per k
    polarization: str          # "TM" (E along rods) or "TE" (H along rods)
    labels: list = field(default_factory=list)

    def band(self, index: int) -> np.ndarray:
        """1-based band index."""
        return self.frequencies[:, index - 1]

    def to_csv(self, path) -> None:
        nb = self.frequencies.shape[1]
        header = "k_index,k_x,k_y," + ",".join(f"band_{i+1}" for i in range(nb))
        data = np.column_stack([
            np.arange(len(self.kpoints)), self.kpoints, self.frequencies,
        ])
        np.savetxt(path, data, delimiter=",", header=header, comments="")


def band_structure(lattice: RodLattice, kpath: KPath, n_bands: int = 8,
                   n_pw: int = DEFAULT_N_PW, polarization: str = "TM",
                   eps_bg: float = DEFAULT_BG_EPS) -> BandStructure:
    if polarization not in ("TM", "TE"):
        raise ValueError("polarization must be 'TM' or 'TE'")
    g, _ = g_vectors(lattice.lattice_type, n_pw)
    n = len(g)
    if n_bands > n:
        raise ValueError("n_bands cannot exceed the number of plane waves")

    diff = g[:, None, :] - g[None, :, :]
    eps_rod = lattice.rod_material.permittivity
    f = filling_fraction(lattice)
    gnorm = np.linalg.norm(diff, axis=-1)
    x = gnorm * lattice.rod_radius
    with np.errstate(invalid="ignore", divide="ignore"):
        form = np.where(x > 1e-12, 2.0 * f * j1(x) / np.where(x > 0, x, 1.0), f)
    eps_mat = (eps_rod - eps_bg) * form
    eps_mat[gnorm < 1e-12] = f * eps_rod + (1.0 - f) * eps_bg

    cond = np.linalg.cond(eps_mat)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError("epsilon matrix is numerically singular")
    inv_eps = np.linalg.inv(eps_mat)
    inv_eps = 0.5 * (inv_eps + inv_eps.T)  # symmetric input, keep it exact

    ks = kpath.kpoints()
    freqs = np.empty((len(ks), n_bands))
    for ik, k in enumerate(ks):
        kpg = k[None, :] + g
        if polarization == "TM":
            mag = np.linalg.norm(kpg, axis=1)
            kernel = mag[:, None] * inv_eps * mag[None, :]
        else:
            kernel = (kpg @ kpg.T) * inv_eps
        kernel = 0.5 * (kernel + kernel.T)
        w = np.linalg.eigvalsh(kernel)
        w = np.clip(w, 0.0, None)
        freqs[ik] = np.sqrt(w[:n_bands]) / (2.0 * np.pi)
    return BandStructure(ks, freqs, polarization, kpath.labels())


@dataclass(frozen=True)
class GapReport:
    polarization: str
    below_band: int            # gap between this band and the next (1-based)
    f_lower: float             # max of the lower band over the path
    f_upper: float             # min of the upper band over the path
    exists: bool

    @property
    def gap_midgap(self) -> float:
        if not self.exists:
            return 0.0
        return 2.0 * (self.f_upper - self.f_lower) / (self.f_upper + self.f_lower)

    @property
    def wavelength_interval(self) -> tuple:
        """(lambda_min, lambda_max) = reciprocals of the frequency edges."""
        if not self.exists:
            return (math.nan, math.nan)
        return (1.0 / self.f_upper, 1.0 / self.f_lower)

    def as_dict(self) -> dict:
        lo, hi = self.wavelength_interval
        return {
            "polarization": self.polarization,
            "below_band": self.below_band,
            "exists": self.exists,
            "f_lower": self.f_lower,
            "f_upper": self.f_upper,
            "gap_midgap": self.gap_midgap,
            "lambda_interval": [lo, hi],
        }


def find_gap(bands: BandStructure, below: int) -> GapReport:
    """Gap between band `below` and band `below`+1 along the computed path."""
    if not 1 <= below < bands.frequencies.shape[1]:
        raise ValueError("band index out of range")
    lower = float(np.max(bands.band(below)))
    upper = float(np.min(bands.band(below + 1)))
    return GapReport(
        polarization=bands.polarization,
        below_band=below,
        f_lower=lower,
        f_upper=upper,
        exists=upper > lower,
    )

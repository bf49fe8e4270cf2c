"""Normalized-unit conventions and conversion to physical units.

All lengths are in units of the lattice constant a, time in a/c and
frequency in c/a.  Normalized wavelength is lambda_n = 1/f_n.
"""

from __future__ import annotations

from dataclasses import dataclass


def wavelength_from_frequency(freq: float) -> float:
    """Normalized wavelength (units of a) of a normalized frequency (c/a)."""
    if freq <= 0.0:
        raise ValueError("frequency must be positive")
    return 1.0 / freq


def frequency_from_wavelength(wavelength: float) -> float:
    if wavelength <= 0.0:
        raise ValueError("wavelength must be positive")
    return 1.0 / wavelength


@dataclass(frozen=True)
class PhysicalScale:
    """Fixes the lattice constant in nanometers to convert normalized values."""

    alpha_nm: float

    def __post_init__(self):
        if self.alpha_nm <= 0.0:
            raise ValueError("alpha_nm must be positive")

    def length_nm(self, length: float) -> float:
        """Physical length in nm of a length given in units of a."""
        return length * self.alpha_nm

    def wavelength_nm(self, freq: float) -> float:
        """Physical free-space wavelength in nm of a normalized frequency."""
        return wavelength_from_frequency(freq) * self.alpha_nm


def scale_for_mode(mode_wavelength: float, target_nm: float) -> PhysicalScale:
    """Choose the lattice constant so a normalized mode wavelength lands at a
    physical target, e.g. mode_wavelength=1.13 at 660 nm gives a ~ 584 nm."""
    if mode_wavelength <= 0.0:
        raise ValueError("mode_wavelength must be positive")
    return PhysicalScale(alpha_nm=target_nm / mode_wavelength)

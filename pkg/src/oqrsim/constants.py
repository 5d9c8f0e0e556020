"""Physical constants (CODATA 2018) and unit conversions.

Internal units: time in ps, energies as angular frequencies in rad/ps
(hbar = 1), fields in V/m and dipole moments as rad/ps per V/m so that
``mu * E`` is directly a coupling frequency.
"""

import math

SPEED_OF_LIGHT = 299792458.0  # m/s
HBAR = 1.054571817e-34  # J s
BOLTZMANN = 1.380649e-23  # J/K
DEBYE = 1e-21 / SPEED_OF_LIGHT  # C m
ATOMIC_FIELD = 5.14220674763e11  # V/m

PS = 1e-12  # s


class UnitSystem:
    """Conversion factors between laboratory units and internal units."""

    # rad/ps per cm^-1
    CM1 = 2.0 * math.pi * SPEED_OF_LIGHT * 100.0 * PS
    # rad/ps per ordinary THz
    THZ = 2.0 * math.pi
    # internal dipole (rad/ps per V/m) per Debye
    DEBYE = DEBYE / HBAR * PS
    # rad/ps per kelvin
    KB = BOLTZMANN / HBAR * PS

    @classmethod
    def from_wavenumber(cls, x):
        return x * cls.CM1

    @classmethod
    def to_wavenumber(cls, x):
        return x / cls.CM1

    @classmethod
    def from_thz(cls, f):
        """Ordinary frequency in THz to angular frequency in rad/ps."""
        return f * cls.THZ

    @classmethod
    def to_thz(cls, omega):
        return omega / cls.THZ

    @classmethod
    def from_debye(cls, d):
        return d * cls.DEBYE

    @classmethod
    def to_debye(cls, mu):
        return mu / cls.DEBYE

    @classmethod
    def from_atomic_field(cls, f):
        """Field in atomic units to V/m."""
        return f * ATOMIC_FIELD

    @classmethod
    def to_atomic_field(cls, f):
        return f / ATOMIC_FIELD

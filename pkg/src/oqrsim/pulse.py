"""Single-cycle THz pulse E(t) = E0 sin^2(pi t / T) cos(omega_c t + phi_c)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .constants import UnitSystem


@dataclass(frozen=True)
class PulseParams:
    """Pulse parameters; ``omega_c`` in rad/ps, ``E0`` in V/m.

    The duration is one optical cycle, ``T = 2 pi / omega_c``.
    """

    E0: float
    omega_c: float
    phi_c: float = math.pi / 2

    def __post_init__(self):
        if self.E0 < 0:
            raise ValueError(f"E0 must be non-negative, got {self.E0}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")

    @classmethod
    def from_lab(cls, E0_V_per_m: float, freq_THz: float, phi_c: float = math.pi / 2) -> "PulseParams":
        return cls(E0_V_per_m, UnitSystem.from_thz(freq_THz), phi_c)

    @property
    def T(self) -> float:
        return 2.0 * math.pi / self.omega_c

    @property
    def freq_THz(self) -> float:
        return UnitSystem.to_thz(self.omega_c)

    def with_E0(self, E0: float) -> "PulseParams":
        return PulseParams(E0, self.omega_c, self.phi_c)


def field_at(t, p: PulseParams):
    """Field in V/m; exactly zero outside [0, T]."""
    t = np.asarray(t, dtype=float)
    T = p.T
    inside = (t >= 0.0) & (t <= T)
    val = p.E0 * np.sin(math.pi * t / T) ** 2 * np.cos(p.omega_c * t + p.phi_c)
    val = np.where(inside, val, 0.0)
    return float(val) if val.ndim == 0 else val


def spectrum(p: PulseParams, omega) -> complex | np.ndarray:
    """A(omega) = int_0^T E(t) exp(i omega t) dt in V/m * ps."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("omega must be non-negative")

    def one(w):
        return complex(quadrature.integrate(
            lambda t: field_at(t, p) * np.exp(1j * w * t), 0.0, p.T, w + 2.0 * p.omega_c))

    if omega.ndim == 0:
        return one(float(omega))
    return np.array([one(w) for w in omega.ravel()]).reshape(omega.shape)


def pulse_area(p: PulseParams) -> float:
    """Time-integrated field int_0^T E(t) dt."""
    return quadrature.integrate(lambda t: field_at(t, p), 0.0, p.T, 2.0 * p.omega_c)

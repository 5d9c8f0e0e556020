"""Rigid linear rotor: energies, dipole couplings and thermal weights."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import UnitSystem


@dataclass(frozen=True)
class MoleculeSpec:
    """Rigid rotor defined by its rotational constant and dipole moment.

    ``B`` is stored in rad/ps and ``mu`` in rad/ps per V/m; use
    :meth:`from_lab` to build one from cm^-1 and Debye.
    """

    B: float
    mu: float
    name: str = ""

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError(f"rotational constant must be positive, got {self.B}")
        if self.mu < 0:
            raise ValueError(f"dipole moment must be non-negative, got {self.mu}")

    @classmethod
    def from_lab(cls, B_cm: float, mu_debye: float, name: str = "") -> "MoleculeSpec":
        return cls(UnitSystem.from_wavenumber(B_cm), UnitSystem.from_debye(mu_debye), name)

    @property
    def B_cm(self) -> float:
        return UnitSystem.to_wavenumber(self.B)

    @property
    def mu_debye(self) -> float:
        return UnitSystem.to_debye(self.mu)

    @property
    def omega0(self) -> float:
        """J=0 -> 1 transition frequency 2B (rad/ps)."""
        return 2.0 * self.B


PRESETS = {
    "HCN": dict(B_cm=1.457, mu_debye=2.89),
}


def molecule(name: str) -> MoleculeSpec:
    """Look up a preset molecule by name (case-insensitive)."""
    key = name.upper()
    if key not in PRESETS:
        raise KeyError(f"unknown molecule preset {name!r}; known: {sorted(PRESETS)}")
    return MoleculeSpec.from_lab(name=key, **PRESETS[key])


@dataclass(frozen=True, order=True)
class RotLabel:
    J: int
    M: int = 0

    def __post_init__(self):
        if self.J < 0:
            raise ValueError(f"J must be non-negative, got {self.J}")
        if abs(self.M) > self.J:
            raise ValueError(f"|M| must not exceed J, got J={self.J}, M={self.M}")

    def __str__(self):
        return f"|{self.J}{self.M}>"


def rot_energy(J, mol: MoleculeSpec):
    """E_J = B J (J + 1) in rad/ps. Accepts scalars or integer arrays."""
    J = np.asarray(J)
    if np.any(J < 0):
        raise ValueError("J must be non-negative")
    E = mol.B * J * (J + 1)
    return float(E) if E.ndim == 0 else E


def transition_frequency(J, mol: MoleculeSpec):
    """omega_J = E_{J+1} - E_J = 2 B (J + 1)."""
    return 2.0 * mol.B * (np.asarray(J) + 1)


def cos_theta_element(J: int, M: int) -> float:
    """<J+1 M| cos(theta) |J M> for the fully normalized spherical harmonics."""
    if abs(M) > J:
        raise ValueError(f"|M| must not exceed J, got J={J}, M={M}")
    return math.sqrt(((J + 1) ** 2 - M**2) / ((2 * J + 1) * (2 * J + 3)))


def cos_theta_couplings(J_min: int, J_max: int, M: int) -> np.ndarray:
    """Off-diagonal couplings M_{J+1,J} for J = J_min .. J_max-1."""
    return np.array([cos_theta_element(J, M) for J in range(J_min, J_max)])


def revival_time(mol: MoleculeSpec) -> float:
    """Full revival period pi / B in ps."""
    return math.pi / mol.B


@dataclass(frozen=True)
class BoltzmannTable:
    """Normalized sublevel weights, ordered by (J, M)."""

    temperature: float
    labels: tuple
    weights: np.ndarray = field(repr=False)

    def __iter__(self):
        return iter(zip(self.labels, self.weights))

    def __len__(self):
        return len(self.labels)

    def by_J(self) -> dict:
        """Total weight per J level (summed over M)."""
        out: dict = {}
        for lab, w in self:
            out[lab.J] = out.get(lab.J, 0.0) + w
        return out


def boltzmann_weights(temperature: float, mol: MoleculeSpec, cutoff: float = 1e-6) -> BoltzmannTable:
    """Boltzmann populations of the |J M> sublevels.

    Every sublevel of level J gets exp(-E_J / kT) / Z with
    Z = sum_J (2J+1) exp(-E_J / kT). Levels are kept up to the smallest J*
    whose cumulative weight reaches 1 - cutoff; the kept weights are
    renormalized to sum to one.
    """
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if not 0 < cutoff < 1:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff}")
    kT = UnitSystem.KB * temperature
    # enough levels that the neglected tail is far below any sensible cutoff
    J_top = 4
    while rot_energy(J_top, mol) / kT < 60.0:
        J_top *= 2
    Js = np.arange(J_top + 1)
    x = rot_energy(Js, mol) / kT
    boltz = np.exp(-(x - x[0]))
    level = (2 * Js + 1) * boltz
    Z = level.sum()
    cum = np.cumsum(level) / Z
    J_star = int(np.searchsorted(cum, 1.0 - cutoff))
    labels = []
    weights = []
    for J in range(J_star + 1):
        for M in range(-J, J + 1):
            labels.append(RotLabel(J, M))
            weights.append(boltz[J])
    weights = np.array(weights)
    weights = weights / math.fsum(weights)
    return BoltzmannTable(temperature, tuple(labels), weights)

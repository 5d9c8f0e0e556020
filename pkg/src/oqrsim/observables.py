"""Orientation observables, angular densities and OQR amplitudes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .legendre import normalized_legendre
from .propagator import BasisSpec, Trajectory, WavepacketCoeffs
from .rotor import BoltzmannTable, MoleculeSpec, RotLabel, cos_theta_couplings, revival_time, rot_energy, transition_frequency

DENSE_SAMPLES = 4096
REFINE_TOL = 1e-4  # in units of the revival time
PHASE_FLOOR = 1e-20  # populations below this carry no defined phase


@dataclass(frozen=True)
class Member:
    initial: RotLabel
    weight: float
    trajectory: Trajectory


@dataclass(frozen=True)
class ThermalEnsemble:
    """Incoherent ensemble of trajectories, sorted by (J0, M)."""

    members: tuple
    temperature: float | None = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("empty ensemble")
        total = math.fsum(m.weight for m in self.members)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"ensemble weights sum to {total}, expected 1")
        p0 = self.members[0].trajectory
        for m in self.members[1:]:
            if m.trajectory.pulse != p0.pulse or m.trajectory.molecule != p0.molecule:
                raise ValueError("ensemble members must share pulse and molecule")
        object.__setattr__(self, "members", tuple(sorted(self.members, key=lambda m: (m.initial.J, m.initial.M))))

    @classmethod
    def single(cls, trajectory: Trajectory) -> "ThermalEnsemble":
        return cls((Member(trajectory.initial, 1.0, trajectory),))

    @property
    def pulse(self):
        return self.members[0].trajectory.pulse

    @property
    def molecule(self):
        return self.members[0].trajectory.molecule

    @property
    def end_time(self) -> float:
        return max(m.trajectory.end_time for m in self.members)


def build_ensemble(table: BoltzmannTable, run) -> ThermalEnsemble:
    """Ensemble from Boltzmann weights; ``run(label)`` returns a Trajectory.

    Members with equal (J0, |M|) share dynamics, so each block is
    propagated once and reused for the +M / -M partner.
    """
    cache = {}
    members = []
    for label, w in table:
        key = (label.J, abs(label.M))
        if key not in cache:
            cache[key] = run(RotLabel(label.J, abs(label.M)))
        members.append(Member(label, float(w), cache[key]))
    return ThermalEnsemble(tuple(members), table.temperature)


@dataclass(frozen=True)
class OrientationTrace:
    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class OqrReport:
    max_value: float
    min_value: float
    t_max: float
    t_min: float

    @property
    def amplitude(self) -> float:
        return self.max_value - self.min_value

    @property
    def abs_max(self) -> float:
        """max over the period of |<cos theta>|."""
        return max(self.max_value, -self.min_value)


@dataclass(frozen=True)
class PhaseReport:
    t: float
    Js: np.ndarray
    populations: np.ndarray
    phases: np.ndarray  # phi_J for J = Js[:-1], wrapped to [0, 2 pi)


def _block_arrays(basis: BasisSpec, mol: MoleculeSpec):
    m = cos_theta_couplings(basis.J_min, basis.J_max, basis.M)
    omega = transition_frequency(basis.Js[:-1], mol)
    return m, omega


def cos_theta_matrix(basis: BasisSpec) -> np.ndarray:
    """Tridiagonal matrix of cos(theta) in the |J M> block."""
    m = cos_theta_couplings(basis.J_min, basis.J_max, basis.M)
    return np.diag(m, 1) + np.diag(m, -1)


def orientation_at(w: WavepacketCoeffs, t, mol: MoleculeSpec):
    """<cos theta>(t) of one state with frozen interaction-picture coefficients:

        sum_J 2 |c_{J+1}| |c_J| M_{J+1,J} cos(omega_J t - phi_J)

    ``t`` may be a scalar or an array.
    """
    m, omega = _block_arrays(w.basis, mol)
    c = w.coefficients
    amp = 2.0 * np.abs(c[1:]) * np.abs(c[:-1]) * m
    phi = np.angle(c[1:]) - np.angle(c[:-1])
    t = np.asarray(t, dtype=float)
    vals = np.cos(np.multiply.outer(t, omega) - phi) @ amp
    return float(vals) if t.ndim == 0 else vals


def orientation_quadratic(w: WavepacketCoeffs, t: float, mol: MoleculeSpec) -> float:
    """<psi(t)| cos(theta) |psi(t)> from Schrodinger-picture amplitudes."""
    a = w.schrodinger(t, mol)
    return float(np.real(np.vdot(a, cos_theta_matrix(w.basis) @ a)))


def _member_values(member: Member, times: np.ndarray, mol: MoleculeSpec) -> np.ndarray:
    traj = member.trajectory
    out = np.empty(times.size)
    post = times >= traj.end_time
    if np.any(post):
        out[post] = orientation_at(traj.final, times[post], mol)
    for i in np.flatnonzero(~post):
        out[i] = orientation_at(traj.coeffs_at(times[i]), times[i], mol)
    return out


def thermal_trace(e: ThermalEnsemble, times) -> OrientationTrace:
    """Weighted incoherent sum of member orientations.

    Times inside the pulse window need matching trajectory snapshots.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    mol = e.molecule
    total = np.zeros(times.size)
    values_by_traj = {}
    for member in e.members:
        key = id(member.trajectory)
        if key not in values_by_traj:
            values_by_traj[key] = _member_values(member, times, mol)
        total += member.weight * values_by_traj[key]
    return OrientationTrace(times, total)


def _post_pulse_function(e: ThermalEnsemble):
    """Scalar t -> trace value for t after the pulse (no snapshot lookup)."""
    mol = e.molecule
    finals = []
    for member in e.members:
        finals.append((member.weight, member.trajectory.final))

    def g(t):
        return math.fsum(w * orientation_at(c, t, mol) for w, c in finals)

    return g


def oqr_amplitude(e: ThermalEnsemble, mol: MoleculeSpec | None = None,
                  samples: int = DENSE_SAMPLES) -> OqrReport:
    """Extrema of the post-pulse trace over one revival period [T, T + tau]."""
    mol = e.molecule if mol is None else mol
    t0 = e.end_time
    tau = revival_time(mol)
    ts = t0 + np.linspace(0.0, tau, samples, endpoint=False)
    vals = thermal_trace(e, ts).values
    g = _post_pulse_function(e)
    dt = tau / samples

    def refine(i, sign):
        res = minimize_scalar(lambda t: sign * g(t), bounds=(ts[i] - dt, ts[i] + dt),
                              method="bounded", options={"xatol": REFINE_TOL * tau})
        t_best, v_best = (res.x, sign * res.fun) if sign * res.fun < sign * vals[i] else (ts[i], vals[i])
        # the trace is tau-periodic, report times inside [T, T + tau)
        t_best = t0 + (t_best - t0) % tau
        return float(t_best), float(v_best)

    i_max = int(np.argmax(vals))
    i_min = int(np.argmin(vals))
    t_max, v_max = refine(i_max, -1.0)
    t_min, v_min = refine(i_min, 1.0)
    return OqrReport(v_max, v_min, t_max, t_min)


def angular_density(w: WavepacketCoeffs, t: float, theta, mol: MoleculeSpec) -> np.ndarray:
    """Azimuth-integrated probability density in theta.

    |sum_J c_J exp(-i E_J t) Pbar_J^M(cos theta)|^2, normalized so that
    int_0^pi density sin(theta) d theta = 1.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > math.pi):
        raise ValueError("theta must lie in [0, pi]")
    P = normalized_legendre(w.basis.J_max, w.basis.M, np.cos(theta))
    psi = w.schrodinger(t, mol) @ P
    return np.abs(psi) ** 2


def thermal_density(e: ThermalEnsemble, t: float, theta) -> np.ndarray:
    mol = e.molecule
    total = np.zeros(np.size(theta))
    for member in e.members:
        total += member.weight * angular_density(member.trajectory.coeffs_at(t), t, theta, mol)
    return total


def populations_and_phases(w: WavepacketCoeffs, t: float, mol: MoleculeSpec) -> PhaseReport:
    """Populations |c_J|^2 and relative phases at time ``t``.

    phi_J = arg(a_{J+1}) - arg(a_J) of the Schrodinger-picture amplitudes
    a_J = c_J exp(-i E_J t), wrapped to [0, 2 pi). With this choice the
    orientation is sum_J 2 |a_{J+1}||a_J| M_{J+1,J} cos(phi_J) at time t.
    A phase involving an unpopulated level is reported as 0.
    """
    a = w.schrodinger(t, mol)
    pops = np.abs(a) ** 2
    phi = np.mod(np.angle(a[1:]) - np.angle(a[:-1]), 2.0 * math.pi)
    phi = np.where((pops[1:] < PHASE_FLOOR) | (pops[:-1] < PHASE_FLOOR), 0.0, phi)
    # np.mod can return 2 pi for tiny negative inputs
    phi = np.where(phi >= 2.0 * math.pi, 0.0, phi)
    return PhaseReport(float(t), w.basis.Js.copy(), pops, phi)

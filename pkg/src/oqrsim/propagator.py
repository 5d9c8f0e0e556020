"""Interaction-picture TDSE for a rigid rotor in a fixed-M block.

The state is |psi(t)> = sum_J c_J(t) exp(-i E_J t) |J M>; only the slowly
varying c_J are integrated. The coupling matrix is tridiagonal with
zero diagonal:

    H_I[J, J+1] = -mu M_{J+1,J} E(t) exp(-i omega_J t),   omega_J = E_{J+1} - E_J
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import integrate
from .integrate import NonConvergence, SolverStats
from .pulse import PulseParams, field_at
from .rotor import MoleculeSpec, RotLabel, cos_theta_couplings, rot_energy, transition_frequency

__all__ = [
    "BasisSpec",
    "WavepacketCoeffs",
    "Trajectory",
    "TruncationLeak",
    "NonConvergence",
    "propagate",
    "free_evolve",
    "auto_truncate",
    "coupling_matrix",
]

LEAK_THRESHOLD = 1e-8
DEFAULT_TOL = 1e-10


class TruncationLeak(RuntimeError):
    """Population reached the top of the truncated basis."""

    def __init__(self, message, leak):
        super().__init__(message)
        self.leak = leak


@dataclass(frozen=True)
class BasisSpec:
    M: int
    J_max: int

    def __post_init__(self):
        if self.J_max < abs(self.M) + 2:
            raise ValueError(f"J_max={self.J_max} must be at least |M|+2={abs(self.M) + 2}")

    @property
    def J_min(self) -> int:
        return abs(self.M)

    @property
    def Js(self) -> np.ndarray:
        return np.arange(self.J_min, self.J_max + 1)

    @property
    def size(self) -> int:
        return self.J_max - self.J_min + 1

    def index(self, J: int) -> int:
        if not self.J_min <= J <= self.J_max:
            raise ValueError(f"J={J} outside basis [{self.J_min}, {self.J_max}]")
        return J - self.J_min


@dataclass(frozen=True)
class WavepacketCoeffs:
    """Interaction-picture coefficients c_J valid at ``t_ref`` (ps)."""

    coefficients: np.ndarray
    t_ref: float
    basis: BasisSpec

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (self.basis.size,):
            raise ValueError(f"expected {self.basis.size} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def eigenstate(cls, label: RotLabel, basis: BasisSpec, t_ref: float = 0.0) -> "WavepacketCoeffs":
        if abs(label.M) != abs(basis.M):
            raise ValueError(f"{label} does not belong to the M={basis.M} block")
        c = np.zeros(basis.size, dtype=complex)
        c[basis.index(label.J)] = 1.0
        return cls(c, t_ref, basis)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.coefficients) ** 2

    def schrodinger(self, t: float, mol: MoleculeSpec) -> np.ndarray:
        """Schrodinger-picture amplitudes c_J exp(-i E_J t)."""
        return self.coefficients * np.exp(-1j * rot_energy(self.basis.Js, mol) * t)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: tuple
    pulse: PulseParams
    molecule: MoleculeSpec
    initial: RotLabel
    stats: SolverStats = field(default_factory=SolverStats, compare=False)

    @property
    def basis(self) -> BasisSpec:
        return self.states[0].basis

    @property
    def final(self) -> WavepacketCoeffs:
        return self.states[-1]

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def coeffs_at(self, t: float) -> WavepacketCoeffs:
        """Coefficients valid at ``t``.

        After the last snapshot the interaction-picture coefficients are
        frozen (no field), so the final state is returned with t_ref = t.
        Inside the propagated window only stored snapshot times are
        available; request them through ``propagate(t_eval=...)``.
        """
        if t >= self.times[-1]:
            return free_evolve(self.final, t - self.final.t_ref)
        i = int(np.searchsorted(self.times, t))
        if i < len(self.times) and abs(self.times[i] - t) <= 1e-12 * max(1.0, abs(t)):
            return self.states[i]
        if i > 0 and abs(self.times[i - 1] - t) <= 1e-12 * max(1.0, abs(t)):
            return self.states[i - 1]
        raise KeyError(f"no snapshot at t={t} ps; pass it in t_eval when propagating")

    def norm_drift(self) -> float:
        return max(abs(s.norm - 1.0) for s in self.states)

    def to_rows(self):
        """Rows (t_ps, re c_J, im c_J, ...) for CSV export."""
        for t, s in zip(self.times, self.states):
            row = [float(t)]
            for c in s.coefficients:
                row += [c.real, c.imag]
            yield row

    def header(self):
        cols = ["t_ps"]
        for J in self.basis.Js:
            cols += [f"re_c{J}", f"im_c{J}"]
        return cols


def coupling_matrix(t: float, p: PulseParams, mol: MoleculeSpec, basis: BasisSpec) -> np.ndarray:
    """Dense interaction-picture Hamiltonian H_I(t) of the M block (rad/ps)."""
    Js = basis.Js
    omega = transition_frequency(Js[:-1], mol)
    m = cos_theta_couplings(basis.J_min, basis.J_max, basis.M)
    off = -mol.mu * field_at(t, p) * m * np.exp(-1j * omega * t)
    H = np.diag(off, 1).astype(complex)
    H += H.conj().T
    return H


def _rhs(p: PulseParams, mol: MoleculeSpec, basis: BasisSpec):
    Js = basis.Js
    omega = transition_frequency(Js[:-1], mol)
    g = -mol.mu * cos_theta_couplings(basis.J_min, basis.J_max, basis.M)

    def f(t, c):
        off = g * field_at(t, p) * np.exp(-1j * omega * t)
        dc = np.empty_like(c)
        dc[:-1] = off * c[1:]
        dc[-1] = 0.0
        dc[1:] += off.conj() * c[:-1]
        return -1j * dc

    return f


def propagate(initial: RotLabel, p: PulseParams, mol: MoleculeSpec, basis: BasisSpec,
              tol: float = DEFAULT_TOL, t_eval=None, check_truncation: bool = True,
              start: WavepacketCoeffs | None = None) -> Trajectory:
    """Integrate i dc/dt = H_I(t) c over the pulse window [0, T].

    Parameters
    ----------
    initial : RotLabel
        Starting eigenstate; its |M| selects the block.
    tol : float
        Relative per-step error tolerance of the adaptive stepper.
    t_eval : array_like, optional
        Times in [0, T] at which to store snapshots. By default every
        accepted step is stored.
    check_truncation : bool
        Raise TruncationLeak if the two highest levels end up holding more
        than 1e-8 of the population.
    start : WavepacketCoeffs, optional
        Arbitrary initial coefficients at t=0 (overrides ``initial`` for
        the state but not for provenance).

    The coefficients are never renormalized; the norm drift is left
    visible in the result.
    """
    if abs(initial.M) != abs(basis.M):
        raise ValueError(f"initial state {initial} not in the M={basis.M} block")
    c0 = WavepacketCoeffs.eigenstate(initial, basis) if start is None else start
    T = p.T
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(t_eval < 0) or np.any(t_eval > T * (1 + 1e-12)):
            raise ValueError("t_eval must lie within the pulse window [0, T]")
        t_eval = np.minimum(t_eval, T)
        if t_eval[-1] != T:
            t_eval = np.append(t_eval, T)

    if p.E0 == 0.0:
        times = np.array([0.0, T]) if t_eval is None else t_eval
        states = tuple(replace(c0, t_ref=float(t)) for t in times)
        return Trajectory(times, states, p, mol, initial)

    times, ys, stats = integrate.solve(_rhs(p, mol, basis), (0.0, T), c0.coefficients,
                                       t_eval=t_eval, rtol=tol, atol=1e-2 * tol)
    states = tuple(WavepacketCoeffs(y, float(t), basis) for t, y in zip(times, ys))
    traj = Trajectory(times, states, p, mol, initial, stats)
    if check_truncation:
        pops = traj.final.populations
        leak = float(pops[-1] + pops[-2])
        if leak > LEAK_THRESHOLD:
            raise TruncationLeak(
                f"population {leak:.3g} in J={basis.J_max - 1},{basis.J_max}; increase J_max", leak)
    return traj


def propagate_backward(w: WavepacketCoeffs, p: PulseParams, mol: MoleculeSpec,
                       tol: float = DEFAULT_TOL) -> WavepacketCoeffs:
    """Integrate the same equation from w.t_ref back to t=0."""
    if p.E0 == 0.0:
        return replace(w, t_ref=0.0)
    times, ys, _ = integrate.solve(_rhs(p, mol, w.basis), (min(w.t_ref, p.T), 0.0),
                                   w.coefficients, t_eval=[0.0], rtol=tol, atol=1e-2 * tol)
    return WavepacketCoeffs(ys[-1], 0.0, w.basis)


def free_evolve(w: WavepacketCoeffs, dt: float) -> WavepacketCoeffs:
    """Field-free evolution by ``dt``.

    Interaction-picture coefficients do not change without a field; the
    free phases exp(-i E_J t) are applied when observables are evaluated.
    """
    return replace(w, t_ref=w.t_ref + dt)


def auto_truncate(initial: RotLabel, p: PulseParams, mol: MoleculeSpec, tol: float = DEFAULT_TOL,
                  converge: float = 1e-8, J_limit: int = 80) -> BasisSpec:
    """Smallest J_max that passes the leak check and whose final
    populations move by less than ``converge`` when J_max grows by 2."""
    J_max = max(abs(initial.M) + 2, initial.J)
    while J_max <= J_limit:
        basis = BasisSpec(initial.M, J_max)
        try:
            traj = propagate(initial, p, mol, basis, tol)
        except TruncationLeak:
            J_max += 1
            continue
        pops = traj.final.populations
        bigger = BasisSpec(initial.M, J_max + 2)
        pops2 = propagate(initial, p, mol, bigger, tol, check_truncation=False).final.populations
        if np.max(np.abs(pops2[: len(pops)] - pops)) < converge and np.sum(pops2[len(pops):]) < converge:
            return basis
        J_max += 1
    raise TruncationLeak(f"no converged basis up to J_max={J_limit}", float("nan"))

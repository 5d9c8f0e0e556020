"""Three-state Magnus model of the pulse-driven rotor.

The block is |0M>, |1M>, |2M> in the interaction picture. For |M| = 1 the
|0M> level does not exist; it is kept as an inert, uncoupled row so that
all kernels stay 3x3 and the |1M> <-> |2M> pair behaves as a two-state
system.

Kernels follow the nested time-ordered commutator integrals

    S1 = -i int H
    S2 = (-i)^2 / 2 int_{t1>t2} [H1, H2]
    S3 = (-i)^3 / 6 int_{t1>t2>t3} [H1, [H2, H3]]

evaluated by augmenting the ODE dP/dt = H, dR/dt = [H, P],
dW/dt = [H, R]. The textbook third-order term, which adds
[H3, [H2, H1]] under the same integral, is available with
``standard_third_order=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import integrate, quadrature
from .propagator import BasisSpec, Trajectory, WavepacketCoeffs
from .pulse import PulseParams, field_at
from .rotor import MoleculeSpec, RotLabel, cos_theta_element, transition_frequency

ORDERS = (1, 2, 3)
SUPPORTED_STATES = {(0, 0), (1, 0), (1, 1), (1, -1)}


@dataclass(frozen=True)
class BlockData:
    """Dipole couplings (rad/ps per V/m) and transition frequencies (rad/ps)."""

    mu10: float
    mu21: float
    omega0: float
    omega1: float


def block_data(mol: MoleculeSpec, M: int) -> BlockData:
    if abs(M) > 1:
        raise ValueError(f"the three-state block needs |M| <= 1, got M={M}")
    mu10 = mol.mu * cos_theta_element(0, 0) if M == 0 else 0.0
    mu21 = mol.mu * cos_theta_element(1, M)
    w = transition_frequency(np.arange(2), mol)
    return BlockData(mu10, mu21, float(w[0]), float(w[1]))


def block_hamiltonian(t: float, p: PulseParams, mol: MoleculeSpec, M: int) -> np.ndarray:
    d = block_data(mol, M)
    return _hamiltonian_fn(p, d)(t)


def _hamiltonian_fn(p: PulseParams, d: BlockData):
    def H(t):
        e = field_at(t, p)
        h = np.zeros((3, 3), dtype=complex)
        h[0, 1] = -d.mu10 * e * np.exp(-1j * d.omega0 * t)
        h[1, 2] = -d.mu21 * e * np.exp(-1j * d.omega1 * t)
        h[1, 0] = np.conj(h[0, 1])
        h[2, 1] = np.conj(h[1, 2])
        return h

    return H


def _check_time(t, p: PulseParams):
    if t < 0 or t > p.T * (1 + 1e-12):
        raise ValueError(f"t={t} outside the pulse window [0, {p.T}]")
    return min(float(t), p.T)


# -- first order ---------------------------------------------------------


@dataclass(frozen=True)
class BetaPair:
    """Field actions at the two block transitions (dimensionless)."""

    beta0: complex
    beta1: complex
    t: float = 0.0

    @property
    def beta(self) -> float:
        return math.hypot(abs(self.beta0), abs(self.beta1))

    def A(self) -> np.ndarray:
        """A = -int H_I = i^-1 S1; Hermitian with eigenvalues 0, +beta, -beta."""
        b0, b1 = self.beta0, self.beta1
        return np.array([[0, np.conj(b0), 0], [b0, 0, np.conj(b1)], [0, b1, 0]], dtype=complex)


def beta_integrals(p: PulseParams, mol: MoleculeSpec, M: int, t: float) -> BetaPair:
    """beta_k(t) = mu_{k+1,k} int_0^t E(t') exp(i omega_k t') dt'."""
    t = _check_time(t, p)
    d = block_data(mol, M)
    out = []
    for mu_k, w_k in ((d.mu10, d.omega0), (d.mu21, d.omega1)):
        if mu_k == 0.0 or p.E0 == 0.0 or t == 0.0:
            out.append(0j)
            continue
        val = quadrature.integrate(lambda s: field_at(s, p) * np.exp(1j * w_k * s), 0.0, t,
                                   w_k + 2.0 * p.omega_c, tol=1e-14)
        out.append(complex(mu_k * val))
    return BetaPair(out[0], out[1], t)


@dataclass(frozen=True)
class FirstOrderDecomposition:
    """Eigenpairs of A; columns of ``vectors`` are |lambda_0>, |lambda_+>, |lambda_->."""

    eigenvalues: np.ndarray
    vectors: np.ndarray

    def unitary(self) -> np.ndarray:
        V = self.vectors
        return (V * np.exp(1j * self.eigenvalues)) @ V.conj().T

    def projector_sum(self) -> np.ndarray:
        return self.vectors @ self.vectors.conj().T


def first_order_decomposition(b: BetaPair) -> FirstOrderDecomposition | None:
    """Closed-form eigen-decomposition of A, or None when beta = 0.

    |lambda_0>  = (beta1*, 0, -beta0) / beta
    |lambda_+-> = (beta0*, +-beta, beta1) / (sqrt(2) beta)

    These agree, up to a phase per vector, with the forms that assume a
    real product beta0 beta1 (exact resonance with phi_c = pi/2) and remain
    valid for arbitrary complex actions.
    """
    beta = b.beta
    if beta == 0.0:
        return None
    b0, b1 = b.beta0, b.beta1
    v0 = np.array([np.conj(b1), 0.0, -b0]) / beta
    vp = np.array([np.conj(b0), beta, b1]) / (math.sqrt(2.0) * beta)
    vm = np.array([np.conj(b0), -beta, b1]) / (math.sqrt(2.0) * beta)
    return FirstOrderDecomposition(np.array([0.0, beta, -beta]), np.column_stack([v0, vp, vm]))


def first_order_unitary(b: BetaPair) -> np.ndarray:
    """exp(i A) assembled from the closed-form eigenvectors.

    A vanishing action (beta = 0) gives the identity.
    """
    dec = first_order_decomposition(b)
    if dec is None:
        return np.eye(3, dtype=complex)
    return dec.unitary()


def first_order_state(J0: int, M: int, b: BetaPair) -> np.ndarray:
    """Amplitudes on (|0M>, |1M>, |2M>) after first-order Magnus evolution.

    From |00>: ladder climbing through |10> into |20>.
    From |10>: one-photon transfer down to |00> and up to |20>.
    From |1,+-1>: two-state rotation |1M> -> |2M> with beta = |beta1|.
    """
    if (J0, M) not in SUPPORTED_STATES:
        raise ValueError(f"first-order closed form not available for |{J0}{M}>")
    b0, b1 = b.beta0, b.beta1
    beta = b.beta
    if beta == 0.0:
        out = np.zeros(3, dtype=complex)
        out[J0] = 1.0
        return out
    c, s = math.cos(beta), math.sin(beta)
    if M != 0:
        # beta0 is absent in the |M| = 1 block
        return np.array([0.0, c, 1j * (b1 / abs(b1)) * s])
    if J0 == 0:
        return np.array([
            (abs(b1) ** 2 + abs(b0) ** 2 * c) / beta**2,
            1j * b0 * s / beta,
            b0 * b1 * (c - 1.0) / beta**2,
        ])
    return np.array([1j * np.conj(b0) * s / beta, c, 1j * b1 * s / beta])


# -- kernels -------------------------------------------------------------


@dataclass(frozen=True)
class MagnusKernel:
    order: int
    matrix: np.ndarray
    t: float


def _comm(a, b):
    return a @ b - b @ a


def magnus_kernels(p: PulseParams, mol: MoleculeSpec, M: int, times=None,
                   standard_third_order: bool = False, tol: float = 1e-11):
    """S1, S2, S3 at each of ``times`` (default: [T]).

    Returns a list with one ``{order: MagnusKernel}`` dict per time.
    """
    if times is None:
        times = [p.T]
    times = np.array([_check_time(t, p) for t in np.atleast_1d(times)])
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be non-decreasing")
    d = block_data(mol, M)
    H = _hamiltonian_fn(p, d)

    if p.E0 == 0.0:
        Z = np.zeros((3, 3), dtype=complex)
        return [{n: MagnusKernel(n, Z.copy(), float(t)) for n in ORDERS} for t in times]

    def f(t, y):
        P, R, W, Q = y.reshape(4, 3, 3)
        h = H(t)
        dP = h
        dR = _comm(h, P)
        dW = _comm(h, R)
        if standard_third_order:
            # Omega3' = 1/2 [A, Omega2] + 1/12 [Omega1, [Omega1, A]],  A = -iH
            A = -1j * h
            O1 = -1j * P
            O2 = -0.5 * R
            dQ = 0.5 * _comm(A, O2) + _comm(O1, _comm(O1, A)) / 12.0
        else:
            dQ = np.zeros((3, 3), dtype=complex)
        return np.concatenate([dP, dR, dW, dQ]).ravel()

    ts, ys, _ = integrate.solve(f, (0.0, p.T), np.zeros(36, dtype=complex), t_eval=times,
                                rtol=tol, atol=tol * 1e-2)
    out = []
    for t, y in zip(ts, ys):
        P, R, W, Q = y.reshape(4, 3, 3)
        S3 = Q if standard_third_order else (1j / 6.0) * W
        out.append({
            1: MagnusKernel(1, _antihermitian(-1j * P), float(t)),
            2: MagnusKernel(2, _antihermitian(-0.5 * R), float(t)),
            3: MagnusKernel(3, _antihermitian(S3), float(t)),
        })
    return out


def _antihermitian(S):
    # the stepper preserves the structure exactly up to rounding; remove
    # rounding noise so downstream eigensolvers see an exact symmetry
    return 0.5 * (S - S.conj().T)


def magnus_kernel(n: int, p: PulseParams, mol: MoleculeSpec, M: int, t: float,
                  standard_third_order: bool = False) -> MagnusKernel:
    if n not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}, got {n}")
    return magnus_kernels(p, mol, M, [t], standard_third_order)[0][n]


def _components(S: np.ndarray):
    """Index groups of the graph whose edges are the nonzero entries of S."""
    n = S.shape[0]
    seen = np.zeros(n, dtype=bool)
    for start in range(n):
        if seen[start]:
            continue
        group, stack = [], [start]
        seen[start] = True
        while stack:
            i = stack.pop()
            group.append(i)
            for j in np.flatnonzero((S[i] != 0) | (S[:, i] != 0)):
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        yield sorted(group)


def unitary_exp(S: np.ndarray) -> np.ndarray:
    """exp(S) for anti-Hermitian S via the eigen-decomposition of i S.

    Decoupled blocks are exponentiated separately, so levels that S does
    not connect stay exactly unconnected in the result.
    """
    U = np.zeros(S.shape, dtype=complex)
    for g in _components(S):
        K = 1j * S[np.ix_(g, g)]
        K = 0.5 * (K + K.conj().T)
        w, V = np.linalg.eigh(K)
        U[np.ix_(g, g)] = (V * np.exp(-1j * w)) @ V.conj().T
    return U


def single_order_propagator(n: int, k: MagnusKernel) -> np.ndarray:
    if k.order != n:
        raise ValueError(f"kernel of order {k.order} given for order {n}")
    return unitary_exp(k.matrix)


def truncated_propagator(orders, kernels) -> np.ndarray:
    """exp(sum of the selected kernels); ``kernels`` maps order -> MagnusKernel."""
    orders = sorted(set(orders))
    if not orders or any(n not in ORDERS for n in orders):
        raise ValueError(f"orders must be a non-empty subset of {ORDERS}")
    ts = {kernels[n].t for n in orders}
    if len(ts) != 1:
        raise ValueError("kernels must share the evaluation time")
    S = sum(kernels[n].matrix for n in orders)
    return unitary_exp(S)


# -- bridging to the full-basis observables ------------------------------


def block_basis(M: int) -> BasisSpec:
    return BasisSpec(M, abs(M) + 2)


def to_wavepacket(vec: np.ndarray, M: int, t: float) -> WavepacketCoeffs:
    """Embed a block state into the J >= |M| basis used by the observables."""
    basis = block_basis(M)
    c = np.zeros(basis.size, dtype=complex)
    for J in range(3):
        if J >= basis.J_min:
            c[basis.index(J)] = vec[J]
        elif abs(vec[J]) > 0:
            raise ValueError(f"amplitude on nonexistent level J={J}, M={M}")
    return WavepacketCoeffs(c, t, basis)


def model_trajectory(initial: RotLabel, p: PulseParams, mol: MoleculeSpec, orders,
                     standard_third_order: bool = False) -> Trajectory:
    """Two-snapshot trajectory (t=0, t=T) for a truncated Magnus model."""
    if (initial.J, initial.M) not in SUPPORTED_STATES:
        raise ValueError(f"{initial} is not in a supported three-state block")
    k = magnus_kernels(p, mol, initial.M, [p.T], standard_third_order)[0]
    U = truncated_propagator(orders, k)
    e = np.zeros(3, dtype=complex)
    e[initial.J] = 1.0
    start = to_wavepacket(e, initial.M, 0.0)
    final = to_wavepacket(U @ e, initial.M, p.T)
    return Trajectory(np.array([0.0, p.T]), (start, final), p, mol, initial)

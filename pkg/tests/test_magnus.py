import math

import numpy as np
import pytest
from scipy.linalg import expm

from oracles import fourier_quad, nested_kernels
from oqrsim.magnus import (
    BetaPair,
    beta_integrals,
    block_data,
    block_hamiltonian,
    first_order_decomposition,
    first_order_state,
    first_order_unitary,
    magnus_kernel,
    magnus_kernels,
    model_trajectory,
    single_order_propagator,
    truncated_propagator,
    unitary_exp,
)
from oqrsim.propagator import BasisSpec, propagate
from oqrsim.pulse import PulseParams
from oqrsim.rotor import RotLabel, cos_theta_element


def resonant(hcn, E0):
    return PulseParams(E0, hcn.omega0)


def random_draws(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        E0 = 10 ** rng.uniform(5, np.log10(3e7))
        f = rng.uniform(0.05, 0.2)
        p = PulseParams.from_lab(E0, f, rng.uniform(0, 2 * math.pi))
        yield p, rng.uniform(0, 1) * p.T


def test_block_data(hcn):
    d0 = block_data(hcn, 0)
    assert d0.mu10 == pytest.approx(hcn.mu / math.sqrt(3), rel=1e-15)
    assert d0.omega1 == pytest.approx(2 * d0.omega0, rel=1e-15)
    assert block_data(hcn, 1).mu10 == 0.0
    assert block_data(hcn, -1).mu21 == pytest.approx(hcn.mu / math.sqrt(5), rel=1e-15)
    with pytest.raises(ValueError):
        block_data(hcn, 2)


def test_block_matches_full_basis(hcn):
    p = resonant(hcn, 4e6)
    from oqrsim.propagator import coupling_matrix
    for t in (0.1, 3.3, 9.0):
        assert np.allclose(block_hamiltonian(t, p, hcn, 0), coupling_matrix(t, p, hcn, BasisSpec(0, 2)), atol=0, rtol=1e-15)


def test_beta_vanishes(hcn):
    p = resonant(hcn, 7e6)
    b = beta_integrals(p, hcn, 0, 0.0)
    assert b.beta0 == 0 and b.beta1 == 0
    b = beta_integrals(p.with_E0(0.0), hcn, 0, p.T)
    assert b.beta == 0.0
    assert beta_integrals(p, hcn, 1, p.T).beta0 == 0.0


def test_beta_against_quad(hcn):
    for p, t in random_draws(8, 1):
        b = beta_integrals(p, hcn, 0, t)
        d = block_data(hcn, 0)
        ref0 = d.mu10 * fourier_quad(p.E0, p.omega_c, p.phi_c, d.omega0, t_end=t)
        ref1 = d.mu21 * fourier_quad(p.E0, p.omega_c, p.phi_c, d.omega1, t_end=t)
        scale = d.mu21 * p.E0 * p.T
        assert abs(b.beta0 - ref0) < 1e-11 * scale
        assert abs(b.beta1 - ref1) < 1e-11 * scale


def test_beta_linear_in_E0(hcn):
    p = resonant(hcn, 1e6)
    b1 = beta_integrals(p, hcn, 0, p.T)
    b3 = beta_integrals(p.with_E0(3e6), hcn, 0, p.T)
    assert b3.beta0 == pytest.approx(3 * b1.beta0, rel=1e-13)
    assert b3.beta1 == pytest.approx(3 * b1.beta1, rel=1e-13)


def test_time_outside_window(hcn):
    p = resonant(hcn, 1e6)
    with pytest.raises(ValueError):
        beta_integrals(p, hcn, 0, 1.5 * p.T)


# -- first order closed forms ------------------------------------------


def test_closed_forms_equal_expm_of_first_kernel(hcn):
    worst = 0.0
    for p, t in random_draws(100, 2):
        for J0, M in ((0, 0), (1, 0), (1, 1), (1, -1)):
            b = beta_integrals(p, hcn, M, t)
            U = expm(1j * b.A())
            e = np.zeros(3)
            e[J0] = 1.0
            worst = max(worst, np.max(np.abs(first_order_state(J0, M, b) - U @ e)))
    assert worst <= 1e-10


def test_decomposition_unitary_and_complete(hcn):
    for p, t in random_draws(100, 3):
        b = beta_integrals(p, hcn, 0, t)
        dec = first_order_decomposition(b)
        V = dec.vectors
        assert np.max(np.abs(dec.projector_sum() - np.eye(3))) <= 1e-12
        assert np.max(np.abs(V.conj().T @ V - np.eye(3))) <= 1e-12
        assert np.max(np.abs(b.A() @ V - V * dec.eigenvalues)) <= 1e-12 * max(1.0, b.beta)
        U = dec.unitary()
        assert np.max(np.abs(U.conj().T @ U - np.eye(3))) <= 1e-12


def test_zero_action_is_identity():
    b = BetaPair(0j, 0j)
    assert first_order_decomposition(b) is None
    assert np.array_equal(first_order_unitary(b), np.eye(3))
    assert np.array_equal(first_order_state(1, 0, b), [0, 1, 0])


def test_unsupported_first_order_state():
    with pytest.raises(ValueError):
        first_order_state(2, 0, BetaPair(0.1j, 0.2j))


def test_resonant_phases(hcn):
    # at resonance with phi_c = pi/2: beta0 = -i|beta0|, beta1 = +i|beta1|
    p = resonant(hcn, 3e6)
    b = beta_integrals(p, hcn, 0, p.T)
    assert np.angle(b.beta0) == pytest.approx(-math.pi / 2, abs=1e-10)
    assert np.angle(b.beta1) == pytest.approx(math.pi / 2, abs=1e-10)
    b1 = beta_integrals(p, hcn, 1, p.T)
    c = first_order_state(1, 1, b1)
    beta = b1.beta
    ref = 1j * np.exp(1j * p.phi_c) * math.sin(beta)
    assert c[2] == pytest.approx(ref, abs=1e-10)
    assert c[1] == pytest.approx(math.cos(beta), abs=1e-15)


def test_resonant_vectors_agree_with_real_product_forms(hcn):
    # when beta0 beta1 is real the eigenvectors can be written with |beta_k|
    p = resonant(hcn, 3e6)
    b = beta_integrals(p, hcn, 0, p.T)
    assert abs((b.beta0 * b.beta1).imag) < 1e-12 * b.beta**2
    a0, a1, beta = abs(b.beta0), abs(b.beta1), b.beta
    simple = np.column_stack([
        [a1 / beta, 0, -a0 / beta],
        np.array([a0, beta, a1]) / (math.sqrt(2) * beta),
        np.array([a0, -beta, a1]) / (math.sqrt(2) * beta),
    ])
    U_simple = np.diag([1, -1j, 1])  # maps |beta_k| onto the resonant phases
    V = first_order_decomposition(b).vectors
    for k in range(3):
        overlap = np.vdot(U_simple @ simple[:, k], V[:, k])
        assert abs(abs(overlap) - 1) < 1e-12


def test_phase_rigidity(hcn):
    phases = []
    for E0 in (2e5, 1e6, 3e6):
        p = resonant(hcn, E0)
        c = first_order_state(0, 0, beta_integrals(p, hcn, 0, p.T))
        assert beta_integrals(p, hcn, 0, p.T).beta < math.pi
        phases.append(np.angle(c))
    assert np.allclose(phases[0], phases[1], atol=1e-10)
    assert np.allclose(phases[0], phases[2], atol=1e-10)


# -- kernels -------------------------------------------------------------


def test_first_kernel_entry(hcn):
    p = resonant(hcn, 5e6)
    S1 = magnus_kernel(1, p, hcn, 0, p.T).matrix
    b = beta_integrals(p, hcn, 0, p.T)
    assert S1[0, 1] == pytest.approx(1j * np.conj(b.beta0), abs=1e-10 * b.beta)
    assert np.allclose(S1, 1j * b.A(), atol=1e-10 * b.beta)


@pytest.mark.parametrize("E0,f", [(1e5, 0.0874), (8e6, 0.0874), (3e7, 0.1), (5e6, 0.06)])
@pytest.mark.parametrize("std", [False, True])
def test_kernels_antihermitian(hcn, E0, f, std):
    p = PulseParams.from_lab(E0, f)
    for M in (0, 1):
        ks = magnus_kernels(p, hcn, M, np.linspace(0, p.T, 5), standard_third_order=std)
        for k in ks:
            for n in (1, 2, 3):
                S = k[n].matrix
                assert np.max(np.abs(S + S.conj().T)) <= 1e-12 * max(1.0, np.max(np.abs(S)))
                U = single_order_propagator(n, k[n])
                assert np.max(np.abs(U.conj().T @ U - np.eye(3))) <= 1e-12


def test_kernel_zero_patterns(hcn):
    p = resonant(hcn, 8e6)
    k = magnus_kernels(p, hcn, 0)[0]
    S2, S3 = k[2].matrix, k[3].matrix
    # even order couples J to J, J+-2; odd orders couple J, J+-1
    assert S2[0, 1] == 0 and S2[1, 2] == 0 and S2[1, 0] == 0 and S2[2, 1] == 0
    assert S3[0, 2] == 0 and S3[2, 0] == 0
    assert np.all(np.diag(S3) == 0)
    assert abs(S2[0, 2]) > 0


def test_kernels_against_nested_quadrature(hcn):
    p = resonant(hcn, 6e6)
    k = magnus_kernels(p, hcn, 0, tol=1e-13)[0]
    ref = nested_kernels(lambda t: block_hamiltonian(t, p, hcn, 0), p.T)
    for n in (1, 2, 3):
        scale = max(1e-3, np.max(np.abs(ref[n - 1])))
        assert np.max(np.abs(k[n].matrix - ref[n - 1])) < 1e-9 * scale


def test_zero_field_kernels(hcn):
    k = magnus_kernels(resonant(hcn, 0.0), hcn, 0)[0]
    assert all(np.all(k[n].matrix == 0) for n in (1, 2, 3))


def test_unitary_exp_against_expm():
    rng = np.random.default_rng(5)
    for _ in range(20):
        A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        S = A - A.conj().T
        assert np.allclose(unitary_exp(S), expm(S), atol=1e-12)
    S = np.array([[1j, 0, 2.0], [0, -0.5j, 0], [-2.0, 0, 0]])
    U = unitary_exp(S)
    assert U[1, 1] == np.exp(-0.5j) and U[0, 1] == 0 and U[1, 2] == 0
    assert np.allclose(U, expm(S), atol=1e-13)


def test_truncated_first_order_equals_closed_form(hcn):
    p = PulseParams.from_lab(6e6, 0.095)
    k = magnus_kernels(p, hcn, 0)[0]
    U = truncated_propagator({1}, k)
    assert np.allclose(U, first_order_unitary(beta_integrals(p, hcn, 0, p.T)), atol=1e-9)
    assert np.allclose(single_order_propagator(1, k[1]), U, atol=0)


def test_truncated_propagator_validation(hcn):
    k = magnus_kernels(resonant(hcn, 1e6), hcn, 0)[0]
    with pytest.raises(ValueError):
        truncated_propagator(set(), k)
    with pytest.raises(ValueError):
        truncated_propagator({4}, k)
    with pytest.raises(ValueError):
        single_order_propagator(2, k[1])


def test_weak_field_matches_exact_three_level(hcn):
    p = resonant(hcn, 1e5)
    U = truncated_propagator({1, 2, 3}, magnus_kernels(p, hcn, 0)[0])
    for J0 in (0, 1):
        ex = propagate(RotLabel(J0, 0), p, hcn, BasisSpec(0, 2), tol=1e-12, check_truncation=False)
        assert np.max(np.abs(np.abs(U[:, J0]) ** 2 - ex.final.populations)) < 1e-6


def _error(hcn, E0, std):
    p = resonant(hcn, E0)
    ex = propagate(RotLabel(0, 0), p, hcn, BasisSpec(0, 2), tol=1e-13, check_truncation=False)
    U = truncated_propagator({1, 2, 3}, magnus_kernels(p, hcn, 0, standard_third_order=std, tol=1e-13)[0])
    return np.max(np.abs(U[:, 0] - ex.final.coefficients))


def test_third_order_truncation_error_scaling(hcn):
    # the single-commutator third-order term leaves an E0^3 error; the
    # textbook term removes it and the residual is E0^4
    single = math.log2(_error(hcn, 1e6, False) / _error(hcn, 5e5, False))
    standard = math.log2(_error(hcn, 1e6, True) / _error(hcn, 5e5, True))
    assert single == pytest.approx(3.0, abs=0.1)
    assert standard == pytest.approx(4.0, abs=0.2)


def test_second_order_selection_rule(hcn):
    for E0 in (1e5, 4e6, 8e6, 2e7):
        p = resonant(hcn, E0)
        for k in magnus_kernels(p, hcn, 0, np.linspace(0, p.T, 9)):
            psi = single_order_propagator(2, k[2])[:, 0]
            assert abs(psi[1]) ** 2 == 0.0


def test_model_trajectory(hcn):
    p = resonant(hcn, 2e6)
    tr = model_trajectory(RotLabel(1, 1), p, hcn, {1})
    assert tr.basis == BasisSpec(1, 3)
    assert tr.final.populations[2] == 0.0
    assert tr.final.norm == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        model_trajectory(RotLabel(2, 0), p, hcn, {1})


def test_two_state_block_for_M1(hcn):
    assert block_data(hcn, 1).mu21 == pytest.approx(hcn.mu * cos_theta_element(1, 1))
    p = resonant(hcn, 5e6)
    k = magnus_kernels(p, hcn, 1)[0]
    for n in (1, 2, 3):
        assert np.all(k[n].matrix[0] == 0) and np.all(k[n].matrix[:, 0] == 0)

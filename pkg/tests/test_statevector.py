import numpy as np
import pytest
import scipy.linalg

import oracles
from conftest import pool, problem
from mlpqe.pauli import PauliSum, excitation_image, excitation_operator
from mlpqe.statevector import (
    FusedRotation,
    Simulator,
    apply_ansatz,
    apply_excitation_exp,
    apply_pauli_rotation,
    basis_state,
    expectation,
    sector_indices,
)


def test_basis_state_index():
    psi = basis_state(0b0011, 4)
    assert psi[3] == 1 and np.count_nonzero(psi) == 1
    with pytest.raises(ValueError):
        basis_state(16, 4)


def test_expectation_of_z_on_basis_states():
    z0 = PauliSum.from_strings([(1.0, "ZI")])
    assert expectation(z0, basis_state(0b00, 2)) == 1.0
    assert expectation(z0, basis_state(0b01, 2)) == -1.0


def test_expectation_rejects_non_hermitian():
    with pytest.raises(ValueError):
        expectation(PauliSum.from_strings([(1j, "XI")]), basis_state(0, 2))


def test_pauli_rotation_matches_expm():
    op = PauliSum.from_strings([(1.0, "XYZ")])
    rng = np.random.default_rng(3)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    x, z, _ = next(op.items())
    expected = scipy.linalg.expm(0.37j * op.to_matrix()) @ psi
    assert np.allclose(apply_pauli_rotation(psi, x, z, 0.37), expected, atol=1e-12)


@pytest.mark.parametrize("occ,virt", [((0,), (2,)), ((0, 1), (2, 3)), ((1, 2), (3, 6)), ((0, 1, 2), (3, 4, 5))])
def test_excitation_exponential_matches_dense_expm(occ, virt):
    n = 7
    image = excitation_image(excitation_operator(occ, virt), n)
    rng = np.random.default_rng(len(occ))
    psi = rng.normal(size=2**n)
    psi /= np.linalg.norm(psi)
    expected = scipy.linalg.expm(0.81 * oracles.excitation_matrix(occ, virt, n)) @ psi
    assert np.allclose(apply_excitation_exp(psi, image, 0.81), expected, atol=1e-12)


def test_fused_rotation_matches_product_of_rotations():
    n = 8
    image = excitation_image(excitation_operator((0, 3), (4, 7)), n)
    basis = sector_indices(n, 4)
    rot = FusedRotation.from_image(image, basis)
    rng = np.random.default_rng(0)
    dense = np.zeros(2**n)
    dense[basis] = rng.normal(size=len(basis))
    compressed = dense[basis].copy()
    rot.apply_(compressed, -0.44)
    assert np.allclose(compressed, apply_excitation_exp(dense, image, -0.44)[basis], atol=1e-12)


def test_fused_rotation_requires_shared_flip_mask():
    h = PauliSum.from_strings([(1j, "XI"), (1j, "IX")])
    with pytest.raises(ValueError):
        FusedRotation.from_image(h, np.arange(4))


@pytest.mark.parametrize("name", ["h2", "h4_0.75"])
def test_ansatz_state_matches_expm_product(name):
    prob, pl = problem(name), pool(name)
    rng = np.random.default_rng(11)
    theta = rng.uniform(-0.5, 0.5, pl.n_par)
    sim = prob.simulator
    psi = sim.apply_ansatz(prob.phi0, pl.operators, theta)
    n = prob.basis.n_spin
    dense = oracles.dense_ansatz_state([(op.occ, op.virt) for op in pl.operators], theta, prob.reference, n)
    assert np.allclose(sim.embed(psi), dense, atol=1e-12)
    # the public dense path agrees too
    dense_api = apply_ansatz(basis_state(prob.reference, n), [op.kappa_image for op in pl.operators], theta)
    assert np.allclose(dense_api, dense, atol=1e-12)


def test_first_operator_acts_first():
    prob, pl = problem("h2"), pool("h2")
    theta = np.array([0.3, -0.2, 0.5])
    forward = prob.simulator.apply_ansatz(prob.phi0, pl.operators, theta)
    n = prob.basis.n_spin
    by_hand = basis_state(prob.reference, n)
    for op, t in zip(pl.operators, theta):
        by_hand = scipy.linalg.expm(t * oracles.excitation_matrix(op.occ, op.virt, n)) @ by_hand
    assert np.allclose(prob.simulator.embed(forward), by_hand, atol=1e-12)


def test_adjoint_inverts_ansatz():
    prob, pl = problem("h4_1.50"), pool("h4_1.50")
    theta = np.linspace(-0.3, 0.3, pl.n_par)
    sim = prob.simulator
    psi = sim.apply_ansatz(prob.phi0, pl.operators, theta)
    back = sim.apply_ansatz(psi, pl.operators, theta, adjoint=True)
    assert np.allclose(back, prob.phi0, atol=1e-12)


def test_simulator_energy_matches_dense_expectation():
    prob, pl = problem("h2"), pool("h2")
    theta = np.array([0.1, 0.05, -0.2])
    sim = prob.simulator
    psi = sim.apply_ansatz(prob.phi0, pl.operators, theta)
    assert sim.expectation(psi) == pytest.approx(expectation(prob.hamiltonian, sim.embed(psi)), abs=1e-12)


def test_simulator_rejects_out_of_sector_determinant():
    sim = Simulator(problem("h2").hamiltonian, 2)
    with pytest.raises(ValueError):
        sim.basis_state(0b0111)

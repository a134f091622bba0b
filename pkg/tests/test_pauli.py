import itertools

import numpy as np
import pytest

import oracles
from conftest import problem
from mlpqe.pauli import (
    FermionOperator,
    PauliSum,
    excitation_image,
    excitation_operator,
    jordan_wigner,
    one_norm,
)
from mlpqe.statevector import exact_ground_energy

N = 4


def ladder_image(p, creation, n=N):
    return jordan_wigner(FermionOperator(((1.0, ((p, creation),)),)), n)


def test_single_letter_products():
    x, y, z = (PauliSum.from_strings([(1.0, s)]) for s in ("X", "Y", "Z"))
    assert (x * y).equals(PauliSum.from_strings([(1j, "Z")]))
    assert (y * z).equals(PauliSum.from_strings([(1j, "X")]))
    assert (z * x).equals(PauliSum.from_strings([(1j, "Y")]))
    assert (x * x).equals(PauliSum.identity(1))


def test_matrix_of_string_matches_kron():
    xm = np.array([[0, 1], [1, 0]])
    zm = np.diag([1, -1])
    ym = np.array([[0, -1j], [1j, 0]])
    op = PauliSum.from_strings([(0.5, "XZY")])
    # qubit 0 is the least significant bit, so it is the rightmost Kronecker factor
    assert np.allclose(op.to_matrix(), 0.5 * np.kron(ym, np.kron(zm, xm)))


@pytest.mark.parametrize("p,q", list(itertools.product(range(N), repeat=2)))
def test_canonical_anticommutation(p, q):
    a_p, a_q = ladder_image(p, False), ladder_image(q, False)
    ad_q = ladder_image(q, True)
    anti = (a_p * ad_q + ad_q * a_p).to_matrix()
    assert np.allclose(anti, np.eye(2**N) * (p == q))
    assert np.allclose((a_p * a_q + a_q * a_p).to_matrix(), 0)


@pytest.mark.parametrize("p", range(N))
@pytest.mark.parametrize("creation", [True, False])
def test_ladder_images_match_determinant_oracle(p, creation):
    assert np.allclose(ladder_image(p, creation).to_matrix(), oracles.ladder_matrix(p, N, creation))


def test_number_operator():
    n_op = ladder_image(2, True) * ladder_image(2, False)
    assert n_op.equals(PauliSum.from_strings([(0.5, "IIII"), (-0.5, "IIZI")]))


@pytest.mark.parametrize("occ,virt", [((0,), (2,)), ((1,), (3,)), ((0, 1), (2, 3)), ((0, 1), (4, 5)), ((0, 3), (4, 7))])
def test_excitation_image_shape(occ, virt):
    n = 8
    image = excitation_image(excitation_operator(occ, virt), n, occupied=occ)
    assert len(image) == 2 ** (2 * len(occ) - 1)
    assert image.is_anti_hermitian() and image.commutes_pairwise()
    assert np.allclose(image.to_matrix(), oracles.excitation_matrix(occ, virt, n))


def test_excitation_image_rejects_bad_generators():
    with pytest.raises(ValueError):
        excitation_image(excitation_operator((2,), (0,)), 4, occupied=(0, 1))
    tau_only = FermionOperator(((1.0, ((2, True), (0, False))),))
    with pytest.raises(ValueError):
        excitation_image(tau_only, 4)


def test_jordan_wigner_rejects_out_of_range_index():
    with pytest.raises(ValueError):
        jordan_wigner(FermionOperator(((1.0, ((5, True),)),)), 4)


@pytest.mark.parametrize("name", ["h2", "h4_0.75", "h4_1.50"])
def test_hamiltonian_spectrum_matches_slater_condon(name):
    h = problem(name).hamiltonian
    assert h.is_hermitian()
    assert all(isinstance(c, float) or c.imag == 0 for _, _, c in h.items())
    assert exact_ground_energy(h, problem(name).ints.n_electrons) == pytest.approx(oracles.fci_energy(name), abs=1e-10)


@pytest.mark.parametrize("name", ["h2", "h4_0.75", "h4_1.50", "h2o", "h2o_stretched"])
def test_ground_energy_matches_external_fci(name):
    assert problem(name).fci_energy == pytest.approx(oracles.fixture_record(name)["e_fci"], abs=1e-8)


def test_one_norm_excludes_identity():
    h = PauliSum.from_strings([(3.0, "II"), (-0.5, "ZI"), (0.25, "XX")])
    assert one_norm(h) == 0.75


def test_zero_terms_are_dropped():
    a = PauliSum.from_strings([(1.0, "XZ")])
    assert len(a - a) == 0

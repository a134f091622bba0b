import io

import numpy as np
import pytest

import oracles
from mlpqe import FIXTURES, fixture_path
from mlpqe.integrals import (
    FcidumpError,
    MolecularIntegrals,
    hf_energy,
    load_fcidump,
    mp2_amplitudes,
    mp2_energy,
    orbital_energies,
    parse_fcidump,
    write_fcidump,
)

TWO_ORBITAL = """ &FCI NORB=2,NELEC=2,MS2=0,
  ORBSYM=1,1,
  ISYM=1,
 &END
 0.5 1 1 1 1
 0.1 2 1 1 1
 0.2 2 1 2 1
 0.3 2 2 1 1
 0.4 2 2 2 2
 -1.2 1 1 0 0
 0.05 2 1 0 0
 -0.4 2 2 0 0
 0.7 0 0 0 0
"""


def test_header_echo():
    ints = parse_fcidump(io.StringIO(TWO_ORBITAL))
    assert ints.n_spatial == 2 and ints.n_electrons == 2 and ints.ms2 == 0
    assert ints.core_energy == 0.7


def test_symmetry_expansion():
    ints = parse_fcidump(io.StringIO(TWO_ORBITAL))
    g = ints.two_body
    assert g[1, 0, 0, 0] == g[0, 1, 0, 0] == g[0, 0, 1, 0] == g[0, 0, 0, 1] == 0.1
    assert g[1, 0, 1, 0] == g[0, 1, 0, 1] == g[1, 0, 0, 1] == g[0, 1, 1, 0] == 0.2
    assert g[0, 0, 1, 1] == 0.3
    assert ints.one_body[0, 1] == ints.one_body[1, 0] == 0.05


def test_malformed_record_names_line():
    bad = TWO_ORBITAL.replace(" 0.4 2 2 2 2", "abc 1 1 1 1")
    with pytest.raises(FcidumpError, match="line 9"):
        parse_fcidump(io.StringIO(bad))


@pytest.mark.parametrize(
    "edit, message",
    [
        (lambda t: t.replace("NELEC=2", "NELEC=3"), "odd"),
        (lambda t: t.replace(" 0.4 2 2 2 2", " 0.4 3 2 2 2"), "range"),
        (lambda t: t.replace(" 0.7 0 0 0 0\n", ""), "core"),
        (lambda t: t.replace("NORB=2,", ""), "NORB"),
    ],
)
def test_parse_errors(edit, message):
    with pytest.raises(FcidumpError, match=message):
        parse_fcidump(io.StringIO(edit(TWO_ORBITAL)))


def test_core_energy_matches_nuclear_repulsion_bit_exact():
    ints = load_fcidump(fixture_path("h2"))
    assert ints.core_energy == oracles.fixture_record("h2")["nuclear_repulsion"]


def test_round_trip_through_writer():
    ints = load_fcidump(fixture_path("h4_0.75"))
    buf = io.StringIO()
    write_fcidump(ints, buf)
    again = parse_fcidump(io.StringIO(buf.getvalue()))
    assert np.array_equal(again.one_body, ints.one_body)
    assert np.array_equal(again.two_body, ints.two_body)
    assert again.core_energy == ints.core_energy


@pytest.mark.parametrize("name", FIXTURES)
def test_type_invariants(name):
    ints = load_fcidump(fixture_path(name))
    g = ints.two_body
    assert np.allclose(ints.one_body, ints.one_body.T, atol=1e-12)
    for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1), (3, 2, 1, 0)]:
        assert np.allclose(g, g.transpose(perm), atol=1e-12)
    basis = orbital_energies(ints)
    assert len(basis.occupied) == ints.n_electrons
    assert np.allclose(basis.epsilon[0::2], basis.epsilon[1::2], atol=1e-12)


def test_orbital_energies_without_two_body_are_diagonal():
    h = np.diag([-1.0, -0.5, 0.3])
    ints = MolecularIntegrals(3, 2, 0, 0.0, h, np.zeros((3, 3, 3, 3)))
    assert np.allclose(orbital_energies(ints).epsilon, np.repeat([-1.0, -0.5, 0.3], 2))


@pytest.mark.parametrize("name", FIXTURES)
def test_orbital_energies_match_fock_oracle(name):
    ints = load_fcidump(fixture_path(name))
    expected = oracles.fock_diagonal(ints.one_body, ints.two_body, ints.n_electrons // 2)
    assert np.allclose(orbital_energies(ints).epsilon[0::2], expected, atol=1e-10)


@pytest.mark.parametrize("name", FIXTURES)
def test_hf_energy(name):
    ints = load_fcidump(fixture_path(name))
    assert hf_energy(ints) == pytest.approx(oracles.hf_energy(ints), abs=1e-10)
    # the external generator's SCF energy
    assert hf_energy(ints) == pytest.approx(oracles.fixture_record(name)["e_hf"], abs=1e-8)


@pytest.mark.parametrize("name", ["h2", "h4_0.75", "h2o"])
def test_mp2_against_dense_oracle(name):
    ints = load_fcidump(fixture_path(name))
    basis = orbital_energies(ints)
    t2 = mp2_amplitudes(basis, ints)
    ref_t2, ref_e = oracles.mp2(ints)
    for key, t in ref_t2.items():
        assert t2.get(key, 0.0) == pytest.approx(t, abs=1e-10)
    assert mp2_energy(t2, ints) == pytest.approx(ref_e, abs=1e-10)
    assert mp2_energy(t2, ints) == pytest.approx(oracles.fixture_record(name)["e_mp2_corr"], abs=1e-8)


@pytest.mark.parametrize("name", FIXTURES)
def test_mp2_energy_is_negative(name):
    ints = load_fcidump(fixture_path(name))
    assert mp2_energy(mp2_amplitudes(orbital_energies(ints), ints), ints) <= 0

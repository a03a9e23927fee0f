import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schwinger_adapt.fermion import FermionOperator, jordan_wigner, reverse_jordan_wigner
from schwinger_adapt.pauli import CapacityError, PauliSum, sigma_minus, sigma_plus


def test_single_excitation_with_z_string():
    # sigma+_0 Z_1 Z_2 sigma-_3 is a_0^ a_3
    s = sigma_plus(0, 4) * PauliSum.from_labels({"IZZI": 1}) * sigma_minus(3, 4)
    assert reverse_jordan_wigner(s).allclose(FermionOperator.from_str("0^ 3"))


def test_z_is_one_minus_twice_number():
    f = reverse_jordan_wigner(PauliSum.from_labels({"Z": 1}))
    expect = FermionOperator({(): 1.0}) + FermionOperator.from_str("0^ 0", -2.0)
    assert f.allclose(expect)


def test_bare_excitation_without_z_string():
    s = sigma_plus(0, 4) * sigma_minus(3, 4)
    f = reverse_jordan_wigner(s)
    assert jordan_wigner(f, 4).allclose(s)
    # the missing Z string leaves number operators on the interior modes
    assert max(c + a for c, a in f.body_counts()) == 6


def test_charge_conserving_tile_combination_is_two_body():
    op = PauliSum.from_labels({"ZIXY": 0.25, "IZXY": -0.25, "ZIYX": -0.25, "IZYX": 0.25})
    f = reverse_jordan_wigner(op)
    assert len(f) == 4
    assert all(c == a == 2 for c, a in f.body_counts())
    assert jordan_wigner(f, 4).allclose(op)
    expect = (
        FermionOperator.from_str("2^ 0^ 3 0", -1j)
        + FermionOperator.from_str("2^ 1^ 3 1", 1j)
        + FermionOperator.from_str("3^ 0^ 2 0", 1j)
        + FermionOperator.from_str("3^ 1^ 2 1", -1j)
    )
    assert f.allclose(expect)


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.text("IXYZ", min_size=4, max_size=4), st.floats(-1, 1, allow_nan=False), min_size=1, max_size=3))
def test_reverse_then_forward_is_identity(d):
    s = PauliSum.from_labels(d)
    f = reverse_jordan_wigner(s)
    assert np.allclose(jordan_wigner(f, 4).to_matrix(), s.to_matrix())


def test_capacity_guard():
    with pytest.raises(CapacityError):
        reverse_jordan_wigner(PauliSum.from_labels({"X" * 9: 1}))


def test_normal_order_anticommutation():
    # a0 a0^ = 1 - a0^ a0
    f = FermionOperator.from_str("0 0^").normal_ordered()
    assert f.allclose(FermionOperator({(): 1.0}) + FermionOperator.from_str("0^ 0", -1.0))
    assert len(FermionOperator.from_str("1^ 1^").normal_ordered()) == 0

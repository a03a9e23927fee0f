import numpy as np
import pytest
from scipy.linalg import expm

from conftest import BACKENDS, random_state
from schwinger_adapt import kernels
from schwinger_adapt.kernels import CompiledOperator
from schwinger_adapt.pauli import PauliString, PauliSum


def random_sum(rng, n, k):
    letters = rng.choice(list("IXYZ"), size=(k, n))
    coeffs = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    return PauliSum.from_labels([("".join(row), c) for row, c in zip(letters, coeffs)])


@pytest.mark.parametrize("n", [1, 3, 6])
def test_apply_and_overlap_match_dense(kern, rng, n):
    op = random_sum(rng, n, 12)
    comp = CompiledOperator(op, kern)
    psi, phi = random_state(rng, n), random_state(rng, n)
    m = op.to_matrix()
    assert np.allclose(comp.apply(psi), m @ psi, atol=1e-12)
    assert np.isclose(comp.overlap(phi, psi), np.vdot(phi, m @ psi), atol=1e-12)


def test_apply_into_buffer(kern, rng):
    op = random_sum(rng, 4, 6)
    comp = CompiledOperator(op, kern)
    psi = random_state(rng, 4)
    out = np.full(16, 7.0 + 0j)
    comp.apply(psi, out=out)
    assert np.allclose(out, op.to_matrix() @ psi)


@pytest.mark.parametrize("label", ["Z", "XY", "YZX", "IZIY", "XXXXX", "ZZIZ"])
def test_rotate_string_matches_expm(kern, rng, label):
    s = PauliString.from_label(label)
    n = s.n
    psi = random_state(rng, n)
    theta = rng.normal()
    out = psi.copy()
    phase = 1j ** s.y_count
    kern.rotate_string(out, s.x, s.z, phase, theta)
    m = PauliSum.single(s).to_matrix()
    assert np.allclose(out, expm(-1j * theta * m) @ psi, atol=1e-12)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")
def test_backends_agree(rng):
    op = random_sum(rng, 8, 30)
    psi = random_state(rng, 8)
    a = CompiledOperator(op, kernels.get_backend("python")).apply(psi)
    b = CompiledOperator(op, kernels.get_backend("cython")).apply(psi)
    assert np.allclose(a, b, atol=1e-13)


def test_backend_selection_reported():
    assert kernels.BACKEND in ("python", "cython")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_rotate_terms_weights_are_real():
    op = PauliSum.from_labels({"XY": 0.5, "YX": -0.5})
    rows = CompiledOperator(op).rotate_terms()
    assert sorted(r[3] for r in rows) == [-0.5, 0.5]
    assert all(abs(r[2]) == 1 for r in rows)

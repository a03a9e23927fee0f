import numpy as np
import pytest
import scipy.linalg
import scipy.sparse.linalg
from hypothesis import given, settings, strategies as st

from conftest import random_state
from schwinger_adapt.model import ModelParams, build_hamiltonian, charge_operator, reference_state
from schwinger_adapt.pauli import CapacityError, PauliSum
from schwinger_adapt.pools import build_topdown_pool, generator
from schwinger_adapt.state import (
    NotHermitianError,
    PauliExponential,
    apply_operator,
    apply_pauli_exponential,
    basis_state,
    dump_amplitudes,
    expectation,
    fidelity,
    ground_state,
    load_amplitudes,
    new_state,
    pool_gradient,
    sparse_matrix,
)


def test_new_state():
    psi = new_state(3)
    assert psi.dtype == np.complex128
    assert len(psi) == 8 and not psi.any()
    with pytest.raises(CapacityError):
        new_state(25)
    assert basis_state(2, 3)[3] == 1


def test_sparse_matrix_matches_kron():
    op = build_hamiltonian(ModelParams.preset("B", 2))
    assert np.allclose(sparse_matrix(op).toarray(), op.to_matrix())


def test_apply_matches_dense(rng):
    op = build_hamiltonian(ModelParams.preset("A", 3))
    psi = random_state(rng, 6)
    assert np.allclose(apply_operator(psi, op), op.to_matrix() @ psi)


def test_expectation_rejects_non_hermitian(rng):
    op = PauliSum.from_labels({"XY": 1j})
    psi = random_state(rng, 2)
    with pytest.raises(NotHermitianError):
        expectation(psi, op)


def test_exponential_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        PauliExponential(PauliSum.from_labels({"XY": 1j}))


OPS = [
    {"XY": 0.5, "YX": -0.5},
    {"XZY": 0.5, "YZX": -0.5, "ZII": 0.3},
    {"XX": 1.0, "ZI": 0.7, "IY": -0.2},
    {"XYZI": 0.4, "IXXY": 0.3, "ZZII": -0.9, "YIIX": 0.25},
    {"XX": 1.0, "ZI": 0.7},
    {"XYI": 0.5, "IXY": 0.3, "YII": 0.2},
    {"XYIII": 0.5, "IXYII": -0.5, "IIXYI": 0.5, "IIIXY": -0.5},
]


@pytest.mark.parametrize("labels", OPS)
@pytest.mark.parametrize("theta", [0.0, 0.3, -1.7, 6.0])
def test_exponential_matches_expm(labels, theta, rng):
    op = PauliSum.from_labels(labels)
    psi = random_state(rng, op.n)
    ref = scipy.linalg.expm(-1j * theta * op.to_matrix()) @ psi
    assert np.allclose(apply_pauli_exponential(psi, op, theta), ref, atol=1e-12)


@pytest.mark.parametrize("pool_id", ["LQx", "Lxx", "LQZ"])
def test_lattice_exponentials_match_expm(pool_id, rng):
    pool = build_topdown_pool(pool_id, 3)
    psi = random_state(rng, 6)
    for o in pool:
        ref = scipy.linalg.expm(-0.83j * o.op.to_matrix()) @ psi
        assert np.allclose(apply_pauli_exponential(psi, o.op, 0.83), ref, atol=1e-12)


@pytest.mark.parametrize("pool_id", ["LQx", "Lxx", "xQZ"])
def test_block_and_taylor_paths_agree(pool_id, rng):
    pool = build_topdown_pool(pool_id, 3, {"t_relax": True} if pool_id[0] == "x" else None)
    psi = random_state(rng, 6)
    for o in pool:
        e = PauliExponential(o.op)
        if e.blocks is None:
            continue
        assert np.allclose(e.apply(psi, 1.1), e._taylor(psi, 1.1), atol=1e-12)


def test_row_stack_matches_single_states(rng):
    e = PauliExponential(build_topdown_pool("Lxx", 3)[0].op)
    rows = np.stack([random_state(rng, 6) for _ in range(3)])
    expect = np.stack([e.apply(r, 0.4) for r in rows])
    assert np.allclose(e.apply_rows_inplace(rows, 0.4), expect, atol=1e-13)


def test_trotter_mode_is_product():
    op = PauliSum.from_labels({"XX": 1.0, "ZI": 1.0})
    e = PauliExponential(op, mode="trotter")
    assert e.product_form
    with pytest.raises(ValueError):
        PauliExponential(op, mode="bogus")


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.integers(0, 2**31 - 1))
def test_exponential_is_unitary(theta, seed):
    rng = np.random.default_rng(seed)
    op = generator(0, 3, True, 2) + 0.4 * generator(1, 1, False, 2)
    psi = random_state(rng, 4)
    out = apply_pauli_exponential(psi, op, theta)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)
    back = apply_pauli_exponential(out, op, -theta)
    assert np.allclose(back, psi, atol=1e-11)


def test_pool_gradient_matches_finite_difference(rng):
    H = build_hamiltonian(ModelParams.preset("C", 2))
    op = generator(0, 1, True, 2)
    psi = random_state(rng, 4)
    h = 1e-5
    fd = (expectation(apply_pauli_exponential(psi, op, h), H) - expectation(apply_pauli_exponential(psi, op, -h), H)) / (2 * h)
    assert pool_gradient(psi, op, H) == pytest.approx(fd, rel=1e-7)
    with pytest.raises(ValueError):
        pool_gradient(psi, op)


def test_fidelity():
    a = basis_state(2, 1)
    b = (basis_state(2, 1) + basis_state(2, 2)) / np.sqrt(2)
    assert fidelity(a, b) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fidelity(a, basis_state(3, 0))


@pytest.mark.parametrize("L", [2, 3, 4])
@pytest.mark.parametrize("label", "ABC")
def test_dense_ground_state_against_eigsh(L, label):
    H = build_hamiltonian(ModelParams.preset(label, L))
    gs = ground_state(H, "dense")
    e = scipy.sparse.linalg.eigsh(sparse_matrix(H), k=1, which="SA")[0][0]
    assert gs.energy == pytest.approx(e, abs=1e-10)
    assert gs.residual < 1e-10
    assert abs(expectation(gs.state, charge_operator(L))) < 1e-10


def test_lanczos_agrees_with_dense():
    H = build_hamiltonian(ModelParams.preset("B", 3))
    a = ground_state(H, "dense")
    b = ground_state(H, "lanczos")
    assert b.energy == pytest.approx(a.energy, abs=1e-10)
    assert fidelity(a.state, b.state) == pytest.approx(1.0, abs=1e-9)


def test_lanczos_is_seeded():
    H = build_hamiltonian(ModelParams.preset("A", 2))
    a = ground_state(H, "lanczos", seed=7)
    b = ground_state(H, "lanczos", seed=7)
    assert a.energy == b.energy


def test_ground_state_errors():
    H = build_hamiltonian(ModelParams.preset("A", 1))
    with pytest.raises(ValueError):
        ground_state(H, "qr")
    with pytest.raises(CapacityError):
        ground_state(PauliSum.identity(15), "dense")


def test_amplitude_dump_round_trip(tmp_path, rng):
    psi = random_state(rng, 4)
    dump_amplitudes(psi, tmp_path / "psi.bin")
    assert np.array_equal(load_amplitudes(tmp_path / "psi.bin"), psi)


def test_reference_energy_vs_dense():
    p = ModelParams.preset("C", 2)
    psi = reference_state(2)
    H = build_hamiltonian(p)
    assert expectation(psi, H) == pytest.approx(np.vdot(psi, H.to_matrix() @ psi).real)

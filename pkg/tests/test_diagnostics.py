import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_state
from schwinger_adapt.diagnostics import charge_moments, delta_T, energy_density_error, mean_field
from schwinger_adapt.model import ModelParams, build_hamiltonian, charge_operator, reference_state
from schwinger_adapt.pauli import PauliSum, basis_index, is_time_reversal_odd
from schwinger_adapt.pools import build_topdown_pool
from schwinger_adapt.state import expectation, fidelity, ground_state, pool_gradient


def test_energy_density_error():
    assert energy_density_error(-1.0, -1.5, 5) == pytest.approx(0.1)


def _delta_scan(psi, k=20001):
    phis = np.linspace(0, np.pi, k)
    vals = [np.linalg.norm((np.exp(1j * p) * psi).imag) / np.linalg.norm((np.exp(1j * p) * psi).real) for p in phis]
    return min(vals)


def test_delta_t_real_state_is_zero(rng):
    psi = rng.standard_normal(16).astype(complex)
    assert delta_T(psi) == 0.0
    assert delta_T(1j * psi) == pytest.approx(0.0, abs=1e-15)


def test_delta_t_contaminated_references():
    assert delta_T(reference_state(4, "trs_breaking_psi1")) == pytest.approx(1.0)
    assert delta_T(reference_state(4, "trs_preserving_psi2")) == 0.0
    assert delta_T(np.zeros(4, complex)) == math.inf


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_delta_t_matches_phase_scan(seed):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(8) + 0.3 * rng.standard_normal() * 1j * rng.standard_normal(8)
    assert delta_T(psi) == pytest.approx(_delta_scan(psi), abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 2 * np.pi))
def test_delta_t_phase_invariant(seed, phi):
    psi = random_state(np.random.default_rng(seed), 3)
    assert delta_T(np.exp(1j * phi) * psi) == pytest.approx(delta_T(psi), abs=1e-12)


def test_charge_moments():
    Q = charge_operator(2)
    psi = np.zeros(16, complex)
    psi[basis_index("1010")] = psi[basis_index("1110")] = 1 / np.sqrt(2)
    mean, var = charge_moments(psi, Q)
    assert mean == pytest.approx(-0.5)
    assert var == pytest.approx(0.25)
    assert charge_moments(reference_state(2), Q) == (0.0, 0.0)
    with pytest.raises(ValueError):
        charge_moments(psi, PauliSum.from_labels({"XIII": 1.0}))


@pytest.mark.parametrize("n", [4, 6])
def test_t_even_gradients_vanish_on_real_states(n, rng):
    H = build_hamiltonian(ModelParams.preset("C", n // 2))
    pool = build_topdown_pool("xQZ", n // 2, {"t_relax": True})
    even = [o.op for o in pool if not is_time_reversal_odd(o.op)]
    assert even
    for _ in range(20):
        psi = rng.standard_normal(1 << n).astype(complex)
        psi /= np.linalg.norm(psi)
        for op in even:
            assert pool_gradient(psi, op, H) == 0.0


@pytest.mark.parametrize("label", "ABC")
def test_mean_field_at_three_sites(label):
    p = ModelParams.preset(label, 3)
    mf = mean_field(p)
    assert mf.converged and mf.max_gradient <= 1e-8
    H = build_hamiltonian(p)
    assert mf.energy == pytest.approx(expectation(mf.state, H))
    assert mf.energy <= expectation(reference_state(3), H)
    gs = ground_state(H)
    assert 1 - fidelity(mf.state, gs.state) < 1e-4
    assert abs(expectation(mf.state, charge_operator(3))) < 1e-10

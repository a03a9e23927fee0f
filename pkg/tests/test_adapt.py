import numpy as np
import pytest

from schwinger_adapt.adapt import (
    AdaptConfig,
    Trajectory,
    exact_ground_state,
    rank_gradients,
    replay,
    replay_energy,
    run_adapt,
    screen_gradients,
    tetris_select,
)
from schwinger_adapt.model import ModelParams, build_hamiltonian, reference_state
from schwinger_adapt.pools import build_topdown_pool
from schwinger_adapt.state import pool_gradient


@pytest.fixture(scope="module")
def traj():
    return run_adapt(AdaptConfig("xQZ", 2, "A"))


def test_config_validation():
    with pytest.raises(ValueError):
        AdaptConfig("xQZ", 2, epsilon=0)
    with pytest.raises(ValueError):
        AdaptConfig("xQZ", 2, reference="nope")
    with pytest.raises(ValueError):
        AdaptConfig.from_dict({"pool_id": "xQZ", "L": 2, "colour": 1})
    cfg = AdaptConfig("LQZ", 3, "B", cnot_budget=100)
    assert AdaptConfig.from_dict(cfg.to_dict()) == cfg


def test_screen_gradients_match_kernel(rng):
    pool = build_topdown_pool("LxZ", 2)
    H = build_hamiltonian(ModelParams.preset("C", 2))
    psi = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    psi /= np.linalg.norm(psi)
    g = screen_gradients(psi, pool, H)
    assert np.allclose(g, [pool_gradient(psi, o.op, H) for o in pool])
    assert np.allclose(screen_gradients(psi, pool, H, workers=3), g)


def test_rank_gradients_ties_deterministic():
    pool = build_topdown_pool("xQZ", 2)
    grads = [0.5, -0.5, 0.1, 0.5]
    a = [i for i, _, _ in rank_gradients(pool, grads)]
    assert set(a[:3]) == {0, 1, 3} and a[3] == 2
    assert a == [i for i, _, _ in rank_gradients(pool, grads)]
    b = [i for i, _, _ in rank_gradients(pool, grads, np.random.default_rng(3))]
    assert set(b[:3]) == {0, 1, 3}


def test_tetris_disjoint_supports():
    pool = build_topdown_pool("xQZ", 3)
    grads = np.linspace(1.0, 0.1, len(pool))
    batch = tetris_select(rank_gradients(pool, grads), 1e-3)
    used = 0
    for _, op, _ in batch:
        assert not (op.support_mask & used)
        used |= op.support_mask
    assert batch[0][0] == 0
    assert len(tetris_select(rank_gradients(pool, grads), 1e-3, tetris=False)) == 1
    assert tetris_select(rank_gradients(pool, grads), 2.0) == []


def test_trajectory_shape(traj):
    assert traj.termination == "converged"
    assert traj.records[0]["iteration"] == 0 and traj.records[0]["n_selected"] == 0
    assert traj.records[-1]["max_grad"] < 1e-3
    assert len(traj.records) == traj.records[-1]["iteration"] + 1
    assert sum(r["n_selected"] for r in traj.records) == len(traj.steps)
    assert all(b >= a for a, b in zip(traj.metric("cnot_depth"), traj.metric("cnot_depth")[1:]))
    assert all(b >= a for a, b in zip(traj.metric("fevals"), traj.metric("fevals")[1:]))


def test_energy_monotone_and_above_ground(traj):
    e = traj.metric("energy")
    assert all(b <= a + 1e-12 for a, b in zip(e, e[1:]))
    assert min(e) >= traj.E0 - 1e-12


def test_charge_conserving_pool_keeps_charge(traj):
    assert max(abs(q) for q in traj.metric("charge_mean")) <= 1e-10


def test_replay_reproduces_energy(traj):
    assert replay_energy(traj) == pytest.approx(traj.final_energy, abs=1e-10)
    pool = build_topdown_pool("xQZ", 2)
    psi = replay(traj, pool=pool)
    assert np.allclose(psi, traj.final_state)
    with pytest.raises(ValueError):
        replay(traj, ModelParams.preset("A", 3))


def test_replay_rejects_mismatched_pool(traj):
    with pytest.raises(ValueError):
        replay(traj, pool=build_topdown_pool("LQZ", 2))


def test_json_round_trip(traj, tmp_path):
    path = tmp_path / "t.json"
    traj.save(path)
    back = Trajectory.load(path)
    assert back.dumps() == traj.dumps()
    assert back.metric("energy") == traj.metric("energy")


def test_deterministic_reruns(traj):
    again = run_adapt(AdaptConfig("xQZ", 2, "A"))
    assert again.dumps() == traj.dumps()


def test_seeded_reruns_identical():
    cfg = AdaptConfig("xxZ", 2, "C", tie_seed=11)
    assert run_adapt(cfg).dumps() == run_adapt(cfg).dumps()


def test_max_iterations_termination():
    t = run_adapt(AdaptConfig("LQZ", 2, "C", max_iterations=1))
    assert t.termination == "max_iterations"
    assert len(t.records) == 2


def test_cnot_budget_termination():
    t = run_adapt(AdaptConfig("xQZ", 3, "C", cnot_budget=10))
    assert t.termination == "cnot_budget"
    depths = t.metric("cnot_depth")
    assert depths[-1] > 10 and all(d <= 10 for d in depths[:-1])


def test_feval_budget_termination():
    t = run_adapt(AdaptConfig("xQZ", 3, "C", feval_budget=20))
    assert t.termination == "feval_budget"
    assert t.metric("fevals")[-1] > 20


def test_pool_size_mismatch():
    with pytest.raises(ValueError):
        run_adapt(AdaptConfig("xQZ", 2), pool=build_topdown_pool("xQZ", 3))


def test_mean_field_reference_replays():
    t = run_adapt(AdaptConfig("xQx", 2, "B", reference="mean_field"))
    assert t.reference_steps
    assert replay_energy(t) == pytest.approx(t.final_energy, abs=1e-10)


def test_fidelity_tracking():
    t = run_adapt(AdaptConfig("xQZ", 2, "A", track_fidelity=True))
    inf = t.metric("infidelity")
    assert inf[0] > inf[-1] >= -1e-12


def test_exact_ground_state_methods():
    assert exact_ground_state(ModelParams.preset("A", 2)).method == "dense"

import csv
import json

import pytest

from schwinger_adapt.acceptance import SYNTHETIC_CASES, synthetic_trajectory
from schwinger_adapt.adapt import Trajectory, replay_energy
from schwinger_adapt.runner import (
    FIGURE_CLASSES,
    ExperimentSpec,
    GroundStateCache,
    MissingMetricError,
    SpecError,
    budget_cut,
    emit_tables,
    load_trajectories,
    run,
    table_rows,
)


def _spec(tmp_path, **kw):
    d = {"pools": ["xQZ"], "presets": ["A"], "L": [2], "output_dir": str(tmp_path / "runs")}
    d.update(kw)
    return ExperimentSpec.from_dict(d)


def test_spec_validation(tmp_path):
    with pytest.raises(SpecError):
        _spec(tmp_path, pools=[])
    with pytest.raises(SpecError):
        _spec(tmp_path, pools=["nope"])
    with pytest.raises(SpecError):
        _spec(tmp_path, L=[8])
    with pytest.raises(SpecError):
        _spec(tmp_path, options={"colour": 1})
    with pytest.raises(SpecError):
        ExperimentSpec.from_dict({"pools": ["xQZ"], "presets": ["A"], "L": 2, "bogus": 1})
    assert _spec(tmp_path, L=[8], allow_large=True).L == [8]
    assert _spec(tmp_path, L={"min": 2, "max": 4}).L == [2, 3, 4]


def test_expand_filters_pool_options(tmp_path):
    spec = _spec(tmp_path, pools=["xQZ", "LQx", "LQZ"], pool_options={"t_relax": True, "z_surface_swap": True})
    cfgs = {c.pool_id: c for c in spec.expand()}
    assert cfgs["xQZ"].pool_options == {"t_relax": True}
    assert cfgs["LQx"].pool_options == {"z_surface_swap": True}
    assert cfgs["LQZ"].pool_options == {}


def test_run_writes_converged_trajectory(tmp_path):
    spec = _spec(tmp_path)
    report = run(spec)
    assert report.ok and len(report.written) == 1
    t = Trajectory.load(report.written[0])
    assert t.termination == "converged"
    assert replay_energy(t) == pytest.approx(t.final_energy, abs=1e-10)
    again = run(spec)
    assert again.skipped == report.written and not again.written


def test_rerun_is_byte_identical(tmp_path):
    spec = _spec(tmp_path, pools=["xxZ"], tie_seed=4)
    first = run(spec).written[0].read_text()
    second = run(spec, force=True).written[0].read_text()
    assert first == second


def test_ground_state_cache_shared(tmp_path):
    spec = _spec(tmp_path, pools=["LQZ", "xQZ", "LxZ"])
    report = run(spec)
    assert len(report.written) == 3
    metas = list((tmp_path / "runs" / "e0").glob("*.json"))
    assert len(metas) == 1
    e0 = {Trajectory.load(p).E0 for p in report.written}
    assert len(e0) == 1


def test_ground_state_cache_round_trip(tmp_path):
    cache = GroundStateCache(tmp_path)
    a = cache.get("B", 2)
    b = GroundStateCache(tmp_path).get("B", 2)
    assert a.energy == b.energy and b.residual == a.residual
    assert json.loads((tmp_path / "B_a1.0_L2_dense.json").read_text())["method"] == "dense"


def test_single_site_runs(tmp_path):
    report = run(_spec(tmp_path, pools=["xQZ", "LQZ"], L=[1, 2]))
    assert report.ok and len(report.written) == 4


def test_failure_reported_not_raised(tmp_path, monkeypatch):
    import schwinger_adapt.runner as runner

    def boom(*a, **k):
        raise RuntimeError("kaput")

    monkeypatch.setattr(runner, "run_adapt", boom)
    report = run(_spec(tmp_path, pools=["xQZ", "LQZ"]))
    assert not report.ok and len(report.failures) == 2
    assert "kaput" in report.failures[0][1]


@pytest.mark.parametrize("case", SYNTHETIC_CASES)
def test_budget_cut_synthetic(case):
    depths, fevals, want_c, want_f = case
    t = synthetic_trajectory(depths, fevals)
    assert budget_cut(t, "cnot_depth", 1000) == want_c
    assert budget_cut(t, "fevals", 100) == want_f


def test_budget_cut_errors():
    t = synthetic_trajectory([5, 6], [0, 1])
    with pytest.raises(ValueError):
        budget_cut(t, "cnot_depth", 1)
    t.records[0]["cnot_depth"] = None
    with pytest.raises(MissingMetricError):
        budget_cut(t, "cnot_depth", 1000)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    spec = ExperimentSpec.from_dict(
        {"pools": ["LQZ", "xxZ"], "presets": ["A"], "L": [2, 3], "output_dir": str(out), "options": {"track_fidelity": True}}
    )
    assert run(spec).ok
    return out


def test_tables_all_classes(run_dir, tmp_path):
    trajs = load_trajectories([run_dir])
    assert len(trajs) == 4
    for fc in FIGURE_CLASSES:
        path = emit_tables(trajs, fc, tmp_path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert rows and {"pool_id", "preset", "L"} <= set(rows[0])


def test_fig3_energy_monotone(run_dir):
    trajs = load_trajectories([run_dir])
    rows = table_rows(trajs, "fig3")
    for t in trajs:
        e = [r["energy_density_error"] for r in rows if r["pool_id"] == t.config["pool_id"] and r["L"] == t.config["L"]]
        assert len(e) == len(t.records)
        assert all(b <= a + 1e-12 for a, b in zip(e, e[1:]))


def test_fig7_cuts(run_dir):
    trajs = load_trajectories([run_dir])
    rows = table_rows(trajs, "fig7a", budget=50)
    for r, t in zip(rows, trajs):
        k = r["cut_iteration"]
        assert t.records[k]["cnot_depth"] <= 50
        assert k == len(t.records) - 1 or t.records[k + 1]["cnot_depth"] > 50


def test_tables_are_pure(run_dir, tmp_path):
    trajs = load_trajectories([run_dir])
    a = emit_tables(trajs, "fig4", tmp_path / "a").read_text()
    b = emit_tables(load_trajectories([run_dir]), "fig4", tmp_path / "b").read_text()
    assert a == b


def test_missing_metric(tmp_path):
    t = synthetic_trajectory([0, 10], [0, 5])
    with pytest.raises(MissingMetricError):
        table_rows([t], "fig12")
    with pytest.raises(ValueError):
        table_rows([t], "fig99")

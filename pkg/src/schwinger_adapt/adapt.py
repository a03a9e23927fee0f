"""ADAPT loop with TETRIS batching, trajectory records and replay."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .diagnostics import charge_moments, delta_T, energy_density_error, mean_field
from .model import REFERENCE_KINDS, ModelParams, build_hamiltonian, charge_operator, reference_state
from .optimizer import GTOL, ObjectiveHandle, minimize
from .pauli import PauliSum, is_time_reversal_odd
from .pools import OperatorPool, PoolOperator, PoolOptions, Tile, build_pool
from .resources import DepthTracker, synthesize_exponential
from .state import GroundStateResult, compile_op, exponential, fidelity, ground_state

TERMINATIONS = ("converged", "max_iterations", "cnot_budget", "feval_budget")
MEAN_FIELD_REFERENCE = "mean_field"
TIE_TOL = 1e-10
DENSE_GS_QUBITS = 10


@dataclass
class AdaptConfig:
    pool_id: str
    L: int
    preset: str = "A"
    pool_options: dict = field(default_factory=dict)
    reference: str = "staggered_vacuum"
    epsilon: float = 1e-3
    tetris: bool = True
    max_iterations: int = 200
    cnot_budget: int | None = None
    feval_budget: int | None = None
    tie_seed: int | None = None
    gtol: float = GTOL
    exp_mode: str = "exact"
    a: float = 1.0
    workers: int = 1
    track_fidelity: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.reference not in REFERENCE_KINDS + (MEAN_FIELD_REFERENCE,):
            raise ValueError(f"unknown reference {self.reference!r}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")

    @property
    def model(self) -> ModelParams:
        return ModelParams.preset(self.preset, self.L, a=self.a)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AdaptConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields {sorted(extra)}")
        return cls(**d)


@dataclass
class AnsatzStep:
    op_index: int
    label: str
    theta: float
    iteration: int
    gradient: float
    kind: str = "local"
    op_text: str = ""


@dataclass
class Trajectory:
    config: dict
    records: list[dict]
    steps: list[AnsatzStep]
    termination: str
    E0: float
    n: int
    reference_steps: list[tuple[str, float]] = field(default_factory=list)
    version: str = __version__
    final_state: np.ndarray | None = None

    METRICS = (
        "iteration",
        "energy",
        "energy_density_error",
        "max_grad",
        "charge_mean",
        "charge_var",
        "delta_T",
        "cnot_count",
        "cnot_depth",
        "rz_count",
        "fevals",
        "grad_evals",
        "surface_selected",
        "t_even_selected",
        "n_selected",
        "infidelity",
        "reference_infidelity",
    )

    def metric(self, name: str) -> list:
        return [r.get(name) for r in self.records]

    @property
    def final_energy(self) -> float:
        return self.records[-1]["energy"]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "config": self.config,
            "n": self.n,
            "E0": self.E0,
            "termination": self.termination,
            "metrics": {m: self.metric(m) for m in self.METRICS},
            "selected": [r.get("selected", []) for r in self.records],
            "steps": [asdict(s) for s in self.steps],
            "reference_steps": [list(r) for r in self.reference_steps],
            "seeds": {"tie_seed": self.config.get("tie_seed")},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        metrics = d["metrics"]
        rows = len(metrics["iteration"])
        records = []
        for k in range(rows):
            r = {m: metrics[m][k] for m in metrics}
            r["selected"] = d["selected"][k]
            records.append(r)
        return cls(
            config=d["config"],
            records=records,
            steps=[AnsatzStep(**s) for s in d["steps"]],
            termination=d["termination"],
            E0=d["E0"],
            n=d["n"],
            reference_steps=[(t, th) for t, th in d.get("reference_steps", [])],
            version=d.get("version", __version__),
        )

    @classmethod
    def loads(cls, text: str) -> "Trajectory":
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "Trajectory":
        with open(path) as fh:
            return cls.loads(fh.read())


# screening and selection -----------------------------------------------


def screen_gradients(
    psi: np.ndarray, pool: OperatorPool, H: PauliSum, workers: int = 1, hpsi: np.ndarray | None = None
) -> list[float]:
    """``dE/dtheta`` at zero for every pool operator, in pool order."""
    if hpsi is None:
        hpsi = compile_op(H).apply(psi)
    compiled = [compile_op(o.op) for o in pool]

    def chunk(lo: int, hi: int) -> list[float]:
        return [2.0 * c.overlap(hpsi, psi).imag for c in compiled[lo:hi]]

    if workers <= 1 or len(compiled) < 2 * workers:
        return chunk(0, len(compiled))
    bounds = np.linspace(0, len(compiled), workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(lambda b: chunk(*b), zip(bounds[:-1], bounds[1:])))
    return [g for part in parts for g in part]


def rank_gradients(
    pool: OperatorPool, grads: Sequence[float], rng: np.random.Generator | None = None, tie_tol: float = TIE_TOL
) -> list[tuple[int, PoolOperator, float]]:
    """Sort by ``|G|`` descending; ties (within ``tie_tol``) by serialization or RNG."""
    order = sorted(range(len(grads)), key=lambda i: -abs(grads[i]))
    out, k = [], 0
    while k < len(order):
        head = abs(grads[order[k]])
        j = k
        while j < len(order) and head - abs(grads[order[j]]) <= tie_tol:
            j += 1
        group = sorted(order[k:j], key=lambda i: (pool[i].serial, i))
        if rng is not None and len(group) > 1:
            group = [group[i] for i in rng.permutation(len(group))]
        out.extend((i, pool[i], float(grads[i])) for i in group)
        k = j
    return out


def tetris_select(
    scored: Sequence[tuple[int, PoolOperator, float]], epsilon: float, tetris: bool = True
) -> list[tuple[int, PoolOperator, float]]:
    """Greedy batch of operators above ``epsilon`` with pairwise disjoint support."""
    batch, used = [], 0
    for item in scored:
        _, op, g = item
        if abs(g) < epsilon:
            break
        mask = op.support_mask
        if mask & used:
            continue
        batch.append(item)
        used |= mask
        if not tetris:
            break
    return batch


# the loop --------------------------------------------------------------


def _reference(config: AdaptConfig, H: PauliSum) -> tuple[np.ndarray, list[tuple[str, float]]]:
    if config.reference != MEAN_FIELD_REFERENCE:
        return reference_state(config.L, config.reference), []
    mf = mean_field(H, config.L)
    return mf.state, [(g.dumps(), float(t)) for g, t in zip(mf.generators, mf.thetas)]


def exact_ground_state(p: ModelParams) -> GroundStateResult:
    H = build_hamiltonian(p)
    return ground_state(H, "dense" if p.n <= DENSE_GS_QUBITS else "lanczos")


def run_adapt(
    config: AdaptConfig,
    pool: OperatorPool | None = None,
    ground: GroundStateResult | None = None,
    tiles: Sequence[Tile] | None = None,
) -> Trajectory:
    p = config.model
    H = build_hamiltonian(p)
    Hc = compile_op(H)
    Q = charge_operator(p.L)
    if pool is None:
        pool = build_pool(config.pool_id, p.L, PoolOptions.from_dict(config.pool_options), tiles)
    if pool.L != p.L:
        raise ValueError(f"pool built for L={pool.L}, model has L={p.L}")
    if ground is None:
        ground = exact_ground_state(p)
    ref, ref_steps = _reference(config, H)
    rng = np.random.default_rng(config.tie_seed) if config.tie_seed is not None else None

    steps: list[AnsatzStep] = []
    thetas = np.zeros(0)
    tracker = DepthTracker(p.n)
    fevals = grads = 0
    records: list[dict] = []
    psi = ref.copy()
    iteration = 0
    selected: list[dict] = []
    while True:
        energy = float(Hc.overlap(psi, psi).real)
        qm, qv = charge_moments(psi, Q)
        hpsi = Hc.apply(psi)
        g = screen_gradients(psi, pool, H, config.workers, hpsi)
        max_grad = float(np.max(np.abs(g))) if len(g) else 0.0
        records.append(
            {
                "iteration": iteration,
                "energy": energy,
                "energy_density_error": energy_density_error(energy, ground.energy, p.L),
                "max_grad": max_grad,
                "charge_mean": qm,
                "charge_var": qv,
                "delta_T": delta_T(psi),
                "cnot_count": tracker.cnots,
                "cnot_depth": tracker.depth,
                "rz_count": tracker.rz,
                "fevals": fevals,
                "grad_evals": grads,
                "surface_selected": any(s["kind"] == "surface" for s in selected),
                "t_even_selected": sum(not s["t_odd"] for s in selected),
                "n_selected": len(selected),
                "infidelity": 1.0 - fidelity(psi, ground.state) if config.track_fidelity else None,
                "reference_infidelity": 1.0 - fidelity(psi, ref),
                "selected": selected,
            }
        )
        if max_grad < config.epsilon:
            termination = "converged"
            break
        if config.cnot_budget is not None and tracker.depth > config.cnot_budget:
            termination = "cnot_budget"
            break
        if config.feval_budget is not None and fevals > config.feval_budget:
            termination = "feval_budget"
            break
        if iteration >= config.max_iterations:
            termination = "max_iterations"
            break
        iteration += 1
        batch = tetris_select(rank_gradients(pool, g, rng), config.epsilon, config.tetris)
        selected = []
        for idx, op, grad in batch:
            steps.append(AnsatzStep(idx, op.label, 0.0, iteration, grad, op.kind, op.op.dumps()))
            selected.append(
                {"index": idx, "label": op.label, "gradient": grad, "kind": op.kind, "t_odd": is_time_reversal_odd(op.op)}
            )
            tracker.add(synthesize_exponential(op.op, 0.0).gates)
        handle = ObjectiveHandle(H, ref, [pool[s.op_index].op for s in steps], config.exp_mode)
        try:
            res = minimize(handle, np.concatenate([thetas, np.zeros(len(batch))]), gtol=config.gtol)
        except Exception as exc:
            raise RuntimeError(f"inner optimisation failed at iteration {iteration}: {exc}") from exc
        thetas = res.theta
        fevals += res.n_evals
        grads += res.n_grads
        for s, t in zip(steps, thetas):
            s.theta = float(t)
        psi = handle.state(thetas)

    traj = Trajectory(
        config=config.to_dict(),
        records=records,
        steps=steps,
        termination=termination,
        E0=ground.energy,
        n=p.n,
        reference_steps=ref_steps,
        final_state=psi,
    )
    return traj


def replay(traj: Trajectory, model: ModelParams | None = None, pool: OperatorPool | None = None) -> np.ndarray:
    """Rebuild the final state from the recorded reference and (operator, angle) steps."""
    cfg = AdaptConfig.from_dict(traj.config)
    p = model or cfg.model
    if p.n != traj.n:
        raise ValueError(f"trajectory acts on {traj.n} qubits, model on {p.n}")
    if cfg.reference == MEAN_FIELD_REFERENCE:
        psi = reference_state(p.L)
        for text, th in traj.reference_steps:
            exponential(PauliSum.loads(text, n=p.n)).apply_inplace(psi, th)
    else:
        psi = reference_state(p.L, cfg.reference)
    for s in traj.steps:
        if pool is not None:
            op = pool[s.op_index].op
            if s.op_text and not op.allclose(PauliSum.loads(s.op_text, n=p.n)):
                raise ValueError(f"pool operator {s.op_index} does not match the recorded step {s.label}")
        else:
            op = PauliSum.loads(s.op_text, n=p.n)
        exponential(op, cfg.exp_mode).apply_inplace(psi, s.theta)
    return psi


def replay_energy(traj: Trajectory, model: ModelParams | None = None, pool: OperatorPool | None = None) -> float:
    cfg = AdaptConfig.from_dict(traj.config)
    p = model or cfg.model
    psi = replay(traj, p, pool)
    return float(compile_op(build_hamiltonian(p)).overlap(psi, psi).real)


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))

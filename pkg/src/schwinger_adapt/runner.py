"""Experiment orchestration: config expansion, batch runs, E0 cache and CSV tables."""
from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .adapt import DENSE_GS_QUBITS, AdaptConfig, Trajectory, run_adapt
from .model import PRESETS, ModelParams, build_hamiltonian
from .pools import POOL_IDS, TILED_IDS, Tile, select_tiles
from .state import GroundStateResult, ground_state

log = logging.getLogger(__name__)

LARGE_L = 8
CNOT_BUDGET = 1000
FEVAL_BUDGET = 100
DEPTH_CUTOFF = 1500

# option keys that map straight onto AdaptConfig fields
RUN_OPTIONS = (
    "epsilon",
    "tetris",
    "max_iterations",
    "cnot_budget",
    "feval_budget",
    "gtol",
    "exp_mode",
    "a",
    "reference",
    "track_fidelity",
    "workers",
)


class SpecError(ValueError):
    """Malformed experiment specification."""


@dataclass
class ExperimentSpec:
    pools: list[str]
    presets: list[str]
    L: list[int]
    output_dir: str = "runs"
    options: dict = field(default_factory=dict)
    pool_options: dict = field(default_factory=dict)
    tie_seed: int | None = None
    tiles: dict = field(default_factory=lambda: {"preset": None, "runs": 4, "seed": 0})
    allow_large: bool = False

    def __post_init__(self):
        if not self.pools or not self.presets or not self.L:
            raise SpecError("pools, presets and L must be non-empty")
        bad = [p for p in self.pools if p not in POOL_IDS]
        if bad:
            raise SpecError(f"unknown pools {bad}; expected some of {list(POOL_IDS)}")
        bad = [p for p in self.presets if p.upper() not in PRESETS]
        if bad:
            raise SpecError(f"unknown presets {bad}")
        self.presets = [p.upper() for p in self.presets]
        if any(int(L) < 1 for L in self.L):
            raise SpecError("L values must be positive")
        self.L = [int(L) for L in self.L]
        if not self.allow_large and max(self.L) >= LARGE_L:
            raise SpecError(f"L >= {LARGE_L} needs allow_large (runtime guard)")
        extra = set(self.options) - set(RUN_OPTIONS)
        if extra:
            raise SpecError(f"unknown run options {sorted(extra)}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        L = d.pop("L", None)
        if isinstance(L, dict):
            L = list(range(int(L["min"]), int(L["max"]) + 1))
        elif isinstance(L, int):
            L = [L]
        known = set(cls.__dataclass_fields__) - {"L"}
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown spec fields {sorted(extra)}")
        try:
            return cls(L=L or [], **d)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise SpecError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "pools": self.pools,
            "presets": self.presets,
            "L": self.L,
            "output_dir": self.output_dir,
            "options": self.options,
            "pool_options": self.pool_options,
            "tie_seed": self.tie_seed,
            "tiles": self.tiles,
            "allow_large": self.allow_large,
        }

    def expand(self) -> list[AdaptConfig]:
        out = []
        for pool_id, preset, L in itertools.product(self.pools, self.presets, self.L):
            opts = dict(self.pool_options)
            if pool_id[0] == "L" or pool_id in TILED_IDS:
                opts.pop("t_relax", None)
            if pool_id not in ("LQx", "Lxx"):
                opts.pop("z_surface_swap", None)
            if pool_id in TILED_IDS:
                opts = {}
            out.append(
                AdaptConfig(pool_id=pool_id, L=L, preset=preset, pool_options=opts, tie_seed=self.tie_seed, **self.options)
            )
        return out


def config_tag(cfg: AdaptConfig) -> str:
    digest = hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()[:10]
    return f"{cfg.pool_id}_{cfg.preset}_L{cfg.L}_{digest}"


# ground-state cache ----------------------------------------------------


class GroundStateCache:
    """Write-once cache of exact ground states keyed by (preset, a, L, method)."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def method_for(L: int) -> str:
        return "dense" if 2 * L <= DENSE_GS_QUBITS else "lanczos"

    def key(self, preset: str, a: float, L: int, method: str) -> str:
        return f"{preset}_a{a!r}_L{L}_{method}"

    def get(self, preset: str, L: int, a: float = 1.0, method: str | None = None) -> GroundStateResult:
        method = method or self.method_for(L)
        key = self.key(preset, a, L, method)
        meta, vec = self.root / f"{key}.json", self.root / f"{key}.npy"
        if meta.exists() and vec.exists():
            with open(meta) as fh:
                m = json.load(fh)
            return GroundStateResult(m["energy"], np.load(vec), m["residual"], m["method"], m.get("iterations", 0))
        p = ModelParams.preset(preset, L, a=a)
        gs = ground_state(build_hamiltonian(p), method)
        np.save(vec, gs.state)
        with open(meta, "w") as fh:
            json.dump(
                {"preset": preset, "a": a, "L": L, "method": gs.method, "energy": gs.energy, "residual": gs.residual, "iterations": gs.iterations},
                fh,
                indent=1,
                sort_keys=True,
            )
        return gs


# batch runs ------------------------------------------------------------


@dataclass
class RunReport:
    written: list[Path] = field(default_factory=list)
    skipped: list[Path] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _tiles_for(spec: ExperimentSpec, preset: str, cache: dict) -> list[Tile]:
    tp = spec.tiles.get("preset") or preset
    key = (tp, spec.tiles.get("runs", 4), spec.tiles.get("seed", 0))
    if key not in cache:
        cache[key] = select_tiles(tp, runs=key[1], seed=key[2])
    return cache[key]


def _job(args) -> tuple[str, str | None]:
    cfg_dict, gs_dir, out_path, tile_strings = args
    try:
        cfg = AdaptConfig.from_dict(cfg_dict)
        gs = GroundStateCache(gs_dir).get(cfg.preset, cfg.L, cfg.a)
        tiles = None
        if tile_strings is not None:
            from .pauli import PauliString

            tiles = [Tile(PauliString.from_label(s), tuple(pv)) for s, pv in tile_strings]
        traj = run_adapt(cfg, ground=gs, tiles=tiles)
        tmp = Path(out_path).with_suffix(".tmp")
        traj.save(tmp)
        os.replace(tmp, out_path)
        return out_path, None
    except Exception as exc:  # isolate per-run failures
        return out_path, f"{type(exc).__name__}: {exc}"


def run(spec: ExperimentSpec, jobs: int = 1, force: bool = False) -> RunReport:
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise SpecError(f"output directory {out} is not writable")
    with open(out / "spec.json", "w") as fh:
        json.dump(spec.to_dict(), fh, indent=1, sort_keys=True)
    gs_dir = out / "e0"
    cache = GroundStateCache(gs_dir)
    report = RunReport()
    tasks = []
    tile_cache: dict = {}
    for cfg in spec.expand():
        path = out / f"{config_tag(cfg)}.json"
        if path.exists() and not force:
            report.skipped.append(path)
            continue
        # serialise ground-state creation before fanning out
        cache.get(cfg.preset, cfg.L, cfg.a)
        tiles = None
        if cfg.pool_id in TILED_IDS:
            tiles = [(t.string.label, list(t.provenance)) for t in _tiles_for(spec, cfg.preset, tile_cache)]
        tasks.append((cfg.to_dict(), str(gs_dir), str(path), tiles))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]
    for path, err in results:
        if err is None:
            report.written.append(Path(path))
        else:
            log.error("run %s failed: %s", path, err)
            report.failures.append((path, err))
    return report


def load_trajectories(paths: Iterable[str | os.PathLike]) -> list[Trajectory]:
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files += sorted(f for f in p.glob("*.json") if f.name != "spec.json")
        else:
            files.append(p)
    out = []
    for f in files:
        with open(f) as fh:
            d = json.load(fh)
        if "metrics" in d:
            out.append(Trajectory.from_dict(d))
    return out


# tables ----------------------------------------------------------------

KEY_COLUMNS = ("pool_id", "preset", "L")

FIGURE_COLUMNS = {
    "fig3": ("iteration", "energy_density_error", "max_grad", "surface_flag", "n_selected"),
    "fig4": ("iteration", "energy_density_error", "max_grad", "charge_mean", "charge_var"),
    "fig5": ("iteration", "energy_density_error", "cnot_depth", "cnot_count", "rz_count"),
    "fig7a": ("budget", "cut_iteration", "energy_density_error", "cnot_depth", "fevals"),
    "fig7b": ("budget", "cut_iteration", "energy_density_error", "cnot_depth", "fevals"),
    "fig9": ("reference", "iteration", "delta_T", "t_even_selected", "energy_density_error"),
    "fig10": ("iteration", "energy_density_error", "max_grad", "surface_flag"),
    "fig11": ("z_surface_swap", "budget", "cut_iteration", "energy_density_error", "cnot_depth", "surface_flag"),
    "fig12": ("reference", "iteration", "energy_density_error", "infidelity", "reference_infidelity"),
}
FIGURE_CLASSES = tuple(FIGURE_COLUMNS)
CUT_METRIC = {"fig7a": ("cnot_depth", CNOT_BUDGET), "fig7b": ("fevals", FEVAL_BUDGET), "fig11": ("cnot_depth", DEPTH_CUTOFF)}


class MissingMetricError(KeyError):
    pass


def budget_cut(traj: Trajectory, metric: str, budget: float) -> int:
    """Index of the last record whose cumulative ``metric`` stays within ``budget``."""
    vals = traj.metric(metric)
    if any(v is None for v in vals):
        raise MissingMetricError(f"trajectory lacks metric {metric!r}")
    cut = None
    for k, v in enumerate(vals):
        if v <= budget:
            cut = k
        else:
            break
    if cut is None:
        raise ValueError(f"no record within {metric} <= {budget}")
    return cut


def _keys(traj: Trajectory) -> dict:
    c = traj.config
    return {"pool_id": c["pool_id"], "preset": c["preset"], "L": c["L"]}


def _value(traj: Trajectory, rec: dict, col: str):
    c = traj.config
    if col == "reference":
        return c.get("reference")
    if col == "z_surface_swap":
        return bool(c.get("pool_options", {}).get("z_surface_swap", False))
    if col == "surface_flag":
        return int(bool(rec.get("surface_selected")))
    v = rec.get(col)
    if v is None:
        raise MissingMetricError(f"{c['pool_id']} L={c['L']}: metric {col!r} was not recorded")
    return v


def table_rows(trajectories: Sequence[Trajectory], figure_class: str, budget: float | None = None) -> list[dict]:
    if figure_class not in FIGURE_COLUMNS:
        raise ValueError(f"unknown figure class {figure_class!r}; expected one of {FIGURE_CLASSES}")
    cols = FIGURE_COLUMNS[figure_class]
    rows = []
    for t in trajectories:
        if figure_class in CUT_METRIC:
            metric, default = CUT_METRIC[figure_class]
            b = default if budget is None else budget
            k = budget_cut(t, metric, b)
            rec = t.records[k]
            row = _keys(t)
            for col in cols:
                row[col] = b if col == "budget" else k if col == "cut_iteration" else _value(t, rec, col)
            rows.append(row)
            continue
        for rec in t.records:
            row = _keys(t)
            row.update({col: _value(t, rec, col) for col in cols})
            rows.append(row)
    return rows


def emit_tables(
    trajectories: Sequence[Trajectory], figure_class: str, out_dir: str | os.PathLike, budget: float | None = None
) -> Path:
    rows = table_rows(trajectories, figure_class, budget)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{figure_class}.csv"
    fields = list(KEY_COLUMNS) + list(FIGURE_COLUMNS[figure_class])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return path

"""Command-line entry point: ``schwinger-adapt {run,tables,verify,pool,exactdiag}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .pauli import CapacityError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(doc: dict, pairs: list[str]) -> dict:
    """``key=value`` or ``options.epsilon=1e-4`` style overrides (values parsed as JSON)."""
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep:
            raise UsageError(f"override {pair!r} is not key=value")
        target = doc
        parts = key.split(".")
        for p in parts[:-1]:
            target = target.setdefault(p, {})
            if not isinstance(target, dict):
                raise UsageError(f"override {pair!r} descends into a non-object")
        target[parts[-1]] = _parse_value(raw)
    return doc


def cmd_run(args) -> int:
    from .runner import ExperimentSpec, run

    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    doc = _apply_overrides(doc, args.set or [])
    if args.out:
        doc["output_dir"] = args.out
    spec = ExperimentSpec.from_dict(doc)
    report = run(spec, jobs=args.jobs, force=args.force)
    for p in report.written:
        print(f"wrote {p}")
    for p in report.skipped:
        print(f"kept {p}")
    for p, err in report.failures:
        print(f"FAILED {p}: {err}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_tables(args) -> int:
    from .runner import FIGURE_CLASSES, emit_tables, load_trajectories

    trajs = load_trajectories(args.inputs)
    if not trajs:
        raise UsageError("no trajectory files found")
    classes = FIGURE_CLASSES if args.figure == "all" else [args.figure]
    out = args.out or "tables"
    status = EXIT_OK
    for fc in classes:
        try:
            path = emit_tables(trajs, fc, out, args.budget)
            print(f"wrote {path}")
        except KeyError as exc:
            # missing metrics only matter when the class was asked for explicitly
            msg = exc.args[0] if exc.args else str(exc)
            if args.figure != "all":
                raise UsageError(msg) from exc
            print(f"skipped {fc}: {msg}", file=sys.stderr)
    return status


def cmd_verify(args) -> int:
    from .acceptance import CRITERIA, run_all
    from .pools import OperatorPool

    failed = False
    if args.pool_file:
        try:
            pool = OperatorPool.loads(Path(args.pool_file).read_text())
            print(f"[PASS] pool file {args.pool_file}: {pool.pool_id} L={pool.L} with {len(pool)} operators")
        except (OSError, ValueError, KeyError) as exc:
            print(f"[FAIL] pool file {args.pool_file}: serialization error: {exc}")
            failed = True
    numbers = args.criteria or sorted(CRITERIA)
    bad = [k for k in numbers if k not in CRITERIA]
    if bad:
        raise UsageError(f"unknown criteria {bad}")
    if not args.pool_file or args.criteria:
        results = run_all(numbers)
        failed |= not all(r.passed for r in results)
        print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_pool_dump(args) -> int:
    from .pools import TILED_IDS, build_pool, select_tiles

    try:
        options = json.loads(args.options) if args.options else None
    except json.JSONDecodeError as exc:
        raise UsageError(f"--options is not JSON: {exc}") from exc
    tiles = select_tiles(args.tile_preset) if args.pool_id in TILED_IDS else None
    pool = build_pool(args.pool_id, args.L, options, tiles)
    text = pool.dumps()
    if args.output:
        Path(args.output).write_text(text)
        print(f"wrote {args.output} ({len(pool)} operators)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_exactdiag(args) -> int:
    from .diagnostics import charge_moments
    from .model import PRESETS, ModelParams, build_hamiltonian, charge_operator
    from .runner import GroundStateCache
    from .state import ground_state

    preset = args.preset.upper()
    if preset not in PRESETS:
        raise UsageError(f"unknown preset {args.preset!r}; expected one of {sorted(PRESETS)}")
    p = ModelParams.preset(preset, args.L, a=args.a)
    method = args.method or GroundStateCache.method_for(args.L)
    if args.cache:
        gs = GroundStateCache(args.cache).get(preset, args.L, args.a, method)
    else:
        gs = ground_state(build_hamiltonian(p), method)
    q, var = charge_moments(gs.state, charge_operator(args.L))
    print(
        json.dumps(
            {"preset": preset, "L": args.L, "a": args.a, "method": gs.method, "energy": gs.energy,
             "energy_density": gs.energy / args.L, "residual": gs.residual, "charge": q, "charge_var": var},
            indent=1,
        )
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    from .pools import POOL_IDS
    from .runner import FIGURE_CLASSES

    ap = argparse.ArgumentParser(prog="schwinger-adapt", description="ADAPT-VQE operator-pool experiments for the lattice Schwinger model")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run every configuration in a JSON experiment spec")
    r.add_argument("config")
    r.add_argument("--out", help="override output_dir")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--force", action="store_true", help="recompute existing trajectories")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a spec field (JSON value)")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("tables", help="emit CSV tables from trajectory files")
    t.add_argument("inputs", nargs="+", help="trajectory files or directories")
    t.add_argument("--figure", default="all", choices=("all",) + FIGURE_CLASSES)
    t.add_argument("--budget", type=float, help="budget for cut classes (fig7a/fig7b/fig11)")
    t.add_argument("--out")
    t.set_defaults(func=cmd_tables)

    v = sub.add_parser("verify", help="run the acceptance criteria")
    v.add_argument("--criteria", type=int, nargs="*", help="subset of criterion numbers")
    v.add_argument("--pool-file", help="also check that a pool dump parses")
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("pool", help="pool utilities")
    psub = p.add_subparsers(dest="pool_verb", required=True)
    d = psub.add_parser("dump", help="write a pool in the text format")
    d.add_argument("pool_id", choices=POOL_IDS)
    d.add_argument("--L", type=int, required=True)
    d.add_argument("--options", help="pool options as JSON")
    d.add_argument("--tile-preset", default="C", help="preset used to harvest tiles")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_pool_dump)

    e = sub.add_parser("exactdiag", help="exact ground state of one model instance")
    e.add_argument("--preset", default="A")
    e.add_argument("--L", type=int, required=True)
    e.add_argument("--a", type=float, default=1.0)
    e.add_argument("--method", choices=("dense", "lanczos"))
    e.add_argument("--cache", help="ground-state cache directory")
    e.set_defaults(func=cmd_exactdiag)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # bad presets, pool ids, spec fields and similar input problems
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

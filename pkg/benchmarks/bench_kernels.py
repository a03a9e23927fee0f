"""Compare the Cython kernels with the numpy fallback.

Times Hamiltonian application, pool-gradient screening and single-string
rotations on the same operators and states, and checks both backends agree.

    python benchmarks/bench_kernels.py --L 4 5 6 --repeat 20
"""
import argparse
import time

import numpy as np

from schwinger_adapt.kernels import CompiledOperator, get_backend
from schwinger_adapt.model import ModelParams, build_hamiltonian
from schwinger_adapt.pools import build_topdown_pool


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench(L, repeat, kern):
    n = 2 * L
    rng = np.random.default_rng(0)
    psi = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    psi /= np.linalg.norm(psi)
    H = CompiledOperator(build_hamiltonian(ModelParams.preset("C", L)), kern)
    pool = [CompiledOperator(o.op, kern) for o in build_topdown_pool("xxx", L)]
    hpsi = H.apply(psi)
    out = np.empty_like(psi)
    rot = pool[0].rotate_terms()
    work = psi.copy()

    def screen():
        return [c.overlap(hpsi, psi) for c in pool]

    def rotate():
        for x, z, ph, w in rot:
            kern.rotate_string(work, x, z, ph, 0.1 * w)

    timings = {
        "apply_H": best_of(lambda: H.apply(psi, out=out), repeat),
        "screen_pool": best_of(screen, repeat),
        "rotate": best_of(rotate, repeat),
    }
    return timings, H.apply(psi), np.array(screen())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, nargs="+", default=[4, 5, 6])
    ap.add_argument("--repeat", type=int, default=10)
    args = ap.parse_args(argv)

    try:
        cy = get_backend("cython")
    except ImportError:
        print("compiled kernels not built; only the numpy fallback is available")
        cy = None
    py = get_backend("python")

    print(f"{'L':>3} {'kernel':<12} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for L in args.L:
        tp, hp, gp = bench(L, args.repeat, py)
        if cy is None:
            for k, v in tp.items():
                print(f"{L:>3} {k:<12} {1e3 * v:>10.3f} {'-':>10} {'-':>8}")
            continue
        tc, hc, gc = bench(L, args.repeat, cy)
        assert np.allclose(hp, hc, atol=1e-12), "backends disagree on H|psi>"
        assert np.allclose(gp, gc, atol=1e-12), "backends disagree on pool overlaps"
        for k in tp:
            print(f"{L:>3} {k:<12} {1e3 * tp[k]:>10.3f} {1e3 * tc[k]:>10.3f} {tp[k] / tc[k]:>7.1f}x")


if __name__ == "__main__":
    main()

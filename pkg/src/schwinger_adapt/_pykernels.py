"""Pure-numpy statevector kernels; same signatures as the compiled module."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=8)
def _indices(dim: int) -> np.ndarray:
    idx = np.arange(dim, dtype=np.uint64)
    idx.flags.writeable = False
    return idx


def _signs(idx: np.ndarray, z) -> np.ndarray:
    return 1.0 - 2.0 * (np.bitwise_count(idx & np.uint64(z)) & 1)


def _groups(xs: np.ndarray):
    start = 0
    nt = len(xs)
    while start < nt:
        stop = start
        while stop < nt and xs[stop] == xs[start]:
            stop += 1
        yield start, stop
        start = stop


def _group_diag(idx, zs, coeffs, g0, g1):
    d = np.zeros(len(idx), dtype=np.complex128)
    for k in range(g0, g1):
        d += coeffs[k] * _signs(idx, zs[k])
    return d


def apply_terms(psi, xs, zs, coeffs, out):
    idx = _indices(len(psi))
    for g0, g1 in _groups(xs):
        d = _group_diag(idx, zs, coeffs, g0, g1)
        x = np.uint64(xs[g0])
        # out[b ^ x] += d[b] psi[b]  <=>  out[c] += (d psi)[c ^ x]
        out += (d * psi)[idx ^ x] if x else d * psi


def overlap_terms(phi, psi, xs, zs, coeffs):
    idx = _indices(len(psi))
    acc = 0j
    for g0, g1 in _groups(xs):
        d = _group_diag(idx, zs, coeffs, g0, g1)
        x = np.uint64(xs[g0])
        acc += np.vdot(phi[idx ^ x] if x else phi, d * psi)
    return complex(acc)


def rotate_string(psi, x, z, phase, angle):
    c, s = np.cos(angle), np.sin(angle)
    idx = _indices(len(psi))
    ms = -1j * s * phase
    if x == 0:
        psi *= c + ms * _signs(idx, z)
        return
    src = idx ^ np.uint64(x)
    ppsi = _signs(src, z) * psi[src]
    psi *= c
    psi += ms * ppsi


def diagonal(n, zs, coeffs):
    idx = _indices(1 << n)
    return _group_diag(idx, zs, coeffs, 0, len(zs))

"""Kernel backend selection and operator compilation.

The compiled Cython module is used when it imports; otherwise the numpy
fallback.  Set ``SCHWINGER_ADAPT_KERNELS=python`` to force the fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _pykernels
from .pauli import PauliSum

_I_POW = np.array([1, 1j, -1, -1j])


def _load_backend() -> tuple[ModuleType, str]:
    choice = os.environ.get("SCHWINGER_ADAPT_KERNELS", "auto").lower()
    if choice != "python":
        try:
            from . import _ckernels
            return _ckernels, "cython"
        except ImportError:
            if choice == "cython":
                raise
    return _pykernels, "python"


backend, BACKEND = _load_backend()


def get_backend(name: str | None = None) -> ModuleType:
    if name is None:
        return backend
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


class CompiledOperator:
    """A :class:`PauliSum` laid out for fast statevector kernels.

    Z-only terms are collapsed into one cached diagonal; the rest are stored
    sorted by X mask with the ``i**y`` phase folded into the weights.
    """

    __slots__ = ("n", "op", "xs", "zs", "coeffs", "_diag_z", "_diag_c", "_diag", "kern")

    def __init__(self, op: PauliSum, kern: ModuleType | None = None):
        self.n = op.n
        self.op = op
        self.kern = kern or backend
        off, diag = [], []
        for (x, z), c in op.items():
            y = bin(x & z).count("1")
            (off if x else diag).append((x, z, c * _I_POW[y % 4]))
        off.sort(key=lambda t: (t[0], t[1]))
        self.xs = np.array([t[0] for t in off], dtype=np.uint64)
        self.zs = np.array([t[1] for t in off], dtype=np.uint64)
        self.coeffs = np.array([t[2] for t in off], dtype=np.complex128)
        self._diag_z = np.array([t[1] for t in diag], dtype=np.uint64)
        self._diag_c = np.array([t[2] for t in diag], dtype=np.complex128)
        self._diag = None

    @property
    def diag(self) -> np.ndarray | None:
        if self._diag is None and len(self._diag_z):
            self._diag = self.kern.diagonal(self.n, self._diag_z, self._diag_c)
        return self._diag

    def apply(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Return ``op @ psi`` (written into ``out`` when given)."""
        if out is None:
            out = np.zeros_like(psi)
        else:
            out[:] = 0
        d = self.diag
        if d is not None:
            np.multiply(d, psi, out=out)
        if len(self.xs):
            self.kern.apply_terms(psi, self.xs, self.zs, self.coeffs, out)
        return out

    def overlap(self, phi: np.ndarray, psi: np.ndarray) -> complex:
        """``<phi| op |psi>`` without materialising ``op @ psi``."""
        acc = 0j
        d = self.diag
        if d is not None:
            acc += np.vdot(phi, d * psi)
        if len(self.xs):
            acc += self.kern.overlap_terms(phi, psi, self.xs, self.zs, self.coeffs)
        return complex(acc)

    def rotate_terms(self):
        """``(x, z, phase, weight)`` per string for exact product exponentials.

        Weights are the real Pauli coefficients; phases are ``i**y``.
        """
        out = []
        for (x, z), c in sorted(self.op.items(), key=lambda kv: (kv[0][0] | kv[0][1], kv[0])):
            y = bin(x & z).count("1")
            out.append((int(x), int(z), complex(_I_POW[y % 4]), float(c.real)))
        return out

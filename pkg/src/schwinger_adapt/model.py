"""Lattice Schwinger model with staggered fermions after Jordan-Wigner.

Qubit ``j`` is staggered site ``j``; ``|1>`` means occupied, so ``Z|1> = -|1>``.
With this choice the staggered vacuum ``|1010...>`` carries zero charge and
mass energy ``-L * m0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .pauli import CapacityError, PauliString, PauliSum, basis_index

CP_QUBIT_LIMIT = 12


@dataclass(frozen=True)
class ModelParams:
    L: int
    m0: float
    g: float
    a: float = 1.0

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"need at least one physical site, got L={self.L}")
        if self.a <= 0:
            raise ValueError(f"lattice spacing must be positive, got a={self.a}")

    @property
    def n(self) -> int:
        return 2 * self.L

    @classmethod
    def preset(cls, label: str, L: int, a: float = 1.0) -> "ModelParams":
        m0, g = PRESETS[label.upper()]
        return cls(L=L, m0=m0, g=g, a=a)


# correlation lengths grow A < B < C
PRESETS: dict[str, tuple[float, float]] = {
    "A": (0.5, 0.3),
    "B": (0.1, 0.8),
    "C": (0.1, 0.3),
}


def _z(n: int, *qubits: int) -> PauliString:
    return PauliString.from_sparse(n, {q: "Z" for q in qubits})


def hopping_term(p: ModelParams) -> PauliSum:
    n = p.n
    items = []
    for j in range(n - 1):
        items.append((1 / (4 * p.a), PauliString.from_sparse(n, {j: "X", j + 1: "X"})))
        items.append((1 / (4 * p.a), PauliString.from_sparse(n, {j: "Y", j + 1: "Y"})))
    return PauliSum.from_terms(n, items)


def mass_term(p: ModelParams) -> PauliSum:
    n = p.n
    return PauliSum.from_terms(n, [(p.m0 / 2 * (-1) ** j, _z(n, j)) for j in range(n)])


def gauge_term(p: ModelParams) -> PauliSum:
    """``(a g^2 / 8) sum_{j<2L-1} (sum_{k<=j} Z_k + (-1)^k)^2``, fully expanded."""
    n = p.n
    total = PauliSum.zero(n)
    field = PauliSum.zero(n)
    for j in range(n - 1):
        field = field + PauliSum.single(_z(n, j)) + (-1) ** j
        total = total + field * field
    return total * (p.a * p.g**2 / 8)


def build_hamiltonian(p: ModelParams) -> PauliSum:
    return (hopping_term(p) + mass_term(p) + gauge_term(p)).real()


def charge_operator(L: int) -> PauliSum:
    """Staggered charge ``Q = 1/2 sum_k (Z_k + (-1)^k)``."""
    n = 2 * L
    q = PauliSum.zero(n)
    for k in range(n):
        q = q + PauliSum.single(_z(n, k), 0.5) + 0.5 * (-1) ** k
    return q


def vacuum_bits(L: int) -> str:
    return "10" * L


def flipped_bits(L: int) -> str:
    """Vacuum with qubits 3 and 4 exchanged (``10101010 -> 10110010`` at L=4)."""
    if L < 3:
        raise ValueError("the contaminated reference needs L >= 3")
    bits = list(vacuum_bits(L))
    bits[3], bits[4] = bits[4], bits[3]
    return "".join(bits)


REFERENCE_KINDS = ("staggered_vacuum", "trs_breaking_psi1", "trs_preserving_psi2")


def reference_state(L: int, kind: str = "staggered_vacuum") -> np.ndarray:
    n = 2 * L
    psi = np.zeros(1 << n, dtype=np.complex128)
    vac = basis_index(vacuum_bits(L))
    if kind == "staggered_vacuum":
        psi[vac] = 1.0
        return psi
    if kind not in REFERENCE_KINDS:
        raise ValueError(f"unknown reference kind {kind!r}; expected one of {REFERENCE_KINDS}")
    flip = basis_index(flipped_bits(L))
    psi[vac] = 1 / np.sqrt(2)
    psi[flip] = (-1j if kind == "trs_breaking_psi1" else -1.0) / np.sqrt(2)
    return psi


@lru_cache(maxsize=8)
def cp_permutation(L: int) -> np.ndarray:
    """Index map of CP: site reflection ``j -> 2L-1-j`` followed by X on every qubit."""
    n = 2 * L
    full = (1 << n) - 1
    idx = np.arange(1 << n)
    refl = np.zeros_like(idx)
    for j in range(n):
        refl |= ((idx >> j) & 1) << (n - 1 - j)
    perm = refl ^ full
    perm.flags.writeable = False
    return perm


# global sign of CP on the staggered vacuum under the qubit-level definition
CP_VACUUM_SIGN = 1


def cp_unitary(L: int) -> np.ndarray:
    """Dense CP permutation matrix, ``U[perm[b], b] = 1`` (oracle use only)."""
    if 2 * L > CP_QUBIT_LIMIT:
        raise CapacityError(f"CP unitary for L={L} exceeds the dense guard")
    perm = cp_permutation(L)
    dim = len(perm)
    u = np.zeros((dim, dim))
    u[perm, np.arange(dim)] = 1.0
    return u


def charge_sector_projector(L: int, charge: int = 0) -> np.ndarray:
    """Diagonal 0/1 mask of basis states with the given staggered charge."""
    n = 2 * L
    idx = np.arange(1 << n, dtype=np.uint64)
    occupied = np.bitwise_count(idx).astype(int)
    # Q = 1/2 sum Z_k = (n - 2 * occupied) / 2
    return ((n - 2 * occupied) // 2 == charge).astype(float)


def hamiltonian_dump(p: ModelParams) -> str:
    h = build_hamiltonian(p)
    return f"# hamiltonian L={p.L} m0={p.m0} g={p.g} a={p.a}\n" + h.dumps() + "\n"


def _reverse_bits(v: int, n: int) -> int:
    out = 0
    for j in range(n):
        if (v >> j) & 1:
            out |= 1 << (n - 1 - j)
    return out


def cp_conjugate(op: PauliSum) -> PauliSum:
    """Symbolic ``CP op CP^dagger``: reflect qubits, then conjugate by X on every qubit."""
    n = op.n
    acc = {}
    for (x, z), c in op.items():
        rx, rz = _reverse_bits(x, n), _reverse_bits(z, n)
        # X anticommutes with Y and Z, i.e. with every set z bit
        acc[(rx, rz)] = -c if bin(rz).count("1") % 2 else c
    return PauliSum(n, acc)
